// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLOCK_OVERHEAD_HPP
#define FLOCK_OVERHEAD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <flock/error.hpp>
#include <flock/feature.hpp>
#include <flock/model.hpp>
#include <flock/random.hpp>

/**
 * @file overhead.hpp
 *
 * @brief IP cost of an adversary that mimics the bracket model instead of botting in lockstep.
 *
 * A lockstep provider holds n bots for the whole broadcast: peak concurrency n.
 * A mimicking provider draws views from the bracket model until the
 * time-averaged concurrency (the sum of stay fractions) reaches n, and must
 * provision for the resulting peak. With a per-IP limit of k concurrent views
 * each regime needs ceil(peak / k) addresses.
 *
 * A mimicked view of cell (x, y) starts at (x-1)/H and stays y/H, the corner
 * of the cell with the earliest start and longest stay; the full-duration
 * cell therefore reproduces a lockstep view exactly.
 */

namespace flock {

struct Interval {
    double start = 0.0;
    double end = 0.0;
};

/// Maximum number of simultaneously open half-open intervals [start, end).
inline std::size_t peak_concurrency(std::span<const Interval> intervals) {
    std::vector<std::pair<double, int>> events;
    events.reserve(intervals.size() * 2);
    for (const Interval& iv : intervals) {
        if (iv.end > iv.start) {
            events.emplace_back(iv.start, +1);
            events.emplace_back(iv.end, -1);
        }
    }
    // At equal times, departures sort before arrivals.
    std::sort(events.begin(), events.end());
    long open = 0;
    long peak = 0;
    for (const auto& [t, delta] : events) {
        open += delta;
        peak = std::max(peak, open);
    }
    return static_cast<std::size_t>(peak);
}

inline Interval mimic_interval(Cell c, int H) {
    const double start = static_cast<double>(c.x - 1) / H;
    const double stay = static_cast<double>(c.y) / H;
    return Interval{start, std::min(start + stay, 1.0)};
}

struct OverheadSpec {
    std::size_t rate_limit_k = 1;
    std::size_t target_bots_n = 100;
    std::map<int, double> bracket_frequencies;
    std::size_t trials = 10;
    std::uint64_t seed = 0;

    void validate() const {
        if (rate_limit_k < 1 || target_bots_n < 1 || trials < 1) {
            throw ConfigError("overhead parameters must be positive");
        }
        double sum = 0.0;
        for (const auto& [bracket, f] : bracket_frequencies) {
            if (!(f >= 0.0)) {
                throw ConfigError("bracket frequencies must be non-negative");
            }
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError("bracket frequencies must sum to one");
        }
    }
};

struct OverheadResult {
    /// Frequency-weighted mean relative overhead, signed.
    double overhead = 0.0;
    std::map<int, double> per_bracket;
    /// Brackets dropped for lack of a model; remaining frequencies are renormalized.
    std::size_t excluded_brackets = 0;
};

inline std::size_t ips_needed(std::size_t concurrency, std::size_t k) { return (concurrency + k - 1) / k; }

/// Relative IP overhead of one mimicking trial against one model.
inline double mimic_trial_overhead(const TriDistribution& model, std::size_t n, std::size_t k,
                                   std::mt19937_64& rng) {
    const auto masses = model.masses();
    std::discrete_distribution<std::size_t> pick(masses.begin(), masses.end());
    std::vector<Interval> views;
    double coverage = 0.0;
    const double target = static_cast<double>(n);
    while (coverage < target) {
        const Interval iv = mimic_interval(cell_at(pick(rng), model.bins()), model.bins());
        coverage += iv.end - iv.start;
        views.push_back(iv);
    }
    const double mimic = static_cast<double>(ips_needed(peak_concurrency(views), k));
    const double lockstep = static_cast<double>(ips_needed(n, k));
    return (mimic - lockstep) / lockstep;
}

inline OverheadResult estimate_ip_overhead(const OverheadSpec& spec,
                                           const std::map<int, TriDistribution>& models) {
    spec.validate();
    double kept_mass = 0.0;
    OverheadResult result;
    for (const auto& [bracket, f] : spec.bracket_frequencies) {
        if (models.count(bracket) != 0) {
            kept_mass += f;
        } else {
            ++result.excluded_brackets;
        }
    }
    if (kept_mass <= 0.0) {
        throw EmptyInputError("no bracket with both a model and positive frequency");
    }
    for (const auto& [bracket, f] : spec.bracket_frequencies) {
        auto it = models.find(bracket);
        if (it == models.end()) {
            continue;
        }
        std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(bracket)));
        double sum = 0.0;
        for (std::size_t t = 0; t < spec.trials; ++t) {
            sum += mimic_trial_overhead(it->second, spec.target_bots_n, spec.rate_limit_k, rng);
        }
        const double mean = sum / static_cast<double>(spec.trials);
        result.per_bracket[bracket] = mean;
        result.overhead += (f / kept_mass) * mean;
    }
    return result;
}

}  // namespace flock

#endif  // FLOCK_OVERHEAD_HPP

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

#ifndef FLOCK_SYNTH_HPP
#define FLOCK_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include <flock/error.hpp>
#include <flock/feature.hpp>
#include <flock/ingest.hpp>
#include <flock/model.hpp>
#include <flock/random.hpp>

/**
 * @file synth.hpp
 *
 * @brief Synthetic authentic traffic and lockstep viewbot attacks with ground truth.
 */

namespace flock {

/**
 * Stand-in for a real bracket model: mass decays geometrically in both the
 * start bin and the stay bin, so most views start early and leave early.
 *
 * The decay rates are per unit of fractional time and therefore independent
 * of H; cell (x, y) gets weight exp(-start_decay (x - 0.5)/H - stay_decay (y - 0.5)/H).
 */
inline TriDistribution default_bracket_prior(int H, double start_decay = 3.25,
                                             double stay_decay = 4.5) {
    std::vector<double> w(cell_count(H));
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const Cell c = cell_at(i, H);
        w[i] = std::exp(-start_decay * (c.x - 0.5) / H - stay_decay * (c.y - 0.5) / H);
        total += w[i];
    }
    for (double& v : w) {
        v /= total;
    }
    return TriDistribution(H, std::move(w), true);
}

namespace detail {

inline constexpr double kMinStay = 1e-9;

}  // namespace detail

struct FracPoint {
    double start = 0.0;
    double stay = 0.0;
};

/// Euclidean projection into {start in [0,1), stay in (0,1], start + stay <= 1}.
inline FracPoint project_to_triangle(double start, double stay) {
    constexpr double eps = detail::kMinStay;
    start = std::clamp(start, 0.0, 1.0 - eps);
    stay = std::clamp(stay, eps, 1.0);
    if (start + stay > 1.0) {
        const double excess = 0.5 * (start + stay - 1.0);
        start -= excess;
        stay -= excess;
        if (start < 0.0) {
            start = 0.0;
            stay = 1.0;
        } else if (stay < eps) {
            stay = eps;
            start = 1.0 - eps;
        }
    }
    stay = std::min(stay, 1.0 - start);
    return FracPoint{start, stay};
}

/// Uniform point inside a cell, restricted to the feasible part of diagonal cells.
inline FracPoint uniform_in_cell(Cell c, int H, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double h = 1.0 / H;
    for (;;) {
        const double start = (c.x - 1 + u(rng)) * h;
        // The last stay bin is closed at 1, the others half-open.
        const double stay = (c.y - 1 + (1.0 - u(rng))) * h;
        if (start + stay <= 1.0 && start < 1.0) {
            return FracPoint{start, stay};
        }
    }
}

/**
 * Draws authentic views: a cell from the bracket multinomial, a uniform point
 * inside that cell, per-coordinate Gaussian jitter, then projection back into
 * the feasible triangle.
 */
inline std::vector<ViewFeature> sample_authentic_views(const TriDistribution& bracket, std::size_t n,
                                                       double jitter_sigma, std::uint64_t seed,
                                                       std::string_view id_prefix = "auth-") {
    if (!(jitter_sigma >= 0.0)) {
        throw ConfigError("jitter sigma must be non-negative");
    }
    const int H = bracket.bins();
    std::mt19937_64 rng(seed);
    const auto masses = bracket.masses();
    std::discrete_distribution<std::size_t> pick(masses.begin(), masses.end());
    std::normal_distribution<double> noise(0.0, jitter_sigma > 0.0 ? jitter_sigma : 1.0);
    std::vector<ViewFeature> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Cell c = cell_at(pick(rng), H);
        FracPoint p = uniform_in_cell(c, H, rng);
        if (jitter_sigma > 0.0) {
            p = project_to_triangle(p.start + noise(rng), p.stay + noise(rng));
        }
        out.push_back(make_feature(fmt::format("{}{}", id_prefix, i), p.start, p.stay, H));
    }
    return out;
}

enum class GapFamily { uniform, gaussian, exponential, lognormal };

inline constexpr GapFamily kAllGapFamilies[] = {GapFamily::uniform, GapFamily::gaussian,
                                                GapFamily::exponential, GapFamily::lognormal};

inline std::string_view to_string(GapFamily f) {
    switch (f) {
        case GapFamily::uniform:
            return "uniform";
        case GapFamily::gaussian:
            return "gaussian";
        case GapFamily::exponential:
            return "exponential";
        case GapFamily::lognormal:
            return "lognormal";
    }
    return "unknown";
}

inline GapFamily parse_gap_family(std::string_view name) {
    for (GapFamily f : kAllGapFamilies) {
        if (to_string(f) == name) {
            return f;
        }
    }
    throw ConfigError("unknown distribution family '" + std::string(name) + "'");
}

/**
 * Distribution of gaps between successive bot arrivals (or terminations).
 *
 * Gaps are rescaled into the attack window afterwards, so only the shape
 * matters. For uniform the gap is drawn on (0, b]; gaussian is N(a, b^2)
 * truncated to positive values; exponential has rate a; lognormal has log-mean
 * a and log-sd b.
 */
struct GapDistribution {
    GapFamily family = GapFamily::uniform;
    double a = 0.0;
    double b = 1.0;

    static GapDistribution defaults(GapFamily f) {
        switch (f) {
            case GapFamily::uniform:
                return {f, 0.0, 1.0};
            case GapFamily::gaussian:
                return {f, 1.0, 0.25};
            case GapFamily::exponential:
                return {f, 1.0, 0.0};
            case GapFamily::lognormal:
                return {f, 0.0, 0.5};
        }
        return {};
    }

    void validate() const {
        const bool ok = (family == GapFamily::uniform && b > 0.0) ||
                        (family == GapFamily::gaussian && b > 0.0) ||
                        (family == GapFamily::exponential && a > 0.0) ||
                        (family == GapFamily::lognormal && b > 0.0);
        if (!ok) {
            throw ConfigError("gap distribution parameters must be positive");
        }
    }

    double draw(std::mt19937_64& rng) const {
        switch (family) {
            case GapFamily::uniform:
                return b * (1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng));
            case GapFamily::gaussian: {
                std::normal_distribution<double> d(a, b);
                for (;;) {
                    if (const double x = d(rng); x > 0.0) {
                        return x;
                    }
                }
            }
            case GapFamily::exponential:
                return std::exponential_distribution<double>(a)(rng);
            case GapFamily::lognormal:
                return std::lognormal_distribution<double>(a, b)(rng);
        }
        return 1.0;
    }
};

struct AttackSpec {
    std::size_t n_authentic = 100;
    /// Bots per authentic view.
    double bot_ratio = 1.0;
    GapDistribution iat = GapDistribution::defaults(GapFamily::uniform);
    GapDistribution itt = GapDistribution::defaults(GapFamily::uniform);
    /// Width of the delivery window and of the termination window, as a fraction of the broadcast.
    double delta = 0.1;
    std::uint64_t seed = 0;

    std::size_t bot_count() const {
        return static_cast<std::size_t>(std::llround(static_cast<double>(n_authentic) * bot_ratio));
    }

    void validate() const {
        if (!(delta > 0.0 && delta <= 1.0)) {
            throw ConfigError("attack scale must lie in (0, 1]");
        }
        if (!(bot_ratio > 0.0)) {
            throw ConfigError("bot ratio must be positive");
        }
        if (bot_count() < 1) {
            throw ConfigError("attack has no bots");
        }
        iat.validate();
        itt.validate();
    }
};

inline constexpr int kAttackPlacementRetries = 10000;

/**
 * Lockstep attack: the first bot is uniform over the feasible triangle, later
 * bots start within `delta` after it (cumulative IAT draws rescaled to the
 * window) and end within a separate `delta` window starting at the first
 * bot's end (cumulative ITT draws). The i-th arrival leaves with the i-th
 * termination. The two windows never overlap.
 */
inline std::vector<ViewFeature> generate_attack(const AttackSpec& spec, int H,
                                                std::string_view id_prefix = "bot-") {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double delta = spec.delta;

    double s0 = 0.0;
    double e0 = 0.0;
    bool placed = false;
    for (int attempt = 0; attempt < kAttackPlacementRetries && !placed; ++attempt) {
        const double start = u(rng);
        const double stay = 1.0 - u(rng);
        if (start + stay > 1.0) {
            continue;
        }
        if (stay >= delta && start + stay + delta <= 1.0) {
            s0 = start;
            e0 = start + stay;
            placed = true;
        }
    }
    if (!placed) {
        throw InfeasibleError("attack windows do not fit inside the broadcast");
    }

    const std::size_t n = spec.bot_count();
    auto offsets = [&](const GapDistribution& gaps) {
        std::vector<double> cum(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) {
            cum[i] = cum[i - 1] + gaps.draw(rng);
        }
        // The last bot lands exactly on the far edge of the window.
        const double span = n > 1 ? cum[n - 1] : 1.0;
        for (double& c : cum) {
            c = delta * c / span;
        }
        return cum;
    };
    const auto starts = offsets(spec.iat);
    const auto ends = offsets(spec.itt);

    std::vector<ViewFeature> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double start = s0 + starts[i];
        const double end = std::min(e0 + ends[i], 1.0);
        const FracPoint p = project_to_triangle(start, end - start);
        out.push_back(make_feature(fmt::format("{}{}", id_prefix, i), p.start, p.stay, H));
    }
    return out;
}

enum class Label { authentic, botted };

struct LabeledWorkload {
    std::vector<ViewFeature> features;
    std::map<std::string, Label> labels;

    std::size_t botted_count() const {
        return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](const auto& kv) {
            return kv.second == Label::botted;
        }));
    }
};

/// One botted broadcast: authentic views from `bracket` followed by the attack's bots.
inline LabeledWorkload make_botted_broadcast(const TriDistribution& bracket, const AttackSpec& spec,
                                             double jitter_sigma) {
    LabeledWorkload w;
    w.features = sample_authentic_views(bracket, spec.n_authentic, jitter_sigma,
                                        mix_seed(spec.seed, 1), "auth-");
    for (const auto& f : w.features) {
        w.labels.emplace(f.view_id, Label::authentic);
    }
    AttackSpec attack = spec;
    attack.seed = mix_seed(spec.seed, 2);
    for (auto& f : generate_attack(attack, bracket.bins(), "bot-")) {
        w.labels.emplace(f.view_id, Label::botted);
        w.features.push_back(std::move(f));
    }
    return w;
}

struct DetectionScore {
    double precision = 1.0;
    double recall = 1.0;
};

/**
 * Precision and recall of a predicted set of botted views.
 *
 * Precision is 1 when nothing is predicted; recall is 1 when nothing is botted.
 */
inline DetectionScore evaluate_detection(const LabeledWorkload& truth,
                                         const std::set<std::string>& predicted) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const std::string& id : predicted) {
        auto it = truth.labels.find(id);
        if (it == truth.labels.end()) {
            throw Error("predicted view '" + id + "' is not in the labeled workload");
        }
        (it->second == Label::botted ? tp : fp) += 1;
    }
    const std::size_t botted = truth.botted_count();
    DetectionScore s;
    s.precision = predicted.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    s.recall = botted == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(botted);
    return s;
}

}  // namespace flock

#endif  // FLOCK_SYNTH_HPP

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

#ifndef FLOCK_PRUNE_HPP
#define FLOCK_PRUNE_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <flock/cluster.hpp>
#include <flock/error.hpp>
#include <flock/feature.hpp>
#include <flock/model.hpp>

/**
 * @file prune.hpp
 *
 * @brief Greedy removal of lockstep instances that inflate a broadcast's deviance.
 *
 * Every heuristic starts from the full broadcast and only removes an instance
 * when doing so lowers D_KL(broadcast || bracket) by more than `tolerance`.
 * The last remaining instance is never removed.
 */

namespace flock {

enum class Heuristic { topmost, iterative, stepwise };

inline std::string_view to_string(Heuristic h) {
    switch (h) {
        case Heuristic::topmost:
            return "topmost";
        case Heuristic::iterative:
            return "iterative";
        case Heuristic::stepwise:
            return "stepwise";
    }
    return "unknown";
}

inline Heuristic parse_heuristic(std::string_view name) {
    if (name == "topmost") {
        return Heuristic::topmost;
    }
    if (name == "iterative") {
        return Heuristic::iterative;
    }
    if (name == "stepwise") {
        return Heuristic::stepwise;
    }
    throw ConfigError("unknown heuristic '" + std::string(name) + "'");
}

inline constexpr double kDefaultPruneTolerance = 1e-9;
inline constexpr int kDefaultMaxIterations = 10;

/// Per-instance cell counts of one broadcast, ready for pruning.
struct PruneProblem {
    std::vector<int> instance_ids;
    std::vector<TriHistogram> counts;
    TriHistogram total;

    std::size_t size() const { return counts.size(); }
};

inline PruneProblem make_prune_problem(const Partition& partition,
                                       std::span<const ViewFeature> features, int H) {
    PruneProblem problem;
    problem.total = TriHistogram(H);
    for (const Instance& inst : partition.instances) {
        if (inst.members.empty()) {
            throw InfeasibleError("instance without members");
        }
        TriHistogram h(H);
        for (std::size_t m : inst.members) {
            h.add(features[m].bin);
        }
        problem.total += h;
        problem.instance_ids.push_back(inst.instance_id);
        problem.counts.push_back(std::move(h));
    }
    return problem;
}

/// D_KL of (current - removed), normalized, from the bracket; the difference is not materialized.
inline double kl_after_removal(const TriHistogram& current, const TriHistogram& removed,
                               const TriDistribution& bracket) {
    if (removed.total() >= current.total()) {
        throw InfeasibleError("removal would leave the broadcast without views");
    }
    const double n = static_cast<double>(current.total() - removed.total());
    double sum = 0.0;
    for (std::size_t i = 0; i < current.size(); ++i) {
        const std::uint64_t c = current[i] - removed[i];
        if (c != 0) {
            sum += detail::kl_term(static_cast<double>(c) / n, bracket[i]);
        }
    }
    return sum < 0.0 ? 0.0 : sum;
}

/**
 * D_KL(current || bracket) - D_KL(current minus instance || bracket).
 *
 * Positive when removing the instance brings the broadcast closer to its bracket.
 */
inline double deviance_reduction(const TriHistogram& current, const TriHistogram& instance,
                                 const TriDistribution& bracket) {
    return kl_divergence(current, bracket) - kl_after_removal(current, instance, bracket);
}

struct PruneOptions {
    double tolerance = kDefaultPruneTolerance;
    int max_iterations = kDefaultMaxIterations;
    /// Zero means one step per instance.
    std::size_t max_steps = 0;
};

struct PruneOutcome {
    std::vector<int> kept_instances;
    /// In the order they were removed.
    std::vector<int> pruned_instances;
    double original_deviance_bits = 0.0;
    double final_deviance_bits = 0.0;
    int iterations = 0;
    int steps = 0;
    /// Number of candidate removals scored.
    std::size_t evaluations = 0;
    std::vector<std::string> botted_view_ids;
};

namespace detail {

/// Mutable pruning state: which instances remain and their pooled counts.
class PruneState {
public:
    PruneState(const PruneProblem& problem, const TriDistribution& bracket)
        : problem_(problem), bracket_(bracket), current_(problem.total),
          alive_(problem.size(), true), remaining_(problem.size()) {
        if (problem.size() == 0) {
            throw InfeasibleError("partition has no instances");
        }
        deviance_ = kl_divergence(current_, bracket_);
        original_ = deviance_;
    }

    double deviance() const { return deviance_; }
    std::size_t remaining() const { return remaining_; }
    bool alive(std::size_t i) const { return alive_[i]; }

    /// Reduction from removing instance i now, or nullopt if it is the last one.
    std::optional<double> reduction(std::size_t i) {
        if (remaining_ < 2 || !alive_[i]) {
            return std::nullopt;
        }
        ++evaluations_;
        return deviance_ - kl_after_removal(current_, problem_.counts[i], bracket_);
    }

    void remove(std::size_t i) {
        current_ -= problem_.counts[i];
        alive_[i] = false;
        --remaining_;
        pruned_.push_back(problem_.instance_ids[i]);
        deviance_ = kl_divergence(current_, bracket_);
    }

    /// Alive instances ranked by reduction, largest first; ties keep partition order.
    std::vector<std::size_t> ranking() {
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < alive_.size(); ++i) {
            if (auto r = reduction(i)) {
                scored.emplace_back(*r, i);
            }
        }
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<std::size_t> order;
        order.reserve(scored.size());
        for (const auto& s : scored) {
            order.push_back(s.second);
        }
        return order;
    }

    PruneOutcome finish(int iterations) const {
        PruneOutcome out;
        for (std::size_t i = 0; i < alive_.size(); ++i) {
            if (alive_[i]) {
                out.kept_instances.push_back(problem_.instance_ids[i]);
            }
        }
        out.pruned_instances = pruned_;
        out.original_deviance_bits = original_;
        out.final_deviance_bits = pruned_.empty() ? original_ : deviance_;
        out.iterations = iterations;
        out.steps = static_cast<int>(pruned_.size());
        out.evaluations = evaluations_;
        return out;
    }

private:
    const PruneProblem& problem_;
    const TriDistribution& bracket_;
    TriHistogram current_;
    std::vector<bool> alive_;
    std::size_t remaining_;
    double deviance_ = 0.0;
    double original_ = 0.0;
    std::vector<int> pruned_;
    std::size_t evaluations_ = 0;
};

}  // namespace detail

/// Scores every single removal once and takes the best one if it helps.
inline PruneOutcome prune_topmost(const PruneProblem& problem, const TriDistribution& bracket,
                                  const PruneOptions& opts = {}) {
    detail::PruneState state(problem, bracket);
    std::optional<std::size_t> best;
    double best_reduction = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < problem.size(); ++i) {
        if (auto r = state.reduction(i); r && *r > best_reduction) {
            best_reduction = *r;
            best = i;
        }
    }
    if (best && best_reduction > opts.tolerance) {
        state.remove(*best);
    }
    return state.finish(1);
}

/**
 * Ranks remaining instances once per iteration, then sweeps that fixed order,
 * removing each instance whose reduction against the current state exceeds
 * the tolerance. Stops after an iteration that removes nothing.
 */
inline PruneOutcome prune_iterative(const PruneProblem& problem, const TriDistribution& bracket,
                                    const PruneOptions& opts = {}) {
    detail::PruneState state(problem, bracket);
    int iterations = 0;
    while (iterations < opts.max_iterations && state.remaining() > 1) {
        ++iterations;
        bool removed_any = false;
        for (std::size_t i : state.ranking()) {
            if (auto r = state.reduction(i); r && *r > opts.tolerance) {
                state.remove(i);
                removed_any = true;
            }
        }
        if (!removed_any) {
            break;
        }
    }
    return state.finish(iterations);
}

/// Re-ranks after every removal and always takes the current best instance.
inline PruneOutcome prune_stepwise(const PruneProblem& problem, const TriDistribution& bracket,
                                   const PruneOptions& opts = {}) {
    detail::PruneState state(problem, bracket);
    const std::size_t max_steps = opts.max_steps == 0 ? problem.size() : opts.max_steps;
    int rounds = 0;
    std::size_t steps = 0;
    while (steps < max_steps && state.remaining() > 1) {
        ++rounds;
        std::optional<std::size_t> best;
        double best_reduction = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < problem.size(); ++i) {
            if (auto r = state.reduction(i); r && *r > best_reduction) {
                best_reduction = *r;
                best = i;
            }
        }
        if (!best || best_reduction <= opts.tolerance) {
            break;
        }
        state.remove(*best);
        ++steps;
    }
    return state.finish(rounds);
}

inline PruneOutcome run_heuristic(Heuristic h, const PruneProblem& problem,
                                  const TriDistribution& bracket, const PruneOptions& opts = {}) {
    switch (h) {
        case Heuristic::topmost:
            return prune_topmost(problem, bracket, opts);
        case Heuristic::iterative:
            return prune_iterative(problem, bracket, opts);
        case Heuristic::stepwise:
            return prune_stepwise(problem, bracket, opts);
    }
    throw ConfigError("unknown heuristic");
}

/// Partition + prune in one call, with the pruned views' ids filled in.
inline PruneOutcome prune_broadcast(const Partition& partition, std::span<const ViewFeature> features,
                                    const TriDistribution& bracket, Heuristic h,
                                    const PruneOptions& opts = {}) {
    const PruneProblem problem = make_prune_problem(partition, features, bracket.bins());
    PruneOutcome out = run_heuristic(h, problem, bracket, opts);
    std::vector<std::size_t> botted;
    for (int id : out.pruned_instances) {
        for (const Instance& inst : partition.instances) {
            if (inst.instance_id == id) {
                botted.insert(botted.end(), inst.members.begin(), inst.members.end());
            }
        }
    }
    std::sort(botted.begin(), botted.end());
    out.botted_view_ids.reserve(botted.size());
    for (std::size_t m : botted) {
        out.botted_view_ids.push_back(features[m].view_id);
    }
    return out;
}

inline constexpr std::size_t kMaxOracleInstances = 20;

struct OracleResult {
    std::vector<int> kept_instances;
    double deviance_bits = 0.0;
};

/**
 * Exhaustive minimum over every non-empty kept subset of instances.
 *
 * Ties within 1e-12 bits prefer keeping more views, then the lexicographically
 * smaller list of kept instance ids. Subsets are visited in Gray-code order so
 * each step adds or drops one instance.
 */
inline OracleResult exact_prune_oracle(const PruneProblem& problem, const TriDistribution& bracket) {
    const std::size_t n = problem.size();
    if (n == 0) {
        throw InfeasibleError("partition has no instances");
    }
    if (n > kMaxOracleInstances) {
        throw InfeasibleError("too many instances for exhaustive search");
    }
    auto kept_ids = [&](std::uint32_t mask) {
        std::vector<int> ids;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                ids.push_back(problem.instance_ids[i]);
            }
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    };

    TriHistogram current(problem.total.bins());
    std::uint32_t mask = 0;
    std::uint32_t best_mask = 0;
    double best = std::numeric_limits<double>::infinity();
    const std::uint32_t limit = 1u << n;
    for (std::uint32_t g = 1; g < limit; ++g) {
        const std::uint32_t gray = g ^ (g >> 1);
        const std::uint32_t flipped = gray ^ mask;
        const auto bit = static_cast<std::size_t>(std::countr_zero(flipped));
        if (gray & flipped) {
            current += problem.counts[bit];
        } else {
            current -= problem.counts[bit];
        }
        mask = gray;
        const double d = kl_divergence(current, bracket);
        bool better = d < best - 1e-12;
        if (!better && d <= best + 1e-12) {
            // Tie: prefer more views, then lexicographic ids.
            TriHistogram incumbent(problem.total.bins());
            for (std::size_t i = 0; i < n; ++i) {
                if (best_mask & (1u << i)) {
                    incumbent += problem.counts[i];
                }
            }
            if (current.total() != incumbent.total()) {
                better = current.total() > incumbent.total();
            } else {
                better = kept_ids(mask) < kept_ids(best_mask);
            }
        }
        if (better) {
            best = d;
            best_mask = mask;
        }
    }
    return OracleResult{kept_ids(best_mask), best};
}

}  // namespace flock

#endif  // FLOCK_PRUNE_HPP

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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <flock/prune.hpp>
#include <flock/synth.hpp>

namespace flock {
namespace {

TriHistogram histogram_of(int H, const std::vector<std::uint64_t>& counts) {
    TriHistogram h(H);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        h.add(cell_at(i, H), counts[i]);
    }
    return h;
}

PruneProblem problem_of(int H, const std::vector<std::vector<std::uint64_t>>& instances) {
    PruneProblem p;
    p.total = TriHistogram(H);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        p.instance_ids.push_back(static_cast<int>(i));
        p.counts.push_back(histogram_of(H, instances[i]));
        p.total += p.counts.back();
    }
    return p;
}

// Deviance of the union of the kept instances, recomputed from raw counts.
double deviance_of_kept(const PruneProblem& p, const std::vector<int>& kept, const TriDistribution& q) {
    std::vector<double> c(p.total.size(), 0.0);
    double n = 0.0;
    for (int id : kept) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] += static_cast<double>(p.counts[static_cast<std::size_t>(id)][i]);
            n += static_cast<double>(p.counts[static_cast<std::size_t>(id)][i]);
        }
    }
    double d = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] > 0.0) {
            d += (c[i] / n) * std::log2((c[i] / n) / q[i]);
        }
    }
    return d;
}

std::vector<int> all_but(std::size_t n, const std::vector<int>& removed) {
    std::vector<int> kept;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::find(removed.begin(), removed.end(), static_cast<int>(i)) == removed.end()) {
            kept.push_back(static_cast<int>(i));
        }
    }
    return kept;
}

// A background instance drawn from the bracket plus a few lockstep spikes.
PruneProblem random_fixture(std::mt19937_64& rng, const TriDistribution& bracket, std::size_t spikes,
                            std::size_t background_chunks = 3) {
    const int H = bracket.bins();
    const auto masses = bracket.masses();
    std::discrete_distribution<std::size_t> cell(masses.begin(), masses.end());
    std::uniform_int_distribution<std::uint64_t> spike_size(20, 200);
    std::uniform_int_distribution<std::size_t> any_cell(0, masses.size() - 1);
    std::vector<std::vector<std::uint64_t>> inst;
    for (std::size_t b = 0; b < background_chunks; ++b) {
        std::vector<std::uint64_t> c(masses.size(), 0);
        for (int v = 0; v < 150; ++v) {
            ++c[cell(rng)];
        }
        inst.push_back(c);
    }
    for (std::size_t s = 0; s < spikes; ++s) {
        std::vector<std::uint64_t> c(masses.size(), 0);
        const std::size_t at = any_cell(rng);
        c[at] = spike_size(rng);
        // A little spill into a neighbouring index.
        c[(at + 1) % masses.size()] += spike_size(rng) / 10;
        inst.push_back(c);
    }
    std::shuffle(inst.begin(), inst.end(), rng);
    return problem_of(H, inst);
}

TEST(DevianceReduction, SpikeMatchesRecomputation) {
    const auto q = uniform_distribution(2);
    const auto background = histogram_of(2, {10, 10, 10});
    const auto spike = histogram_of(2, {70, 0, 0});
    const auto current = background + spike;
    const double r = deviance_reduction(current, spike, q);
    // Oracle: 80/10/10 against thirds, minus the uniform remainder (0 bits).
    const double before = 0.8 * std::log2(0.8 * 3.0) + 2.0 * 0.1 * std::log2(0.1 * 3.0);
    EXPECT_NEAR(r, before - 0.0, 1e-12);
    EXPECT_NEAR(r, kl_divergence(current, q) - kl_divergence(background, q), 1e-12);
    EXPECT_GT(r, 0.0);
}

TEST(DevianceReduction, ReAddingRestoresTheDeviance) {
    const auto q = default_bracket_prior(5);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        const PruneProblem p = random_fixture(rng, q, 3);
        TriHistogram h = p.total;
        const double original = kl_divergence(h, q);
        h -= p.counts[0];
        h += p.counts[0];
        EXPECT_EQ(kl_divergence(h, q), original);
    }
}

TEST(DevianceReduction, NothingHelpsWhenTheBroadcastMatchesItsBracket) {
    const auto q = uniform_distribution(3);
    const auto a = histogram_of(3, {5, 5, 5, 5, 5, 5});
    const auto b = histogram_of(3, {2, 3, 2, 4, 1, 1});
    const auto c = histogram_of(3, {3, 2, 3, 1, 4, 4});
    const auto current = a + b + c;
    ASSERT_NEAR(kl_divergence(current, q), 0.0, 1e-15);
    for (const auto* inst : {&a, &b, &c}) {
        EXPECT_LE(deviance_reduction(current, *inst, q), 1e-15);
    }
}

TEST(DevianceReduction, EmptyingTheBroadcastIsInfeasible) {
    const auto q = uniform_distribution(2);
    const auto h = histogram_of(2, {1, 2, 3});
    EXPECT_THROW(deviance_reduction(h, h, q), InfeasibleError);
}

TEST(PruneTopmost, StopsWhenNothingHelps) {
    const auto q = uniform_distribution(3);
    const PruneProblem p = problem_of(3, {{5, 5, 5, 5, 5, 5}, {4, 4, 4, 4, 4, 4}});
    const PruneOutcome out = prune_topmost(p, q);
    EXPECT_TRUE(out.pruned_instances.empty());
    EXPECT_EQ(out.final_deviance_bits, out.original_deviance_bits);
    EXPECT_EQ(out.iterations, 1);
    EXPECT_EQ(out.steps, 0);
}

TEST(PruneTopmost, TakesTheBestSingleRemoval) {
    const auto q = default_bracket_prior(6);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        const PruneProblem p = random_fixture(rng, q, 1 + t % 4);
        const double original = deviance_of_kept(p, all_but(p.size(), {}), q);
        double best = -1.0;
        int best_id = -1;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double r = original - deviance_of_kept(p, all_but(p.size(), {static_cast<int>(i)}), q);
            if (r > best) {
                best = r;
                best_id = static_cast<int>(i);
            }
        }
        const PruneOutcome out = prune_topmost(p, q);
        EXPECT_EQ(out.iterations, 1);
        EXPECT_LE(out.steps, 1);
        if (best > kDefaultPruneTolerance) {
            ASSERT_EQ(out.pruned_instances, std::vector<int>{best_id});
            EXPECT_NEAR(out.final_deviance_bits, original - best, 1e-9);
        } else {
            EXPECT_TRUE(out.pruned_instances.empty());
        }
    }
}

TEST(PruneIterative, SingleInstanceIsKept) {
    const auto q = uniform_distribution(3);
    const PruneProblem p = problem_of(3, {{50, 0, 0, 0, 0, 0}});
    for (Heuristic h : {Heuristic::topmost, Heuristic::iterative, Heuristic::stepwise}) {
        const PruneOutcome out = run_heuristic(h, p, q, {});
        EXPECT_EQ(out.kept_instances, std::vector<int>{0});
        EXPECT_TRUE(out.pruned_instances.empty());
    }
}

TEST(PruneIterative, LaterIterationUnlocksAnInstance) {
    const auto q = uniform_distribution(3);
    const PruneProblem p = problem_of(3, {
                                             {10, 10, 10, 10, 10, 10},
                                             {0, 0, 12, 10, 12, 0},
                                             {10, 12, 8, 12, 0, 0},
                                             {8, 0, 0, 8, 0, 0},
                                         });
    const PruneOutcome out = prune_iterative(p, q);
    EXPECT_EQ(out.iterations, 2);
    EXPECT_EQ(out.kept_instances, std::vector<int>{0});
    ASSERT_EQ(out.pruned_instances.size(), 3u);

    // Replay the first iteration from scratch: rank against the initial state,
    // then sweep against the evolving state.
    const double d0 = deviance_of_kept(p, all_but(4, {}), q);
    std::vector<std::pair<double, int>> ranked;
    for (int i = 0; i < 4; ++i) {
        ranked.emplace_back(d0 - deviance_of_kept(p, all_but(4, {i}), q), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::vector<int> removed;
    std::vector<int> skipped;
    for (const auto& [r0, i] : ranked) {
        const double now = deviance_of_kept(p, all_but(4, removed), q);
        std::vector<int> trial = removed;
        trial.push_back(i);
        if (now - deviance_of_kept(p, all_but(4, trial), q) > kDefaultPruneTolerance) {
            removed = trial;
        } else {
            skipped.push_back(i);
        }
    }
    ASSERT_FALSE(skipped.empty());
    ASSERT_EQ(removed.size() + skipped.size(), 4u);
    // Every instance skipped in the first pass but pruned in the end was unlocked later.
    for (int s : skipped) {
        if (s == 0) {
            continue;
        }
        EXPECT_NE(std::find(out.pruned_instances.begin(), out.pruned_instances.end(), s),
                  out.pruned_instances.end());
        std::vector<int> trial = removed;
        trial.push_back(s);
        EXPECT_GT(deviance_of_kept(p, all_but(4, removed), q) - deviance_of_kept(p, all_but(4, trial), q),
                  kDefaultPruneTolerance);
    }
    EXPECT_EQ(std::vector<int>(out.pruned_instances.begin(), out.pruned_instances.begin() +
                                                                 static_cast<long>(removed.size())),
              removed);
    EXPECT_NEAR(out.final_deviance_bits, deviance_of_kept(p, {0}, q), 1e-9);
}

TEST(PruneIterative, NeverWorseThanTopmost) {
    const auto q = default_bracket_prior(8);
    std::mt19937_64 rng(21);
    for (int t = 0; t < 150; ++t) {
        const PruneProblem p = random_fixture(rng, q, 1 + t % 6);
        const PruneOutcome top = prune_topmost(p, q);
        const PruneOutcome it = prune_iterative(p, q);
        EXPECT_LE(it.final_deviance_bits, top.final_deviance_bits + 1e-12) << "fixture " << t;
    }
}

TEST(PruneStepwise, DominantSpikeMatchesTopmost) {
    const auto q = uniform_distribution(3);
    const PruneProblem p = problem_of(3, {{10, 10, 10, 10, 10, 10}, {0, 0, 0, 0, 200, 0}, {10, 10, 10, 10, 10, 10}});
    const PruneOutcome top = prune_topmost(p, q);
    for (Heuristic h : {Heuristic::iterative, Heuristic::stepwise}) {
        const PruneOutcome out = run_heuristic(h, p, q, {});
        EXPECT_EQ(out.pruned_instances, top.pruned_instances);
        EXPECT_EQ(out.kept_instances, top.kept_instances);
        EXPECT_NEAR(out.final_deviance_bits, top.final_deviance_bits, 1e-12);
    }
    EXPECT_EQ(top.pruned_instances, std::vector<int>{1});
}

TEST(PruneStepwise, StepsCountPrunedInstances) {
    const auto q = default_bracket_prior(6);
    std::mt19937_64 rng(8);
    for (int t = 0; t < 100; ++t) {
        const PruneProblem p = random_fixture(rng, q, 2 + t % 5);
        for (Heuristic h : {Heuristic::topmost, Heuristic::iterative, Heuristic::stepwise}) {
            const PruneOutcome out = run_heuristic(h, p, q, {});
            EXPECT_EQ(out.steps, static_cast<int>(out.pruned_instances.size()));
        }
    }
}

TEST(PruneStepwise, MaxStepsCapsRemovals) {
    const auto q = default_bracket_prior(6);
    std::mt19937_64 rng(81);
    const PruneProblem p = random_fixture(rng, q, 6);
    PruneOptions opts;
    opts.max_steps = 2;
    EXPECT_LE(prune_stepwise(p, q, opts).pruned_instances.size(), 2u);
}

TEST(ExactOracle, SingleInstanceIsForced) {
    const auto q = uniform_distribution(2);
    const PruneProblem p = problem_of(2, {{4, 0, 1}});
    const OracleResult r = exact_prune_oracle(p, q);
    EXPECT_EQ(r.kept_instances, std::vector<int>{0});
    EXPECT_NEAR(r.deviance_bits, deviance_of_kept(p, {0}, q), 1e-12);
}

TEST(ExactOracle, KeepsOnlyTheMatchingInstance) {
    const auto q = uniform_distribution(2);
    const PruneProblem p = problem_of(2, {{0, 40, 0}, {10, 10, 10}});
    const OracleResult r = exact_prune_oracle(p, q);
    EXPECT_EQ(r.kept_instances, std::vector<int>{1});
    EXPECT_NEAR(r.deviance_bits, 0.0, 1e-12);
}

TEST(ExactOracle, LowerBoundsEveryHeuristicAndMatchesBruteForce) {
    const auto q = default_bracket_prior(5);
    std::mt19937_64 rng(31);
    for (int t = 0; t < 60; ++t) {
        const PruneProblem p = random_fixture(rng, q, 1 + t % 5, 2);
        ASSERT_LE(p.size(), 8u);
        const OracleResult best = exact_prune_oracle(p, q);
        double brute = std::numeric_limits<double>::infinity();
        for (std::uint32_t mask = 1; mask < (1u << p.size()); ++mask) {
            std::vector<int> kept;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (mask & (1u << i)) {
                    kept.push_back(static_cast<int>(i));
                }
            }
            brute = std::min(brute, deviance_of_kept(p, kept, q));
        }
        EXPECT_NEAR(best.deviance_bits, brute, 1e-9);
        EXPECT_NEAR(deviance_of_kept(p, best.kept_instances, q), best.deviance_bits, 1e-9);
        for (Heuristic h : {Heuristic::topmost, Heuristic::iterative, Heuristic::stepwise}) {
            EXPECT_GE(run_heuristic(h, p, q, {}).final_deviance_bits, best.deviance_bits - 1e-9);
        }
    }
}

TEST(ExactOracle, RefusesLargePartitions) {
    const auto q = uniform_distribution(2);
    std::vector<std::vector<std::uint64_t>> inst(kMaxOracleInstances + 1, {1, 1, 1});
    EXPECT_THROW(exact_prune_oracle(problem_of(2, inst), q), InfeasibleError);
}

TEST(PruneInvariants, HoldOnRandomFixtures) {
    const auto q = default_bracket_prior(10);
    std::mt19937_64 rng(99);
    for (int t = 0; t < 100; ++t) {
        const PruneProblem p = random_fixture(rng, q, 1 + t % 8);
        for (Heuristic h : {Heuristic::topmost, Heuristic::iterative, Heuristic::stepwise}) {
            const PruneOutcome out = run_heuristic(h, p, q, {});
            // Kept and pruned partition the instances; kept is never empty.
            ASSERT_FALSE(out.kept_instances.empty());
            std::vector<int> all = out.kept_instances;
            all.insert(all.end(), out.pruned_instances.begin(), out.pruned_instances.end());
            std::sort(all.begin(), all.end());
            ASSERT_EQ(all, all_but(p.size(), {}));
            // Deviance never increases, and the incremental value matches a recomputation.
            EXPECT_LE(out.final_deviance_bits, out.original_deviance_bits + 1e-12);
            EXPECT_NEAR(out.final_deviance_bits, deviance_of_kept(p, out.kept_instances, q), 1e-9);
            EXPECT_NEAR(out.original_deviance_bits, deviance_of_kept(p, all, q), 1e-9);
            // Determinism.
            const PruneOutcome again = run_heuristic(h, p, q, {});
            EXPECT_EQ(again.pruned_instances, out.pruned_instances);
            EXPECT_EQ(again.final_deviance_bits, out.final_deviance_bits);
        }
    }
}

TEST(PruneInvariants, EvaluationCounts) {
    const auto q = default_bracket_prior(6);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const PruneProblem p = random_fixture(rng, q, 1 + t % 6);
        const std::size_t k = p.size();
        EXPECT_EQ(prune_topmost(p, q).evaluations, k);
        const PruneOutcome it = prune_iterative(p, q);
        // Each pass ranks and sweeps the survivors: at most 2k scores per pass.
        EXPECT_LE(it.evaluations, 2 * k * static_cast<std::size_t>(it.iterations));
        const PruneOutcome st = prune_stepwise(p, q);
        EXPECT_LE(st.evaluations, k * static_cast<std::size_t>(st.steps + 1));
    }
}

TEST(Heuristic, NamesRoundTrip) {
    for (Heuristic h : {Heuristic::topmost, Heuristic::iterative, Heuristic::stepwise}) {
        EXPECT_EQ(parse_heuristic(to_string(h)), h);
    }
    EXPECT_THROW(parse_heuristic("greedy"), ConfigError);
}

}  // namespace
}  // namespace flock

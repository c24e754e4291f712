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

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <flock/overhead.hpp>
#include <flock/synth.hpp>

#include "overhead_oracle.hpp"

namespace flock {
namespace {

std::size_t brute_peak(const std::vector<Interval>& ivs) {
    std::size_t best = 0;
    for (const Interval& probe : ivs) {
        std::size_t open = 0;
        for (const Interval& iv : ivs) {
            open += (iv.start <= probe.start && probe.start < iv.end) ? 1 : 0;
        }
        best = std::max(best, open);
    }
    return best;
}

TEST(PeakConcurrency, MatchesBruteForce) {
    EXPECT_EQ(peak_concurrency({}), 0u);
    const std::vector<Interval> touching{{0.0, 0.5}, {0.5, 1.0}};
    EXPECT_EQ(peak_concurrency(touching), 1u);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<Interval> ivs;
        for (int i = 0; i < 1 + t % 40; ++i) {
            // Coarse grid so equal endpoints are common.
            const double a = std::floor(u(rng) * 10.0) / 10.0;
            const double b = a + (1.0 + std::floor(u(rng) * 5.0)) / 10.0;
            ivs.push_back({a, b});
        }
        EXPECT_EQ(peak_concurrency(ivs), brute_peak(ivs));
    }
}

TEST(MimicInterval, FullDurationCellIsTheWholeBroadcast) {
    const Interval iv = mimic_interval(Cell{1, 20}, 20);
    EXPECT_EQ(iv.start, 0.0);
    EXPECT_EQ(iv.end, 1.0);
}

TEST(EstimateIpOverhead, FullDurationPointMassIsExactlyZero) {
    const int H = 20;
    std::vector<double> m(cell_count(H), 0.0);
    m[cell_index(Cell{1, H}, H)] = 1.0;
    for (std::size_t k : {1u, 3u, 10u}) {
        OverheadSpec spec;
        spec.rate_limit_k = k;
        spec.target_bots_n = 137;
        spec.bracket_frequencies = {{0, 1.0}};
        const auto r = estimate_ip_overhead(spec, {{0, TriDistribution(H, m, false)}});
        EXPECT_EQ(r.overhead, 0.0);
        EXPECT_EQ(r.per_bracket.at(0), 0.0);
    }
}

TEST(EstimateIpOverhead, TwoCellModelAgreesWithMonteCarlo) {
    OverheadSpec spec;
    spec.target_bots_n = 100;
    spec.bracket_frequencies = {{0, 1.0}};
    spec.trials = 2000;
    spec.seed = 3;
    const auto r = estimate_ip_overhead(spec, {{0, testing::two_cell_model(20)}});
    const double mc = testing::two_cell_overhead_monte_carlo(100, 1, 20000, 99);
    EXPECT_NEAR(r.overhead, mc, 0.02 * mc);
    EXPECT_NEAR(mc, 1.0 / 3.0, 0.02);
}

TEST(EstimateIpOverhead, MissingModelsAreExcludedAndRenormalized) {
    const int H = 10;
    std::vector<double> m(cell_count(H), 0.0);
    m[cell_index(Cell{1, H}, H)] = 1.0;
    OverheadSpec spec;
    spec.target_bots_n = 50;
    spec.trials = 50;
    spec.bracket_frequencies = {{0, 0.5}, {1, 0.3}, {2, 0.2}};
    const std::map<int, TriDistribution> models{{0, TriDistribution(H, m, false)},
                                                {2, testing::two_cell_model(H)}};
    const auto r = estimate_ip_overhead(spec, models);
    EXPECT_EQ(r.excluded_brackets, 1u);
    EXPECT_EQ(r.per_bracket.count(1), 0u);
    EXPECT_NEAR(r.overhead, (0.5 * r.per_bracket.at(0) + 0.2 * r.per_bracket.at(2)) / 0.7, 1e-12);
}

TEST(EstimateIpOverhead, RejectsBadSpecs) {
    const std::map<int, TriDistribution> models{{0, uniform_distribution(5)}};
    OverheadSpec spec;
    spec.bracket_frequencies = {{0, 0.7}};
    EXPECT_THROW(estimate_ip_overhead(spec, models), ConfigError);
    spec.bracket_frequencies = {{0, 1.0}};
    spec.rate_limit_k = 0;
    EXPECT_THROW(estimate_ip_overhead(spec, models), ConfigError);
    spec.rate_limit_k = 1;
    spec.bracket_frequencies = {{4, 1.0}};
    EXPECT_THROW(estimate_ip_overhead(spec, models), EmptyInputError);
}

TEST(EstimateIpOverhead, DeterministicUnderASeed) {
    OverheadSpec spec;
    spec.bracket_frequencies = {{0, 1.0}};
    spec.seed = 8;
    const std::map<int, TriDistribution> models{{0, default_bracket_prior(20)}};
    EXPECT_EQ(estimate_ip_overhead(spec, models).overhead, estimate_ip_overhead(spec, models).overhead);
}

}  // namespace
}  // namespace flock

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
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include <flock/synth.hpp>
#include <flock/synth_workload.hpp>

namespace flock {
namespace {

TriDistribution point_mass(Cell c, int H) {
    std::vector<double> m(cell_count(H), 0.0);
    m[cell_index(c, H)] = 1.0;
    return TriDistribution(H, m, false);
}

void expect_feasible(const ViewFeature& f) {
    EXPECT_GE(f.start_frac, 0.0);
    EXPECT_GT(f.stay_frac, 0.0);
    EXPECT_LE(f.start_frac + f.stay_frac, 1.0 + 1e-12);
}

TEST(SampleAuthenticViews, PointMassWithoutJitterStaysInItsCell) {
    const int H = 10;
    const Cell target{1, H};
    const auto views = sample_authentic_views(point_mass(target, H), 500, 0.0, 7);
    ASSERT_EQ(views.size(), 500u);
    for (const auto& f : views) {
        EXPECT_EQ(f.bin, target);
        expect_feasible(f);
    }
}

TEST(SampleAuthenticViews, UniformBracketFrequenciesWithinBinomialBounds) {
    const int H = 6;
    const std::size_t n = 100000;
    const auto views = sample_authentic_views(uniform_distribution(H), n, 0.0, 42);
    std::vector<double> freq(cell_count(H), 0.0);
    for (const auto& f : views) {
        freq[cell_index(f.bin, H)] += 1.0;
    }
    const double p = 1.0 / static_cast<double>(cell_count(H));
    const double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
    for (double c : freq) {
        EXPECT_LE(std::abs(c - static_cast<double>(n) * p), 3.0 * sd);
    }
}

TEST(SampleAuthenticViews, JitteredViewsStayFeasible) {
    for (int H : {3, 10, 20}) {
        const auto views = sample_authentic_views(default_bracket_prior(H), 20000, 0.05, 3);
        for (const auto& f : views) {
            expect_feasible(f);
            EXPECT_GE(f.bin.y, 1);
            EXPECT_LE(f.bin.x + f.bin.y, H + 1);
        }
    }
}

TEST(SampleAuthenticViews, ConvergesToTheBracket) {
    const int H = 20;
    const auto q = default_bracket_prior(H);
    const auto views = sample_authentic_views(q, 100000, 0.0, 5);
    TriHistogram h(H);
    for (const auto& f : views) {
        h.add(f.bin);
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        tv += std::abs(static_cast<double>(h[i]) / 1e5 - q[i]);
    }
    EXPECT_LT(0.5 * tv, 0.02);
}

TEST(SampleAuthenticViews, RejectsNegativeJitter) {
    EXPECT_THROW(sample_authentic_views(uniform_distribution(3), 1, -0.1, 0), ConfigError);
}

TEST(GenerateAttack, CollapsedWindowsAreLockstep) {
    AttackSpec a;
    a.delta = 1e-12;
    a.seed = 9;
    const auto bots = generate_attack(a, 20);
    ASSERT_EQ(bots.size(), 100u);
    for (const auto& f : bots) {
        EXPECT_NEAR(f.start_frac, bots[0].start_frac, 1e-11);
        EXPECT_NEAR(f.stay_frac, bots[0].stay_frac, 1e-11);
    }
}

TEST(GenerateAttack, CountsAndFeasibility) {
    for (GapFamily fam : kAllGapFamilies) {
        AttackSpec a;
        a.iat = GapDistribution::defaults(fam);
        a.itt = GapDistribution::defaults(fam);
        a.seed = 17;
        const auto bots = generate_attack(a, 20);
        EXPECT_EQ(bots.size(), 100u);
        std::set<std::string> ids;
        for (const auto& f : bots) {
            expect_feasible(f);
            ids.insert(f.view_id);
        }
        EXPECT_EQ(ids.size(), bots.size());
    }
}

TEST(GenerateAttack, StartsSpanAtMostTheWindow) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        AttackSpec a;
        a.seed = seed;
        const auto bots = generate_attack(a, 20);
        double lo = 1.0;
        double hi = 0.0;
        double end_lo = 2.0;
        double end_hi = 0.0;
        for (const auto& f : bots) {
            lo = std::min(lo, f.start_frac);
            hi = std::max(hi, f.start_frac);
            end_lo = std::min(end_lo, f.start_frac + f.stay_frac);
            end_hi = std::max(end_hi, f.start_frac + f.stay_frac);
        }
        EXPECT_LE(hi - lo, 0.1 + 1e-12);
        EXPECT_LE(end_hi - end_lo, 0.1 + 1e-12);
    }
}

TEST(GenerateAttack, RejectsBadSpecs) {
    AttackSpec a;
    a.delta = 0.0;
    EXPECT_THROW(generate_attack(a, 20), ConfigError);
    a.delta = 0.1;
    a.bot_ratio = 0.001;
    EXPECT_THROW(generate_attack(a, 20), ConfigError);
    a.bot_ratio = 1.0;
    a.delta = 0.6;
    EXPECT_THROW(generate_attack(a, 20), InfeasibleError);
}

TEST(GenerateAttack, GapDrawsArePositive) {
    std::mt19937_64 rng(2);
    for (GapFamily fam : kAllGapFamilies) {
        const auto g = GapDistribution::defaults(fam);
        for (int i = 0; i < 10000; ++i) {
            EXPECT_GT(g.draw(rng), 0.0);
        }
        EXPECT_EQ(parse_gap_family(to_string(fam)), fam);
    }
    EXPECT_THROW(parse_gap_family("cauchy"), ConfigError);
}

LabeledWorkload ten_and_ten() {
    LabeledWorkload w;
    for (int i = 0; i < 10; ++i) {
        w.labels.emplace("a" + std::to_string(i), Label::authentic);
        w.labels.emplace("b" + std::to_string(i), Label::botted);
    }
    return w;
}

TEST(EvaluateDetection, Conventions) {
    const LabeledWorkload w = ten_and_ten();
    std::set<std::string> all_bots;
    for (int i = 0; i < 10; ++i) {
        all_bots.insert("b" + std::to_string(i));
    }
    const auto perfect = evaluate_detection(w, all_bots);
    EXPECT_EQ(perfect.precision, 1.0);
    EXPECT_EQ(perfect.recall, 1.0);

    const auto none = evaluate_detection(w, {});
    EXPECT_EQ(none.precision, 1.0);
    EXPECT_EQ(none.recall, 0.0);

    std::set<std::string> mixed;
    for (int i = 0; i < 8; ++i) {
        mixed.insert("b" + std::to_string(i));
    }
    mixed.insert("a0");
    mixed.insert("a1");
    const auto s = evaluate_detection(w, mixed);
    EXPECT_DOUBLE_EQ(s.precision, 0.8);
    EXPECT_DOUBLE_EQ(s.recall, 0.8);

    EXPECT_THROW(evaluate_detection(w, {"zzz"}), Error);
}

TEST(EvaluateDetection, TruthAsPredictionIsPerfect) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        AttackSpec a;
        a.seed = seed;
        a.bot_ratio = 0.25 * static_cast<double>(1 + seed % 8);
        const LabeledWorkload w = make_botted_broadcast(default_bracket_prior(20), a, 0.02);
        std::set<std::string> truth;
        for (const auto& [id, label] : w.labels) {
            if (label == Label::botted) {
                truth.insert(id);
            }
        }
        const auto s = evaluate_detection(w, truth);
        EXPECT_EQ(s.precision, 1.0);
        EXPECT_EQ(s.recall, 1.0);
        EXPECT_EQ(w.features.size(), w.labels.size());
    }
}

TEST(Generators, DeterministicUnderASeed) {
    AttackSpec a;
    a.seed = 1234;
    const auto x = make_botted_broadcast(default_bracket_prior(20), a, 0.02);
    const auto y = make_botted_broadcast(default_bracket_prior(20), a, 0.02);
    ASSERT_EQ(x.features.size(), y.features.size());
    for (std::size_t i = 0; i < x.features.size(); ++i) {
        EXPECT_EQ(x.features[i].view_id, y.features[i].view_id);
        EXPECT_EQ(x.features[i].start_frac, y.features[i].start_frac);
        EXPECT_EQ(x.features[i].stay_frac, y.features[i].stay_frac);
    }

    SynthWorkloadSpec spec;
    spec.clean_broadcasts = 6;
    spec.attacked_broadcasts = 2;
    spec.max_views = 300;
    spec.seed = 5;
    std::ostringstream v1;
    std::ostringstream v2;
    std::ostringstream l1;
    std::ostringstream l2;
    const auto w1 = generate_synth_workload(spec, default_bracket_prior(20));
    const auto w2 = generate_synth_workload(spec, default_bracket_prior(20));
    write_views_csv(v1, w1.views);
    write_views_csv(v2, w2.views);
    write_labels_csv(l1, w1.labels);
    write_labels_csv(l2, w2.labels);
    EXPECT_EQ(v1.str(), v2.str());
    EXPECT_EQ(l1.str(), l2.str());
}

TEST(SynthWorkload, ParsesBackWithEveryViewLabeled) {
    SynthWorkloadSpec spec;
    spec.clean_broadcasts = 10;
    spec.attacked_broadcasts = 3;
    spec.max_views = 400;
    const auto w = generate_synth_workload(spec, default_bracket_prior(20));
    EXPECT_EQ(w.broadcasts.size(), 13u);
    EXPECT_EQ(w.attacked.size(), 3u);
    EXPECT_EQ(w.labels.size(), w.views.size());
    const Workload parsed = to_workload(w);
    EXPECT_EQ(parsed.rejected, 0u);
    std::size_t views = 0;
    for (const auto& [id, vs] : parsed.views_by_broadcast) {
        views += vs.size();
    }
    EXPECT_EQ(views, w.views.size());
}

}  // namespace
}  // namespace flock

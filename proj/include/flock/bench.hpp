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

#ifndef FLOCK_BENCH_HPP
#define FLOCK_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <flock/cluster.hpp>
#include <flock/detect.hpp>
#include <flock/parallel.hpp>
#include <flock/prune.hpp>
#include <flock/random.hpp>
#include <flock/synth.hpp>

/**
 * @file bench.hpp
 *
 * @brief Attack grid evaluation and partition+prune scaling measurements.
 */

namespace flock {

/// What a grid cell runs against each synthetic botted broadcast.
struct GridPipeline {
    TriDistribution bracket;
    ClusterOptions cluster;
    Heuristic heuristic = Heuristic::iterative;
    PruneOptions prune;
    double jitter_sigma = 0.02;
    unsigned workers = 1;
};

struct GridSpec {
    std::vector<std::size_t> n_authentic;
    std::vector<double> bot_ratios;
    std::vector<GapFamily> families;
    double delta = 0.1;
    std::size_t runs_per_cell = 5;
    std::uint64_t master_seed = 0;

    std::size_t cell_count() const { return n_authentic.size() * bot_ratios.size() * families.size(); }
};

/// 3 authentic viewcounts x 8 bot ratios x 4 gap families, 5 runs each.
inline GridSpec full_grid() {
    GridSpec g;
    g.n_authentic = {100, 1000, 10000};
    for (int i = 1; i <= 8; ++i) {
        g.bot_ratios.push_back(0.25 * i);
    }
    g.families.assign(std::begin(kAllGapFamilies), std::end(kAllGapFamilies));
    g.runs_per_cell = 5;
    return g;
}

struct GridCell {
    std::size_t n_authentic = 0;
    double bot_ratio = 0.0;
    GapFamily family = GapFamily::uniform;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t runs = 0;
    std::size_t failures = 0;
};

struct EvalReport {
    std::vector<GridCell> cells;
    std::size_t runs_per_cell = 0;
};

/// Builds one botted broadcast, partitions and prunes it, and scores the pruned views.
inline DetectionScore run_attack_once(const GridPipeline& pipe, const AttackSpec& attack) {
    const LabeledWorkload truth = make_botted_broadcast(pipe.bracket, attack, pipe.jitter_sigma);
    const Partition partition = partition_views(truth.features, pipe.cluster, mix_seed(attack.seed, 3));
    const PruneOutcome outcome =
        prune_broadcast(partition, truth.features, pipe.bracket, pipe.heuristic, pipe.prune);
    const std::set<std::string> predicted(outcome.botted_view_ids.begin(), outcome.botted_view_ids.end());
    return evaluate_detection(truth, predicted);
}

/**
 * Averages precision and recall over `runs_per_cell` runs of every grid cell.
 *
 * Cell i uses seed master_seed + i, so the report does not depend on `workers`.
 * A run that throws is counted in `failures` and left out of the averages.
 */
inline EvalReport run_grid(const GridSpec& grid, const GridPipeline& pipe) {
    if (grid.cell_count() == 0 || grid.runs_per_cell == 0) {
        throw ConfigError("grid has no cells");
    }
    EvalReport report;
    report.runs_per_cell = grid.runs_per_cell;
    for (std::size_t n : grid.n_authentic) {
        for (double r : grid.bot_ratios) {
            for (GapFamily f : grid.families) {
                GridCell c;
                c.n_authentic = n;
                c.bot_ratio = r;
                c.family = f;
                report.cells.push_back(c);
            }
        }
    }
    parallel_for(report.cells.size(), pipe.workers, [&](std::size_t i) {
        GridCell& c = report.cells[i];
        const std::uint64_t cell_seed = grid.master_seed + i;
        double precision = 0.0;
        double recall = 0.0;
        for (std::size_t run = 0; run < grid.runs_per_cell; ++run) {
            AttackSpec attack;
            attack.n_authentic = c.n_authentic;
            attack.bot_ratio = c.bot_ratio;
            attack.iat = GapDistribution::defaults(c.family);
            attack.itt = GapDistribution::defaults(c.family);
            attack.delta = grid.delta;
            attack.seed = mix_seed(cell_seed, run);
            try {
                const DetectionScore s = run_attack_once(pipe, attack);
                precision += s.precision;
                recall += s.recall;
                ++c.runs;
            } catch (const Error&) {
                ++c.failures;
            }
        }
        if (c.runs > 0) {
            c.precision = precision / static_cast<double>(c.runs);
            c.recall = recall / static_cast<double>(c.runs);
        }
    });
    return report;
}

inline void write_grid_report(std::ostream& out, const EvalReport& report) {
    out << "n_authentic,bot_ratio,distribution,precision,recall,runs\n";
    for (const GridCell& c : report.cells) {
        out << c.n_authentic << ',' << format_real(c.bot_ratio) << ',' << to_string(c.family) << ','
            << format_real(c.precision) << ',' << format_real(c.recall) << ',' << c.runs << '\n';
    }
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = slope x + intercept, with the coefficient of determination.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ConfigError("line fit needs at least two paired samples");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (fit.slope * x[i] + fit.intercept);
        ss_res += e * e;
    }
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

struct ScalingRow {
    std::size_t viewcount = 0;
    double seconds = 0.0;
    std::size_t instances = 0;
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    LinearFit fit;
};

/**
 * Times partition+prune on one synthetic botted broadcast per viewcount
 * (half authentic, half bots). Generation is not timed; with `repeats` > 1
 * the fastest repeat is kept.
 */
inline ScalingReport scaling_benchmark(std::span<const std::size_t> viewcounts, const GridPipeline& pipe,
                                       std::uint64_t seed, int repeats = 1) {
    if (viewcounts.size() < 4) {
        throw ConfigError("scaling benchmark needs at least four viewcount levels");
    }
    for (std::size_t i = 1; i < viewcounts.size(); ++i) {
        if (viewcounts[i] <= viewcounts[i - 1]) {
            throw ConfigError("viewcounts must be strictly ascending");
        }
    }
    if (static_cast<double>(viewcounts.back()) < 100.0 * static_cast<double>(viewcounts.front())) {
        throw ConfigError("viewcounts must span at least two orders of magnitude");
    }
    ScalingReport report;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t level = 0; level < viewcounts.size(); ++level) {
        const std::size_t vc = viewcounts[level];
        AttackSpec attack;
        attack.n_authentic = std::max<std::size_t>(vc / 2, 1);
        attack.bot_ratio = static_cast<double>(vc - attack.n_authentic) / static_cast<double>(attack.n_authentic);
        attack.seed = mix_seed(seed, level);
        const LabeledWorkload w = make_botted_broadcast(pipe.bracket, attack, pipe.jitter_sigma);
        ScalingRow row;
        row.viewcount = w.features.size();
        row.seconds = std::numeric_limits<double>::infinity();
        for (int r = 0; r < std::max(repeats, 1); ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const Partition p = partition_views(w.features, pipe.cluster, mix_seed(attack.seed, 3));
            const PruneOutcome out = prune_broadcast(p, w.features, pipe.bracket, pipe.heuristic, pipe.prune);
            const auto t1 = std::chrono::steady_clock::now();
            row.seconds = std::min(row.seconds, std::chrono::duration<double>(t1 - t0).count());
            row.instances = p.instances.size();
            (void)out;
        }
        xs.push_back(static_cast<double>(row.viewcount));
        ys.push_back(row.seconds);
        report.rows.push_back(row);
    }
    report.fit = fit_line(xs, ys);
    return report;
}

inline void write_scaling_report(std::ostream& out, const ScalingReport& report) {
    out << "viewcount,wall_seconds,instances\n";
    for (const ScalingRow& r : report.rows) {
        out << r.viewcount << ',' << format_real(r.seconds) << ',' << r.instances << '\n';
    }
}

}  // namespace flock

#endif  // FLOCK_BENCH_HPP

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

// Command-line front end: detect, score, prune, synth, eval, bench, overhead.
//
// Settings resolve in three layers: built-in defaults, then the key=value
// file named by --config (or $FLOCK_CONFIG), then explicit flags.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <flock/flock.hpp>

namespace {

using namespace flock;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Pipeline keys that double as long flags.
const std::vector<std::pair<std::string, std::string>> kPipelineFlags = {
    {"H", "bins per axis of the start/stay triangle"},
    {"T", "bracket width in minutes"},
    {"K", "IQR multiplier of the fence"},
    {"U", "minimum viewcount for a broadcast to be flagged"},
    {"pseudocount", "smoothing added to every bracket cell"},
    {"heuristic", "topmost, iterative or stepwise"},
    {"tolerance", "minimum deviance reduction in bits for a prune"},
    {"max-iterations", "iteration cap for the iterative heuristic"},
    {"min-cluster-size", "clusters smaller than this are never split"},
    {"max-k", "cap on instances per broadcast"},
    {"bins-per-decade", "log10 viewcount bins per decade for the fence"},
    {"min-bin-samples", "broadcasts per fence bin before merging"},
    {"min-bracket-views", "views a bracket needs to get a model"},
    {"seed", "master seed"},
    {"workers", "worker threads"},
};

const std::vector<std::pair<std::string, std::string>> kPathFlags = {
    {"views", "views file"},
    {"broadcasts", "broadcasts file"},
    {"out", "output directory"},
    {"models", "persisted bracket models"},
};

struct Settings {
    std::map<std::string, std::string> flags;
    std::string config_path;

    void attach(CLI::App& app, bool with_paths) {
        for (const auto& [key, help] : kPipelineFlags) {
            app.add_option_function<std::string>(
                "--" + key, [this, key = key](const std::string& v) { flags[key] = v; }, help);
        }
        if (with_paths) {
            for (const auto& [key, help] : kPathFlags) {
                app.add_option_function<std::string>(
                    "--" + key, [this, key = key](const std::string& v) { flags[key] = v; }, help);
            }
        }
    }

    PipelineConfig resolve() const {
        PipelineConfig c;
        std::string path = config_path;
        if (path.empty()) {
            if (const char* env = std::getenv("FLOCK_CONFIG")) {
                path = env;
            }
        }
        if (!path.empty()) {
            load_config_file(c, path);
        }
        for (const auto& [key, value] : flags) {
            apply_setting(c, key, value);
        }
        c.validate();
        return c;
    }
};

void report_summary(const RunSummary& s) {
    std::cerr << fmt::format("{} broadcasts, {} views ({} rows rejected), {} scored, {} without a model\n",
                             s.broadcasts, s.views, s.rejected_rows, s.scored, s.missing_model);
    std::cerr << fmt::format("{} botted broadcasts, {} botted views, {:.3f}s\n", s.botted_broadcasts,
                             s.botted_views, s.wall_seconds);
}

GridPipeline grid_pipeline(const PipelineConfig& c, double jitter) {
    GridPipeline p;
    p.bracket = default_bracket_prior(c.H);
    p.cluster = c.cluster_options();
    p.heuristic = c.heuristic;
    p.prune = c.prune_options();
    p.jitter_sigma = jitter;
    p.workers = c.workers;
    return p;
}

// Writes to `path`, or standard output when it is empty or "-".
template <typename F>
void emit(const std::string& path, F&& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    body(out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FLOCK: find lockstep viewbot activity in live-stream view logs"};
    app.require_subcommand(1);
    app.fallthrough();
    Settings settings;
    app.add_option("--config", settings.config_path, "key=value configuration file (default: $FLOCK_CONFIG)");

    auto* detect = app.add_subcommand("detect", "model brackets, flag broadcasts and prune their views");
    settings.attach(*detect, true);

    auto* score = app.add_subcommand("score", "deviance scoring against persisted bracket models");
    settings.attach(*score, true);

    auto* prune = app.add_subcommand("prune", "partition and prune one broadcast");
    settings.attach(*prune, true);
    std::string prune_id;
    prune->add_option("--broadcast", prune_id, "broadcast id")->required();

    auto* synth = app.add_subcommand("synth", "write a labeled synthetic workload");
    settings.attach(*synth, false);
    SynthWorkloadSpec wspec;
    std::string synth_out = "flock-synth";
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--clean", wspec.clean_broadcasts, "clean broadcasts");
    synth->add_option("--attacked", wspec.attacked_broadcasts, "attacked broadcasts");
    synth->add_option("--min-views", wspec.min_views, "fewest authentic views per broadcast");
    synth->add_option("--max-views", wspec.max_views, "most authentic views per broadcast");
    synth->add_option("--min-bot-ratio", wspec.min_bot_ratio, "smallest bots per authentic view");
    synth->add_option("--max-bot-ratio", wspec.max_bot_ratio, "largest bots per authentic view");
    synth->add_option("--delta", wspec.delta, "attack window as a fraction of the broadcast");
    synth->add_option("--jitter", wspec.jitter_sigma, "authentic jitter sigma");

    auto* eval = app.add_subcommand("eval", "precision and recall over an attack grid");
    settings.attach(*eval, false);
    bool full = false;
    std::vector<std::size_t> grid_n;
    std::vector<double> grid_ratios;
    std::vector<std::string> grid_families;
    std::size_t runs = 5;
    double delta = 0.1;
    double jitter = 0.02;
    std::string eval_out;
    eval->add_flag("--full-grid", full, "3 viewcounts x 8 bot ratios x 4 gap families");
    eval->add_option("--n-authentic", grid_n, "authentic viewcounts")->delimiter(',');
    eval->add_option("--bot-ratios", grid_ratios, "bots per authentic view")->delimiter(',');
    eval->add_option("--families", grid_families, "uniform, gaussian, exponential, lognormal")->delimiter(',');
    eval->add_option("--runs", runs, "runs per cell");
    eval->add_option("--delta", delta, "attack window");
    eval->add_option("--jitter", jitter, "authentic jitter sigma");
    eval->add_option("--report", eval_out, "grid report file (default: standard output)");

    auto* bench = app.add_subcommand("bench", "partition+prune wall time against viewcount");
    settings.attach(*bench, false);
    std::vector<std::size_t> viewcounts{1000, 10000, 100000, 1000000};
    int repeats = 1;
    std::string bench_out;
    bench->add_option("--viewcounts", viewcounts, "ascending viewcounts")->delimiter(',');
    bench->add_option("--repeats", repeats, "timed repeats per level, fastest kept");
    bench->add_option("--report", bench_out, "timing table file (default: standard output)");

    auto* overhead = app.add_subcommand("overhead", "IP cost of mimicking bracket models instead of lockstep");
    settings.attach(*overhead, false);
    OverheadSpec ospec;
    std::string overhead_models;
    overhead->add_option("--models", overhead_models,
                         "bracket models; brackets are weighted by their broadcast counts "
                         "(default: one synthetic prior bracket)");
    overhead->add_option("--rate-limit", ospec.rate_limit_k, "concurrent views allowed per IP");
    overhead->add_option("--bots", ospec.target_bots_n, "lockstep bot count to match");
    overhead->add_option("--trials", ospec.trials, "trials per bracket");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    PipelineConfig c;
    try {
        c = settings.resolve();
    } catch (const ConfigError& e) {
        std::cerr << "flock: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (detect->parsed()) {
            report_summary(run_pipeline(c));
        } else if (score->parsed()) {
            report_summary(run_score(c));
        } else if (prune->parsed()) {
            const BroadcastPrune p = run_prune(c, prune_id);
            std::cerr << fmt::format("{}: {} instances, {} pruned, {} botted views, deviance {} -> {} bits\n",
                                     p.broadcast_id, p.partition.instances.size(),
                                     p.outcome.pruned_instances.size(), p.outcome.botted_view_ids.size(),
                                     format_real(p.outcome.original_deviance_bits),
                                     format_real(p.outcome.final_deviance_bits));
        } else if (synth->parsed()) {
            wspec.seed = c.seed;
            wspec.prior_bins = c.H;
            const SynthWorkload w = generate_synth_workload(wspec, default_bracket_prior(c.H));
            write_synth_workload(w, synth_out);
            std::cerr << fmt::format("{} broadcasts ({} attacked), {} views written to {}\n", w.broadcasts.size(),
                                     w.attacked.size(), w.views.size(), synth_out);
        } else if (eval->parsed()) {
            GridSpec g = full_grid();
            if (!full) {
                if (!grid_n.empty()) {
                    g.n_authentic = grid_n;
                }
                if (!grid_ratios.empty()) {
                    g.bot_ratios = grid_ratios;
                }
                if (!grid_families.empty()) {
                    g.families.clear();
                    for (const auto& f : grid_families) {
                        g.families.push_back(parse_gap_family(f));
                    }
                }
                g.runs_per_cell = runs;
            }
            g.delta = delta;
            g.master_seed = c.seed;
            const EvalReport r = run_grid(g, grid_pipeline(c, jitter));
            emit(eval_out, [&](std::ostream& o) { write_grid_report(o, r); });
            std::size_t failures = 0;
            for (const GridCell& cell : r.cells) {
                failures += cell.failures;
            }
            if (failures > 0) {
                std::cerr << fmt::format("warning: {} runs failed and were left out of the averages\n", failures);
            }
        } else if (bench->parsed()) {
            const ScalingReport r = scaling_benchmark(viewcounts, grid_pipeline(c, 0.02), c.seed, repeats);
            emit(bench_out, [&](std::ostream& o) { write_scaling_report(o, r); });
            std::cerr << fmt::format("linear fit: {} s/view, intercept {} s, R^2 {}\n", format_real(r.fit.slope),
                                     format_real(r.fit.intercept), format_real(r.fit.r2));
        } else if (overhead->parsed()) {
            ospec.seed = c.seed;
            std::map<int, TriDistribution> models;
            if (overhead_models.empty()) {
                models.emplace(0, default_bracket_prior(c.H));
                ospec.bracket_frequencies = {{0, 1.0}};
            } else {
                const BracketModels m = load_bracket_models(overhead_models);
                double total = 0.0;
                for (const auto& [id, b] : m.brackets) {
                    total += static_cast<double>(b.broadcasts);
                }
                if (total <= 0.0) {
                    throw EmptyInputError("models carry no broadcast counts");
                }
                for (const auto& [id, b] : m.brackets) {
                    models.emplace(id, b.distribution);
                    ospec.bracket_frequencies[id] = static_cast<double>(b.broadcasts) / total;
                }
            }
            const OverheadResult r = estimate_ip_overhead(ospec, models);
            nlohmann::ordered_json j;
            j["overhead"] = r.overhead;
            j["rate_limit"] = ospec.rate_limit_k;
            j["bots"] = ospec.target_bots_n;
            j["trials"] = ospec.trials;
            j["excluded_brackets"] = r.excluded_brackets;
            nlohmann::ordered_json per = nlohmann::ordered_json::object();
            for (const auto& [id, v] : r.per_bracket) {
                per[std::to_string(id)] = v;
            }
            j["per_bracket"] = per;
            std::cout << j.dump(2) << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "flock: " << e.what() << '\n';
        return kExitUsage;
    } catch (const StageError& e) {
        std::cerr << "flock: stage " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "flock: " << e.what() << '\n';
        return kExitFailure;
    }
    return 0;
}

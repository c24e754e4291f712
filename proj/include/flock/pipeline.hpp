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

#ifndef FLOCK_PIPELINE_HPP
#define FLOCK_PIPELINE_HPP

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <flock/brackets.hpp>
#include <flock/cluster.hpp>
#include <flock/detect.hpp>
#include <flock/error.hpp>
#include <flock/ingest.hpp>
#include <flock/parallel.hpp>
#include <flock/prune.hpp>
#include <flock/random.hpp>

/**
 * @file pipeline.hpp
 *
 * @brief End-to-end runs: model brackets, flag broadcasts, prune their views.
 *
 * A detect run writes into `out_dir`:
 *
 * | file                   | contents                                                         |
 * |------------------------|------------------------------------------------------------------|
 * | deviance_report.csv    | broadcast_id,bracket,viewcount,deviance_bits,fence_value,botted  |
 * | botted_broadcasts.csv  | broadcast_id                                                     |
 * | botted_views.csv       | broadcast_id,view_id,client_ip,instance_id,heuristic,            |
 * |                        | deviance_before,deviance_after                                   |
 * | deviance_plot.csv      | see emit_deviance_plot_data                                      |
 * | behavior_plot.csv      | broadcast_id,view_id,start_frac,stay_frac,instance_id,pruned     |
 * | bracket_models.json    | see brackets.hpp                                                 |
 * | summary.json           | counts, mean deviances, wall time, resolved configuration        |
 *
 * Everything but summary.json is a pure function of the inputs and configuration.
 */

namespace flock {

struct PipelineConfig {
    int H = 20;
    double T = 30.0;
    double K = kDefaultFenceK;
    std::size_t U = kDefaultMinViewcount;
    double pseudocount = kDefaultBracketPseudocount;
    Heuristic heuristic = Heuristic::iterative;
    double tolerance = kDefaultPruneTolerance;
    int max_iterations = kDefaultMaxIterations;
    std::size_t min_cluster_size = 5;
    std::size_t max_k = 50;
    int bins_per_decade = kDefaultBinsPerDecade;
    std::size_t min_bin_samples = kDefaultMinBinSamples;
    std::uint64_t min_bracket_views = 100;
    std::uint64_t seed = 0;
    unsigned workers = 1;

    std::filesystem::path views;
    std::filesystem::path broadcasts;
    std::filesystem::path out_dir = "flock-out";
    /// Persisted models to reuse; empty means fit from the input.
    std::filesystem::path models;

    void validate() const {
        if (H < 2) {
            throw ConfigError("H must be at least 2");
        }
        if (!(T > 0.0)) {
            throw ConfigError("T must be positive");
        }
        if (!(K > 0.0)) {
            throw ConfigError("K must be positive");
        }
        if (U < 1) {
            throw ConfigError("U must be at least 1");
        }
        if (!(pseudocount >= 0.0)) {
            throw ConfigError("pseudocount must be non-negative");
        }
        if (!(tolerance >= 0.0) || max_iterations < 1 || min_cluster_size < 1 || max_k < 1 ||
            bins_per_decade < 1 || min_bin_samples < 1 || workers < 1) {
            throw ConfigError("tuning parameters must be positive");
        }
    }

    ClusterOptions cluster_options() const {
        ClusterOptions c;
        c.min_cluster_size = min_cluster_size;
        c.max_k = max_k;
        return c;
    }

    PruneOptions prune_options() const {
        PruneOptions p;
        p.tolerance = tolerance;
        p.max_iterations = max_iterations;
        return p;
    }
};

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["H"] = c.H;
    j["T"] = c.T;
    j["K"] = c.K;
    j["U"] = c.U;
    j["pseudocount"] = c.pseudocount;
    j["heuristic"] = std::string(to_string(c.heuristic));
    j["tolerance"] = c.tolerance;
    j["max_iterations"] = c.max_iterations;
    j["min_cluster_size"] = c.min_cluster_size;
    j["max_k"] = c.max_k;
    j["bins_per_decade"] = c.bins_per_decade;
    j["min_bin_samples"] = c.min_bin_samples;
    j["min_bracket_views"] = c.min_bracket_views;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["views"] = c.views.string();
    j["broadcasts"] = c.broadcasts.string();
    j["out_dir"] = c.out_dir.string();
    j["models"] = c.models.string();
    return j;
}

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (in.fail() || !in.eof()) {
        throw ConfigError("invalid value '" + value + "' for " + key);
    }
    return out;
}

}  // namespace detail

/// Applies one key=value setting; keys match the CLI long flag names.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_number;
    if (key == "H") {
        c.H = parse_number<int>(key, value);
    } else if (key == "T") {
        c.T = parse_number<double>(key, value);
    } else if (key == "K") {
        c.K = parse_number<double>(key, value);
    } else if (key == "U") {
        c.U = parse_number<std::size_t>(key, value);
    } else if (key == "pseudocount") {
        c.pseudocount = parse_number<double>(key, value);
    } else if (key == "heuristic") {
        c.heuristic = parse_heuristic(value);
    } else if (key == "tolerance") {
        c.tolerance = parse_number<double>(key, value);
    } else if (key == "max-iterations") {
        c.max_iterations = parse_number<int>(key, value);
    } else if (key == "min-cluster-size") {
        c.min_cluster_size = parse_number<std::size_t>(key, value);
    } else if (key == "max-k") {
        c.max_k = parse_number<std::size_t>(key, value);
    } else if (key == "bins-per-decade") {
        c.bins_per_decade = parse_number<int>(key, value);
    } else if (key == "min-bin-samples") {
        c.min_bin_samples = parse_number<std::size_t>(key, value);
    } else if (key == "min-bracket-views") {
        c.min_bracket_views = parse_number<std::uint64_t>(key, value);
    } else if (key == "seed") {
        c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "workers") {
        c.workers = parse_number<unsigned>(key, value);
    } else if (key == "views") {
        c.views = value;
    } else if (key == "broadcasts") {
        c.broadcasts = value;
    } else if (key == "out") {
        c.out_dir = value;
    } else if (key == "models") {
        c.models = value;
    } else {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
}

/**
 * Reads a flat key=value file into `c`. Blank lines and lines starting with
 * '#' are ignored; whitespace around keys and values is trimmed.
 */
inline void load_config_file(PipelineConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open configuration file " + path.string());
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        apply_setting(c, std::string(detail::trim(t.substr(0, eq))), std::string(detail::trim(t.substr(eq + 1))));
    }
}

/// A failure attributed to one pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunSummary {
    std::size_t broadcasts = 0;
    std::size_t views = 0;
    std::size_t rejected_rows = 0;
    std::size_t scored = 0;
    std::size_t missing_model = 0;
    std::size_t botted_broadcasts = 0;
    std::size_t botted_views = 0;
    double mean_original_deviance = 0.0;
    double mean_pruned_deviance = 0.0;
    double wall_seconds = 0.0;
    PipelineConfig config;
};

inline nlohmann::ordered_json to_json(const RunSummary& s) {
    nlohmann::ordered_json j;
    j["broadcasts"] = s.broadcasts;
    j["views"] = s.views;
    j["rejected_rows"] = s.rejected_rows;
    j["scored_broadcasts"] = s.scored;
    j["missing_model"] = s.missing_model;
    j["botted_broadcasts"] = s.botted_broadcasts;
    j["botted_views"] = s.botted_views;
    j["mean_original_deviance_bits"] = s.mean_original_deviance;
    j["mean_pruned_deviance_bits"] = s.mean_pruned_deviance;
    j["wall_seconds"] = s.wall_seconds;
    j["config"] = to_json(s.config);
    return j;
}

/// Pruning result for one broadcast, with what the reports need.
struct BroadcastPrune {
    std::string broadcast_id;
    Partition partition;
    PruneOutcome outcome;
};

/// Seed for one broadcast's clustering, independent of processing order.
inline std::uint64_t broadcast_seed(std::uint64_t run_seed, const std::string& broadcast_id) {
    return mix_seed(run_seed, stable_hash(broadcast_id));
}

inline BroadcastPrune prune_one(const PipelineConfig& c, const std::string& broadcast_id,
                                const std::vector<ViewFeature>& features, const TriDistribution& bracket) {
    BroadcastPrune r;
    r.broadcast_id = broadcast_id;
    r.partition = partition_views(features, c.cluster_options(), broadcast_seed(c.seed, broadcast_id));
    r.partition.broadcast_id = broadcast_id;
    r.outcome = prune_broadcast(r.partition, features, bracket, c.heuristic, c.prune_options());
    return r;
}

namespace detail {

/// Files written by a run; removed again unless the run commits.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    ~OutputSet() {
        if (committed_) {
            return;
        }
        std::error_code ec;
        for (const auto& p : written_) {
            std::filesystem::remove(p, ec);
        }
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
        std::filesystem::create_directories(dir_);
        const auto path = dir_ / name;
        written_.push_back(path);
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot write " + path.string());
        }
        body(out);
        if (!out) {
            throw IoError("failed writing " + path.string());
        }
    }

    void commit() { committed_ = true; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
    bool committed_ = false;
};

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

inline void write_botted_views(std::ostream& out, const Workload& w, const FeatureTable& features,
                               const std::vector<BroadcastPrune>& prunes, Heuristic h) {
    out << "broadcast_id,view_id,client_ip,instance_id,heuristic,deviance_before,deviance_after\n";
    for (const BroadcastPrune& p : prunes) {
        const auto views = w.views_of(p.broadcast_id);
        const auto& feats = features.at(p.broadcast_id);
        const std::set<int> pruned(p.outcome.pruned_instances.begin(), p.outcome.pruned_instances.end());
        std::vector<std::pair<std::size_t, int>> rows;
        for (const Instance& inst : p.partition.instances) {
            if (pruned.count(inst.instance_id) == 0) {
                continue;
            }
            for (std::size_t m : inst.members) {
                rows.emplace_back(m, inst.instance_id);
            }
        }
        std::sort(rows.begin(), rows.end());
        for (const auto& [m, inst] : rows) {
            out << p.broadcast_id << ',' << feats[m].view_id << ',' << views[m].client_ip << ',' << inst << ','
                << to_string(h) << ',' << format_real(p.outcome.original_deviance_bits) << ','
                << format_real(p.outcome.final_deviance_bits) << '\n';
        }
    }
}

inline void write_behavior_plot(std::ostream& out, const FeatureTable& features,
                                const std::vector<BroadcastPrune>& prunes) {
    out << "broadcast_id,view_id,start_frac,stay_frac,instance_id,pruned\n";
    for (const BroadcastPrune& p : prunes) {
        const auto& feats = features.at(p.broadcast_id);
        const std::set<int> pruned(p.outcome.pruned_instances.begin(), p.outcome.pruned_instances.end());
        std::vector<int> owner(feats.size(), -1);
        for (const Instance& inst : p.partition.instances) {
            for (std::size_t m : inst.members) {
                owner[m] = inst.instance_id;
            }
        }
        for (std::size_t m = 0; m < feats.size(); ++m) {
            out << p.broadcast_id << ',' << feats[m].view_id << ',' << format_real(feats[m].start_frac) << ','
                << format_real(feats[m].stay_frac) << ',' << owner[m] << ','
                << (pruned.count(owner[m]) != 0 ? 1 : 0) << '\n';
        }
    }
}

inline BracketModels acquire_models(const PipelineConfig& c, const FeatureTable& features,
                                    const BracketIndex& index) {
    if (!c.models.empty()) {
        BracketModels m = load_bracket_models(c.models);
        check_model_parameters(m, c.H, c.T);
        return m;
    }
    return build_bracket_models(features, index, c.H, c.pseudocount, c.min_bracket_views);
}

}  // namespace detail

/**
 * Ingest, model, detect and prune, writing every report into `out_dir`.
 *
 * Botted broadcasts are pruned independently (on `workers` threads) and
 * reported in broadcast-id order. On failure, files written so far are removed.
 */
inline RunSummary run_pipeline(const PipelineConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    c.validate();
    detail::OutputSet outputs(c.out_dir);
    RunSummary s;
    s.config = c;

    const Workload w = detail::stage("ingest", [&] { return load_workload(c.views, c.broadcasts); });
    s.broadcasts = w.broadcasts.size();
    s.views = w.view_count();
    s.rejected_rows = w.rejected;

    const FeatureTable features = detail::stage("ingest", [&] { return extract_features(w, c.H); });
    const BracketIndex index = detail::stage("model", [&] { return build_bracket_index(w.broadcasts, c.T); });
    const BracketModels models = detail::stage("model", [&] { return detail::acquire_models(c, features, index); });

    const ScoreResult scores = detail::stage("detect", [&] { return score_broadcasts(features, index, models, c.workers); });
    s.scored = scores.points.size();
    s.missing_model = scores.missing_model;
    const FenceModel fence = detail::stage("detect", [&] {
        return fit_fence(scores.points, c.K, c.bins_per_decade, c.min_bin_samples, c.U);
    });
    const std::set<std::string> botted = classify_broadcasts(scores.points, fence);
    s.botted_broadcasts = botted.size();

    const std::vector<std::string> botted_ids(botted.begin(), botted.end());
    std::vector<BroadcastPrune> prunes(botted_ids.size());
    detail::stage("prune", [&] {
        parallel_for(botted_ids.size(), c.workers, [&](std::size_t i) {
            const std::string& id = botted_ids[i];
            const int bracket = index.at(id);
            prunes[i] = prune_one(c, id, features.at(id), models.find(bracket)->distribution);
        });
        return 0;
    });
    for (const BroadcastPrune& p : prunes) {
        s.botted_views += p.outcome.botted_view_ids.size();
        s.mean_original_deviance += p.outcome.original_deviance_bits;
        s.mean_pruned_deviance += p.outcome.final_deviance_bits;
    }
    if (!prunes.empty()) {
        s.mean_original_deviance /= static_cast<double>(prunes.size());
        s.mean_pruned_deviance /= static_cast<double>(prunes.size());
    }

    detail::stage("report", [&] {
        outputs.write("deviance_report.csv", [&](std::ostream& o) { write_deviance_report(o, scores.points, fence); });
        outputs.write("botted_broadcasts.csv", [&](std::ostream& o) {
            o << "broadcast_id\n";
            for (const auto& id : botted_ids) {
                o << id << '\n';
            }
        });
        outputs.write("botted_views.csv", [&](std::ostream& o) {
            detail::write_botted_views(o, w, features, prunes, c.heuristic);
        });
        outputs.write("deviance_plot.csv", [&](std::ostream& o) { emit_deviance_plot_data(o, scores.points, &fence); });
        outputs.write("behavior_plot.csv", [&](std::ostream& o) { detail::write_behavior_plot(o, features, prunes); });
        if (c.models.empty()) {
            outputs.write("bracket_models.json", [&](std::ostream& o) { o << to_json(models).dump(1) << '\n'; });
        }
        s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        outputs.write("summary.json", [&](std::ostream& o) { o << to_json(s).dump(2) << '\n'; });
        return 0;
    });
    outputs.commit();
    return s;
}

/// Deviance scoring and classification only, against persisted models (never refit).
inline RunSummary run_score(const PipelineConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    c.validate();
    if (c.models.empty()) {
        throw ConfigError("score needs persisted bracket models (--models)");
    }
    detail::OutputSet outputs(c.out_dir);
    RunSummary s;
    s.config = c;
    const BracketModels models = detail::stage("model", [&] {
        BracketModels m = load_bracket_models(c.models);
        check_model_parameters(m, c.H, c.T);
        return m;
    });
    const Workload w = detail::stage("ingest", [&] { return load_workload(c.views, c.broadcasts); });
    s.broadcasts = w.broadcasts.size();
    s.views = w.view_count();
    s.rejected_rows = w.rejected;
    const ScoreResult scores = detail::stage("detect", [&] { return score_broadcasts(w, models, c.H, c.workers); });
    s.scored = scores.points.size();
    s.missing_model = scores.missing_model;
    const FenceModel fence = detail::stage("detect", [&] {
        return fit_fence(scores.points, c.K, c.bins_per_decade, c.min_bin_samples, c.U);
    });
    const std::set<std::string> botted = classify_broadcasts(scores.points, fence);
    s.botted_broadcasts = botted.size();
    detail::stage("report", [&] {
        outputs.write("deviance_report.csv", [&](std::ostream& o) { write_deviance_report(o, scores.points, fence); });
        outputs.write("botted_broadcasts.csv", [&](std::ostream& o) {
            o << "broadcast_id\n";
            for (const auto& id : botted) {
                o << id << '\n';
            }
        });
        outputs.write("deviance_plot.csv", [&](std::ostream& o) { emit_deviance_plot_data(o, scores.points, &fence); });
        s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        outputs.write("summary.json", [&](std::ostream& o) { o << to_json(s).dump(2) << '\n'; });
        return 0;
    });
    outputs.commit();
    return s;
}

/// Partitions and prunes a single broadcast, whether or not it clears the fence.
inline BroadcastPrune run_prune(const PipelineConfig& c, const std::string& broadcast_id) {
    c.validate();
    detail::OutputSet outputs(c.out_dir);
    const Workload w = detail::stage("ingest", [&] { return load_workload(c.views, c.broadcasts); });
    const FeatureTable features = detail::stage("ingest", [&] { return extract_features(w, c.H); });
    if (w.find(broadcast_id) == nullptr) {
        throw StageError("ingest", "unknown broadcast '" + broadcast_id + "'");
    }
    if (features.at(broadcast_id).empty()) {
        throw StageError("ingest", "broadcast '" + broadcast_id + "' has no accepted views");
    }
    const BracketIndex index = build_bracket_index(w.broadcasts, c.T);
    const BracketModels models = detail::stage("model", [&] { return detail::acquire_models(c, features, index); });
    const BracketModel* model = models.find(index.at(broadcast_id));
    if (model == nullptr) {
        throw StageError("model", "no bracket model for broadcast '" + broadcast_id + "'");
    }
    std::vector<BroadcastPrune> prunes;
    prunes.push_back(detail::stage("prune", [&] {
        return prune_one(c, broadcast_id, features.at(broadcast_id), model->distribution);
    }));
    detail::stage("report", [&] {
        outputs.write("botted_views.csv", [&](std::ostream& o) {
            detail::write_botted_views(o, w, features, prunes, c.heuristic);
        });
        outputs.write("behavior_plot.csv", [&](std::ostream& o) { detail::write_behavior_plot(o, features, prunes); });
        return 0;
    });
    outputs.commit();
    return std::move(prunes.front());
}

}  // namespace flock

#endif  // FLOCK_PIPELINE_HPP

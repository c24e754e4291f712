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

#ifndef FLOCK_BRACKETS_HPP
#define FLOCK_BRACKETS_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <flock/error.hpp>
#include <flock/ingest.hpp>
#include <flock/model.hpp>

/**
 * @file brackets.hpp
 *
 * @brief Per-bracket behavior models and their on-disk form.
 *
 * The persisted file is JSON with fields in this order:
 *
 *     {
 *       "format": "flock-bracket-models",
 *       "version": 1,
 *       "H": <bins per axis>,
 *       "T": <bracket width, minutes>,
 *       "pseudocount": <smoothing added per cell>,
 *       "brackets": [
 *         {"bracket": <id>, "broadcasts": <count>, "total_views": <count>,
 *          "mass": [<H(H+1)/2 reals, row-major over the feasible triangle>]},
 *         ...
 *       ]
 *     }
 *
 * Row-major order lists cells (1,1), (1,2) ... (1,H), (2,1) ... (2,H-1) ... (H,1).
 */

namespace flock {

using FeatureTable = std::map<std::string, std::vector<ViewFeature>>;

/// Features of every accepted view, keyed by broadcast id.
inline FeatureTable extract_features(const Workload& w, int H) {
    FeatureTable table;
    for (const BroadcastRecord& b : w.broadcasts) {
        table.emplace(b.broadcast_id, broadcast_features(w, b, H));
    }
    return table;
}

struct BracketModel {
    TriDistribution distribution;
    std::uint64_t total_views = 0;
    std::size_t broadcasts = 0;
};

struct BracketModels {
    int H = 0;
    double T = 0.0;
    double pseudocount = kDefaultBracketPseudocount;
    std::map<int, BracketModel> brackets;

    const BracketModel* find(int bracket) const {
        auto it = brackets.find(bracket);
        return it == brackets.end() ? nullptr : &it->second;
    }
};

/**
 * Pools the views of every broadcast in each bracket and smooths the result.
 *
 * Brackets with fewer than `min_bracket_views` views get no model; their
 * broadcasts are skipped during scoring.
 */
inline BracketModels build_bracket_models(const FeatureTable& features, const BracketIndex& index,
                                          int H, double pseudocount,
                                          std::uint64_t min_bracket_views = 0) {
    BracketModels models;
    models.H = H;
    models.T = index.bracket_width_min;
    models.pseudocount = pseudocount;
    for (const auto& [bracket, members] : index.members) {
        TriHistogram pooled(H);
        for (const std::string& id : members) {
            auto it = features.find(id);
            if (it != features.end()) {
                pooled += fit_histogram(it->second, H);
            }
        }
        if (pooled.total() == 0 || pooled.total() < min_bracket_views) {
            continue;
        }
        models.brackets.emplace(
            bracket, BracketModel{to_distribution(pooled, pseudocount), pooled.total(), members.size()});
    }
    return models;
}

inline nlohmann::ordered_json to_json(const BracketModels& models) {
    nlohmann::ordered_json j;
    j["format"] = "flock-bracket-models";
    j["version"] = 1;
    j["H"] = models.H;
    j["T"] = models.T;
    j["pseudocount"] = models.pseudocount;
    auto& arr = j["brackets"] = nlohmann::ordered_json::array();
    for (const auto& [bracket, model] : models.brackets) {
        nlohmann::ordered_json b;
        b["bracket"] = bracket;
        b["broadcasts"] = model.broadcasts;
        b["total_views"] = model.total_views;
        const auto m = model.distribution.masses();
        b["mass"] = std::vector<double>(m.begin(), m.end());
        arr.push_back(std::move(b));
    }
    return j;
}

inline BracketModels bracket_models_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "flock-bracket-models") {
            throw IoError("not a bracket model file");
        }
        if (j.at("version").get<int>() != 1) {
            throw IoError("unsupported bracket model version");
        }
        BracketModels models;
        models.H = j.at("H").get<int>();
        models.T = j.at("T").get<double>();
        models.pseudocount = j.at("pseudocount").get<double>();
        for (const auto& b : j.at("brackets")) {
            auto mass = b.at("mass").get<std::vector<double>>();
            BracketModel model{TriDistribution(models.H, std::move(mass), models.pseudocount > 0.0),
                               b.at("total_views").get<std::uint64_t>(),
                               b.at("broadcasts").get<std::size_t>()};
            models.brackets.emplace(b.at("bracket").get<int>(), std::move(model));
        }
        return models;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed bracket model file: ") + e.what());
    }
}

inline void save_bracket_models(const BracketModels& models, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << to_json(models).dump(1) << '\n';
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

inline BracketModels load_bracket_models(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed bracket model file " + path.string() + ": " + e.what());
    }
    return bracket_models_from_json(j);
}

/// Refuses models built with a different H or T than the caller runs with.
inline void check_model_parameters(const BracketModels& models, int H, double T) {
    if (models.H != H || models.T != T) {
        throw ModelMismatchError("bracket models were built with H=" + std::to_string(models.H) +
                                 " T=" + std::to_string(models.T) + " but the run uses H=" +
                                 std::to_string(H) + " T=" + std::to_string(T));
    }
}

}  // namespace flock

#endif  // FLOCK_BRACKETS_HPP

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

#ifndef FLOCK_DETECT_HPP
#define FLOCK_DETECT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include <flock/brackets.hpp>
#include <flock/error.hpp>
#include <flock/ingest.hpp>
#include <flock/model.hpp>
#include <flock/parallel.hpp>

/**
 * @file detect.hpp
 *
 * @brief Broadcast deviance scoring and the log-binned Q3 + K*IQR fence.
 */

namespace flock {

/// One broadcast on the viewcount-deviance plane.
struct DeviancePoint {
    std::string broadcast_id;
    std::size_t viewcount = 0;
    double deviance_bits = 0.0;
    int bracket = 0;
};

struct ScoreResult {
    std::vector<DeviancePoint> points;
    /// Broadcasts skipped because their bracket has no model.
    std::size_t missing_model = 0;
};

/**
 * Scores each broadcast with at least one view against its own bracket model.
 *
 * Points come out in broadcast-id order regardless of `workers`.
 */
inline ScoreResult score_broadcasts(const FeatureTable& features, const BracketIndex& index,
                                    const BracketModels& models, unsigned workers = 1) {
    std::vector<const std::pair<const std::string, std::vector<ViewFeature>>*> todo;
    for (const auto& entry : features) {
        if (!entry.second.empty()) {
            todo.push_back(&entry);
        }
    }
    std::vector<std::optional<DeviancePoint>> slots(todo.size());
    parallel_for(todo.size(), workers, [&](std::size_t i) {
        const auto& [id, feats] = *todo[i];
        const int bracket = index.at(id);
        const BracketModel* model = models.find(bracket);
        if (model == nullptr) {
            return;
        }
        const TriHistogram h = fit_histogram(feats, models.H);
        slots[i] = DeviancePoint{id, feats.size(), kl_divergence(h, model->distribution), bracket};
    });
    ScoreResult result;
    for (auto& slot : slots) {
        if (slot) {
            result.points.push_back(std::move(*slot));
        } else {
            ++result.missing_model;
        }
    }
    return result;
}

inline ScoreResult score_broadcasts(const Workload& w, const BracketModels& models, int H,
                                    unsigned workers = 1) {
    if (models.H != H) {
        throw ModelMismatchError("bracket models use a different bin count");
    }
    const BracketIndex index = build_bracket_index(w.broadcasts, models.T);
    return score_broadcasts(extract_features(w, H), index, models, workers);
}

/**
 * Sample quantile by linear interpolation between order statistics.
 *
 * With sorted x[0..n-1] and h = (n-1)p, returns x[floor h] + frac(h) *
 * (x[floor h + 1] - x[floor h]).
 */
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) {
        throw EmptyInputError("quantile of an empty sample");
    }
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Raw logarithmic bin of a viewcount.
inline int viewcount_bin(std::size_t viewcount, int bins_per_decade) {
    return static_cast<int>(
        std::floor(std::log10(static_cast<double>(std::max<std::size_t>(viewcount, 1))) *
                   bins_per_decade));
}

struct FenceBin {
    /// First raw log bin covered; the bin extends up to the next bin's first raw bin.
    int first_raw_bin = 0;
    std::size_t samples = 0;
    double q1 = 0.0;
    double q3 = 0.0;
    double fence = 0.0;
};

/**
 * Moving Q3 + K*IQR decision boundary over log-binned viewcount.
 *
 * `bin_edges` has one more entry than `bins`: the lower viewcount edge of each
 * bin followed by the upper edge of the last populated raw bin. Viewcounts
 * outside the edges use the nearest bin.
 */
struct FenceModel {
    std::vector<double> bin_edges;
    std::vector<FenceBin> bins;
    double K = 3.0;
    std::size_t U = 50;
    int bins_per_decade = 5;

    std::size_t bin_for(std::size_t viewcount) const {
        const int raw = viewcount_bin(viewcount, bins_per_decade);
        std::size_t b = 0;
        while (b + 1 < bins.size() && bins[b + 1].first_raw_bin <= raw) {
            ++b;
        }
        return b;
    }

    double fence_for(std::size_t viewcount) const { return bins.at(bin_for(viewcount)).fence; }
};

inline constexpr double kDefaultFenceK = 3.0;
inline constexpr std::size_t kDefaultMinViewcount = 50;
inline constexpr int kDefaultBinsPerDecade = 5;
inline constexpr std::size_t kDefaultMinBinSamples = 30;

/**
 * Fits the fence on every point with viewcount >= U.
 *
 * Points are bucketed by floor(log10(viewcount) * bins_per_decade). Walking
 * upward, a bucket with fewer than `min_bin_samples` points absorbs its right
 * neighbours until it has enough; a short trailing bucket joins the one
 * before it.
 */
inline FenceModel fit_fence(std::span<const DeviancePoint> points, double K, int bins_per_decade,
                            std::size_t min_bin_samples, std::size_t U) {
    if (points.empty()) {
        throw EmptyInputError("no points to fit a fence on");
    }
    if (bins_per_decade < 1 || min_bin_samples < 1 || U < 1) {
        throw ConfigError("fence parameters must be positive");
    }
    std::map<int, std::vector<double>> raw;
    std::size_t eligible = 0;
    for (const DeviancePoint& p : points) {
        if (p.viewcount >= U) {
            raw[viewcount_bin(p.viewcount, bins_per_decade)].push_back(p.deviance_bits);
            ++eligible;
        }
    }
    if (eligible == 0) {
        throw EmptyInputError("every broadcast is below the minimum viewcount");
    }
    if (eligible < min_bin_samples) {
        throw EmptyInputError("fewer eligible broadcasts than the minimum bin sample count");
    }

    struct Group {
        int first_raw_bin;
        std::vector<double> values;
    };
    std::vector<Group> groups;
    bool open = false;
    for (auto& [bin, values] : raw) {
        if (!open) {
            groups.push_back(Group{bin, {}});
            open = true;
        }
        auto& g = groups.back().values;
        g.insert(g.end(), values.begin(), values.end());
        if (g.size() >= min_bin_samples) {
            open = false;
        }
    }
    if (groups.size() > 1 && groups.back().values.size() < min_bin_samples) {
        auto tail = std::move(groups.back().values);
        groups.pop_back();
        auto& g = groups.back().values;
        g.insert(g.end(), tail.begin(), tail.end());
    }

    FenceModel model;
    model.K = K;
    model.U = U;
    model.bins_per_decade = bins_per_decade;
    for (auto& g : groups) {
        std::sort(g.values.begin(), g.values.end());
        FenceBin bin;
        bin.first_raw_bin = g.first_raw_bin;
        bin.samples = g.values.size();
        bin.q1 = quantile_sorted(g.values, 0.25);
        bin.q3 = quantile_sorted(g.values, 0.75);
        bin.fence = bin.q3 + K * (bin.q3 - bin.q1);
        model.bins.push_back(bin);
        model.bin_edges.push_back(std::pow(10.0, static_cast<double>(g.first_raw_bin) / bins_per_decade));
    }
    model.bin_edges.push_back(
        std::pow(10.0, static_cast<double>(raw.rbegin()->first + 1) / bins_per_decade));
    return model;
}

inline bool is_botted(const DeviancePoint& p, const FenceModel& fence) {
    return p.viewcount >= fence.U && p.deviance_bits > fence.fence_for(p.viewcount);
}

/// Ids of broadcasts that clear the viewcount gate and lie strictly above the fence.
inline std::set<std::string> classify_broadcasts(std::span<const DeviancePoint> points,
                                                 const FenceModel& fence) {
    std::set<std::string> botted;
    for (const DeviancePoint& p : points) {
        if (is_botted(p, fence)) {
            botted.insert(p.broadcast_id);
        }
    }
    return botted;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_real(double v) { return fmt::format("{}", v); }

inline void write_deviance_report(std::ostream& out, std::span<const DeviancePoint> points,
                                  const FenceModel& fence) {
    out << "broadcast_id,bracket,viewcount,deviance_bits,fence_value,botted\n";
    for (const DeviancePoint& p : points) {
        out << p.broadcast_id << ',' << p.bracket << ',' << p.viewcount << ','
            << format_real(p.deviance_bits) << ',' << format_real(fence.fence_for(p.viewcount))
            << ',' << (is_botted(p, fence) ? 1 : 0) << '\n';
    }
}

/**
 * Viewcount-deviance plot data.
 *
 * Columns are kind,viewcount,deviance_bits,botted. Rows of kind `point` carry a
 * broadcast; rows of kind `fence` are polyline vertices, two per fence bin at
 * its lower and upper viewcount edge, with an empty botted column. An empty
 * point set produces only the header.
 */
inline void emit_deviance_plot_data(std::ostream& out, std::span<const DeviancePoint> points,
                                    const FenceModel* fence) {
    out << "kind,viewcount,deviance_bits,botted\n";
    if (points.empty()) {
        return;
    }
    for (const DeviancePoint& p : points) {
        const bool botted = fence != nullptr && is_botted(p, *fence);
        out << "point," << p.viewcount << ',' << format_real(p.deviance_bits) << ','
            << (botted ? 1 : 0) << '\n';
    }
    if (fence == nullptr) {
        return;
    }
    for (std::size_t b = 0; b < fence->bins.size(); ++b) {
        const std::string value = format_real(fence->bins[b].fence);
        out << "fence," << format_real(fence->bin_edges[b]) << ',' << value << ",\n";
        out << "fence," << format_real(fence->bin_edges[b + 1]) << ',' << value << ",\n";
    }
}

struct PlotPointRow {
    std::size_t viewcount = 0;
    double deviance_bits = 0.0;
    bool botted = false;
};

struct PlotVertexRow {
    double viewcount = 0.0;
    double fence = 0.0;
};

struct DeviancePlotData {
    std::vector<PlotPointRow> points;
    std::vector<PlotVertexRow> fence;
};

inline DeviancePlotData parse_deviance_plot_data(std::istream& in) {
    static constexpr std::string_view header[] = {"kind", "viewcount", "deviance_bits", "botted"};
    detail::expect_header(in, header, "deviance plot data");
    DeviancePlotData data;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto f = detail::split_fields(line);
        if (f.size() != 4) {
            throw IoError("malformed plot row: " + line);
        }
        if (f[0] == "point") {
            const auto vc = detail::parse_int(f[1]);
            if (!vc) {
                throw IoError("malformed plot row: " + line);
            }
            data.points.push_back(
                PlotPointRow{static_cast<std::size_t>(*vc), std::stod(std::string(f[2])), f[3] == "1"});
        } else if (f[0] == "fence") {
            data.fence.push_back(
                PlotVertexRow{std::stod(std::string(f[1])), std::stod(std::string(f[2]))});
        } else {
            throw IoError("unknown plot row kind: " + line);
        }
    }
    return data;
}

}  // namespace flock

#endif  // FLOCK_DETECT_HPP

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

#ifndef FLOCK_INGEST_HPP
#define FLOCK_INGEST_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <flock/error.hpp>
#include <flock/feature.hpp>

/**
 * @file ingest.hpp
 *
 * @brief Parsing of view/broadcast logs into a joined workload.
 *
 * Both files are comma-separated with a mandatory header row:
 *
 *     broadcast_id,channel_id,start_ts,end_ts
 *     view_id,client_ip,broadcast_id,start_ts,end_ts
 *
 * Timestamps are integer epoch seconds. Fields are not quoted.
 */

namespace flock {

struct BroadcastRecord {
    std::string broadcast_id;
    std::string channel_id;
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;

    std::int64_t duration_seconds() const { return end_ts - start_ts; }
};

struct ViewRecord {
    std::string view_id;
    std::string client_ip;
    std::string broadcast_id;
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;
};

/**
 * Broadcasts joined to their views.
 *
 * Broadcasts are kept sorted by id and every accepted view has been clamped
 * into its broadcast's lifetime.
 */
struct Workload {
    std::vector<BroadcastRecord> broadcasts;
    std::map<std::string, std::vector<ViewRecord>> views_by_broadcast;
    std::size_t rejected = 0;

    const BroadcastRecord* find(std::string_view broadcast_id) const {
        auto it = std::lower_bound(
            broadcasts.begin(), broadcasts.end(), broadcast_id,
            [](const BroadcastRecord& b, std::string_view id) { return b.broadcast_id < id; });
        if (it == broadcasts.end() || it->broadcast_id != broadcast_id) {
            return nullptr;
        }
        return &*it;
    }

    std::span<const ViewRecord> views_of(const std::string& broadcast_id) const {
        auto it = views_by_broadcast.find(broadcast_id);
        if (it == views_by_broadcast.end()) {
            return {};
        }
        return it->second;
    }

    std::size_t view_count() const {
        std::size_t n = 0;
        for (const auto& [id, views] : views_by_broadcast) {
            n += views.size();
        }
        return n;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t begin = 0;
    while (true) {
        const auto comma = line.find(',', begin);
        fields.push_back(trim(line.substr(begin, comma - begin)));
        if (comma == std::string_view::npos) {
            break;
        }
        begin = comma + 1;
    }
    return fields;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || s.empty()) {
        return std::nullopt;
    }
    return value;
}

inline void expect_header(std::istream& in, std::span<const std::string_view> names,
                          const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(std::string("missing header row in ") + what);
    }
    const auto fields = split_fields(line);
    if (!std::equal(fields.begin(), fields.end(), names.begin(), names.end())) {
        throw IoError(std::string("unexpected header row in ") + what);
    }
}

}  // namespace detail

inline constexpr std::string_view kBroadcastHeader[] = {"broadcast_id", "channel_id", "start_ts",
                                                        "end_ts"};
inline constexpr std::string_view kViewHeader[] = {"view_id", "client_ip", "broadcast_id",
                                                   "start_ts", "end_ts"};

/**
 * Reads both logs and joins views to broadcasts.
 *
 * Malformed rows, broadcasts with non-positive duration, duplicate broadcast
 * ids, orphan views and views that are empty after clamping to their
 * broadcast are counted in `rejected` and skipped.
 */
inline Workload parse_workload(std::istream& view_source, std::istream& broadcast_source) {
    if (!view_source || !broadcast_source) {
        throw IoError("unreadable input stream");
    }
    Workload w;
    detail::expect_header(broadcast_source, kBroadcastHeader, "broadcasts file");
    detail::expect_header(view_source, kViewHeader, "views file");

    std::map<std::string, BroadcastRecord> by_id;
    std::string line;
    while (std::getline(broadcast_source, line)) {
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto f = detail::split_fields(line);
        if (f.size() != 4 || f[0].empty()) {
            ++w.rejected;
            continue;
        }
        const auto start = detail::parse_int(f[2]);
        const auto end = detail::parse_int(f[3]);
        if (!start || !end || *end <= *start) {
            ++w.rejected;
            continue;
        }
        BroadcastRecord b{std::string(f[0]), std::string(f[1]), *start, *end};
        if (!by_id.emplace(b.broadcast_id, b).second) {
            ++w.rejected;
        }
    }
    if (broadcast_source.bad()) {
        throw IoError("error while reading broadcasts file");
    }
    if (by_id.empty()) {
        throw EmptyInputError("no valid broadcasts in input");
    }

    while (std::getline(view_source, line)) {
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto f = detail::split_fields(line);
        if (f.size() != 5 || f[0].empty()) {
            ++w.rejected;
            continue;
        }
        const auto start = detail::parse_int(f[3]);
        const auto end = detail::parse_int(f[4]);
        auto owner = by_id.find(std::string(f[2]));
        if (!start || !end || owner == by_id.end()) {
            ++w.rejected;
            continue;
        }
        const BroadcastRecord& b = owner->second;
        const std::int64_t clamped_start = std::max(*start, b.start_ts);
        const std::int64_t clamped_end = std::min(*end, b.end_ts);
        // Also drops views that begin at (or after) the broadcast's end.
        if (clamped_end <= clamped_start) {
            ++w.rejected;
            continue;
        }
        w.views_by_broadcast[b.broadcast_id].push_back(
            ViewRecord{std::string(f[0]), std::string(f[1]), b.broadcast_id, clamped_start,
                       clamped_end});
    }
    if (view_source.bad()) {
        throw IoError("error while reading views file");
    }

    w.broadcasts.reserve(by_id.size());
    for (auto& [id, b] : by_id) {
        w.broadcasts.push_back(std::move(b));
    }
    return w;
}

inline Workload load_workload(const std::filesystem::path& views_path,
                              const std::filesystem::path& broadcasts_path) {
    std::ifstream views(views_path);
    if (!views) {
        throw IoError("cannot open views file " + views_path.string());
    }
    std::ifstream broadcasts(broadcasts_path);
    if (!broadcasts) {
        throw IoError("cannot open broadcasts file " + broadcasts_path.string());
    }
    return parse_workload(views, broadcasts);
}

/**
 * Fractional start and stay of `v` within `b`, binned with `H` bins per axis.
 *
 * Timestamps are clamped into the broadcast first.
 */
inline ViewFeature compute_view_features(const ViewRecord& v, const BroadcastRecord& b, int H) {
    const std::int64_t duration = b.duration_seconds();
    if (duration <= 0) {
        throw FeatureError("broadcast " + b.broadcast_id + " has no duration");
    }
    const std::int64_t start = std::max(v.start_ts, b.start_ts);
    const std::int64_t end = std::min(v.end_ts, b.end_ts);
    if (end <= start) {
        throw FeatureError("view " + v.view_id + " is empty after clamping");
    }
    const double span = static_cast<double>(duration);
    const double start_frac = static_cast<double>(start - b.start_ts) / span;
    const double stay_frac = static_cast<double>(end - start) / span;
    return make_feature(v.view_id, start_frac, stay_frac, H);
}

/// Features of every accepted view of `b`, in input order.
inline std::vector<ViewFeature> broadcast_features(const Workload& w, const BroadcastRecord& b,
                                                   int H) {
    const auto views = w.views_of(b.broadcast_id);
    std::vector<ViewFeature> out;
    out.reserve(views.size());
    for (const ViewRecord& v : views) {
        out.push_back(compute_view_features(v, b, H));
    }
    return out;
}

/// Duration brackets of width `bracket_width_min` minutes.
struct BracketIndex {
    double bracket_width_min = 0.0;
    std::map<std::string, int> bracket_of;
    std::map<int, std::vector<std::string>> members;

    int at(const std::string& broadcast_id) const { return bracket_of.at(broadcast_id); }
};

inline int bracket_for(std::int64_t duration_seconds, double bracket_width_min) {
    const double minutes = static_cast<double>(duration_seconds) / 60.0;
    return static_cast<int>(std::floor(minutes / bracket_width_min));
}

inline BracketIndex build_bracket_index(std::span<const BroadcastRecord> broadcasts,
                                        double bracket_width_min) {
    if (!(bracket_width_min > 0.0)) {
        throw ConfigError("bracket width must be positive");
    }
    BracketIndex index;
    index.bracket_width_min = bracket_width_min;
    for (const BroadcastRecord& b : broadcasts) {
        const int t = bracket_for(b.duration_seconds(), bracket_width_min);
        index.bracket_of[b.broadcast_id] = t;
        index.members[t].push_back(b.broadcast_id);
    }
    return index;
}

}  // namespace flock

#endif  // FLOCK_INGEST_HPP

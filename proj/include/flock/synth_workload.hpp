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

#ifndef FLOCK_SYNTH_WORKLOAD_HPP
#define FLOCK_SYNTH_WORKLOAD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include <flock/error.hpp>
#include <flock/ingest.hpp>
#include <flock/random.hpp>
#include <flock/synth.hpp>

/**
 * @file synth_workload.hpp
 *
 * @brief Whole labeled workloads (timestamped logs) of clean and attacked broadcasts.
 */

namespace flock {

struct SynthWorkloadSpec {
    std::size_t clean_broadcasts = 500;
    std::size_t attacked_broadcasts = 25;
    /// Authentic views per broadcast are log-uniform in [min_views, max_views].
    std::size_t min_views = 100;
    std::size_t max_views = 10000;
    double min_bot_ratio = 1.0;
    double max_bot_ratio = 2.0;
    double min_duration_min = 60.0;
    double max_duration_min = 120.0;
    double delta = 0.1;
    double jitter_sigma = 0.02;
    int prior_bins = 20;
    std::int64_t epoch_start = 1462060800;
    std::uint64_t seed = 0;
};

struct SynthWorkload {
    std::vector<BroadcastRecord> broadcasts;
    std::vector<ViewRecord> views;
    std::map<std::string, Label> labels;
    std::set<std::string> attacked;
};

namespace detail {

inline std::string authentic_ip(std::uint64_t h) {
    return fmt::format("10.{}.{}.{}", (h >> 16) & 255, (h >> 8) & 255, h & 255);
}

}  // namespace detail

/**
 * Clean broadcasts carry only authentic views; attacked ones also carry a
 * lockstep attack with a random gap family and a bot ratio drawn uniformly
 * from [min_bot_ratio, max_bot_ratio]. Attacked broadcasts are spread evenly
 * through the id sequence. Bots share a small pool of addresses.
 */
inline SynthWorkload generate_synth_workload(const SynthWorkloadSpec& spec, const TriDistribution& prior) {
    if (spec.min_views < 1 || spec.max_views < spec.min_views ||
        !(spec.min_duration_min > 0.0) || spec.max_duration_min < spec.min_duration_min) {
        throw ConfigError("invalid synthetic workload ranges");
    }
    SynthWorkload out;
    const std::size_t total = spec.clean_broadcasts + spec.attacked_broadcasts;
    std::set<std::size_t> attacked_slots;
    for (std::size_t a = 0; a < spec.attacked_broadcasts; ++a) {
        attacked_slots.insert(a * total / std::max<std::size_t>(spec.attacked_broadcasts, 1));
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double log_lo = std::log(static_cast<double>(spec.min_views));
    const double log_hi = std::log(static_cast<double>(spec.max_views));

    auto emit = [&](const BroadcastRecord& b, const ViewFeature& f, const std::string& ip, Label label) {
        const double dur = static_cast<double>(b.duration_seconds());
        std::int64_t start = b.start_ts + std::llround(f.start_frac * dur);
        start = std::min(start, b.end_ts - 1);
        std::int64_t end = start + std::max<std::int64_t>(1, std::llround(f.stay_frac * dur));
        end = std::min(end, b.end_ts);
        const std::string id = b.broadcast_id + "-" + f.view_id;
        out.views.push_back(ViewRecord{id, ip, b.broadcast_id, start, end});
        out.labels.emplace(id, label);
    };

    for (std::size_t i = 0; i < total; ++i) {
        BroadcastRecord b;
        b.broadcast_id = fmt::format("b{:05d}", i);
        b.channel_id = fmt::format("c{:05d}", i);
        const double minutes =
            spec.min_duration_min + u(rng) * (spec.max_duration_min - spec.min_duration_min);
        b.start_ts = spec.epoch_start + static_cast<std::int64_t>(i) * 37;
        b.end_ts = b.start_ts + std::max<std::int64_t>(60, std::llround(minutes * 60.0));
        const auto n_auth = static_cast<std::size_t>(std::llround(std::exp(log_lo + u(rng) * (log_hi - log_lo))));
        const std::uint64_t bseed = mix_seed(spec.seed, i + 1);

        for (const ViewFeature& f : sample_authentic_views(prior, n_auth, spec.jitter_sigma, mix_seed(bseed, 1), "a")) {
            emit(b, f, detail::authentic_ip(stable_hash(b.broadcast_id + f.view_id)), Label::authentic);
        }
        if (attacked_slots.count(i) != 0) {
            AttackSpec attack;
            attack.n_authentic = n_auth;
            attack.bot_ratio = spec.min_bot_ratio + u(rng) * (spec.max_bot_ratio - spec.min_bot_ratio);
            const GapFamily family = kAllGapFamilies[static_cast<std::size_t>(u(rng) * 4.0) % 4];
            attack.iat = GapDistribution::defaults(family);
            attack.itt = GapDistribution::defaults(family);
            attack.delta = spec.delta;
            attack.seed = mix_seed(bseed, 2);
            std::size_t k = 0;
            for (const ViewFeature& f : generate_attack(attack, prior.bins(), "x")) {
                emit(b, f, fmt::format("203.0.113.{}", k++ % 64), Label::botted);
            }
            out.attacked.insert(b.broadcast_id);
        }
        out.broadcasts.push_back(std::move(b));
    }
    return out;
}

inline void write_broadcasts_csv(std::ostream& out, const std::vector<BroadcastRecord>& broadcasts) {
    out << "broadcast_id,channel_id,start_ts,end_ts\n";
    for (const BroadcastRecord& b : broadcasts) {
        out << b.broadcast_id << ',' << b.channel_id << ',' << b.start_ts << ',' << b.end_ts << '\n';
    }
}

inline void write_views_csv(std::ostream& out, const std::vector<ViewRecord>& views) {
    out << "view_id,client_ip,broadcast_id,start_ts,end_ts\n";
    for (const ViewRecord& v : views) {
        out << v.view_id << ',' << v.client_ip << ',' << v.broadcast_id << ',' << v.start_ts << ','
            << v.end_ts << '\n';
    }
}

inline void write_labels_csv(std::ostream& out, const std::map<std::string, Label>& labels) {
    out << "view_id,label\n";
    for (const auto& [id, label] : labels) {
        out << id << ',' << (label == Label::botted ? "botted" : "authentic") << '\n';
    }
}

/// Writes views.csv, broadcasts.csv and labels.csv into `dir`.
inline void write_synth_workload(const SynthWorkload& w, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) {
            throw IoError("cannot write " + (dir / name).string());
        }
        return f;
    };
    auto views = open("views.csv");
    write_views_csv(views, w.views);
    auto broadcasts = open("broadcasts.csv");
    write_broadcasts_csv(broadcasts, w.broadcasts);
    auto labels = open("labels.csv");
    write_labels_csv(labels, w.labels);
}

/// Round-trips the generated logs through the regular parser.
inline Workload to_workload(const SynthWorkload& w) {
    std::stringstream views;
    std::stringstream broadcasts;
    write_views_csv(views, w.views);
    write_broadcasts_csv(broadcasts, w.broadcasts);
    return parse_workload(views, broadcasts);
}

}  // namespace flock

#endif  // FLOCK_SYNTH_WORKLOAD_HPP

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

#ifndef FLOCK_CLUSTER_HPP
#define FLOCK_CLUSTER_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <flock/error.hpp>
#include <flock/feature.hpp>
#include <flock/random.hpp>

/**
 * @file cluster.hpp
 *
 * @brief Partitioning of a broadcast's views into lockstep instances.
 *
 * Starting from a single cluster, each cluster is split in two with a
 * minibatch 2-means and the split is kept when it raises the Bayesian
 * Information Criterion of a spherical Gaussian model fitted to that
 * cluster's points. Children are queued and tried in turn, breadth first.
 */

namespace flock {

struct Point2 {
    double start = 0.0;
    double stay = 0.0;
};

/// One lockstep instance: indices into the feature list the partition was built from.
struct Instance {
    int instance_id = 0;
    std::vector<std::size_t> members;
    Point2 centroid;
};

struct Partition {
    std::string broadcast_id;
    std::vector<Instance> instances;

    std::size_t view_count() const {
        std::size_t n = 0;
        for (const Instance& i : instances) {
            n += i.members.size();
        }
        return n;
    }
};

/// How the split test models within-cluster spread.
enum class VarianceModel {
    /// One variance shared by all clusters of a candidate model.
    pooled,
    /// Each cluster carries its own spherical variance.
    per_cluster,
};

inline std::string_view to_string(VarianceModel v) {
    return v == VarianceModel::pooled ? "pooled" : "per-cluster";
}

inline VarianceModel parse_variance_model(std::string_view name) {
    if (name == "pooled") {
        return VarianceModel::pooled;
    }
    if (name == "per-cluster") {
        return VarianceModel::per_cluster;
    }
    throw ConfigError("unknown variance model '" + std::string(name) + "'");
}

struct ClusterOptions {
    /// Clusters with fewer points are never split.
    std::size_t min_cluster_size = 5;
    std::size_t max_k = 50;
    std::size_t batch_size = 256;
    int inner_iterations = 50;
    /// Stop a restart after this many batches without a better smoothed batch inertia; 0 never stops early.
    int max_no_improvement = 10;
    int restarts = 3;
    VarianceModel variance = VarianceModel::pooled;
    /// Extra bisection rounds tried when a plain split is rejected.
    int lookahead_depth = 2;
};

namespace detail {

inline double sq_dist(Point2 a, Point2 b) {
    const double ds = a.start - b.start;
    const double dt = a.stay - b.stay;
    return ds * ds + dt * dt;
}

inline constexpr int kDims = 2;
inline constexpr double kVarianceFloor = 1e-12;

/**
 * BIC of a hard-assigned spherical Gaussian mixture with one pooled variance.
 *
 * ll = sum_c n_c ln(n_c / n) - (n d / 2) ln(2 pi s2) - SS / (2 s2), with the
 * MLE s2 = SS / (n d); parameters k(d+1)+1; BIC = ll - (params / 2) ln n.
 */
inline double spherical_bic(std::span<const std::size_t> sizes, double sum_sq) {
    double n = 0.0;
    for (std::size_t s : sizes) {
        n += static_cast<double>(s);
    }
    const double s2 = std::max(sum_sq / (n * kDims), kVarianceFloor);
    double ll = 0.0;
    for (std::size_t s : sizes) {
        if (s > 0) {
            const double ns = static_cast<double>(s);
            ll += ns * std::log(ns / n);
        }
    }
    ll -= 0.5 * n * kDims * std::log(2.0 * std::numbers::pi * s2);
    ll -= sum_sq / (2.0 * s2);
    const double params = static_cast<double>(sizes.size()) * (kDims + 1) + 1.0;
    return ll - 0.5 * params * std::log(n);
}

/**
 * BIC of a hard-assigned mixture of spherical Gaussians, each with its own MLE
 * variance s2_c = SS_c / (n_c d).
 *
 * ll = sum_c [n_c ln(n_c / n) - (n_c d / 2) ln(2 pi s2_c) - n_c d / 2];
 * parameters k(d+2); BIC = ll - (params / 2) ln n. With one cluster this
 * equals spherical_bic up to the parameter count.
 */
inline double per_cluster_bic(std::span<const std::size_t> sizes, std::span<const double> sum_sq) {
    double n = 0.0;
    for (std::size_t s : sizes) {
        n += static_cast<double>(s);
    }
    double ll = 0.0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        if (sizes[c] == 0) {
            continue;
        }
        const double nc = static_cast<double>(sizes[c]);
        const double s2 = std::max(sum_sq[c] / (nc * kDims), kVarianceFloor);
        ll += nc * std::log(nc / n) - 0.5 * nc * kDims * std::log(2.0 * std::numbers::pi * s2) -
              0.5 * nc * kDims;
    }
    const double params = static_cast<double>(sizes.size()) * (kDims + 2);
    return ll - 0.5 * params * std::log(n);
}

inline double mixture_bic(VarianceModel model, std::span<const std::size_t> sizes,
                          std::span<const double> sum_sq) {
    if (model == VarianceModel::per_cluster) {
        return per_cluster_bic(sizes, sum_sq);
    }
    double total = 0.0;
    for (double v : sum_sq) {
        total += v;
    }
    return spherical_bic(sizes, total);
}

struct TwoMeans {
    std::array<Point2, 2> centers;
    double inertia = std::numeric_limits<double>::infinity();
};

inline double inertia_of(std::span<const Point2> pts, std::span<const std::size_t> idx,
                         const std::array<Point2, 2>& c) {
    double total = 0.0;
    for (std::size_t i : idx) {
        total += std::min(sq_dist(pts[i], c[0]), sq_dist(pts[i], c[1]));
    }
    return total;
}

/// k-means++ seeding followed by minibatch center updates with per-center learning rates.
inline TwoMeans minibatch_two_means(std::span<const Point2> pts, std::span<const std::size_t> idx,
                                    const ClusterOptions& opts, std::mt19937_64& rng) {
    TwoMeans best;
    const std::size_t n = idx.size();
    const std::size_t batch = std::min(opts.batch_size, n);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> d2(n);
    for (int restart = 0; restart < opts.restarts; ++restart) {
        std::array<Point2, 2> c;
        c[0] = pts[idx[pick(rng)]];
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            d2[j] = sq_dist(pts[idx[j]], c[0]);
            total += d2[j];
        }
        if (total <= 0.0) {
            c[1] = c[0];
        } else {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            std::size_t j = 0;
            while (j + 1 < n && target >= d2[j]) {
                target -= d2[j];
                ++j;
            }
            c[1] = pts[idx[j]];
        }
        std::array<double, 2> seen{0.0, 0.0};
        // Exponentially weighted mean batch inertia, as in common minibatch k-means.
        const double alpha = std::min(1.0, 2.0 * static_cast<double>(batch) / static_cast<double>(n + 1));
        double ewa = std::numeric_limits<double>::infinity();
        double ewa_best = ewa;
        int stale = 0;
        for (int it = 0; it < opts.inner_iterations; ++it) {
            double batch_inertia = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const Point2 x = pts[idx[pick(rng)]];
                const double d0 = sq_dist(x, c[0]);
                const double d1 = sq_dist(x, c[1]);
                const int k = d1 < d0 ? 1 : 0;
                batch_inertia += std::min(d0, d1);
                seen[k] += 1.0;
                const double eta = 1.0 / seen[k];
                c[k].start += eta * (x.start - c[k].start);
                c[k].stay += eta * (x.stay - c[k].stay);
            }
            batch_inertia /= static_cast<double>(batch);
            ewa = it == 0 ? batch_inertia : ewa * (1.0 - alpha) + batch_inertia * alpha;
            if (ewa < ewa_best) {
                ewa_best = ewa;
                stale = 0;
            } else if (opts.max_no_improvement > 0 && ++stale >= opts.max_no_improvement) {
                break;
            }
        }
        const double inertia = inertia_of(pts, idx, c);
        if (inertia < best.inertia) {
            best.centers = c;
            best.inertia = inertia;
        }
    }
    return best;
}

inline Point2 mean_of(std::span<const Point2> pts, std::span<const std::size_t> idx) {
    Point2 m;
    for (std::size_t i : idx) {
        m.start += pts[i].start;
        m.stay += pts[i].stay;
    }
    const double n = static_cast<double>(idx.size());
    return Point2{m.start / n, m.stay / n};
}

inline double sum_sq_about(std::span<const Point2> pts, std::span<const std::size_t> idx, Point2 c) {
    double s = 0.0;
    for (std::size_t i : idx) {
        s += sq_dist(pts[i], c);
    }
    return s;
}

}  // namespace detail

/**
 * Splits the views into lockstep instances. Deterministic for a given seed.
 *
 * Instances are numbered in order of their smallest member index.
 */
inline Partition partition_views(std::span<const ViewFeature> features, const ClusterOptions& opts,
                                 std::uint64_t seed) {
    if (features.empty()) {
        throw InfeasibleError("cannot partition an empty broadcast");
    }
    if (opts.max_k < 1 || opts.min_cluster_size < 1 || opts.restarts < 1 || opts.batch_size < 1) {
        throw ConfigError("clustering parameters must be positive");
    }
    std::vector<Point2> pts;
    pts.reserve(features.size());
    for (const ViewFeature& f : features) {
        pts.push_back(Point2{f.start_frac, f.stay_frac});
    }

    std::vector<std::size_t> all(pts.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    std::deque<std::vector<std::size_t>> pending;
    std::vector<std::vector<std::size_t>> done;
    pending.push_back(std::move(all));
    std::size_t clusters = 1;
    std::uint64_t split_counter = 0;

    while (!pending.empty()) {
        std::vector<std::size_t> cur = std::move(pending.front());
        pending.pop_front();
        if (clusters >= opts.max_k || cur.size() < opts.min_cluster_size || cur.size() < 2) {
            done.push_back(std::move(cur));
            continue;
        }
        auto bisect = [&](const std::vector<std::size_t>& members) {
            std::mt19937_64 rng(mix_seed(seed, split_counter++));
            const auto fit = detail::minibatch_two_means(pts, members, opts, rng);
            std::array<std::vector<std::size_t>, 2> halves;
            for (std::size_t i : members) {
                const bool to_right =
                    detail::sq_dist(pts[i], fit.centers[1]) < detail::sq_dist(pts[i], fit.centers[0]);
                halves[to_right ? 1 : 0].push_back(i);
            }
            return halves;
        };
        auto bic_of = [&](const std::vector<const std::vector<std::size_t>*>& parts) {
            std::vector<std::size_t> sizes;
            std::vector<double> ss;
            for (const auto* m : parts) {
                sizes.push_back(m->size());
                ss.push_back(detail::sum_sq_about(pts, *m, detail::mean_of(pts, *m)));
            }
            return detail::mixture_bic(opts.variance, sizes, ss);
        };
        // Level d holds the leaves after d rounds of bisection; the first
        // level whose BIC beats the parent's replaces it.
        const double parent = bic_of({&cur});
        std::vector<std::vector<std::size_t>> level{cur};
        bool accepted = false;
        for (int depth = 1; depth <= 1 + opts.lookahead_depth && !accepted; ++depth) {
            std::vector<std::vector<std::size_t>> next;
            for (auto& leaf : level) {
                if (depth > 1 && leaf.size() < opts.min_cluster_size) {
                    next.push_back(std::move(leaf));
                    continue;
                }
                auto halves = bisect(leaf);
                // Peeling a small group off a large one is allowed; shattering
                // a cluster into two undersized halves is not.
                if (halves[0].empty() || halves[1].empty() ||
                    std::max(halves[0].size(), halves[1].size()) < opts.min_cluster_size) {
                    next.push_back(std::move(leaf));
                } else {
                    next.push_back(std::move(halves[0]));
                    next.push_back(std::move(halves[1]));
                }
            }
            level = std::move(next);
            if (level.size() < 2 || clusters + level.size() - 1 > opts.max_k) {
                break;
            }
            std::vector<const std::vector<std::size_t>*> parts;
            for (const auto& leaf : level) {
                parts.push_back(&leaf);
            }
            if (bic_of(parts) > parent) {
                clusters += level.size() - 1;
                for (auto& leaf : level) {
                    pending.push_back(std::move(leaf));
                }
                accepted = true;
            }
        }
        if (!accepted) {
            done.push_back(std::move(cur));
        }
    }

    for (auto& members : done) {
        std::sort(members.begin(), members.end());
    }
    std::sort(done.begin(), done.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    Partition partition;
    partition.instances.reserve(done.size());
    for (std::size_t k = 0; k < done.size(); ++k) {
        Instance inst;
        inst.instance_id = static_cast<int>(k);
        inst.centroid = detail::mean_of(pts, done[k]);
        inst.members = std::move(done[k]);
        partition.instances.push_back(std::move(inst));
    }
    return partition;
}

/// Single-instance partition containing every view.
inline Partition whole_partition(std::size_t n) {
    Partition p;
    Instance inst;
    inst.members.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        inst.members[i] = i;
    }
    p.instances.push_back(std::move(inst));
    return p;
}

}  // namespace flock

#endif  // FLOCK_CLUSTER_HPP

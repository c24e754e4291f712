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

#ifndef FLOCK_MODEL_HPP
#define FLOCK_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <flock/error.hpp>
#include <flock/feature.hpp>

/**
 * @file model.hpp
 *
 * @brief Multinomial models over the triangular (start, stay) cell space.
 */

namespace flock {

/// Pseudocount added to every cell of a bracket model before normalization.
inline constexpr double kDefaultBracketPseudocount = 0.5;

/**
 * Per-cell view counts over the feasible triangle.
 *
 * Supports a single writer; copies are cheap enough to hand out per broadcast.
 */
class TriHistogram {
public:
    TriHistogram() = default;

    explicit TriHistogram(int H) : H_(H), counts_(cell_count(H), 0) {
        if (H < 1) {
            throw FeatureError("bin count must be positive");
        }
    }

    int bins() const { return H_; }
    std::uint64_t total() const { return total_; }
    std::size_t size() const { return counts_.size(); }
    bool empty() const { return total_ == 0; }

    std::uint64_t count(Cell c) const { return counts_.at(cell_index(c, H_)); }
    std::uint64_t operator[](std::size_t index) const { return counts_[index]; }
    std::span<const std::uint64_t> counts() const { return counts_; }

    void add(Cell c, std::uint64_t n = 1) {
        if (!is_feasible(c, H_)) {
            throw FeatureError("cell outside the feasible triangle");
        }
        counts_[cell_index(c, H_)] += n;
        total_ += n;
    }

    void remove(Cell c, std::uint64_t n = 1) {
        auto& slot = counts_.at(cell_index(c, H_));
        if (slot < n) {
            throw InfeasibleError("removing more views than the cell holds");
        }
        slot -= n;
        total_ -= n;
    }

    /// Cell-wise addition.
    TriHistogram& operator+=(const TriHistogram& other) {
        check_compatible(other);
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            counts_[i] += other.counts_[i];
        }
        total_ += other.total_;
        return *this;
    }

    /// Cell-wise subtraction; `other` must be contained in this histogram.
    TriHistogram& operator-=(const TriHistogram& other) {
        check_compatible(other);
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            if (counts_[i] < other.counts_[i]) {
                throw InfeasibleError("subtracted histogram is not contained in this one");
            }
        }
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            counts_[i] -= other.counts_[i];
        }
        total_ -= other.total_;
        return *this;
    }

    friend TriHistogram operator+(TriHistogram a, const TriHistogram& b) { return a += b; }
    friend TriHistogram operator-(TriHistogram a, const TriHistogram& b) { return a -= b; }
    friend bool operator==(const TriHistogram&, const TriHistogram&) = default;

private:
    void check_compatible(const TriHistogram& other) const {
        if (other.H_ != H_) {
            throw FeatureError("histograms built with different bin counts");
        }
    }

    int H_ = 0;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Probability mass over the feasible triangle, immutable once built.
class TriDistribution {
public:
    TriDistribution() = default;

    /// Takes ownership of `mass`; it must already be normalized.
    TriDistribution(int H, std::vector<double> mass, bool smoothed)
        : H_(H), mass_(std::move(mass)), smoothed_(smoothed) {
        if (mass_.size() != cell_count(H)) {
            throw FeatureError("mass array does not match the cell count");
        }
        double sum = 0.0;
        for (double m : mass_) {
            if (!(m >= 0.0) || !std::isfinite(m)) {
                throw EmptyDistributionError("masses must be finite and non-negative");
            }
            sum += m;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw EmptyDistributionError("masses do not sum to one");
        }
    }

    int bins() const { return H_; }
    bool smoothed() const { return smoothed_; }
    std::size_t size() const { return mass_.size(); }
    double mass(Cell c) const { return mass_.at(cell_index(c, H_)); }
    double operator[](std::size_t index) const { return mass_[index]; }
    std::span<const double> masses() const { return mass_; }

private:
    int H_ = 0;
    std::vector<double> mass_;
    bool smoothed_ = false;
};

template <typename Features>
TriHistogram fit_histogram(const Features& features, int H) {
    TriHistogram h(H);
    for (const ViewFeature& f : features) {
        h.add(f.bin);
    }
    return h;
}

/**
 * Normalizes counts into a distribution.
 *
 * mass = (count + pseudocount) / (total + pseudocount * H(H+1)/2). With a zero
 * pseudocount this is the multinomial MLE; the bracket side uses a positive one
 * so that every cell a broadcast can hit has non-zero model mass.
 */
inline TriDistribution to_distribution(const TriHistogram& h, double pseudocount) {
    if (!(pseudocount >= 0.0)) {
        throw EmptyDistributionError("pseudocount must be non-negative");
    }
    if (h.total() == 0 && pseudocount == 0.0) {
        throw EmptyDistributionError("cannot normalize an empty histogram without smoothing");
    }
    const double denom =
        static_cast<double>(h.total()) + pseudocount * static_cast<double>(h.size());
    std::vector<double> mass(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        mass[i] = (static_cast<double>(h[i]) + pseudocount) / denom;
    }
    return TriDistribution(h.bins(), std::move(mass), pseudocount > 0.0);
}

/// Uniform mass over every feasible cell.
inline TriDistribution uniform_distribution(int H) {
    return TriDistribution(H, std::vector<double>(cell_count(H), 1.0 / static_cast<double>(cell_count(H))),
                           true);
}

namespace detail {

inline double kl_term(double p, double q) {
    if (p == 0.0) {
        return 0.0;
    }
    if (q <= 0.0) {
        throw DivergenceError("model has zero mass where the observation has support");
    }
    return p * std::log2(p / q);
}

}  // namespace detail

/// D_KL(p || q) in bits, summed over feasible cells with 0 log 0 = 0.
inline double kl_divergence(const TriDistribution& p, const TriDistribution& q) {
    if (p.bins() != q.bins()) {
        throw DivergenceError("distributions built with different bin counts");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sum += detail::kl_term(p[i], q[i]);
    }
    // Rounding can leave a tiny negative residue when p == q.
    return sum < 0.0 ? 0.0 : sum;
}

/**
 * D_KL of the raw MLE of `counts` from `q`, without materializing the MLE.
 *
 * Only non-empty cells contribute, so this is the hot path for pruning.
 */
inline double kl_divergence(const TriHistogram& counts, const TriDistribution& q) {
    if (counts.bins() != q.bins()) {
        throw DivergenceError("histogram and model built with different bin counts");
    }
    if (counts.total() == 0) {
        throw EmptyDistributionError("divergence of an empty histogram is undefined");
    }
    const double n = static_cast<double>(counts.total());
    double sum = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] != 0) {
            sum += detail::kl_term(static_cast<double>(counts[i]) / n, q[i]);
        }
    }
    return sum < 0.0 ? 0.0 : sum;
}

}  // namespace flock

#endif  // FLOCK_MODEL_HPP

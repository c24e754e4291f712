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

#ifndef FLOCK_FEATURE_HPP
#define FLOCK_FEATURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include <flock/error.hpp>

namespace flock {

/**
 * One outcome of the discretized (start, stay) sample space.
 *
 * `x` is the start bin and `y` the stay bin, both 1-based in {1..H}. Only
 * cells with x + y <= H + 1 are feasible, since a view cannot outlast the
 * broadcast it belongs to; there are H(H+1)/2 of them.
 */
struct Cell {
    int x = 1;
    int y = 1;

    friend bool operator==(const Cell&, const Cell&) = default;
};

inline constexpr std::size_t cell_count(int H) {
    return static_cast<std::size_t>(H) * static_cast<std::size_t>(H + 1) / 2;
}

inline constexpr bool is_feasible(Cell c, int H) {
    return c.x >= 1 && c.y >= 1 && c.x <= H && c.y <= H && c.x + c.y <= H + 1;
}

/// Row-major position of a feasible cell: rows by start bin, then stay bin.
inline constexpr std::size_t cell_index(Cell c, int H) {
    const auto row = static_cast<std::size_t>(c.x - 1);
    const auto width = static_cast<std::size_t>(H + 1);
    return row * width - row * (row + 1) / 2 + static_cast<std::size_t>(c.y - 1);
}

inline constexpr Cell cell_at(std::size_t index, int H) {
    int x = 1;
    auto row_len = static_cast<std::size_t>(H);
    while (index >= row_len) {
        index -= row_len;
        --row_len;
        ++x;
    }
    return Cell{x, static_cast<int>(index) + 1};
}

/// True when (start, stay) is a legal fractional view.
inline bool is_valid_feature(double start_frac, double stay_frac) {
    return std::isfinite(start_frac) && std::isfinite(stay_frac) && start_frac >= 0.0 &&
           start_frac < 1.0 && stay_frac > 0.0 && stay_frac <= 1.0 &&
           start_frac + stay_frac <= 1.0 + 1e-12;
}

/**
 * Discretizes a fractional view into its triangle cell.
 *
 * x = floor(start*H) + 1 and y = min(floor(stay*H), H-1) + 1, so a view that
 * lasts the whole broadcast lands in the last stay bin rather than an extra one.
 */
inline Cell bin_feature(double start_frac, double stay_frac, int H) {
    if (H < 1) {
        throw FeatureError("bin count must be positive");
    }
    if (!is_valid_feature(start_frac, stay_frac)) {
        throw FeatureError("feature outside the feasible triangle");
    }
    int x = static_cast<int>(std::floor(start_frac * H)) + 1;
    int y = std::min(static_cast<int>(std::floor(stay_frac * H)), H - 1) + 1;
    x = std::min(x, H);
    // Floating error along the diagonal can push a legal view one bin too far.
    if (x + y > H + 1) {
        y = H + 1 - x;
    }
    return Cell{x, y};
}

/// Fractional start and stay of one view, plus its discretized cell.
struct ViewFeature {
    std::string view_id;
    double start_frac = 0.0;
    double stay_frac = 1.0;
    Cell bin;
};

inline ViewFeature make_feature(std::string view_id, double start_frac, double stay_frac, int H) {
    ViewFeature f{std::move(view_id), start_frac, stay_frac, {}};
    f.bin = bin_feature(start_frac, stay_frac, H);
    return f;
}

}  // namespace flock

#endif  // FLOCK_FEATURE_HPP

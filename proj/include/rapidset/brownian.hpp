/*
   Copyright 2026 The rapidset Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Brownian sample paths on uniform grids of [0, 1].
//
// A PathGrid holds X(k/M) for k = 0..M. Paths are refined by filling each
// coarse interval with an independent Brownian bridge whose stream is
// derived from (refinement seed, coarse interval index). Because of that,
// refining only a subset of intervals produces exactly the values a full
// refinement would produce there; the sparse chain builder relies on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rapidset/errors.hpp"
#include "rapidset/io.hpp"
#include "rapidset/rng.hpp"

namespace rapidset {

struct GenerationRecord {
    std::string operation;
    std::uint64_t seed = 0;
    std::string method;
};

class PathGrid {
public:
    std::uint64_t resolution() const noexcept { return resolution_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::uint64_t k) const noexcept { return values_[k]; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<GenerationRecord>& generation_log() const noexcept { return log_; }

    /// Wraps explicit values; values[0] must be 0. Seed and log are empty.
    static PathGrid from_values(std::vector<double> values)
    {
        if (values.size() < 2) throw invalid_argument("PathGrid needs at least two grid values");
        if (values.front() != 0.0) throw invalid_argument("PathGrid requires X(0) = 0");
        PathGrid p;
        p.resolution_ = values.size() - 1;
        p.values_ = std::move(values);
        p.log_.push_back({"from_values", 0, "explicit"});
        return p;
    }

private:
    friend PathGrid generate_path(std::uint64_t resolution, std::uint64_t seed);
    friend PathGrid refine_path(const PathGrid& path, std::uint64_t factor, std::uint64_t seed);

    std::uint64_t resolution_ = 0;
    std::vector<double> values_;
    std::uint64_t seed_ = 0;
    std::vector<GenerationRecord> log_;
};

/// Stream used to fill coarse interval `interval` during a refinement seeded by `seed`.
inline std::uint64_t bridge_stream_seed(std::uint64_t seed, std::uint64_t interval) noexcept
{
    return derive_seed(seed, "bridge", interval);
}

/// Fills `out` (size factor + 1) with a Brownian bridge from `left` to
/// `right` over a span of length `span`. Endpoints are copied bit-exactly.
inline void fill_bridge(double left, double right, double span, std::uint64_t factor,
                        std::uint64_t stream_seed, std::span<double> out)
{
    Xoshiro256 gen(stream_seed);
    const double sd = std::sqrt(span / static_cast<double>(factor));
    out[0] = left;
    // Free walk, then pull its endpoint onto `right` linearly.
    double w = 0.0;
    for (std::uint64_t j = 1; j < factor; ++j) {
        w += sd * standard_normal(gen);
        out[j] = w;
    }
    const double w_end = w + sd * standard_normal(gen);
    const double slope = (right - left - w_end) / static_cast<double>(factor);
    for (std::uint64_t j = 1; j < factor; ++j) {
        out[j] = left + out[j] + static_cast<double>(j) * slope;
    }
    out[factor] = right;
}

/// Refines `coarse` (values on consecutive grid points starting at global
/// interval index `first_interval`, grid spacing `spacing`) by `factor`.
/// `out` must hold (coarse.size() - 1) * factor + 1 values.
inline void refine_segment(std::span<const double> coarse, std::uint64_t first_interval, double spacing,
                           std::uint64_t factor, std::uint64_t seed, std::span<double> out)
{
    for (std::size_t i = 0; i + 1 < coarse.size(); ++i) {
        fill_bridge(coarse[i], coarse[i + 1], spacing, factor, bridge_stream_seed(seed, first_interval + i),
                    out.subspan(i * factor, factor + 1));
    }
}

inline PathGrid generate_path(std::uint64_t resolution, std::uint64_t seed)
{
    if (resolution == 0) throw invalid_argument("generate_path: resolution must be >= 1");
    PathGrid p;
    p.resolution_ = resolution;
    p.seed_ = seed;
    p.values_.resize(resolution + 1);
    p.values_[0] = 0.0;
    Xoshiro256 gen(derive_seed(seed, "increments"));
    const double sd = std::sqrt(1.0 / static_cast<double>(resolution));
    double x = 0.0;
    for (std::uint64_t k = 1; k <= resolution; ++k) {
        x += sd * standard_normal(gen);
        p.values_[k] = x;
    }
    p.log_.push_back({"generate", seed, std::string(normal_method_name)});
    return p;
}

inline PathGrid refine_path(const PathGrid& path, std::uint64_t factor, std::uint64_t seed)
{
    if (factor < 2) throw invalid_argument("refine_path: factor must be >= 2");
    PathGrid p;
    p.resolution_ = path.resolution_ * factor;
    p.seed_ = path.seed_;
    p.values_.resize(p.resolution_ + 1);
    refine_segment(path.values_, 0, 1.0 / static_cast<double>(path.resolution_), factor, seed, p.values_);
    p.log_ = path.log_;
    p.log_.push_back({"refine x" + std::to_string(factor), seed,
                      "sequential bridge / " + std::string(normal_method_name)});
    return p;
}

/// max - min of a run of grid values.
inline double range_of(std::span<const double> values) noexcept
{
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi - *lo;
}

/// Oscillation over grid indices [i0, i1].
inline double oscillation_index(const PathGrid& path, std::uint64_t i0, std::uint64_t i1)
{
    if (i0 >= i1 || i1 > path.resolution()) throw invalid_argument("oscillation: need i0 < i1 <= resolution");
    return range_of(path.values().subspan(i0, i1 - i0 + 1));
}

namespace detail {

inline std::uint64_t grid_index(double t, std::uint64_t resolution, const char* what)
{
    if (!(t >= 0.0 && t <= 1.0)) throw invalid_argument(std::string(what) + " must lie in [0, 1]");
    const double scaled = t * static_cast<double>(resolution);
    const double nearest = std::round(scaled);
    if (std::abs(scaled - nearest) > 1e-9 * std::max(1.0, scaled)) {
        throw invalid_argument(std::string(what) + " is not a multiple of 1/resolution");
    }
    return static_cast<std::uint64_t>(nearest);
}

} // namespace detail

/// max minus min of X over the grid points of [a, b].
inline double oscillation(const PathGrid& path, double a, double b)
{
    const auto i0 = detail::grid_index(a, path.resolution(), "a");
    const auto i1 = detail::grid_index(b, path.resolution(), "b");
    if (i0 >= i1) throw invalid_argument("oscillation: need a < b");
    return range_of(path.values().subspan(i0, i1 - i0 + 1));
}

/// sqrt(2 h log(1/h)), the rapid-point normalisation.
inline double gauge(double h)
{
    if (!(h > 0.0 && h < 1.0)) throw invalid_argument("gauge: h must lie in (0, 1)");
    return std::sqrt(2.0 * h * std::log(1.0 / h));
}

/// CSV `t,x`, one row per grid point.
inline void write_path_csv(const PathGrid& path, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << "t,x\n";
    const auto m = static_cast<double>(path.resolution());
    for (std::uint64_t k = 0; k <= path.resolution(); ++k) {
        out << (io::CsvRow{} << static_cast<double>(k) / m << path[k]);
    }
}

} // namespace rapidset

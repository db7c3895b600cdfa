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

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rapidset/errors.hpp"

namespace rapidset::stats {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares fit of y on x. Needs at least two distinct x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw invalid_argument("least_squares: size mismatch");
    if (x.size() < 2) throw invalid_argument("least_squares: need at least two points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) throw invalid_argument("least_squares: x values are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    // A perfectly flat response is fully explained by the fit.
    fit.r_squared = syy > 0.0 ? std::clamp((sxy * sxy) / (sxx * syy), 0.0, 1.0) : 1.0;
    fit.n = x.size();
    return fit;
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double quantile(std::vector<double> v, double q)
{
    if (v.empty()) throw invalid_argument("quantile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

/// Half-width of the normal-approximation 95% interval for a proportion.
inline double ci95_halfwidth(double p_hat, std::size_t trials)
{
    return 1.96 * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(trials));
}

} // namespace rapidset::stats

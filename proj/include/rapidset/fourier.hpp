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

// Fourier-Stieltjes transforms of piecewise-uniform measures in closed form,
// and decay-rate estimation from them.
//
// For a stage-m measure with interval length h the transform is
//   mu^(u) = (1/p) * h * K(u h) * sum_{k selected} exp(i u (k-1) h),
//   K(x) = (exp(ix) - 1) / (ix).
// The phase sum is evaluated with per-frequency tables over the base-N
// digits of k-1, folded level by level, so the cost per frequency is one
// complex add per interval plus m*N table entries. Summation order is the
// index order of the selected intervals.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rapidset/errors.hpp"
#include "rapidset/io.hpp"
#include "rapidset/measure.hpp"
#include "rapidset/stats.hpp"

namespace rapidset {

using complex = std::complex<double>;

/// |x| below which K(x) is evaluated by its power series.
inline constexpr double series_switch = 1e-3;
inline constexpr int series_terms = 8;

/// Truncated series sum_{k<8} (ix)^k / (k+1)!.
inline complex interval_kernel_series(double x) noexcept
{
    complex term(1.0, 0.0);
    complex sum = term;
    for (int k = 1; k < series_terms; ++k) {
        term *= complex(0.0, x) / static_cast<double>(k + 1);
        sum += term;
    }
    return sum;
}

/// (exp(ix) - 1) / (ix) as sin(x)/x + i 2 sin^2(x/2)/x.
inline complex interval_kernel_closed(double x) noexcept
{
    const double s = std::sin(0.5 * x);
    return {std::sin(x) / x, 2.0 * s * s / x};
}

inline complex interval_kernel(double x) noexcept
{
    return std::abs(x) < series_switch ? interval_kernel_series(x) : interval_kernel_closed(x);
}

/// Transform of Lebesgue measure on [0, 1].
inline complex transform_uniform(double u) noexcept { return interval_kernel(u); }

struct SpectrumGrid {
    std::vector<double> u_values; ///< strictly increasing, > 0
    std::vector<complex> values;
    std::string measure_id;
    double total_mass = 0.0;
};

namespace detail {

// Base-N digits of (k - 1) for each selected k, least significant first.
class DigitTable {
public:
    DigitTable(const StageMeasure& m) : levels_(m.stage), base_(m.base)
    {
        digits_.resize(m.selected.size() * levels_);
        for (std::size_t i = 0; i < m.selected.size(); ++i) {
            std::uint64_t j = m.selected[i] - 1;
            for (std::uint32_t l = 0; l < levels_; ++l) {
                digits_[i * levels_ + l] = static_cast<std::uint32_t>(j % base_);
                j /= base_;
            }
        }
    }

    // sum_k exp(i theta (k-1)).
    complex phase_sum(double theta, std::vector<complex>& tables) const
    {
        const std::size_t count = digits_.size() / (levels_ == 0 ? 1 : levels_);
        if (count == 0) return {};
        tables.resize(static_cast<std::size_t>(levels_) * base_);
        double place = 1.0;
        for (std::uint32_t l = 0; l < levels_; ++l) {
            for (std::uint32_t d = 0; d < base_; ++d) {
                tables[l * base_ + d] = std::polar(1.0, theta * (place * d));
            }
            place *= base_;
        }
        const auto table = [&](std::uint32_t l, std::uint32_t d) { return tables[l * base_ + d]; };
        complex acc[64];
        std::fill(acc, acc + levels_, complex{});
        const std::uint32_t* prev = digits_.data();
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint32_t* cur = digits_.data() + i * levels_;
            if (i > 0) {
                std::uint32_t top = 0;
                for (std::uint32_t l = levels_ - 1; l >= 1; --l) {
                    if (cur[l] != prev[l]) {
                        top = l;
                        break;
                    }
                }
                for (std::uint32_t l = 0; l < top; ++l) {
                    acc[l + 1] += table(l + 1, prev[l + 1]) * acc[l];
                    acc[l] = {};
                }
            }
            acc[0] += table(0, cur[0]);
            prev = cur;
        }
        for (std::uint32_t l = 0; l + 1 < levels_; ++l) acc[l + 1] += table(l + 1, prev[l + 1]) * acc[l];
        return acc[levels_ - 1];
    }

private:
    std::uint32_t levels_;
    std::uint32_t base_;
    std::vector<std::uint32_t> digits_;
};

inline void validate_u_grid(std::span<const double> u)
{
    if (u.empty()) throw invalid_argument("frequency grid is empty");
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > 0.0) || !std::isfinite(u[i])) throw invalid_argument("frequencies must be positive and finite");
        if (i > 0 && !(u[i] > u[i - 1])) throw invalid_argument("frequencies must be strictly increasing");
    }
}

} // namespace detail

/// Transform at any real u (negative and zero allowed).
inline complex transform_at(const StageMeasure& m, double u)
{
    if (m.stage > 64) throw invalid_argument("transform: stage exceeds 64");
    const detail::DigitTable digits(m);
    std::vector<complex> scratch;
    const double h = m.interval_length();
    return m.density * h * interval_kernel(u * h) * digits.phase_sum(u * h, scratch);
}

inline SpectrumGrid transform_measure(const StageMeasure& m, std::span<const double> u_values,
                                      std::string measure_id = {})
{
    detail::validate_u_grid(u_values);
    if (m.stage > 64) throw invalid_argument("transform: stage exceeds 64");
    SpectrumGrid g;
    g.u_values.assign(u_values.begin(), u_values.end());
    g.values.reserve(u_values.size());
    g.measure_id = std::move(measure_id);
    g.total_mass = total_mass(m);
    const detail::DigitTable digits(m);
    std::vector<complex> scratch;
    const double h = m.interval_length();
    for (double u : u_values) {
        g.values.push_back(m.density * h * interval_kernel(u * h) * digits.phase_sum(u * h, scratch));
    }
    return g;
}

inline SpectrumGrid transform_uniform_grid(std::span<const double> u_values)
{
    detail::validate_u_grid(u_values);
    SpectrumGrid g;
    g.u_values.assign(u_values.begin(), u_values.end());
    for (double u : u_values) g.values.push_back(transform_uniform(u));
    g.measure_id = "lebesgue";
    g.total_mass = 1.0;
    return g;
}

/// True if |mu^(u)| <= total mass (up to 1e-12 relative) everywhere on the grid.
inline bool bounded_by_mass(const SpectrumGrid& g)
{
    return std::all_of(g.values.begin(), g.values.end(),
                       [&](const complex& v) { return std::abs(v) <= g.total_mass * (1.0 + 1e-12); });
}

/// u_j = 10^(j / per_decade) for j = 1, 2, ... while u_j <= u_max. Every point exceeds 1.
inline std::vector<double> log_spaced_grid(double u_max, unsigned per_decade)
{
    if (per_decade == 0) throw invalid_argument("log_spaced_grid: per_decade must be >= 1");
    if (!(u_max > 1.0)) throw invalid_argument("log_spaced_grid: u_max must exceed 1");
    std::vector<double> u;
    for (unsigned j = 1;; ++j) {
        const double v = std::pow(10.0, static_cast<double>(j) / per_decade);
        if (v > u_max * (1.0 + 1e-12)) break;
        u.push_back(v);
    }
    return u;
}

/// u_j = lo * 10^(j / per_decade) for j >= 0 while u_j <= hi.
inline std::vector<double> log_spaced_grid(double lo, double hi, unsigned per_decade)
{
    if (per_decade == 0 || !(lo > 0.0) || !(hi > lo)) throw invalid_argument("log_spaced_grid: bad range");
    std::vector<double> u;
    for (unsigned j = 0;; ++j) {
        const double v = lo * std::pow(10.0, static_cast<double>(j) / per_decade);
        if (v > hi * (1.0 + 1e-12)) break;
        u.push_back(v);
    }
    return u;
}

/// Stress grid u = j N^-2 over one decade starting at u_start.
inline std::vector<double> fine_linear_grid(std::uint32_t base, double u_start)
{
    if (base < 2 || !(u_start > 0.0)) throw invalid_argument("fine_linear_grid: bad arguments");
    const double step = 1.0 / (static_cast<double>(base) * base);
    const auto first = static_cast<std::uint64_t>(std::ceil(u_start / step));
    const auto last = static_cast<std::uint64_t>(std::floor(10.0 * u_start / step));
    std::vector<double> u;
    u.reserve(last - first + 1);
    for (std::uint64_t j = first; j <= last; ++j) u.push_back(static_cast<double>(j) * step);
    return u;
}

struct DecayFit {
    double exponent = 0.0;
    double intercept = 0.0;
    double u_min = 0.0;
    double u_max = std::numeric_limits<double>::infinity();
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

/// Fits log T(u) = intercept - exponent * log u over u_min <= u <= u_max,
/// where T(u_j) = max_{k >= j} |mu^(u_k)| is the tail envelope over the
/// whole grid.
inline DecayFit decay_exponent(const SpectrumGrid& g, double u_min,
                               double u_max = std::numeric_limits<double>::infinity())
{
    if (g.u_values.size() != g.values.size()) throw invalid_argument("decay_exponent: malformed spectrum");
    if (!(u_min > 0.0)) throw invalid_argument("decay_exponent: u_min must be positive");
    std::vector<double> envelope(g.values.size());
    double running = 0.0;
    for (std::size_t j = g.values.size(); j-- > 0;) {
        running = std::max(running, std::abs(g.values[j]));
        envelope[j] = running;
    }
    std::vector<double> x;
    std::vector<double> y;
    std::size_t in_range = 0;
    for (std::size_t j = 0; j < g.u_values.size(); ++j) {
        if (g.u_values[j] < u_min || g.u_values[j] > u_max) continue;
        ++in_range;
        if (envelope[j] == 0.0) continue;
        x.push_back(std::log(g.u_values[j]));
        y.push_back(std::log(envelope[j]));
    }
    if (in_range < 10) throw invalid_argument("decay_exponent: need at least 10 grid points in the fit range");
    if (x.size() < 2) throw degenerate_spectrum_error("decay_exponent: spectrum vanishes on the fit range");
    const auto fit = stats::least_squares(x, y);
    DecayFit out;
    out.exponent = -fit.slope;
    out.intercept = fit.intercept;
    out.u_min = u_min;
    out.u_max = u_max;
    out.r_squared = fit.r_squared;
    out.n_points = x.size();
    return out;
}

inline double fourier_dimension_estimate(const DecayFit& fit)
{
    return std::clamp(2.0 * fit.exponent, 0.0, 1.0);
}

struct Lemma22Report {
    std::vector<double> violating_u;
    double max_ratio = 0.0;
};

/// Compares |mu_m^ - mu_0^| against epsilon * u^((alpha^2 - 1) / 2).
inline Lemma22Report lemma22_check(const SpectrumGrid& stage, const SpectrumGrid& reference, double epsilon,
                                   double alpha)
{
    if (stage.u_values != reference.u_values || stage.values.size() != reference.values.size() ||
        stage.values.size() != stage.u_values.size()) {
        throw invalid_argument("lemma22_check: spectra are on different grids");
    }
    if (!(epsilon > 0.0)) throw invalid_argument("lemma22_check: epsilon must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw invalid_argument("lemma22_check: alpha must lie in (0, 1)");
    Lemma22Report r;
    const double power = 0.5 * (alpha * alpha - 1.0);
    for (std::size_t j = 0; j < stage.u_values.size(); ++j) {
        const double u = stage.u_values[j];
        if (!(u > 1.0)) throw invalid_argument("lemma22_check: every frequency must exceed 1");
        const double allowed = epsilon * std::pow(u, power);
        const double diff = std::abs(stage.values[j] - reference.values[j]);
        r.max_ratio = std::max(r.max_ratio, diff / allowed);
        if (diff >= allowed) r.violating_u.push_back(u);
    }
    return r;
}

/// CSV `u,re,im,abs`.
inline void write_spectrum_csv(const SpectrumGrid& g, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << "u,re,im,abs\n";
    for (std::size_t j = 0; j < g.u_values.size(); ++j) {
        out << (io::CsvRow{} << g.u_values[j] << g.values[j].real() << g.values[j].imag() << std::abs(g.values[j]));
    }
}

inline nlohmann::json to_json(const DecayFit& f)
{
    return {{"exponent", f.exponent},
            {"intercept", f.intercept},
            {"u_min", f.u_min},
            {"r_squared", f.r_squared},
            {"n_points", f.n_points}};
}

inline void write_fit_json(const DecayFit& f, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << to_json(f).dump(2) << '\n';
}

} // namespace rapidset

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

// Inequalities used by the construction, each paired with an exact or
// Monte-Carlo evaluation of the quantity it bounds.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rapidset/errors.hpp"
#include "rapidset/io.hpp"
#include "rapidset/rng.hpp"
#include "rapidset/selection.hpp"
#include "rapidset/stats.hpp"

namespace rapidset {

struct MomentCheck {
    double lhs = 0.0;
    double mid = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// p e^{t(1-p)} + (1-p) e^{-pt} <= 1 + p(1-p) t^2 <= e^{t^2 p}.
/// Compared as excesses over 1 in long double so that near-equality at
/// small |t| is resolved exactly.
inline MomentCheck exponential_moment_check(double p, double t)
{
    if (!(p >= 0.0 && p <= 1.0)) throw invalid_argument("exponential_moment_check: p must lie in [0, 1]");
    if (!(t >= -1.0 && t <= 1.0)) throw invalid_argument("exponential_moment_check: t must lie in [-1, 1]");
    const long double pl = p;
    const long double tl = t;
    const long double lhs = pl * std::expm1(tl * (1.0L - pl)) + (1.0L - pl) * std::expm1(-pl * tl);
    const long double mid = pl * (1.0L - pl) * tl * tl;
    const long double rhs = std::expm1(tl * tl * pl);
    MomentCheck r;
    r.lhs = static_cast<double>(1.0L + lhs);
    r.mid = static_cast<double>(1.0L + mid);
    r.rhs = static_cast<double>(1.0L + rhs);
    r.holds = lhs <= mid && mid <= rhs;
    return r;
}

/// Weights a_n for sums Z = sum (p - xi_n) a_n with xi_n ~ Bernoulli(p).
struct ChernoffParams {
    double p = 0.5;
    std::vector<std::complex<double>> weights;
    double y = 1.0;

    double sigma2() const noexcept
    {
        double s = 0.0;
        for (const auto& a : weights) s += std::norm(a);
        return s;
    }
    double b_max() const noexcept
    {
        double b = 0.0;
        for (const auto& a : weights) b = std::max(b, std::abs(a));
        return b;
    }
    /// Y B < 2 p sigma^2.
    bool admissible() const noexcept { return y * b_max() < 2.0 * p * sigma2(); }
};

inline void validate(const ChernoffParams& c)
{
    if (!(c.p > 0.0 && c.p <= 1.0)) throw invalid_argument("ChernoffParams: p must lie in (0, 1]");
    if (c.weights.empty()) throw invalid_argument("ChernoffParams: no weights");
    if (!(c.sigma2() > 0.0)) throw invalid_argument("ChernoffParams: sigma^2 must be positive");
    if (!(c.y > 0.0)) throw invalid_argument("ChernoffParams: Y must be positive");
}

/// 4 exp(-Y^2 / (16 p sigma^2)), valid when Y B < 2 p sigma^2.
inline double chernoff_tail_bound(const ChernoffParams& c)
{
    validate(c);
    if (!c.admissible()) {
        throw precondition_error("chernoff_tail_bound: requires Y*B < 2*p*sigma^2, got Y*B = " +
                                 io::format_double(c.y * c.b_max()) +
                                 ", 2*p*sigma^2 = " + io::format_double(2.0 * c.p * c.sigma2()));
    }
    return 4.0 * std::exp(-c.y * c.y / (16.0 * c.p * c.sigma2()));
}

inline ProbabilityEstimate chernoff_empirical(const ChernoffParams& c, std::uint64_t trials, std::uint64_t seed)
{
    validate(c);
    if (trials < 10000) throw invalid_argument("chernoff_empirical: trials must be >= 10^4");
    if (!c.admissible()) throw precondition_error("chernoff_empirical: requires Y*B < 2*p*sigma^2");
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        Xoshiro256 gen(derive_seed(seed, "chernoff-trial", t));
        std::complex<double> z{};
        for (const auto& a : c.weights) {
            const double xi = gen.uniform() < c.p ? 1.0 : 0.0;
            z += (c.p - xi) * a;
        }
        if (std::abs(z) >= c.y) ++hits;
    }
    return make_estimate(hits, trials);
}

struct GaussianTail {
    double lower = 0.0;
    double upper = 0.0;
    double exact = 0.0;
};

/// Mills-ratio bracket phi(Y)(1/Y - 1/Y^3) <= Q(Y) <= phi(Y)/Y; exact Q via erfc.
inline GaussianTail gaussian_tail_bounds(double y)
{
    if (!(y > 0.0)) throw invalid_argument("gaussian_tail_bounds: Y must be positive");
    const double phi = std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi);
    GaussianTail g;
    g.lower = std::max(0.0, phi * (1.0 / y - 1.0 / (y * y * y)));
    g.upper = phi / y;
    g.exact = 0.5 * std::erfc(y / std::numbers::sqrt2);
    return g;
}

/// The outer bounds without the 1/sqrt(2 pi) factor, as typeset in the
/// source of the construction. Kept to document that the lower side fails.
inline GaussianTail gaussian_tail_bounds_unnormalised(double y)
{
    if (!(y > 0.0)) throw invalid_argument("gaussian_tail_bounds: Y must be positive");
    const double e = std::exp(-0.5 * y * y);
    GaussianTail g;
    g.lower = std::max(0.0, e * (1.0 / y - 1.0 / (y * y * y)));
    g.upper = e / y;
    g.exact = 0.5 * std::erfc(y / std::numbers::sqrt2);
    return g;
}

/// Exact binomial tails, log-domain, long double.
class BinomialTails {
public:
    BinomialTails(std::uint64_t n, double p) : n_(n), p_(p)
    {
        if (n == 0) throw invalid_argument("BinomialTails: n must be positive");
        if (!(p > 0.0 && p < 1.0)) throw invalid_argument("BinomialTails: p must lie in (0, 1)");
        const long double lp = std::log(static_cast<long double>(p));
        const long double lq = std::log1p(-static_cast<long double>(p));
        const long double lgn = std::lgamma(static_cast<long double>(n) + 1.0L);
        std::vector<long double> logpmf(n + 1);
        for (std::uint64_t k = 0; k <= n; ++k) {
            const auto kl = static_cast<long double>(k);
            logpmf[k] = lgn - std::lgamma(kl + 1.0L) - std::lgamma(static_cast<long double>(n - k) + 1.0L) +
                        kl * lp + static_cast<long double>(n - k) * lq;
        }
        log_lower_.resize(n + 1);
        log_upper_.resize(n + 1);
        log_lower_[0] = logpmf[0];
        for (std::uint64_t k = 1; k <= n; ++k) log_lower_[k] = log_add(log_lower_[k - 1], logpmf[k]);
        log_upper_[n] = logpmf[n];
        for (std::uint64_t k = n; k-- > 0;) log_upper_[k] = log_add(log_upper_[k + 1], logpmf[k]);
    }

    std::uint64_t n() const noexcept { return n_; }
    double p() const noexcept { return p_; }

    /// log P{S <= k}; -inf for k < 0.
    long double log_cdf(std::int64_t k) const
    {
        if (k < 0) return -std::numeric_limits<long double>::infinity();
        if (static_cast<std::uint64_t>(k) >= n_) return 0.0L;
        return log_lower_[static_cast<std::size_t>(k)];
    }
    /// log P{S >= k}.
    long double log_sf(std::int64_t k) const
    {
        if (k <= 0) return 0.0L;
        if (static_cast<std::uint64_t>(k) > n_) return -std::numeric_limits<long double>::infinity();
        return log_upper_[static_cast<std::size_t>(k)];
    }
    long double cdf(std::int64_t k) const { return std::exp(log_cdf(k)); }
    long double sf(std::int64_t k) const { return std::exp(log_sf(k)); }

private:
    static long double log_add(long double a, long double b)
    {
        if (a < b) std::swap(a, b);
        if (b == -std::numeric_limits<long double>::infinity()) return a;
        return a + std::log1p(std::exp(b - a));
    }

    std::uint64_t n_;
    double p_;
    std::vector<long double> log_lower_;
    std::vector<long double> log_upper_;
};

enum class TailSide { upper, lower };

struct BinomialBound {
    double bound = 0.0;
    double exact = 0.0;
};

inline bool binomial_side_valid(std::uint64_t n, double p, double r, TailSide side) noexcept
{
    const double np = static_cast<double>(n) * p;
    return side == TailSide::upper ? r > np : r < np;
}

/// Upper: P{S >= r} <= r q / (r - np)^2 for r > np.
/// Lower: P{S <= r} <= (n - r) p / (np - r)^2 for r < np.
inline BinomialBound binomial_tail_bounds(const BinomialTails& tails, double r, TailSide side)
{
    const std::uint64_t n = tails.n();
    const double p = tails.p();
    const double np = static_cast<double>(n) * p;
    if (!binomial_side_valid(n, p, r, side)) {
        throw domain_error(side == TailSide::upper ? "binomial_tail_bounds: upper side requires r > np"
                                                   : "binomial_tail_bounds: lower side requires r < np");
    }
    BinomialBound b;
    if (side == TailSide::upper) {
        b.bound = r * (1.0 - p) / ((r - np) * (r - np));
        b.exact = static_cast<double>(tails.sf(static_cast<std::int64_t>(std::ceil(r))));
    } else {
        b.bound = (static_cast<double>(n) - r) * p / ((np - r) * (np - r));
        b.exact = static_cast<double>(tails.cdf(static_cast<std::int64_t>(std::floor(r))));
    }
    return b;
}

inline BinomialBound binomial_tail_bounds(std::uint64_t n, double p, double r, TailSide side)
{
    if (!binomial_side_valid(n, p, r, side)) {
        throw domain_error(side == TailSide::upper ? "binomial_tail_bounds: upper side requires r > np"
                                                   : "binomial_tail_bounds: lower side requires r < np");
    }
    return binomial_tail_bounds(BinomialTails(n, p), r, side);
}

/// Exact P{|S - m p| >= y} for S ~ Bin(m, p), the equal-weight Chernoff case.
/// Boundary integers within 1e-9 of the threshold are counted as in the event.
inline double exact_two_sided_binomial_tail(const BinomialTails& tails, double y)
{
    const double mp = static_cast<double>(tails.n()) * tails.p();
    const auto hi = static_cast<std::int64_t>(std::ceil(mp + y - 1e-9));
    const auto lo = static_cast<std::int64_t>(std::floor(mp - y + 1e-9));
    return static_cast<double>(std::min(1.0L, tails.sf(hi) + tails.cdf(lo)));
}

struct CountBoundReport {
    double threshold = 0.0;
    double bound = 0.0;
    double empirical_freq = 0.0;
    double ci95 = 0.0;
    bool holds = false;
};

/// P{|A| >= N^(1 - delta^2 - gamma)} <= N^-(1 - delta^2 - gamma) against an
/// ensemble of counts. `delta` defaults to beta when negative.
inline CountBoundReport count_bound_check(std::uint32_t base, double beta, double gamma,
                                          std::span<const std::uint64_t> counts, double delta = -1.0)
{
    const double d = delta < 0.0 ? beta : delta;
    const double exponent = 1.0 - d * d - gamma;
    if (!(exponent > 0.0)) throw domain_error("count_bound_check: requires 1 - beta^2 - gamma > 0");
    if (counts.empty()) throw invalid_argument("count_bound_check: empty ensemble");
    CountBoundReport r;
    r.threshold = std::pow(static_cast<double>(base), exponent);
    r.bound = 1.0 / r.threshold;
    const auto hits = static_cast<std::uint64_t>(
        std::count_if(counts.begin(), counts.end(), [&](std::uint64_t c) { return static_cast<double>(c) >= r.threshold; }));
    r.empirical_freq = static_cast<double>(hits) / static_cast<double>(counts.size());
    r.ci95 = stats::ci95_halfwidth(r.empirical_freq, counts.size());
    r.holds = r.empirical_freq <= r.bound + 3.0 * r.ci95;
    return r;
}

/// sum_{n=1}^{stages} [eta^n + N^-n sqrt(2 n log N) + N^(-n (1 - delta^2 - gamma))].
inline double exceptional_budget(double eta, std::uint32_t base, double delta2, double gamma, std::uint32_t stages)
{
    if (!(eta > 0.0 && eta < 0.5)) throw domain_error("exceptional_budget: eta must lie in (0, 1/2)");
    if (base < 2) throw domain_error("exceptional_budget: N must be >= 2");
    if (stages < 1) throw domain_error("exceptional_budget: stages must be >= 1");
    const double exponent = 1.0 - delta2 - gamma;
    if (!(exponent > 0.0)) throw domain_error("exceptional_budget: requires 1 - delta^2 - gamma > 0");
    const double n_base = base;
    const double log_n = std::log(n_base);
    double sum = 0.0;
    for (std::uint32_t n = 1; n <= stages; ++n) {
        const double nn = n;
        sum += std::pow(eta, nn) + std::pow(n_base, -nn) * std::sqrt(2.0 * nn * log_n) +
               std::pow(n_base, -nn * exponent);
    }
    return sum;
}

struct ProbabilityMonotonicity {
    std::uint64_t violations = 0;
};

/// #{m : p_m / N > p_(m+1)}.
inline ProbabilityMonotonicity probability_monotonicity_check(std::span<const double> probabilities, std::uint32_t base)
{
    if (probabilities.size() < 2) throw invalid_argument("probability_monotonicity_check: need at least two stages");
    ProbabilityMonotonicity r;
    for (std::size_t m = 0; m + 1 < probabilities.size(); ++m) {
        if (probabilities[m] / static_cast<double>(base) > probabilities[m + 1]) ++r.violations;
    }
    return r;
}

} // namespace rapidset

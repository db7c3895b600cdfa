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

// Grid verification of the analytic inequalities. Each check yields one
// record; the suite holds when every non-informational record holds.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "rapidset/bounds.hpp"
#include "rapidset/experiment.hpp"
#include "rapidset/rng.hpp"
#include "rapidset/selection.hpp"

namespace rapidset {

struct ChernoffSet {
    std::string name;
    ChernoffParams params;
};

/// Ten fixed complex-weight configurations. Y is a fraction of the admissible
/// limit 2 p sigma^2 / B; the sparse ones have tails visible at 1e5 trials.
inline std::vector<ChernoffSet> default_chernoff_sets()
{
    struct Shape {
        std::size_t m;
        double p;
        double freq;
        double wobble;
        double fraction;
    };
    static const Shape shapes[] = {
        {50, 0.5, 1.0, 0.0, 0.5},   {100, 0.5, 3.0, 0.5, 0.5}, {200, 0.3, 7.0, 0.25, 0.5}, {30, 0.1, 0.0, 0.0, 0.95},
        {60, 0.1, 3.0, 0.3, 0.9},   {20, 0.2, 1.0, 0.5, 0.9},  {40, 0.05, 2.0, 0.2, 0.95}, {80, 0.08, 5.0, 0.4, 0.9},
        {150, 0.02, 4.0, 0.4, 0.95}, {25, 0.3, 9.0, 0.1, 0.8},
    };
    constexpr double two_pi = 6.283185307179586;
    std::vector<ChernoffSet> out;
    for (std::size_t j = 0; j < std::size(shapes); ++j) {
        const Shape& s = shapes[j];
        ChernoffParams c;
        c.p = s.p;
        for (std::size_t n = 0; n < s.m; ++n) {
            const double r = 1.0 + s.wobble * std::sin(static_cast<double>(n + 1) * static_cast<double>(j + 1));
            const double theta = two_pi * s.freq * static_cast<double>(n) / static_cast<double>(s.m);
            c.weights.push_back(std::polar(r, theta));
        }
        c.y = s.fraction * 2.0 * c.p * c.sigma2() / c.b_max();
        out.push_back({"set-" + std::to_string(j), c});
    }
    return out;
}

struct BoundsGrid {
    std::uint64_t seed = 0;
    std::size_t moment_p_points = 200;
    std::size_t moment_t_points = 200;
    double moment_t_max = 1.0;
    double gaussian_y_min = 0.01;
    double gaussian_y_max = 8.0;
    double gaussian_y_step = 0.01;
    std::uint64_t binomial_n_min = 10;
    std::uint64_t binomial_n_max = 200;
    double binomial_p_min = 0.05;
    double binomial_p_max = 0.95;
    double binomial_p_step = 0.05;
    struct Triple {
        std::uint64_t n;
        double p;
        double r;
        TailSide side;
    };
    std::vector<Triple> binomial_triples; ///< explicit cases, checked individually
    std::vector<std::uint64_t> chernoff_m = {20, 50, 100, 200, 500};
    std::vector<double> chernoff_p = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> chernoff_y_fractions = {0.1, 0.4};
    std::uint64_t chernoff_trials = 100000;
    std::size_t chernoff_sets = 10;
    double budget_eta = 0.1;
    std::uint32_t budget_base = 256;
    double budget_delta2 = 0.25;
    double budget_gamma = 0.25;
    std::vector<std::uint32_t> budget_stages = {1, 2, 3, 5, 10, 50, 60};
    std::vector<double> gaussian_unnormalised_y = {2.0};
};

namespace detail {

inline std::vector<double> step_grid(double lo, double hi, double step)
{
    std::vector<double> v;
    if (!(step > 0.0)) return v;
    for (std::size_t k = 0;; ++k) {
        const double x = lo + static_cast<double>(k) * step;
        if (x > hi + 1e-9 * step) break;
        v.push_back(x);
    }
    return v;
}

} // namespace detail

inline BoundsGrid parse_bounds_grid(const json& j)
{
    if (!j.is_object()) throw config_error("", "grid config must be a JSON object");
    static const std::vector<std::string> sections = {"seed", "moment", "gaussian", "binomial", "chernoff_exact",
                                                      "chernoff_mc", "budget", "gaussian_unnormalised"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(sections.begin(), sections.end(), key) == sections.end()) throw config_error(key, "unknown field '" + key + "'");
    }
    BoundsGrid g;
    g.seed = detail::get_field(j, "seed", g.seed);
    const auto section = [&](const char* name) { return j.contains(name) ? j.at(name) : json::object(); };
    const json mo = section("moment");
    g.moment_p_points = detail::get_field(mo, "p_points", g.moment_p_points);
    g.moment_t_points = detail::get_field(mo, "t_points", g.moment_t_points);
    g.moment_t_max = detail::get_field(mo, "t_max", g.moment_t_max);
    const json ga = section("gaussian");
    g.gaussian_y_min = detail::get_field(ga, "y_min", g.gaussian_y_min);
    g.gaussian_y_max = detail::get_field(ga, "y_max", g.gaussian_y_max);
    g.gaussian_y_step = detail::get_field(ga, "y_step", g.gaussian_y_step);
    const json bi = section("binomial");
    g.binomial_n_min = detail::get_field(bi, "n_min", g.binomial_n_min);
    g.binomial_n_max = detail::get_field(bi, "n_max", g.binomial_n_max);
    g.binomial_p_min = detail::get_field(bi, "p_min", g.binomial_p_min);
    g.binomial_p_max = detail::get_field(bi, "p_max", g.binomial_p_max);
    g.binomial_p_step = detail::get_field(bi, "p_step", g.binomial_p_step);
    if (bi.contains("triples")) {
        for (const auto& t : bi.at("triples")) {
            const auto side = detail::get_field<std::string>(t, "side", "upper");
            if (side != "upper" && side != "lower") throw config_error("binomial", "triple side must be upper or lower");
            const auto n = detail::get_field<std::uint64_t>(t, "n", 0);
            const auto p = detail::get_field<double>(t, "p", 0.0);
            if (n < 1 || !(p > 0.0 && p < 1.0)) throw config_error("binomial", "triple needs n >= 1 and p in (0, 1)");
            g.binomial_triples.push_back({n, p, detail::get_field<double>(t, "r", 0.0),
                                          side == "upper" ? TailSide::upper : TailSide::lower});
        }
    }
    const json ce = section("chernoff_exact");
    g.chernoff_m = detail::get_field(ce, "m_values", g.chernoff_m);
    g.chernoff_p = detail::get_field(ce, "p_values", g.chernoff_p);
    g.chernoff_y_fractions = detail::get_field(ce, "y_fractions", g.chernoff_y_fractions);
    const json cm = section("chernoff_mc");
    g.chernoff_trials = detail::get_field(cm, "trials", g.chernoff_trials);
    g.chernoff_sets = detail::get_field(cm, "sets", g.chernoff_sets);
    const json bu = section("budget");
    g.budget_eta = detail::get_field(bu, "eta", g.budget_eta);
    g.budget_base = detail::get_field(bu, "N", g.budget_base);
    g.budget_delta2 = detail::get_field(bu, "delta2", g.budget_delta2);
    g.budget_gamma = detail::get_field(bu, "gamma", g.budget_gamma);
    g.budget_stages = detail::get_field(bu, "stages", g.budget_stages);
    const json gu = section("gaussian_unnormalised");
    g.gaussian_unnormalised_y = detail::get_field(gu, "y_values", g.gaussian_unnormalised_y);

    if (g.moment_p_points == 0 || g.moment_t_points == 0 || !(g.moment_t_max > 0.0)) {
        throw config_error("moment", "moment grid is empty");
    }
    if (detail::step_grid(g.gaussian_y_min, g.gaussian_y_max, g.gaussian_y_step).empty() || !(g.gaussian_y_min > 0.0)) {
        throw config_error("gaussian", "gaussian grid is empty or starts at Y <= 0");
    }
    if (g.binomial_n_min < 1 || g.binomial_n_min > g.binomial_n_max ||
        detail::step_grid(g.binomial_p_min, g.binomial_p_max, g.binomial_p_step).empty() ||
        !(g.binomial_p_min > 0.0 && g.binomial_p_max < 1.0)) {
        throw config_error("binomial", "binomial grid is empty or has p outside (0, 1)");
    }
    if (g.chernoff_m.empty() || g.chernoff_p.empty() || g.chernoff_y_fractions.empty()) {
        throw config_error("chernoff_exact", "chernoff_exact grid is empty");
    }
    for (double f : g.chernoff_y_fractions) {
        if (!(f > 0.0 && f < 1.0)) throw config_error("chernoff_exact", "y_fractions must lie in (0, 1)");
    }
    for (double p : g.chernoff_p) {
        if (!(p > 0.0 && p < 1.0)) throw config_error("chernoff_exact", "p_values must lie in (0, 1)");
    }
    if (g.chernoff_trials < 10000) throw config_error("chernoff_mc", "trials must be >= 10000");
    if (g.chernoff_sets > default_chernoff_sets().size()) throw config_error("chernoff_mc", "at most 10 sets are defined");
    if (g.budget_stages.empty()) throw config_error("budget", "budget stage list is empty");
    return g;
}

struct CheckRecord {
    std::string check;
    json params;
    double bound = 0.0;
    double value = 0.0;
    bool holds = false;
    std::string status; ///< pass, fail, skipped-precondition, informational
    std::uint64_t evaluated = 0;
    std::uint64_t failures = 0;
};

inline json to_json(const CheckRecord& r)
{
    return {{"check", r.check},           {"params", r.params},       {"bound", r.bound},
            {"exact_or_empirical", r.value}, {"holds", r.holds},      {"status", r.status},
            {"evaluated", r.evaluated},   {"failures", r.failures}};
}

namespace detail {

/// Tracks the worst case (largest value - bound) of a swept inequality.
struct Sweep {
    std::uint64_t evaluated = 0;
    std::uint64_t failures = 0;
    double worst_gap = -INFINITY;
    double worst_bound = 0.0;
    double worst_value = 0.0;
    json worst_params;

    void add(double value, double bound, bool ok, const json& params)
    {
        ++evaluated;
        if (!ok) ++failures;
        const double gap = value - bound;
        if (gap > worst_gap) {
            worst_gap = gap;
            worst_bound = bound;
            worst_value = value;
            worst_params = params;
        }
    }

    CheckRecord record(std::string name, json params) const
    {
        CheckRecord r;
        r.check = std::move(name);
        params["worst_case"] = worst_params;
        r.params = std::move(params);
        r.bound = worst_bound;
        r.value = worst_value;
        r.evaluated = evaluated;
        r.failures = failures;
        r.holds = failures == 0 && evaluated > 0;
        r.status = r.holds ? "pass" : "fail";
        return r;
    }
};

} // namespace detail

inline std::vector<CheckRecord> run_bounds_suite(const BoundsGrid& g)
{
    std::vector<CheckRecord> out;

    {
        detail::Sweep s;
        for (std::size_t i = 1; i <= g.moment_p_points; ++i) {
            const double p = static_cast<double>(i) / static_cast<double>(g.moment_p_points + 1);
            for (std::size_t k = 1; k <= g.moment_t_points; ++k) {
                const double t = g.moment_t_max * static_cast<double>(k) / static_cast<double>(g.moment_t_points);
                const auto m = exponential_moment_check(p, t);
                s.add(m.lhs, m.rhs, m.holds, {{"p", p}, {"t", t}});
            }
        }
        out.push_back(s.record("exponential_moment", {{"p_points", g.moment_p_points}, {"t_points", g.moment_t_points},
                                                      {"t_max", g.moment_t_max}}));
    }

    {
        detail::Sweep lower;
        detail::Sweep upper;
        for (double y : detail::step_grid(g.gaussian_y_min, g.gaussian_y_max, g.gaussian_y_step)) {
            const auto t = gaussian_tail_bounds(y);
            lower.add(t.lower, t.exact, t.lower <= t.exact, {{"y", y}});
            upper.add(t.exact, t.upper, t.exact <= t.upper, {{"y", y}});
        }
        const json params = {{"y_min", g.gaussian_y_min}, {"y_max", g.gaussian_y_max}, {"y_step", g.gaussian_y_step}};
        out.push_back(lower.record("gaussian_tail_lower", params));
        out.push_back(upper.record("gaussian_tail_upper", params));
    }

    for (double y : g.gaussian_unnormalised_y) {
        const auto t = gaussian_tail_bounds_unnormalised(y);
        CheckRecord r;
        r.check = "gaussian_tail_unnormalised";
        r.params = {{"y", y}, {"lower", t.lower}};
        r.bound = t.upper;
        r.value = t.exact;
        r.holds = t.lower <= t.exact && t.exact <= t.upper;
        r.status = "informational";
        r.evaluated = 1;
        r.failures = r.holds ? 0 : 1;
        out.push_back(r);
    }

    {
        detail::Sweep upper;
        detail::Sweep lower;
        for (std::uint64_t n = g.binomial_n_min; n <= g.binomial_n_max; ++n) {
            for (double p : detail::step_grid(g.binomial_p_min, g.binomial_p_max, g.binomial_p_step)) {
                const BinomialTails tails(n, p);
                for (std::uint64_t r = 0; r <= n; ++r) {
                    const double rr = static_cast<double>(r);
                    for (TailSide side : {TailSide::upper, TailSide::lower}) {
                        if (!binomial_side_valid(n, p, rr, side)) continue;
                        const auto b = binomial_tail_bounds(tails, rr, side);
                        auto& s = side == TailSide::upper ? upper : lower;
                        s.add(b.exact, b.bound, b.exact <= b.bound, {{"n", n}, {"p", p}, {"r", r}});
                    }
                }
            }
        }
        const json params = {{"n_min", g.binomial_n_min},
                             {"n_max", g.binomial_n_max},
                             {"p_min", g.binomial_p_min},
                             {"p_max", g.binomial_p_max},
                             {"p_step", g.binomial_p_step}};
        out.push_back(upper.record("binomial_upper_tail", params));
        out.push_back(lower.record("binomial_lower_tail", params));
    }

    for (const auto& t : g.binomial_triples) {
        CheckRecord r;
        r.check = "binomial_tail_case";
        r.params = {{"n", t.n}, {"p", t.p}, {"r", t.r}, {"side", t.side == TailSide::upper ? "upper" : "lower"}};
        r.evaluated = 1;
        if (!binomial_side_valid(t.n, t.p, t.r, t.side)) {
            r.status = "skipped-precondition";
            r.holds = true;
            r.evaluated = 0;
        } else {
            const auto b = binomial_tail_bounds(t.n, t.p, t.r, t.side);
            r.bound = b.bound;
            r.value = b.exact;
            r.holds = b.exact <= b.bound;
            r.failures = r.holds ? 0 : 1;
            r.status = r.holds ? "pass" : "fail";
        }
        out.push_back(r);
    }

    {
        detail::Sweep s;
        for (std::uint64_t m : g.chernoff_m) {
            for (double p : g.chernoff_p) {
                const BinomialTails tails(m, p);
                for (double f : g.chernoff_y_fractions) {
                    ChernoffParams c;
                    c.p = p;
                    c.weights.assign(m, {1.0, 0.0});
                    c.y = f * 2.0 * p * c.sigma2() / c.b_max();
                    const double bound = chernoff_tail_bound(c);
                    const double exact = exact_two_sided_binomial_tail(tails, c.y);
                    s.add(exact, bound, exact <= bound, {{"m", m}, {"p", p}, {"y", c.y}});
                }
            }
        }
        out.push_back(s.record("chernoff_equal_weights_exact", {{"m_values", g.chernoff_m},
                                                                {"p_values", g.chernoff_p},
                                                                {"y_fractions", g.chernoff_y_fractions}}));
    }

    {
        const auto sets = default_chernoff_sets();
        for (std::size_t j = 0; j < g.chernoff_sets; ++j) {
            const auto& set = sets[j];
            const double bound = chernoff_tail_bound(set.params);
            const auto est = chernoff_empirical(set.params, g.chernoff_trials, derive_seed(g.seed, "chernoff-set", j));
            CheckRecord r;
            r.check = "chernoff_complex_weights_mc";
            r.params = {{"set", set.name},
                        {"m", set.params.weights.size()},
                        {"p", set.params.p},
                        {"y", set.params.y},
                        {"sigma2", set.params.sigma2()},
                        {"b_max", set.params.b_max()},
                        {"trials", est.trials},
                        {"ci95", est.ci95_halfwidth}};
            r.bound = bound;
            r.value = est.p_hat;
            r.holds = est.p_hat <= bound + 3.0 * est.ci95_halfwidth;
            r.status = r.holds ? "pass" : "fail";
            r.evaluated = 1;
            r.failures = r.holds ? 0 : 1;
            out.push_back(r);
        }
    }

    {
        CheckRecord r;
        r.check = "exceptional_budget";
        json values = json::array();
        std::vector<double> sums;
        bool ok = true;
        try {
            for (std::uint32_t n : g.budget_stages) {
                sums.push_back(exceptional_budget(g.budget_eta, g.budget_base, g.budget_delta2, g.budget_gamma, n));
                values.push_back({{"stages", n}, {"value", sums.back()}});
            }
        } catch (const domain_error& e) {
            r.params = {{"error", e.what()}};
            r.status = "skipped-precondition";
            r.holds = true;
            out.push_back(r);
            ok = false;
        }
        if (ok) {
            // Partial sums are finite, nondecreasing and the series converges.
            bool finite_monotone = true;
            for (std::size_t i = 0; i < sums.size(); ++i) {
                finite_monotone = finite_monotone && std::isfinite(sums[i]) && (i == 0 || sums[i] >= sums[i - 1]);
            }
            const double tail_gap = sums.size() >= 2 ? std::abs(sums.back() - sums[sums.size() - 2]) : 0.0;
            r.params = {{"eta", g.budget_eta},
                        {"N", g.budget_base},
                        {"delta2", g.budget_delta2},
                        {"gamma", g.budget_gamma},
                        {"partial_sums", values},
                        {"last_increment", tail_gap}};
            r.bound = 1e-10;
            r.value = tail_gap;
            r.holds = finite_monotone && tail_gap < 1e-10;
            r.status = r.holds ? "pass" : "fail";
            r.evaluated = sums.size();
            r.failures = r.holds ? 0 : 1;
            out.push_back(r);
        }
    }
    return out;
}

inline json bounds_report(const std::vector<CheckRecord>& records)
{
    json arr = json::array();
    bool all = true;
    for (const auto& r : records) {
        arr.push_back(to_json(r));
        if (r.status == "fail") all = false;
    }
    return {{"holds_all", all}, {"records", arr}};
}

} // namespace rapidset

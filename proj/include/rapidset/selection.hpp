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

// Stage-m rapid-interval selection.
//
// Stage m splits [0, 1] into N^m equal intervals (1-based index k) and
// keeps those whose oscillation reaches the stage threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rapidset/brownian.hpp"
#include "rapidset/errors.hpp"
#include "rapidset/io.hpp"
#include "rapidset/rng.hpp"
#include "rapidset/stats.hpp"

namespace rapidset {

enum class SelectionRule {
    canonical_gauge, ///< threshold beta * gauge(N^-m)
    paper_literal,   ///< threshold beta * N^(-m/2) * sqrt(2 log N) at every stage
};

inline std::string_view to_string(SelectionRule rule) noexcept
{
    return rule == SelectionRule::canonical_gauge ? "canonical-gauge" : "paper-literal";
}

inline SelectionRule parse_rule(std::string_view s)
{
    if (s == "canonical-gauge") return SelectionRule::canonical_gauge;
    if (s == "paper-literal") return SelectionRule::paper_literal;
    throw invalid_argument("unknown selection rule '" + std::string(s) + "'");
}

/// N^m with overflow detection.
inline std::uint64_t int_pow(std::uint64_t base, unsigned exp)
{
    std::uint64_t r = 1;
    for (unsigned i = 0; i < exp; ++i) {
        if (r > std::numeric_limits<std::uint64_t>::max() / base) throw invalid_argument("N^m overflows 64 bits");
        r *= base;
    }
    return r;
}

struct StageConfig {
    std::uint32_t base = 2; ///< N
    std::uint32_t stage = 1; ///< m
    double beta = 0.5;
    SelectionRule rule = SelectionRule::canonical_gauge;

    std::uint64_t interval_count() const { return int_pow(base, stage); }
    double interval_length() const { return std::pow(static_cast<double>(base), -static_cast<double>(stage)); }
};

inline void validate(const StageConfig& c)
{
    if (c.base < 2) throw invalid_argument("StageConfig: N must be >= 2");
    if (c.stage < 1) throw invalid_argument("StageConfig: stage must be >= 1");
    if (!(c.beta > 0.0 && c.beta < 1.0)) throw invalid_argument("StageConfig: beta must lie in (0, 1)");
    (void)c.interval_count();
}

struct SelectionMask {
    StageConfig config;
    std::vector<std::uint64_t> selected; ///< sorted, 1-based
    double threshold = 0.0;

    bool empty() const noexcept { return selected.empty(); }
    std::size_t size() const noexcept { return selected.size(); }
};

struct ProbabilityEstimate {
    double p_hat = 0.0;
    std::uint64_t trials = 0;
    double ci95_halfwidth = 0.0;
};

inline ProbabilityEstimate make_estimate(std::uint64_t hits, std::uint64_t trials)
{
    ProbabilityEstimate e;
    e.trials = trials;
    e.p_hat = static_cast<double>(hits) / static_cast<double>(trials);
    e.ci95_halfwidth = stats::ci95_halfwidth(e.p_hat, trials);
    return e;
}

inline double selection_threshold(const StageConfig& c)
{
    validate(c);
    const double n = c.base;
    const double m = c.stage;
    if (c.rule == SelectionRule::canonical_gauge) return c.beta * gauge(std::pow(n, -m));
    return c.beta * std::pow(n, -m / 2.0) * std::sqrt(2.0 * std::log(n));
}

/// Intervals of stage `config.stage` whose oscillation meets the threshold.
/// Each interval must contain at least `samples_per_interval` grid steps
/// (default N, i.e. the path is read at resolution >= N^(m+1)).
inline SelectionMask select_rapid(const PathGrid& path, const StageConfig& config,
                                  std::uint64_t samples_per_interval = 0)
{
    validate(config);
    const std::uint64_t count = config.interval_count();
    const std::uint64_t min_samples = samples_per_interval == 0 ? config.base : samples_per_interval;
    if (path.resolution() % count != 0) {
        throw invalid_argument("select_rapid: path resolution " + std::to_string(path.resolution()) +
                               " is not a multiple of N^m = " + std::to_string(count));
    }
    const std::uint64_t per = path.resolution() / count;
    if (per < min_samples) {
        throw insufficient_resolution_error("select_rapid: " + std::to_string(per) +
                                            " grid steps per interval, need " + std::to_string(min_samples));
    }
    SelectionMask mask;
    mask.config = config;
    mask.threshold = selection_threshold(config);
    const auto values = path.values();
    for (std::uint64_t k = 1; k <= count; ++k) {
        if (range_of(values.subspan((k - 1) * per, per + 1)) >= mask.threshold) mask.selected.push_back(k);
    }
    return mask;
}

/// Fraction of independent single-interval paths (`samples_per_interval`
/// steps, default N) whose oscillation meets the stage threshold.
inline ProbabilityEstimate estimate_selection_probability(const StageConfig& config, std::uint64_t trials,
                                                          std::uint64_t seed,
                                                          std::uint64_t samples_per_interval = 0)
{
    validate(config);
    if (trials < 100) throw invalid_argument("estimate_selection_probability: trials must be >= 100");
    const std::uint64_t k = samples_per_interval == 0 ? config.base : samples_per_interval;
    const double sd = std::sqrt(config.interval_length() / static_cast<double>(k));
    // Compare the unit-variance walk against the rescaled threshold.
    const double threshold = selection_threshold(config) / sd;
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        Xoshiro256 gen(derive_seed(seed, "selection-trial", t));
        double x = 0.0;
        double lo = 0.0;
        double hi = 0.0;
        for (std::uint64_t j = 0; j < k; ++j) {
            x += standard_normal(gen);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        if (hi - lo >= threshold) ++hits;
    }
    return make_estimate(hits, trials);
}

/// Fraction of trials with X(h) - X(0) >= beta * sqrt(2 h log(1/h)), the
/// one-sided Gaussian event that the analytic bounds describe.
inline ProbabilityEstimate estimate_increment_probability(const StageConfig& config, std::uint64_t trials,
                                                          std::uint64_t seed)
{
    validate(config);
    if (trials < 100) throw invalid_argument("estimate_increment_probability: trials must be >= 100");
    const double lambda = config.beta * std::sqrt(2.0 * static_cast<double>(config.stage) *
                                                  std::log(static_cast<double>(config.base)));
    Xoshiro256 gen(derive_seed(seed, "increment-trial"));
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        if (standard_normal(gen) >= lambda) ++hits;
    }
    return make_estimate(hits, trials);
}

struct ProbabilityBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// N^(-beta^2 m) / (sqrt(2 pi) 2^(3/2) beta (m log N)^(1/2)). No domain check.
inline double closed_form_lower_bound(const StageConfig& c)
{
    const double m = c.stage;
    const double log_n = std::log(static_cast<double>(c.base));
    return std::pow(static_cast<double>(c.base), -c.beta * c.beta * m) /
           (std::sqrt(2.0 * std::numbers::pi) * std::pow(2.0, 1.5) * c.beta * std::sqrt(m * log_n));
}

/// True when (2L)^(-1/2) - (2L)^(-3/2) > 0 with L = beta^2 m log N,
/// the Mills-ratio bracket the closed-form lower bound is derived from.
inline bool lower_bracket_positive(const StageConfig& c)
{
    const double two_l = 2.0 * c.beta * c.beta * c.stage * std::log(static_cast<double>(c.base));
    return two_l > 1.0;
}

inline ProbabilityBounds analytic_probability_bounds(const StageConfig& c)
{
    validate(c);
    if (!lower_bracket_positive(c)) {
        const double two_l = 2.0 * c.beta * c.beta * c.stage * std::log(static_cast<double>(c.base));
        throw domain_error("analytic_probability_bounds: bracket (2L)^-1/2 - (2L)^-3/2 <= 0 with 2L = " +
                           io::format_double(two_l) + " (need 2 beta^2 m log N > 1)");
    }
    const double m = c.stage;
    const double log_n = std::log(static_cast<double>(c.base));
    ProbabilityBounds b;
    b.lower = closed_form_lower_bound(c);
    b.upper = std::pow(static_cast<double>(c.base), -c.beta * c.beta * m) /
              (std::sqrt(2.0 * std::numbers::pi) * std::sqrt(2.0 * m * c.beta * c.beta * log_n));
    return b;
}

struct NestingReport {
    std::uint64_t orphan_count = 0;
    std::vector<std::uint64_t> orphan_indices;
};

/// Index of the stage-(m-1) interval containing stage-m interval k.
inline std::uint64_t parent_index(std::uint64_t k, std::uint32_t base) noexcept
{
    return (k - 1) / base + 1;
}

inline NestingReport check_nesting(const SelectionMask& coarse, const SelectionMask& fine)
{
    if (fine.config.base != coarse.config.base) throw invalid_argument("check_nesting: base mismatch");
    if (fine.config.stage != coarse.config.stage + 1) throw invalid_argument("check_nesting: stages not adjacent");
    NestingReport r;
    for (std::uint64_t k : fine.selected) {
        const std::uint64_t parent = parent_index(k, fine.config.base);
        if (!std::binary_search(coarse.selected.begin(), coarse.selected.end(), parent)) {
            ++r.orphan_count;
            r.orphan_indices.push_back(k);
        }
    }
    return r;
}

/// CSV `stage,k` for each mask in order.
inline void write_masks_csv(std::span<const SelectionMask> masks, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << "stage,k\n";
    for (const auto& m : masks) {
        for (std::uint64_t k : m.selected) out << (io::CsvRow{} << m.config.stage << k);
    }
}

struct ProbabilityRow {
    StageConfig config;
    ProbabilityEstimate estimate;
};

/// CSV `N,m,beta,rule,p_hat,ci95,trials`.
inline void write_probability_csv(std::span<const ProbabilityRow> rows, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << "N,m,beta,rule,p_hat,ci95,trials\n";
    for (const auto& r : rows) {
        out << (io::CsvRow{} << r.config.base << r.config.stage << r.config.beta << to_string(r.config.rule)
                             << r.estimate.p_hat << r.estimate.ci95_halfwidth << r.estimate.trials);
    }
}

} // namespace rapidset

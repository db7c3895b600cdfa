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

// Piecewise-uniform stage measures and nested chains of them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rapidset/brownian.hpp"
#include "rapidset/errors.hpp"
#include "rapidset/io.hpp"
#include "rapidset/rng.hpp"
#include "rapidset/selection.hpp"
#include "rapidset/stats.hpp"

namespace rapidset {

/// Density 1/p on the selected stage-m intervals, zero elsewhere.
struct StageMeasure {
    std::uint32_t stage = 1;
    std::uint32_t base = 2;
    std::vector<std::uint64_t> selected; ///< sorted, 1-based
    double p = 1.0;
    double density = 1.0;

    double interval_length() const { return std::pow(static_cast<double>(base), -static_cast<double>(stage)); }
};

inline StageMeasure build_stage_measure(const SelectionMask& mask, double p)
{
    if (!(p > 0.0 && p <= 1.0)) throw invalid_argument("build_stage_measure: p must lie in (0, 1]");
    if (mask.empty()) {
        throw empty_measure_error("build_stage_measure: no interval selected at stage " +
                                  std::to_string(mask.config.stage));
    }
    StageMeasure m;
    m.stage = mask.config.stage;
    m.base = mask.config.base;
    m.selected = mask.selected;
    m.p = p;
    m.density = 1.0 / p;
    return m;
}

inline double total_mass(const StageMeasure& m)
{
    return static_cast<double>(m.selected.size()) * m.density * m.interval_length();
}

/// Mass of the level-`level` interval `k` (1-based), level <= stage.
inline double interval_mass(const StageMeasure& m, std::uint32_t level, std::uint64_t k)
{
    if (level < 1 || level > m.stage) throw invalid_argument("interval_mass: level must lie in [1, stage]");
    const std::uint64_t span = int_pow(m.base, m.stage - level);
    const std::uint64_t first = (k - 1) * span + 1;
    const std::uint64_t last = k * span;
    const auto lo = std::lower_bound(m.selected.begin(), m.selected.end(), first);
    const auto hi = std::upper_bound(lo, m.selected.end(), last);
    return static_cast<double>(hi - lo) * m.density * m.interval_length();
}

/// mu([a, b]) for a < b multiples of N^-m.
inline double measure_of(const StageMeasure& m, double a, double b)
{
    const std::uint64_t count = int_pow(m.base, m.stage);
    const auto i0 = detail::grid_index(a, count, "a");
    const auto i1 = detail::grid_index(b, count, "b");
    if (i0 >= i1) throw invalid_argument("measure_of: need a < b");
    const auto lo = std::upper_bound(m.selected.begin(), m.selected.end(), i0);
    const auto hi = std::upper_bound(lo, m.selected.end(), i1);
    return static_cast<double>(hi - lo) * m.density * m.interval_length();
}

struct MeasureChain {
    std::uint64_t path_seed = 0;
    std::uint32_t base = 2;
    std::vector<StageMeasure> stages;
};

/// Thrown when a stage keeps no interval; carries the chain up to the last nonempty stage.
class chain_died_error : public std::runtime_error {
public:
    chain_died_error(std::uint32_t stage, MeasureChain survived)
        : std::runtime_error("measure chain died at stage " + std::to_string(stage)), stage_(stage),
          survived_(std::move(survived))
    {
    }
    std::uint32_t stage() const noexcept { return stage_; }
    const MeasureChain& survived() const noexcept { return survived_; }

private:
    std::uint32_t stage_;
    MeasureChain survived_;
};

/// Drops fine indices whose parent interval is not in `parent`.
inline std::vector<std::uint64_t> restrict_to_children(std::span<const std::uint64_t> fine,
                                                       std::span<const std::uint64_t> parent,
                                                       std::uint32_t base)
{
    std::vector<std::uint64_t> kept;
    kept.reserve(fine.size());
    for (std::uint64_t k : fine) {
        if (std::binary_search(parent.begin(), parent.end(), parent_index(k, base))) kept.push_back(k);
    }
    return kept;
}

namespace detail {

inline void validate_schedule(std::uint32_t base, std::span<const StageConfig> stages,
                              std::span<const double> probabilities)
{
    if (stages.empty()) throw invalid_argument("chain: need at least one stage");
    if (probabilities.size() != stages.size()) throw invalid_argument("chain: one probability per stage required");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        validate(stages[i]);
        if (stages[i].base != base) throw invalid_argument("chain: stage base differs from chain base");
        if (stages[i].stage != i + 1) throw invalid_argument("chain: stages must be numbered 1, 2, ...");
        if (i > 0 && stages[i].beta < stages[i - 1].beta) throw invalid_argument("chain: beta must be nondecreasing");
        if (!(probabilities[i] > 0.0 && probabilities[i] <= 1.0)) {
            throw invalid_argument("chain: probabilities must lie in (0, 1]");
        }
    }
}

} // namespace detail

/// Selects every stage on one fine path and intersects each stage with
/// the support of the previous one.
inline MeasureChain build_measure_chain(const PathGrid& path, std::uint32_t base,
                                        std::span<const StageConfig> stages, std::span<const double> probabilities)
{
    detail::validate_schedule(base, stages, probabilities);
    const std::uint64_t needed = int_pow(base, stages.back().stage + 1);
    if (path.resolution() < needed) {
        throw insufficient_resolution_error("build_measure_chain: path resolution " +
                                            std::to_string(path.resolution()) + " < N^(m+1) = " +
                                            std::to_string(needed));
    }
    MeasureChain chain;
    chain.path_seed = path.seed();
    chain.base = base;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        SelectionMask mask = select_rapid(path, stages[i]);
        if (i > 0) mask.selected = restrict_to_children(mask.selected, chain.stages.back().selected, base);
        if (mask.empty()) throw chain_died_error(stages[i].stage, std::move(chain));
        chain.stages.push_back(build_stage_measure(mask, probabilities[i]));
    }
    return chain;
}

/// Nested masks produced by the progressive builder. On death, `masks`
/// holds the stages before `died_at`.
struct ChainSelection {
    std::uint64_t path_seed = 0;
    std::uint32_t base = 2;
    std::uint64_t samples_per_interval = 0;
    std::vector<SelectionMask> masks;
    std::optional<std::uint32_t> died_at;
    std::vector<std::uint64_t> examined; ///< candidate intervals inspected per stage
};

/// Seed of the refinement that takes the path from stage m-1 to stage m.
inline std::uint64_t stage_refinement_seed(std::uint64_t path_seed, std::uint32_t stage) noexcept
{
    return derive_seed(path_seed, "stage-refinement", stage);
}

/// Builds nested masks while refining the path only inside surviving
/// intervals.
///
/// Stage m reads the path at resolution N^m * K (K = samples_per_interval).
/// Stage 1 uses generate_path(N * K, path_seed); stage m > 1 refines each
/// surviving stage-(m-1) interval by N with stage_refinement_seed(m).
/// The result equals selecting on the fully refined paths
///   P_1 = generate_path(N K, s), P_m = refine_path(P_{m-1}, N, stage_refinement_seed(s, m))
/// and intersecting with the parent support, at a fraction of the cost.
inline ChainSelection select_chain_progressive(std::uint64_t path_seed, std::uint32_t base,
                                               std::span<const StageConfig> stages,
                                               std::uint64_t samples_per_interval)
{
    if (stages.empty()) throw invalid_argument("select_chain_progressive: need at least one stage");
    if (samples_per_interval < 1) throw invalid_argument("select_chain_progressive: samples_per_interval must be >= 1");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        validate(stages[i]);
        if (stages[i].base != base || stages[i].stage != i + 1) {
            throw invalid_argument("select_chain_progressive: stages must be 1, 2, ... with base N");
        }
    }
    const std::uint64_t kk = samples_per_interval;
    const std::uint64_t stride = kk + 1;

    ChainSelection out;
    out.path_seed = path_seed;
    out.base = base;
    out.samples_per_interval = kk;

    const PathGrid first = generate_path(static_cast<std::uint64_t>(base) * kk, path_seed);
    SelectionMask mask1 = select_rapid(first, stages[0], kk);
    out.examined.push_back(base);
    if (mask1.empty()) {
        out.died_at = 1;
        return out;
    }
    // Grid values of every surviving interval at its stage resolution.
    std::vector<double> segments;
    if (stages.size() > 1) {
        segments.reserve(mask1.size() * stride);
        for (std::uint64_t k : mask1.selected) {
            const auto v = first.values().subspan((k - 1) * kk, stride);
            segments.insert(segments.end(), v.begin(), v.end());
        }
    }
    out.masks.push_back(std::move(mask1));

    std::vector<double> refined(static_cast<std::size_t>(base) * kk + 1);
    for (std::size_t si = 1; si < stages.size(); ++si) {
        const StageConfig& cfg = stages[si];
        const double threshold = selection_threshold(cfg);
        const std::uint64_t seed = stage_refinement_seed(path_seed, cfg.stage);
        // Grid spacing of the stage-(m-1) path: N^-(m-1) / K.
        const double spacing = std::pow(static_cast<double>(base), -static_cast<double>(cfg.stage - 1)) /
                               static_cast<double>(kk);
        const bool keep_segments = si + 1 < stages.size();
        const auto& parents = out.masks.back().selected;

        SelectionMask mask;
        mask.config = cfg;
        mask.threshold = threshold;
        std::vector<double> next_segments;
        for (std::size_t pi = 0; pi < parents.size(); ++pi) {
            const std::uint64_t k = parents[pi];
            const std::span<const double> coarse(segments.data() + pi * stride, stride);
            refine_segment(coarse, (k - 1) * kk, spacing, base, seed, refined);
            for (std::uint64_t c = 0; c < base; ++c) {
                const std::span<const double> child(refined.data() + c * kk, stride);
                if (range_of(child) >= threshold) {
                    mask.selected.push_back((k - 1) * base + c + 1);
                    if (keep_segments) next_segments.insert(next_segments.end(), child.begin(), child.end());
                }
            }
        }
        out.examined.push_back(static_cast<std::uint64_t>(parents.size()) * base);
        if (mask.empty()) {
            out.died_at = cfg.stage;
            return out;
        }
        out.masks.push_back(std::move(mask));
        segments = std::move(next_segments);
    }
    return out;
}

/// Measures for the surviving stages of a selection.
inline MeasureChain build_chain_measures(const ChainSelection& selection, std::span<const double> probabilities)
{
    if (probabilities.size() < selection.masks.size()) {
        throw invalid_argument("build_chain_measures: one probability per surviving stage required");
    }
    MeasureChain chain;
    chain.path_seed = selection.path_seed;
    chain.base = selection.base;
    for (std::size_t i = 0; i < selection.masks.size(); ++i) {
        chain.stages.push_back(build_stage_measure(selection.masks[i], probabilities[i]));
    }
    return chain;
}

/// Number of stage-(m+1) indices whose parent is missing from stage m, summed over m.
inline std::uint64_t nesting_violations(const MeasureChain& chain)
{
    std::uint64_t bad = 0;
    for (std::size_t i = 1; i < chain.stages.size(); ++i) {
        const auto& parent = chain.stages[i - 1].selected;
        for (std::uint64_t k : chain.stages[i].selected) {
            if (!std::binary_search(parent.begin(), parent.end(), parent_index(k, chain.base))) ++bad;
        }
    }
    return bad;
}

struct MonotonicityReport {
    std::uint64_t violations = 0;
};

/// Counts surviving stage-(m+1) intervals whose mass exceeds the mass of
/// their stage-m parent. With one probability per stage this is exactly
/// the number of fine intervals in stages where p_m / N <= p_(m+1) fails.
inline MonotonicityReport mass_monotonicity_check(const MeasureChain& chain)
{
    MonotonicityReport r;
    for (std::size_t i = 1; i < chain.stages.size(); ++i) {
        const StageMeasure& coarse = chain.stages[i - 1];
        const StageMeasure& fine = chain.stages[i];
        for (std::uint64_t k : fine.selected) {
            const double child = interval_mass(fine, fine.stage, k);
            const double parent = interval_mass(coarse, coarse.stage, parent_index(k, chain.base));
            if (child > parent) ++r.violations;
        }
    }
    return r;
}

struct ScaleCount {
    double h = 0.0;
    double count = 0.0;
};

/// Least-squares slope of log count against log(1/h).
inline double box_dimension_estimate(std::span<const ScaleCount> counts)
{
    if (counts.size() < 2) throw invalid_argument("box_dimension_estimate: need at least two scales");
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& c : counts) {
        if (!(c.count >= 1.0)) throw invalid_argument("box_dimension_estimate: every count must be >= 1");
        if (!(c.h > 0.0)) throw invalid_argument("box_dimension_estimate: scales must be positive");
        x.push_back(-std::log(c.h));
        y.push_back(std::log(c.count));
    }
    return stats::least_squares(x, y).slope;
}

inline std::vector<ScaleCount> scale_counts(const MeasureChain& chain)
{
    std::vector<ScaleCount> out;
    for (const auto& s : chain.stages) out.push_back({s.interval_length(), static_cast<double>(s.selected.size())});
    return out;
}

/// CSV `stage,k,density`.
inline void write_chain_csv(const MeasureChain& chain, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << "stage,k,density\n";
    for (const auto& s : chain.stages) {
        for (std::uint64_t k : s.selected) out << (io::CsvRow{} << s.stage << k << s.density);
    }
}

/// CSV `stage,h,count,mass`.
inline void write_counts_csv(const MeasureChain& chain, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << "stage,h,count,mass\n";
    for (const auto& s : chain.stages) {
        out << (io::CsvRow{} << s.stage << s.interval_length() << static_cast<std::uint64_t>(s.selected.size())
                             << total_mass(s));
    }
}

} // namespace rapidset

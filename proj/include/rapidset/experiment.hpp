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

// Config-driven experiment runner: ensembles of chains, spectra, checks and
// reports. Outputs are a pure function of the resolved config; the number
// of worker threads only changes wall time.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "rapidset/brownian.hpp"
#include "rapidset/errors.hpp"
#include "rapidset/fourier.hpp"
#include "rapidset/io.hpp"
#include "rapidset/measure.hpp"
#include "rapidset/rng.hpp"
#include "rapidset/selection.hpp"
#include "rapidset/stats.hpp"

namespace rapidset {

using json = nlohmann::json;

enum class ProbabilityMode { empirical, analytic };

inline std::string_view to_string(ProbabilityMode m) noexcept
{
    return m == ProbabilityMode::empirical ? "empirical" : "analytic";
}

enum exit_code : int {
    exit_ok = 0,
    exit_invalid_config = 2,
    exit_unwritable_output = 3,
    exit_all_died = 4,
};

/// Invalid configuration; names the offending field.
class config_error : public std::runtime_error {
public:
    config_error(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field))
    {
    }
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    double alpha = 0.5;
    std::uint32_t base = 64;
    std::uint32_t stages = 1;
    bool beta_auto = true;
    double beta_scale = 0.9;
    std::vector<double> beta_schedule; ///< resolved, one per stage
    SelectionRule rule = SelectionRule::canonical_gauge;
    std::uint32_t ensemble = 1;
    std::uint64_t master_seed = 0;
    ProbabilityMode probability_mode = ProbabilityMode::empirical;
    std::uint64_t probability_trials = 100000;
    std::uint64_t samples_per_interval = 0; ///< resolved to N when 0
    double u_max = 0.0;                     ///< resolved to N^(stages+1) when 0
    unsigned points_per_decade = 64;
    double fit_u_min = 10.0;
    double fit_u_max = 0.0; ///< resolved to min(N^stages, u_max) when 0
    double epsilon = 0.5;
    double gamma = -1.0; ///< resolved to 0.9 (1 - alpha^2) when negative
    std::uint32_t retry_on_death = 0;
    bool write_chain = true;
    bool write_masks = false;
    bool write_spectra = true;
    std::string output_dir = "out";
};

/// beta_m = alpha (1 - 2^-m) s.
inline std::vector<double> auto_beta_schedule(double alpha, std::uint32_t stages, double scale)
{
    std::vector<double> b;
    for (std::uint32_t m = 1; m <= stages; ++m) b.push_back(alpha * (1.0 - std::pow(2.0, -static_cast<double>(m))) * scale);
    return b;
}

namespace detail {

template <class T>
T get_field(const json& j, const char* key, T fallback)
{
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error(key, std::string("field '") + key + "' has the wrong type: " + e.what());
    }
}

inline const std::vector<std::string>& known_config_keys()
{
    static const std::vector<std::string> keys = {
        "alpha", "N", "stages", "beta_schedule", "beta_scale", "rule", "ensemble", "master_seed",
        "probability_mode", "probability_trials", "samples_per_interval", "u_grid", "fit_u_min", "fit_u_max",
        "epsilon", "gamma", "output_dir", "retry_on_death", "write_chain", "write_masks", "write_spectra"};
    return keys;
}

} // namespace detail

/// Checks invariants and fills derived defaults. Throws config_error.
inline void resolve(ExperimentConfig& c)
{
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw config_error("alpha", "alpha must lie in (0, 1)");
    if (c.base < 2) throw config_error("N", "N must be >= 2");
    if (c.stages < 1) throw config_error("stages", "stages must be >= 1");
    if (c.ensemble < 1) throw config_error("ensemble", "ensemble must be >= 1");
    if (c.beta_auto) {
        if (!(c.beta_scale > 0.0 && c.beta_scale <= 1.0)) throw config_error("beta_scale", "beta_scale must lie in (0, 1]");
        c.beta_schedule = auto_beta_schedule(c.alpha, c.stages, c.beta_scale);
    }
    if (c.beta_schedule.size() != c.stages) {
        throw config_error("beta_schedule", "beta_schedule needs one value per stage");
    }
    for (std::size_t i = 0; i < c.beta_schedule.size(); ++i) {
        const double b = c.beta_schedule[i];
        if (!(b > 0.0 && b < c.alpha)) throw config_error("beta_schedule", "every beta must lie in (0, alpha)");
        if (i > 0 && b < c.beta_schedule[i - 1]) throw config_error("beta_schedule", "beta_schedule must be nondecreasing");
    }
    try {
        (void)int_pow(c.base, c.stages + 1);
    } catch (const invalid_argument&) {
        throw config_error("stages", "N^(stages+1) overflows 64 bits");
    }
    if (c.samples_per_interval == 0) c.samples_per_interval = c.base;
    if (c.probability_mode == ProbabilityMode::empirical && c.probability_trials < 100) {
        throw config_error("probability_trials", "probability_trials must be >= 100");
    }
    if (c.u_max == 0.0) c.u_max = std::pow(static_cast<double>(c.base), static_cast<double>(c.stages + 1));
    if (!(c.u_max > 1.0)) throw config_error("u_grid", "u_grid.u_max must exceed 1");
    if (c.points_per_decade == 0) throw config_error("u_grid", "u_grid.points_per_decade must be >= 1");
    if (c.fit_u_max == 0.0) c.fit_u_max = std::min(c.u_max, std::pow(static_cast<double>(c.base), static_cast<double>(c.stages)));
    if (!(c.fit_u_min > 0.0 && c.fit_u_min < c.fit_u_max)) throw config_error("fit_u_min", "need 0 < fit_u_min < fit_u_max");
    if (!(c.epsilon > 0.0)) throw config_error("epsilon", "epsilon must be positive");
    if (c.gamma < 0.0) c.gamma = 0.9 * (1.0 - c.alpha * c.alpha);
    if (!(c.gamma > 0.0 && c.gamma < 1.0 - c.alpha * c.alpha)) throw config_error("gamma", "gamma must lie in (0, 1 - alpha^2)");
}

inline ExperimentConfig parse_config(const json& j)
{
    if (!j.is_object()) throw config_error("", "config must be a JSON object");
    const auto& known = detail::known_config_keys();
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) throw config_error(key, "unknown field '" + key + "'");
    }
    ExperimentConfig c;
    c.alpha = detail::get_field(j, "alpha", c.alpha);
    c.base = detail::get_field(j, "N", c.base);
    c.stages = detail::get_field(j, "stages", c.stages);
    if (j.contains("beta_schedule") && !j.at("beta_schedule").is_null()) {
        const auto& b = j.at("beta_schedule");
        if (b.is_string()) {
            if (b.get<std::string>() != "auto") throw config_error("beta_schedule", "beta_schedule must be a list or \"auto\"");
            c.beta_auto = true;
        } else if (b.is_array()) {
            c.beta_auto = false;
            for (const auto& v : b) {
                if (!v.is_number()) throw config_error("beta_schedule", "beta_schedule entries must be numbers");
                c.beta_schedule.push_back(v.get<double>());
            }
        } else {
            throw config_error("beta_schedule", "beta_schedule must be a list or \"auto\"");
        }
    }
    c.beta_scale = detail::get_field(j, "beta_scale", c.beta_scale);
    try {
        c.rule = parse_rule(detail::get_field<std::string>(j, "rule", std::string(to_string(c.rule))));
    } catch (const invalid_argument& e) {
        throw config_error("rule", e.what());
    }
    c.ensemble = detail::get_field(j, "ensemble", c.ensemble);
    c.master_seed = detail::get_field(j, "master_seed", c.master_seed);
    const auto mode = detail::get_field<std::string>(j, "probability_mode", "empirical");
    if (mode == "empirical") {
        c.probability_mode = ProbabilityMode::empirical;
    } else if (mode == "analytic") {
        c.probability_mode = ProbabilityMode::analytic;
    } else {
        throw config_error("probability_mode", "probability_mode must be \"empirical\" or \"analytic\"");
    }
    c.probability_trials = detail::get_field(j, "probability_trials", c.probability_trials);
    c.samples_per_interval = detail::get_field(j, "samples_per_interval", c.samples_per_interval);
    if (j.contains("u_grid")) {
        const auto& g = j.at("u_grid");
        if (!g.is_object()) throw config_error("u_grid", "u_grid must be an object");
        for (const auto& [key, _] : g.items()) {
            if (key != "u_max" && key != "points_per_decade") throw config_error("u_grid", "unknown field 'u_grid." + key + "'");
        }
        c.u_max = detail::get_field(g, "u_max", c.u_max);
        c.points_per_decade = detail::get_field(g, "points_per_decade", c.points_per_decade);
    }
    c.fit_u_min = detail::get_field(j, "fit_u_min", c.fit_u_min);
    c.fit_u_max = detail::get_field(j, "fit_u_max", c.fit_u_max);
    c.epsilon = detail::get_field(j, "epsilon", c.epsilon);
    c.gamma = detail::get_field(j, "gamma", c.gamma);
    c.output_dir = detail::get_field(j, "output_dir", c.output_dir);
    c.retry_on_death = detail::get_field(j, "retry_on_death", c.retry_on_death);
    c.write_chain = detail::get_field(j, "write_chain", c.write_chain);
    c.write_masks = detail::get_field(j, "write_masks", c.write_masks);
    c.write_spectra = detail::get_field(j, "write_spectra", c.write_spectra);
    resolve(c);
    return c;
}

/// Resolved config with every default materialised. The output directory
/// is omitted because it does not influence any result.
inline json to_json(const ExperimentConfig& c)
{
    return {{"alpha", c.alpha},
            {"N", c.base},
            {"stages", c.stages},
            {"beta_schedule", c.beta_schedule},
            {"beta_schedule_rule", c.beta_auto ? "auto" : "explicit"},
            {"beta_scale", c.beta_scale},
            {"rule", to_string(c.rule)},
            {"ensemble", c.ensemble},
            {"master_seed", c.master_seed},
            {"probability_mode", to_string(c.probability_mode)},
            {"probability_trials", c.probability_trials},
            {"samples_per_interval", c.samples_per_interval},
            {"u_grid", {{"u_max", c.u_max}, {"points_per_decade", c.points_per_decade}}},
            {"fit_u_min", c.fit_u_min},
            {"fit_u_max", c.fit_u_max},
            {"epsilon", c.epsilon},
            {"gamma", c.gamma},
            {"retry_on_death", c.retry_on_death},
            {"write_chain", c.write_chain},
            {"write_masks", c.write_masks},
            {"write_spectra", c.write_spectra}};
}

inline std::vector<StageConfig> stage_configs(const ExperimentConfig& c)
{
    std::vector<StageConfig> out;
    for (std::uint32_t m = 1; m <= c.stages; ++m) out.push_back({c.base, m, c.beta_schedule[m - 1], c.rule});
    return out;
}

/// Normalisers used by every run of an experiment.
struct StageProbabilities {
    std::vector<ProbabilityRow> rows;
    std::vector<double> values;                  ///< configured mode
    std::optional<std::vector<double>> analytic; ///< closed-form lower bounds, when all lie in (0, 1]
    std::vector<bool> bracket_positive;
};

inline StageProbabilities compute_probabilities(const ExperimentConfig& c)
{
    StageProbabilities out;
    std::vector<double> analytic;
    bool analytic_ok = true;
    for (const auto& sc : stage_configs(c)) {
        const double lower = closed_form_lower_bound(sc);
        analytic.push_back(lower);
        analytic_ok = analytic_ok && lower > 0.0 && lower <= 1.0;
        out.bracket_positive.push_back(lower_bracket_positive(sc));
        if (c.probability_mode == ProbabilityMode::empirical) {
            const auto est = estimate_selection_probability(sc, c.probability_trials,
                                                            derive_seed(c.master_seed, "probability", sc.stage),
                                                            c.samples_per_interval);
            if (est.p_hat <= 0.0) {
                throw config_error("probability_trials", "estimated selection probability is zero at stage " +
                                                             std::to_string(sc.stage) + "; increase probability_trials");
            }
            out.rows.push_back({sc, est});
            out.values.push_back(est.p_hat);
        } else {
            if (!(lower > 0.0 && lower <= 1.0)) {
                throw config_error("probability_mode", "analytic lower bound at stage " + std::to_string(sc.stage) +
                                                           " is not a probability");
            }
            out.rows.push_back({sc, ProbabilityEstimate{lower, 0, 0.0}});
            out.values.push_back(lower);
        }
    }
    if (analytic_ok) out.analytic = std::move(analytic);
    return out;
}

enum class RunDepth { construct, spectrum };

struct StageRecord {
    std::uint32_t stage = 0;
    double beta = 0.0;
    double threshold = 0.0;
    std::uint64_t examined = 0;
    std::uint64_t count = 0;
    double mass = 0.0;
    double density = 0.0;
    std::optional<DecayFit> fit;
    std::optional<double> fourier_dimension;
    std::optional<bool> bounded_by_mass;
    std::optional<std::uint64_t> lemma22_violations;
    std::optional<double> lemma22_max_ratio;
};

struct RunRecord {
    std::uint32_t run = 0;
    std::uint64_t path_seed = 0;
    std::uint32_t attempts = 0;
    bool died = false;
    std::optional<std::uint32_t> died_at_stage;
    std::vector<StageRecord> stages;
    std::uint64_t nesting_violations = 0;
    std::uint64_t mass_monotonicity_violations = 0;
    std::optional<std::uint64_t> mass_monotonicity_violations_analytic;
    std::optional<double> box_dimension;
    bool mass1_ge_quarter = false;
};

inline std::uint64_t run_seed(std::uint64_t master, std::uint32_t run) noexcept
{
    return derive_seed(master, "run", run);
}

inline std::uint64_t attempt_path_seed(std::uint64_t run_seed_value, std::uint32_t attempt) noexcept
{
    return derive_seed(run_seed_value, "path", attempt);
}

/// Output location of one run's files.
inline std::filesystem::path run_directory(const std::filesystem::path& out, std::uint32_t run)
{
    std::ostringstream name;
    name << "run_" << std::setw(4) << std::setfill('0') << run;
    return out / "runs" / name.str();
}

inline json to_json(const RunRecord& r);

/// One ensemble member. Writes its per-run files when `out` is set.
inline RunRecord run_single(const ExperimentConfig& c, const StageProbabilities& probs, std::uint32_t run,
                            RunDepth depth, const std::optional<std::filesystem::path>& out)
{
    const auto configs = stage_configs(c);
    RunRecord rec;
    rec.run = run;
    const std::uint64_t rseed = run_seed(c.master_seed, run);
    ChainSelection sel;
    for (std::uint32_t attempt = 0; attempt <= c.retry_on_death; ++attempt) {
        rec.attempts = attempt + 1;
        rec.path_seed = attempt_path_seed(rseed, attempt);
        sel = select_chain_progressive(rec.path_seed, c.base, configs, c.samples_per_interval);
        if (!sel.died_at) break;
    }
    rec.died = sel.died_at.has_value();
    rec.died_at_stage = sel.died_at;

    const MeasureChain chain = build_chain_measures(sel, probs.values);
    rec.nesting_violations = nesting_violations(chain);
    rec.mass_monotonicity_violations = mass_monotonicity_check(chain).violations;
    if (probs.analytic) {
        rec.mass_monotonicity_violations_analytic = mass_monotonicity_check(build_chain_measures(sel, *probs.analytic)).violations;
    }
    if (chain.stages.size() >= 2) rec.box_dimension = box_dimension_estimate(scale_counts(chain));
    rec.mass1_ge_quarter = !chain.stages.empty() && total_mass(chain.stages.front()) >= 0.25;

    std::vector<double> grid;
    SpectrumGrid reference; // previous stage; Lebesgue measure before stage 1
    const bool spectra = depth == RunDepth::spectrum && !rec.died;
    if (spectra) {
        grid = log_spaced_grid(c.u_max, c.points_per_decade);
        reference = transform_uniform_grid(grid);
    }
    const auto dir = out ? std::optional(run_directory(*out, run)) : std::nullopt;
    for (std::size_t i = 0; i < chain.stages.size(); ++i) {
        const StageMeasure& m = chain.stages[i];
        StageRecord s;
        s.stage = m.stage;
        s.beta = configs[i].beta;
        s.threshold = sel.masks[i].threshold;
        s.examined = sel.examined[i];
        s.count = m.selected.size();
        s.mass = total_mass(m);
        s.density = m.density;
        if (spectra) {
            const auto g = transform_measure(m, grid, "stage-" + std::to_string(m.stage));
            s.bounded_by_mass = bounded_by_mass(g);
            try {
                s.fit = decay_exponent(g, c.fit_u_min, c.fit_u_max);
                s.fourier_dimension = fourier_dimension_estimate(*s.fit);
            } catch (const degenerate_spectrum_error&) {
            } catch (const invalid_argument&) {
            }
            const auto lemma = lemma22_check(g, reference, c.epsilon, c.alpha);
            reference = g;
            s.lemma22_violations = lemma.violating_u.size();
            s.lemma22_max_ratio = lemma.max_ratio;
            if (dir && c.write_spectra) write_spectrum_csv(g, *dir / ("spectrum_stage" + std::to_string(m.stage) + ".csv"));
            if (dir && s.fit) write_fit_json(*s.fit, *dir / ("fit_stage" + std::to_string(m.stage) + ".json"));
        }
        rec.stages.push_back(std::move(s));
    }
    if (dir) {
        write_counts_csv(chain, *dir / "counts.csv");
        if (c.write_chain) write_chain_csv(chain, *dir / "chain.csv");
        if (c.write_masks) write_masks_csv(sel.masks, *dir / "masks.csv");
        auto f = io::open_output(*dir / "record.json");
        f << to_json(rec).dump(2) << '\n';
    }
    return rec;
}

template <class T>
json optional_json(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

inline json to_json(const RunRecord& r)
{
    json stages = json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"stage", s.stage},
                          {"beta", s.beta},
                          {"threshold", s.threshold},
                          {"examined", s.examined},
                          {"count", s.count},
                          {"mass", s.mass},
                          {"density", s.density},
                          {"decay", s.fit ? to_json(*s.fit) : json(nullptr)},
                          {"fourier_dimension", optional_json(s.fourier_dimension)},
                          {"bounded_by_mass", optional_json(s.bounded_by_mass)},
                          {"lemma22_violations", optional_json(s.lemma22_violations)},
                          {"lemma22_max_ratio", optional_json(s.lemma22_max_ratio)}});
    }
    return {{"run", r.run},
            {"path_seed", r.path_seed},
            {"attempts", r.attempts},
            {"died", r.died},
            {"died_at_stage", optional_json(r.died_at_stage)},
            {"stages_survived", r.stages.size()},
            {"stages", stages},
            {"nesting_violations", r.nesting_violations},
            {"mass_monotonicity_violations", r.mass_monotonicity_violations},
            {"mass_monotonicity_violations_analytic", optional_json(r.mass_monotonicity_violations_analytic)},
            {"box_dimension", optional_json(r.box_dimension)},
            {"mass1_ge_quarter", r.mass1_ge_quarter}};
}

inline RunRecord run_record_from_json(const json& j)
{
    RunRecord r;
    r.run = j.at("run").get<std::uint32_t>();
    r.path_seed = j.at("path_seed").get<std::uint64_t>();
    r.attempts = j.at("attempts").get<std::uint32_t>();
    r.died = j.at("died").get<bool>();
    if (!j.at("died_at_stage").is_null()) r.died_at_stage = j.at("died_at_stage").get<std::uint32_t>();
    for (const auto& s : j.at("stages")) {
        StageRecord st;
        st.stage = s.at("stage").get<std::uint32_t>();
        st.beta = s.at("beta").get<double>();
        st.threshold = s.at("threshold").get<double>();
        st.examined = s.at("examined").get<std::uint64_t>();
        st.count = s.at("count").get<std::uint64_t>();
        st.mass = s.at("mass").get<double>();
        st.density = s.at("density").get<double>();
        if (!s.at("decay").is_null()) {
            const auto& d = s.at("decay");
            DecayFit f;
            f.exponent = d.at("exponent").get<double>();
            f.intercept = d.at("intercept").get<double>();
            f.u_min = d.at("u_min").get<double>();
            f.r_squared = d.at("r_squared").get<double>();
            f.n_points = d.at("n_points").get<std::size_t>();
            st.fit = f;
        }
        if (!s.at("fourier_dimension").is_null()) st.fourier_dimension = s.at("fourier_dimension").get<double>();
        if (!s.at("bounded_by_mass").is_null()) st.bounded_by_mass = s.at("bounded_by_mass").get<bool>();
        if (!s.at("lemma22_violations").is_null()) st.lemma22_violations = s.at("lemma22_violations").get<std::uint64_t>();
        if (!s.at("lemma22_max_ratio").is_null()) st.lemma22_max_ratio = s.at("lemma22_max_ratio").get<double>();
        r.stages.push_back(std::move(st));
    }
    r.nesting_violations = j.at("nesting_violations").get<std::uint64_t>();
    r.mass_monotonicity_violations = j.at("mass_monotonicity_violations").get<std::uint64_t>();
    if (!j.at("mass_monotonicity_violations_analytic").is_null()) {
        r.mass_monotonicity_violations_analytic = j.at("mass_monotonicity_violations_analytic").get<std::uint64_t>();
    }
    if (!j.at("box_dimension").is_null()) r.box_dimension = j.at("box_dimension").get<double>();
    r.mass1_ge_quarter = j.at("mass1_ge_quarter").get<bool>();
    return r;
}

inline json quantile_table(const std::vector<double>& v)
{
    if (v.empty()) return nullptr;
    return {{"n", v.size()},
            {"min", stats::quantile(v, 0.0)},
            {"q05", stats::quantile(v, 0.05)},
            {"q25", stats::quantile(v, 0.25)},
            {"median", stats::quantile(v, 0.5)},
            {"q75", stats::quantile(v, 0.75)},
            {"q95", stats::quantile(v, 0.95)},
            {"max", stats::quantile(v, 1.0)}};
}

inline json fraction(std::size_t hits, std::size_t total)
{
    if (total == 0) return nullptr;
    return static_cast<double>(hits) / static_cast<double>(total);
}

/// Ensemble statistics over runs whose chain survived every stage.
inline json aggregate(const ExperimentConfig& c, const std::vector<RunRecord>& runs)
{
    std::vector<const RunRecord*> alive;
    std::uint64_t retries = 0;
    for (const auto& r : runs) {
        retries += r.attempts - 1;
        if (!r.died) alive.push_back(&r);
    }
    json a;
    a["runs_total"] = runs.size();
    a["runs_survived"] = alive.size();
    a["death_rate"] = fraction(runs.size() - alive.size(), runs.size());
    a["retries_used"] = retries;

    json count_by_stage = json::array();
    json mass_by_stage = json::array();
    json exponent_by_stage = json::array();
    json lemma_by_stage = json::array();
    for (std::uint32_t m = 0; m < c.stages; ++m) {
        std::vector<double> counts;
        std::vector<double> masses;
        std::vector<double> exps;
        std::size_t lemma_ok = 0;
        std::size_t lemma_n = 0;
        for (const auto* r : alive) {
            const auto& s = r->stages[m];
            counts.push_back(static_cast<double>(s.count));
            masses.push_back(s.mass);
            if (s.fit) exps.push_back(s.fit->exponent);
            if (s.lemma22_violations) {
                ++lemma_n;
                if (*s.lemma22_violations == 0) ++lemma_ok;
            }
        }
        count_by_stage.push_back(quantile_table(counts));
        mass_by_stage.push_back(quantile_table(masses));
        exponent_by_stage.push_back(quantile_table(exps));
        lemma_by_stage.push_back(fraction(lemma_ok, lemma_n));
    }
    a["count_by_stage"] = count_by_stage;
    a["mass_by_stage"] = mass_by_stage;
    a["decay_exponent_by_stage"] = exponent_by_stage;
    a["lemma22_zero_violation_fraction_by_stage"] = lemma_by_stage;

    std::vector<double> final_exp;
    std::vector<double> final_dim;
    std::vector<double> box;
    std::size_t bounded = 0;
    std::size_t bounded_n = 0;
    std::size_t nest_ok = 0;
    std::size_t mono_ok = 0;
    std::size_t mono_an_ok = 0;
    std::size_t mono_an_n = 0;
    std::size_t quarter = 0;
    std::size_t reach_target = 0;
    const double target = c.gamma / 2.0;
    for (const auto* r : alive) {
        const auto& last = r->stages.back();
        if (last.fit) {
            final_exp.push_back(last.fit->exponent);
            if (last.fit->exponent >= target) ++reach_target;
        }
        if (last.fourier_dimension) final_dim.push_back(*last.fourier_dimension);
        if (r->box_dimension) box.push_back(*r->box_dimension);
        for (const auto& s : r->stages) {
            if (s.bounded_by_mass) {
                ++bounded_n;
                if (*s.bounded_by_mass) ++bounded;
            }
        }
        if (r->nesting_violations == 0) ++nest_ok;
        if (r->mass_monotonicity_violations == 0) ++mono_ok;
        if (r->mass_monotonicity_violations_analytic) {
            ++mono_an_n;
            if (*r->mass_monotonicity_violations_analytic == 0) ++mono_an_ok;
        }
        if (r->mass1_ge_quarter) ++quarter;
    }
    a["final_stage_decay_exponent"] = quantile_table(final_exp);
    a["final_stage_fourier_dimension"] = quantile_table(final_dim);
    a["box_dimension"] = quantile_table(box);
    a["box_dimension_target"] = 1.0 - c.beta_schedule.back() * c.beta_schedule.back();
    a["decay_target"] = target;
    a["fraction_decay_at_target"] = fraction(reach_target, final_exp.size());
    a["spectra_bounded_fraction"] = fraction(bounded, bounded_n);
    a["nesting_ok_fraction"] = fraction(nest_ok, alive.size());
    a["mass_monotonicity_ok_fraction"] = fraction(mono_ok, alive.size());
    a["mass_monotonicity_ok_fraction_analytic"] = fraction(mono_an_ok, mono_an_n);
    a["mass1_ge_quarter_fraction"] = fraction(quarter, alive.size());
    return a;
}

/// Runs every ensemble member on `jobs` threads; records come back in run order.
inline std::vector<RunRecord> run_ensemble(const ExperimentConfig& c, const StageProbabilities& probs, RunDepth depth,
                                           const std::optional<std::filesystem::path>& out, unsigned jobs = 1)
{
    std::vector<RunRecord> records(c.ensemble);
    std::atomic<std::uint32_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (;;) {
            const std::uint32_t i = next.fetch_add(1);
            if (i >= c.ensemble) return;
            try {
                records[i] = run_single(c, probs, i, depth, out);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = c.ensemble;
                return;
            }
        }
    };
    const unsigned n = std::max(1U, std::min(jobs, c.ensemble));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return records;
}

struct ExperimentResult {
    int exit_code = exit_ok;
    json summary;
};

inline json probabilities_json(const StageProbabilities& p)
{
    json rows = json::array();
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const auto& r = p.rows[i];
        rows.push_back({{"stage", r.config.stage},
                        {"beta", r.config.beta},
                        {"p", r.estimate.p_hat},
                        {"ci95", r.estimate.ci95_halfwidth},
                        {"trials", r.estimate.trials},
                        {"analytic_lower", p.analytic ? json((*p.analytic)[i]) : json(nullptr)},
                        {"analytic_bracket_positive", static_cast<bool>(p.bracket_positive[i])}});
    }
    return rows;
}

inline void write_json_file(const json& j, const std::filesystem::path& file)
{
    auto out = io::open_output(file);
    out << j.dump(2) << '\n';
}

/// Creates `out` and proves a file can be written there. Throws io::write_error.
inline void ensure_writable(const std::filesystem::path& out)
{
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw io::write_error("cannot create output directory " + out.string() + ": " + ec.message());
    const auto probe = out / ".write-probe";
    {
        std::ofstream f(probe);
        if (!f) throw io::write_error("output directory " + out.string() + " is not writable");
    }
    std::filesystem::remove(probe, ec);
}

/// Full pipeline into `out`: config.json, probabilities.csv, runs/*, summary.json.
inline ExperimentResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& out, RunDepth depth,
                                       unsigned jobs = 1)
{
    ensure_writable(out);
    const json cfg = to_json(c);
    write_json_file(cfg, out / "config.json");
    const StageProbabilities probs = compute_probabilities(c);
    write_probability_csv(probs.rows, out / "probabilities.csv");
    const auto records = run_ensemble(c, probs, depth, out, jobs);

    ExperimentResult res;
    json runs = json::array();
    for (const auto& r : records) runs.push_back(to_json(r));
    res.summary = {{"config", cfg},
                   {"depth", depth == RunDepth::spectrum ? "spectrum" : "construct"},
                   {"probabilities", probabilities_json(probs)},
                   {"runs", runs},
                   {"aggregate", aggregate(c, records)}};
    write_json_file(res.summary, out / "summary.json");
    const bool all_died = std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.died; });
    res.exit_code = all_died ? exit_all_died : exit_ok;
    return res;
}

/// Paths only: `paths/path_XXXX.csv` at the stage-1 resolution N * K.
inline ExperimentResult run_simulate(const ExperimentConfig& c, const std::filesystem::path& out)
{
    ensure_writable(out);
    const json cfg = to_json(c);
    write_json_file(cfg, out / "config.json");
    json paths = json::array();
    for (std::uint32_t i = 0; i < c.ensemble; ++i) {
        const std::uint64_t seed = attempt_path_seed(run_seed(c.master_seed, i), 0);
        const PathGrid p = generate_path(static_cast<std::uint64_t>(c.base) * c.samples_per_interval, seed);
        std::ostringstream name;
        name << "path_" << std::setw(4) << std::setfill('0') << i << ".csv";
        write_path_csv(p, out / "paths" / name.str());
        json log = json::array();
        for (const auto& g : p.generation_log()) log.push_back({{"operation", g.operation}, {"seed", g.seed}, {"method", g.method}});
        paths.push_back({{"run", i}, {"seed", seed}, {"resolution", p.resolution()}, {"x1", p[p.resolution()]},
                         {"generation_log", log}});
    }
    ExperimentResult res;
    res.summary = {{"config", cfg}, {"depth", "simulate"}, {"paths", paths}};
    write_json_file(res.summary, out / "summary.json");
    return res;
}

/// Re-aggregates the records found under `out` into `report.json`.
inline ExperimentResult run_report(const std::filesystem::path& out)
{
    std::ifstream cfg_file(out / "config.json");
    if (!cfg_file) throw config_error("--out", "no config.json under " + out.string());
    json cfg_json;
    try {
        cfg_file >> cfg_json;
    } catch (const json::exception& e) {
        throw config_error("--out", std::string("config.json is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    c.alpha = cfg_json.at("alpha").get<double>();
    c.base = cfg_json.at("N").get<std::uint32_t>();
    c.stages = cfg_json.at("stages").get<std::uint32_t>();
    c.beta_schedule = cfg_json.at("beta_schedule").get<std::vector<double>>();
    c.gamma = cfg_json.at("gamma").get<double>();

    std::vector<std::filesystem::path> files;
    if (std::filesystem::exists(out / "runs")) {
        for (const auto& e : std::filesystem::directory_iterator(out / "runs")) {
            if (std::filesystem::exists(e.path() / "record.json")) files.push_back(e.path() / "record.json");
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> records;
    for (const auto& f : files) {
        std::ifstream in(f);
        json j;
        in >> j;
        records.push_back(run_record_from_json(j));
    }
    ExperimentResult res;
    res.summary = {{"config", cfg_json}, {"depth", "report"}, {"runs_found", records.size()},
                   {"aggregate", aggregate(c, records)}};
    write_json_file(res.summary, out / "report.json");
    res.exit_code = records.empty() ? exit_all_died : exit_ok;
    return res;
}

inline json error_json(std::string_view kind, std::string_view field, std::string_view message)
{
    return {{"error", kind}, {"field", field}, {"message", message}};
}

} // namespace rapidset

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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include "rapidset/experiment.hpp"
#include "rapidset/verify.hpp"

using namespace rapidset;
namespace fs = std::filesystem;

namespace {

json minimal()
{
    return {{"alpha", 0.5}, {"N", 64}, {"stages", 1}, {"ensemble", 5}, {"master_seed", 1234}, {"probability_trials", 2000}};
}

std::string config_error_field(const json& j)
{
    try {
        (void)parse_config(j);
    } catch (const config_error& e) {
        return e.field();
    }
    return "<none>";
}

fs::path fresh_dir(const std::string& name)
{
    const auto d = fs::temp_directory_path() / "rapidset_test_experiment" / name;
    fs::remove_all(d);
    return d;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative path -> bytes for every regular file under root.
std::map<std::string, std::string> tree(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return out;
}

} // namespace

TEST(Config, DefaultsMaterialised)
{
    const auto c = parse_config(minimal());
    EXPECT_EQ(c.beta_schedule.size(), 1U);
    EXPECT_NEAR(c.beta_schedule[0], 0.5 * 0.5 * 0.9, 1e-15);
    EXPECT_EQ(c.samples_per_interval, 64U);
    EXPECT_DOUBLE_EQ(c.u_max, 64.0 * 64.0);
    EXPECT_DOUBLE_EQ(c.fit_u_max, 64.0);
    EXPECT_NEAR(c.gamma, 0.9 * 0.75, 1e-15);
    const auto j = to_json(c);
    for (const char* key : {"alpha", "N", "stages", "beta_schedule", "rule", "ensemble", "master_seed", "probability_mode",
                            "u_grid", "epsilon", "gamma", "retry_on_death"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_FALSE(j.contains("output_dir"));
}

TEST(Config, AutoScheduleApproachesAlpha)
{
    const auto s = auto_beta_schedule(0.5, 3, 0.9);
    ASSERT_EQ(s.size(), 3U);
    EXPECT_NEAR(s[0], 0.225, 1e-15);
    EXPECT_NEAR(s[1], 0.3375, 1e-15);
    EXPECT_NEAR(s[2], 0.39375, 1e-15);
}

TEST(Config, ValidationNamesTheField)
{
    auto j = minimal();
    j["beta_schedule"] = {0.6};
    EXPECT_EQ(config_error_field(j), "beta_schedule");
    j["beta_schedule"] = {0.3, 0.2};
    j["stages"] = 2;
    EXPECT_EQ(config_error_field(j), "beta_schedule");
    j = minimal();
    j["gamma"] = 0.8;
    EXPECT_EQ(config_error_field(j), "gamma");
    j = minimal();
    j["alpha"] = 1.5;
    EXPECT_EQ(config_error_field(j), "alpha");
    j = minimal();
    j["colour"] = "blue";
    EXPECT_EQ(config_error_field(j), "colour");
    j = minimal();
    j["ensemble"] = 0;
    EXPECT_EQ(config_error_field(j), "ensemble");
    j = minimal();
    j["rule"] = "nope";
    EXPECT_EQ(config_error_field(j), "rule");
    j = minimal();
    j["N"] = "sixty-four";
    EXPECT_EQ(config_error_field(j), "N");
    j = minimal();
    j["u_grid"] = {{"points"}};
    EXPECT_EQ(config_error_field(j), "u_grid");
    j = minimal();
    j["probability_mode"] = "guess";
    EXPECT_EQ(config_error_field(j), "probability_mode");
}

TEST(Experiment, MinimalRun)
{
    const auto out = fresh_dir("minimal");
    const auto c = parse_config(minimal());
    const auto res = run_experiment(c, out, RunDepth::spectrum);
    EXPECT_EQ(res.exit_code, exit_ok);
    ASSERT_TRUE(fs::exists(out / "summary.json"));
    std::ifstream in(out / "summary.json");
    const auto s = json::parse(in);
    EXPECT_EQ(s["runs"].size(), 5U);
    EXPECT_EQ(s["aggregate"]["runs_total"], 5);
    for (int i = 0; i < 5; ++i) {
        EXPECT_TRUE(fs::exists(run_directory(out, i) / "record.json"));
        EXPECT_TRUE(fs::exists(run_directory(out, i) / "counts.csv"));
        EXPECT_TRUE(fs::exists(run_directory(out, i) / "spectrum_stage1.csv"));
    }
    EXPECT_TRUE(fs::exists(out / "probabilities.csv"));
}

TEST(Experiment, ByteIdenticalAcrossRerunsAndJobs)
{
    auto j = minimal();
    j["stages"] = 2;
    j["N"] = 16;
    j["ensemble"] = 6;
    const auto c = parse_config(j);
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    const auto t = fresh_dir("det_threads");
    (void)run_experiment(c, a, RunDepth::spectrum, 1);
    (void)run_experiment(c, b, RunDepth::spectrum, 1);
    (void)run_experiment(c, t, RunDepth::spectrum, 3);
    const auto ta = tree(a);
    EXPECT_GT(ta.size(), 20U);
    EXPECT_EQ(ta, tree(b));
    EXPECT_EQ(ta, tree(t));
}

TEST(Experiment, SeedsStableUnderEnsembleResizing)
{
    auto j = minimal();
    j["ensemble"] = 3;
    const auto small = parse_config(j);
    j["ensemble"] = 6;
    const auto big = parse_config(j);
    const auto probs = compute_probabilities(small);
    for (std::uint32_t i = 0; i < 3; ++i) {
        const auto a = run_single(small, probs, i, RunDepth::construct, std::nullopt);
        const auto b = run_single(big, probs, i, RunDepth::construct, std::nullopt);
        EXPECT_EQ(a.path_seed, b.path_seed);
        EXPECT_EQ(to_json(a), to_json(b));
    }
}

TEST(Experiment, RetryOnDeathIsRecorded)
{
    // Extreme beta on a coarse grid kills most chains; retries change the seed.
    json j = {{"alpha", 0.99}, {"N", 4}, {"stages", 3}, {"beta_schedule", {0.97, 0.98, 0.985}}, {"ensemble", 20},
              {"master_seed", 3}, {"probability_trials", 5000}, {"samples_per_interval", 2}, {"retry_on_death", 3}};
    const auto c = parse_config(j);
    const auto probs = compute_probabilities(c);
    bool retried = false;
    for (std::uint32_t i = 0; i < c.ensemble; ++i) {
        const auto r = run_single(c, probs, i, RunDepth::construct, std::nullopt);
        EXPECT_LE(r.attempts, 4U);
        EXPECT_EQ(r.path_seed, attempt_path_seed(run_seed(3, i), r.attempts - 1));
        if (r.attempts > 1) retried = true;
        if (r.died) {
            EXPECT_EQ(r.attempts, 4U);
        }
    }
    EXPECT_TRUE(retried);
}

TEST(Experiment, AnalyticModeHasNoMonotonicityViolations)
{
    auto j = minimal();
    j["N"] = 32;
    j["stages"] = 3;
    j["ensemble"] = 4;
    j["probability_mode"] = "analytic";
    j["samples_per_interval"] = 8;
    const auto c = parse_config(j);
    const auto probs = compute_probabilities(c);
    ASSERT_TRUE(probs.analytic.has_value());
    EXPECT_EQ(probs.values, *probs.analytic);
    for (std::uint32_t i = 0; i < 4; ++i) {
        const auto r = run_single(c, probs, i, RunDepth::construct, std::nullopt);
        EXPECT_EQ(r.mass_monotonicity_violations, 0U);
        EXPECT_EQ(r.nesting_violations, 0U);
    }
}

TEST(Experiment, UnwritableOutput)
{
    const auto base = fresh_dir("unwritable");
    fs::create_directories(base);
    std::ofstream(base / "file") << "x";
    const auto c = parse_config(minimal());
    EXPECT_THROW(run_experiment(c, base / "file" / "sub", RunDepth::construct), io::write_error);
}

TEST(Experiment, ReportReproducesAggregate)
{
    const auto out = fresh_dir("report");
    const auto c = parse_config(minimal());
    const auto res = run_experiment(c, out, RunDepth::spectrum);
    const auto rep = run_report(out);
    EXPECT_EQ(rep.summary["aggregate"], res.summary["aggregate"]);
    EXPECT_EQ(rep.summary["runs_found"], 5);
    EXPECT_TRUE(fs::exists(out / "report.json"));
}

TEST(Experiment, SimulateWritesPaths)
{
    auto j = minimal();
    j["ensemble"] = 2;
    j["samples_per_interval"] = 4;
    const auto out = fresh_dir("simulate");
    (void)run_simulate(parse_config(j), out);
    EXPECT_TRUE(fs::exists(out / "paths" / "path_0000.csv"));
    EXPECT_TRUE(fs::exists(out / "paths" / "path_0001.csv"));
    std::ifstream in(out / "summary.json");
    const auto s = json::parse(in);
    EXPECT_EQ(s["paths"][0]["resolution"], 256);
}

TEST(BoundsSuite, SmallGridHolds)
{
    json g = {{"moment", {{"p_points", 20}, {"t_points", 20}}},
              {"gaussian", {{"y_min", 0.1}, {"y_max", 4.0}, {"y_step", 0.1}}},
              {"binomial", {{"n_min", 10}, {"n_max", 30}}},
              {"chernoff_mc", {{"trials", 10000}, {"sets", 2}}}};
    const auto report = bounds_report(run_bounds_suite(parse_bounds_grid(g)));
    EXPECT_TRUE(report["holds_all"].get<bool>()) << report.dump(2);
    bool saw_erratum = false;
    for (const auto& r : report["records"]) {
        if (r["check"] == "gaussian_tail_unnormalised") {
            saw_erratum = true;
            EXPECT_EQ(r["status"], "informational");
            EXPECT_FALSE(r["holds"].get<bool>());
        }
    }
    EXPECT_TRUE(saw_erratum);
}

TEST(BoundsSuite, InvalidTripleIsSkipped)
{
    json g = {{"moment", {{"p_points", 2}, {"t_points", 2}}},
              {"gaussian", {{"y_min", 1.0}, {"y_max", 2.0}, {"y_step", 0.5}}},
              {"binomial", {{"n_min", 10}, {"n_max", 10}, {"triples", {{{"n", 100}, {"p", 0.5}, {"r", 50}, {"side", "upper"}},
                                                                          {{"n", 100}, {"p", 0.1}, {"r", 20}, {"side", "upper"}}}}}},
              {"chernoff_exact", {{"m_values", {20}}, {"p_values", {0.5}}, {"y_fractions", {0.5}}}},
              {"chernoff_mc", {{"trials", 10000}, {"sets", 1}}}};
    const auto records = run_bounds_suite(parse_bounds_grid(g));
    int skipped = 0, passed = 0;
    for (const auto& r : records) {
        if (r.check != "binomial_tail_case") continue;
        if (r.status == "skipped-precondition") ++skipped;
        if (r.status == "pass") ++passed;
    }
    EXPECT_EQ(skipped, 1);
    EXPECT_EQ(passed, 1);
    EXPECT_TRUE(bounds_report(records)["holds_all"].get<bool>());
}

TEST(BoundsSuite, EmptyGridsRejected)
{
    EXPECT_THROW(parse_bounds_grid({{"moment", {{"p_points", 0}}}}), config_error);
    EXPECT_THROW(parse_bounds_grid({{"gaussian", {{"y_min", 2.0}, {"y_max", 1.0}}}}), config_error);
    EXPECT_THROW(parse_bounds_grid({{"binomial", {{"n_min", 50}, {"n_max", 10}}}}), config_error);
    EXPECT_THROW(parse_bounds_grid({{"chernoff_exact", {{"m_values", json::array()}}}}), config_error);
    EXPECT_THROW(parse_bounds_grid({{"nonsense", 1}}), config_error);
}

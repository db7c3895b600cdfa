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

// rapidset: command-line front end.
//
//   rapidset simulate  --config c.json [--seed S] [--out DIR]
//   rapidset construct --config c.json [--seed S] [--jobs J] [--out DIR]
//   rapidset spectrum  --config c.json [--seed S] [--jobs J] [--out DIR]
//   rapidset verify    [--config grid.json] [--seed S] [--out DIR]
//   rapidset report    --out DIR
//
// Exit codes: 0 ok, 2 invalid config, 3 unwritable output, 4 every chain died
// (or, for verify, 1 when some inequality fails).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "rapidset/experiment.hpp"
#include "rapidset/verify.hpp"

namespace {

using rapidset::json;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::string out;
};

json load_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw rapidset::config_error("--config", "cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw rapidset::config_error("--config", std::string("not valid JSON: ") + e.what());
    }
}

int fail(std::string_view kind, std::string_view field, std::string_view message, int code)
{
    std::cout << rapidset::error_json(kind, field, message).dump() << '\n';
    std::cerr << "rapidset: " << message << '\n';
    return code;
}

int run_pipeline(const std::string& command, const Options& opt)
{
    if (opt.config.empty()) throw rapidset::config_error("--config", "--config is required for " + command);
    json j = load_json(opt.config);
    if (opt.seed) j["master_seed"] = *opt.seed;
    if (!opt.out.empty()) j["output_dir"] = opt.out;
    const rapidset::ExperimentConfig cfg = rapidset::parse_config(j);
    const std::filesystem::path out = cfg.output_dir;

    rapidset::ExperimentResult res;
    if (command == "simulate") {
        res = rapidset::run_simulate(cfg, out);
    } else {
        const auto depth = command == "spectrum" ? rapidset::RunDepth::spectrum : rapidset::RunDepth::construct;
        res = rapidset::run_experiment(cfg, out, depth, opt.jobs);
    }
    json status = {{"status", res.exit_code == rapidset::exit_ok ? "ok" : "all-chains-died"},
                   {"command", command},
                   {"output_dir", out.string()}};
    if (res.summary.contains("aggregate")) {
        status["runs_total"] = res.summary["aggregate"]["runs_total"];
        status["runs_survived"] = res.summary["aggregate"]["runs_survived"];
    }
    std::cout << status.dump() << '\n';
    return res.exit_code;
}

int run_verify(const Options& opt)
{
    json j = opt.config.empty() ? json::object() : load_json(opt.config);
    if (opt.seed) j["seed"] = *opt.seed;
    const rapidset::BoundsGrid grid = rapidset::parse_bounds_grid(j);
    const json report = rapidset::bounds_report(rapidset::run_bounds_suite(grid));
    if (!opt.out.empty()) {
        rapidset::ensure_writable(opt.out);
        rapidset::write_json_file(report, std::filesystem::path(opt.out) / "verify.json");
    }
    std::cout << report.dump(2) << '\n';
    return report.at("holds_all").get<bool>() ? 0 : 1;
}

int run_report(const Options& opt)
{
    if (opt.out.empty()) throw rapidset::config_error("--out", "--out is required for report");
    const auto res = rapidset::run_report(opt.out);
    std::cout << json{{"status", res.exit_code == 0 ? "ok" : "no-surviving-runs"},
                      {"command", "report"},
                      {"runs_found", res.summary["runs_found"]}}
                     .dump()
              << '\n';
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Random sets of rapid Brownian variation and their Fourier spectra"};
    app.require_subcommand(1);
    Options opt;
    const auto add_common = [&](CLI::App* sub, bool jobs) {
        sub->add_option("--config", opt.config, "JSON config file");
        sub->add_option("--seed", opt.seed, "override master seed");
        sub->add_option("--out", opt.out, "output directory");
        if (jobs) sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
    };
    add_common(app.add_subcommand("simulate", "generate Brownian paths"), false);
    add_common(app.add_subcommand("construct", "build selection chains and measures"), true);
    add_common(app.add_subcommand("spectrum", "full pipeline with Fourier spectra and decay fits"), true);
    add_common(app.add_subcommand("verify", "check the analytic inequalities on parameter grids"), false);
    app.add_subcommand("report", "re-aggregate run records")->add_option("--out", opt.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return rapidset::exit_invalid_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        if (command == "verify") return run_verify(opt);
        if (command == "report") return run_report(opt);
        return run_pipeline(command, opt);
    } catch (const rapidset::config_error& e) {
        return fail("invalid-config", e.field(), e.what(), rapidset::exit_invalid_config);
    } catch (const rapidset::io::write_error& e) {
        return fail("unwritable-output", "output_dir", e.what(), rapidset::exit_unwritable_output);
    } catch (const std::exception& e) {
        return fail("internal", "", e.what(), 1);
    }
}

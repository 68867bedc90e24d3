#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "largesol/config.hpp"
#include "largesol/errors.hpp"
#include "largesol/run.hpp"
#include "largesol/verify.hpp"

using namespace largesol;

namespace {

int run_config(const std::string& path, std::optional<Mode> required) {
    ExperimentConfig cfg;
    try {
        cfg = parse_config(path);
    } catch (const ParseError& e) {
        std::cerr << "largesol: " << path << ": " << e.what() << '\n';
        return kExitUsage;
    }
    if (required && cfg.mode != *required) {
        std::cerr << "largesol: " << path << " has mode " << to_string(cfg.mode) << ", expected "
                  << to_string(*required) << '\n';
        return kExitUsage;
    }
    return run(cfg, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Large solutions of -Lap u + g(u) = f on grids"};
    app.require_subcommand(1);

    std::string run_path;
    auto* run_cmd = app.add_subcommand("run", "Run an experiment config");
    run_cmd->add_option("config", run_path, "Config file")->required();

    std::string oracle_path;
    auto* oracle_cmd = app.add_subcommand("oracle", "Run a radial oracle config");
    oracle_cmd->add_option("config", oracle_path, "Config file")->required();

    std::string suite = "fast";
    std::optional<double> tamper;
    std::string config_dir = default_config_dir();
    auto* verify_cmd = app.add_subcommand("verify", "Run the acceptance checks and print a JSON report");
    verify_cmd->add_option("--suite", suite, "fast or full")->check(CLI::IsMember({"fast", "full"}));
    verify_cmd->add_option("--tamper-rtol", tamper, "Fault injection: override the solver tolerance");
    verify_cmd->add_option("--config-dir", config_dir, "Configs swept by the ladder monotonicity check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    if (*run_cmd) return run_config(run_path, std::nullopt);
    if (*oracle_cmd) return run_config(oracle_path, Mode::Oracle);

    VerifyOptions opts;
    opts.full = suite == "full";
    opts.tamper_rtol = tamper;
    opts.config_dir = config_dir;
    VerifyReport rep = verify(opts, [](const CriterionResult& r) {
        std::fprintf(stderr, "[%2d] %-22s %s %.2fs\n", r.id, r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds);
    });
    std::cout << report_json(rep).dump(2) << '\n';
    return rep.passed() ? kExitOk : kExitUsage;
}

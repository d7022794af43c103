// orpose: scene generation, pose estimation runs, evaluation and sweeps.
//
//   orpose generate [--config scene.json] [--seed N] --out scene.json
//   orpose run      --scene scene.json [--config run.json] [--quadrant Q] [--parallel P] --out results.json
//   orpose eval     --scene scene.json --results results.json --out report_dir
//   orpose ablate   --scene scene.json --config sweep.json [--parallel P] [--seed N] --out sweep.csv
//
// ORPOSE_LOG=trace|debug|info|warn|error|off sets verbosity (default info).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "orpose/commands.hpp"

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("orpose");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char *env = std::getenv("ORPOSE_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept known ones.
        if (level != spdlog::level::off || std::string(env) == "off") {
            spdlog::set_level(level);
        } else {
            spdlog::warn("ignoring unknown ORPOSE_LOG value '{}'", env);
        }
    }
}

void log_sink(orpose::LogLevel level, const std::string &msg) {
    switch (level) {
    case orpose::LogLevel::Debug: spdlog::debug(msg); break;
    case orpose::LogLevel::Info: spdlog::info(msg); break;
    case orpose::LogLevel::Warn: spdlog::warn(msg); break;
    case orpose::LogLevel::Error: spdlog::error(msg); break;
    }
}

} // namespace

int main(int argc, char **argv) {
    setup_logging();

    CLI::App app{"Multi-view 3D human pose estimation with IMU orientation priors"};
    app.require_subcommand(1);

    std::string scene, config, out, results, quadrant;
    std::uint64_t seed = 0;
    int parallel = 1;

    auto *gen = app.add_subcommand("generate", "Write a synthetic scene file");
    gen->add_option("--config", config, "Scene generator config (JSON)")->check(CLI::ExistingFile);
    gen->add_option("--seed", seed, "Override the generator seed");
    gen->add_option("--out", out, "Output scene file")->required();

    auto *run = app.add_subcommand("run", "Estimate 3D poses for every frame of a scene");
    run->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
    run->add_option("--config", config, "Run config (JSON)")->check(CLI::ExistingFile);
    run->add_option("--quadrant", quadrant, "Run a single method")
        ->check(CLI::IsMember({"sn-psm", "orn-psm", "sn-orpsm", "orn-orpsm"}));
    run->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "Results file")->required();

    auto *eval = app.add_subcommand("eval", "Score a results file against scene ground truth");
    eval->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
    eval->add_option("--results", results, "Results file from 'run'")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", out, "Report directory")->required();

    auto *ablate = app.add_subcommand("ablate", "Run and score a parameter sweep");
    ablate->add_option("--scene", scene, "Scene file")->required()->check(CLI::ExistingFile);
    ablate->add_option("--config", config, "Sweep config (JSON)")->required()->check(CLI::ExistingFile);
    ablate->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    ablate->add_option("--seed", seed, "Regenerate the scene with this seed");
    ablate->add_option("--out", out, "Long-format CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? orpose::kExitOk : orpose::kExitFatal;
    }

    auto opt_path = [](const std::string &s) -> std::optional<std::filesystem::path> {
        if (s.empty()) {
            return std::nullopt;
        }
        return std::filesystem::path(s);
    };

    try {
        if (gen->parsed()) {
            orpose::GenerateOptions o{opt_path(config), out, std::nullopt};
            if (gen->count("--seed") > 0) {
                o.seed = seed;
            }
            return orpose::cmd_generate(o, log_sink);
        }
        if (run->parsed()) {
            orpose::RunOptions o{scene, opt_path(config), out, std::nullopt, std::nullopt};
            if (!quadrant.empty()) {
                o.quadrant = orpose::quadrant_from_string(quadrant);
            }
            if (run->count("--parallel") > 0) {
                o.parallel = parallel;
            }
            return orpose::cmd_run(o, log_sink);
        }
        if (eval->parsed()) {
            return orpose::cmd_eval({results, scene, out}, log_sink);
        }
        orpose::AblateOptions o{scene, config, out, std::nullopt, std::nullopt};
        if (ablate->count("--parallel") > 0) {
            o.parallel = parallel;
        }
        if (ablate->count("--seed") > 0) {
            o.seed = seed;
        }
        return orpose::cmd_ablate(o, log_sink);
    } catch (const orpose::Error &e) {
        spdlog::error("{}", e.what());
        return orpose::kExitFatal;
    } catch (const std::exception &e) {
        spdlog::error("unexpected failure: {}", e.what());
        return orpose::kExitFatal;
    }
}

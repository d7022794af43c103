#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "orpose/metrics.hpp"
#include "orpose/pipeline.hpp"
#include "orpose/scene_io.hpp"

namespace orpose {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

enum class LogLevel { Debug, Info, Warn, Error };
using LogSink = std::function<void(LogLevel, const std::string &)>;

// ---- evaluation -----------------------------------------------------------

/// One report per method run, in results order. Throws MismatchedInputs when
/// the results do not cover exactly the scene's frames or the scene lacks
/// ground truth.
std::vector<EvalReport> evaluate(const RunResults &results, const Scene &scene);

std::string reports_json(const std::vector<EvalReport> &reports);
/// One row per method; columns per joint group and metric.
std::string reports_csv(const std::vector<EvalReport> &reports);

/// Per-frame MPJPE difference (method - baseline) over frames where both
/// succeeded, sorted ascending.
struct ErrorDifference {
    std::string method;
    std::vector<std::pair<int, double>> frames; // (frame id, diff mm)
};
std::vector<ErrorDifference> error_differences(const RunResults &results, const Scene &scene,
                                               Quadrant baseline = Quadrant::SnPsm);
std::string error_differences_csv(const std::vector<ErrorDifference> &diffs);
std::string frame_errors_csv(const std::vector<EvalReport> &reports, const RunResults &results);

// ---- ablation sweeps ------------------------------------------------------

struct SweepAxis {
    std::string param; // e.g. "fusion.lambda", "psm.n_bins", "scene.drop_prob"
    std::vector<double> values;
};

struct SweepConfig {
    RunConfig base;
    std::vector<SweepAxis> axes; // cartesian product, first axis slowest
};

SweepConfig sweep_config_from_string(const std::string &text);

struct SweepRow {
    int point = 0;
    std::vector<std::pair<std::string, double>> params;
    std::string method;
    std::string group;
    std::string metric;
    double value = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    long failed_frames = 0;
};

/// Runs and evaluates every grid point. Scene parameters regenerate the scene
/// from its generator block.
SweepResult run_sweep(const Scene &scene, const SweepConfig &sweep, const LogSink &log = {});
std::string sweep_csv(const SweepResult &result);

/// Shortest text that parses back to the same double.
std::string format_double(double x);

// ---- subcommands ----------------------------------------------------------
// Each returns an exit code; malformed inputs throw orpose::Error.

struct GenerateOptions {
    std::optional<std::filesystem::path> config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
};
int cmd_generate(const GenerateOptions &opts, const LogSink &log = {});

struct RunOptions {
    std::filesystem::path scene;
    std::optional<std::filesystem::path> config;
    std::filesystem::path out; // results; timings go to <out>.timing.csv
    std::optional<Quadrant> quadrant;
    std::optional<int> parallel;
};
int cmd_run(const RunOptions &opts, const LogSink &log = {});

struct EvalOptions {
    std::filesystem::path results;
    std::filesystem::path scene;
    std::filesystem::path out; // directory
};
int cmd_eval(const EvalOptions &opts, const LogSink &log = {});

struct AblateOptions {
    std::filesystem::path scene;
    std::filesystem::path config;
    std::filesystem::path out; // long-format CSV
    std::optional<int> parallel;
    std::optional<std::uint64_t> seed;
};
int cmd_ablate(const AblateOptions &opts, const LogSink &log = {});

} // namespace orpose

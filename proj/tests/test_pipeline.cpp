#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>

#include "orpose/commands.hpp"
#include "orpose/error.hpp"
#include "orpose/pipeline.hpp"

using namespace orpose;

namespace {

SceneConfig small_config(int frames) {
    SceneConfig cfg;
    cfg.num_frames = frames;
    cfg.corruption.drop_prob = 0.2;
    cfg.imu_noise_deg = 2.0;
    return cfg;
}

// Cheaper than the defaults but still exercises every stage.
RunConfig quick_run() {
    RunConfig cfg;
    cfg.fusion.k_samples = 60;
    cfg.psm.n_bins = 8;
    cfg.psm.iterations = 2;
    return cfg;
}

const Scene &shared_scene() {
    static const Scene scene = build_scene(small_config(6));
    return scene;
}

bool same_pose(const std::optional<Pose3D> &a, const std::optional<Pose3D> &b) {
    if (a.has_value() != b.has_value()) {
        return false;
    }
    return !a || a->joints == b->joints;
}

std::filesystem::path scratch_dir(const std::string &name) {
    const auto dir = std::filesystem::temp_directory_path() / ("orpose_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

int count_lines(const std::string &s) {
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

double sweep_value(const SweepResult &r, int point, const std::string &method, const std::string &group,
                   const std::string &metric) {
    for (const SweepRow &row : r.rows) {
        if (row.point == point && row.method == method && row.group == group && row.metric == metric) {
            return row.value;
        }
    }
    FAIL("sweep row not found");
    return 0.0;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("quadrant names") {
    for (Quadrant q : kAllQuadrants) {
        CHECK(quadrant_from_string(to_string(q)) == q);
    }
    CHECK_FALSE(quadrant_from_string("orn-psm2").has_value());
    CHECK(uses_fusion(Quadrant::OrnPsm));
    CHECK_FALSE(uses_fusion(Quadrant::SnOrpsm));
    CHECK(uses_orientation(Quadrant::SnOrpsm));
    CHECK_FALSE(uses_orientation(Quadrant::OrnPsm));
}

TEST_CASE("run config parsing") {
    RunConfig cfg = quick_run();
    cfg.fusion.lambda = 0.25;
    cfg.fusion_mode = FusionMode::SameView;
    cfg.quadrants = {Quadrant::OrnOrpsm, Quadrant::SnPsm};
    cfg.parallel = 3;
    const std::string text = run_config_to_string(cfg);
    const RunConfig back = run_config_from_string(text);
    CHECK(run_config_to_string(back) == text);
    CHECK(back.fusion.lambda == 0.25);
    CHECK(back.psm.n_bins == 8);
    CHECK(back.quadrants == cfg.quadrants);
    CHECK(back.fusion_mode == FusionMode::SameView);

    const RunConfig defaults = run_config_from_string("{}");
    CHECK(defaults.fusion.lambda == 0.5);
    CHECK(defaults.fusion.k_samples == 200);
    CHECK(defaults.psm.epsilon_mm == 150.0);
    CHECK(defaults.psm.edge_mm == 2000.0);
    CHECK(defaults.psm.n_bins == 16);
    CHECK(defaults.quadrants.size() == 4);

    auto code = [](const std::string &t) {
        try {
            run_config_from_string(t);
        } catch (const Error &e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(code(R"({"fusion": {"lamda": 0.5}})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"parallel": 0})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"quadrants": ["sn-psm", "sn-psm"]})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"quadrants": ["bogus"]})") == ErrorCode::InvalidConfig);
    CHECK(code(R"({"fusion": {"lambda": 1.5}})") == ErrorCode::InvalidConfig);
    CHECK(code("{") == ErrorCode::ParseError);
}

TEST_CASE("unfused, orientation-free quadrant is the plain baseline") {
    const Scene &scene = shared_scene();
    RunConfig cfg = quick_run();
    cfg.quadrants = {Quadrant::SnPsm};
    const RunResults res = run_scene(scene, cfg);
    REQUIRE(res.runs.size() == 1);
    for (size_t f = 0; f < scene.frames.size(); ++f) {
        const HeatmapSet raw = scene.heatmap_set(scene.frames[f]);
        const FrameResult &r = res.runs[0].frames[f];
        CHECK(r.frame_id == scene.frames[f].id);
        const auto views = decode_views(raw);
        REQUIRE(r.views2d.size() == views.size());
        for (size_t v = 0; v < views.size(); ++v) {
            CHECK(r.views2d[v].joints == views[v].joints);
        }
        try {
            PsmConfig psm = cfg.psm;
            psm.use_orientation = false;
            const Pose3D direct =
                recursive_refine(raw, scene.skeleton, nullptr, psm, estimate_root(raw, scene.skeleton.root, psm.floor));
            REQUIRE(r.pose.has_value());
            CHECK(r.pose->joints == direct.joints);
        } catch (const Error &e) {
            CHECK(r.error == e.code());
        }
    }
}

TEST_CASE("lambda one makes fused quadrants match their unfused twins") {
    RunConfig cfg = quick_run();
    cfg.fusion.lambda = 1.0;
    const RunResults res = run_scene(shared_scene(), cfg);
    for (size_t f = 0; f < shared_scene().frames.size(); ++f) {
        CHECK(same_pose(res.find(Quadrant::OrnPsm)->frames[f].pose, res.find(Quadrant::SnPsm)->frames[f].pose));
        CHECK(same_pose(res.find(Quadrant::OrnOrpsm)->frames[f].pose, res.find(Quadrant::SnOrpsm)->frames[f].pose));
    }
}

TEST_CASE("a frame without a triangulable root fails alone") {
    Scene scene = shared_scene();
    const int M = scene.skeleton.num_joints();
    for (int v = 1; v < scene.num_views(); ++v) {
        scene.frames[2].heatmaps[static_cast<size_t>(v * M + scene.skeleton.root)] =
            Heatmap(scene.heatmap_width, scene.heatmap_height);
    }
    const RunConfig cfg = quick_run();
    const RunResults clean = run_scene(shared_scene(), cfg);
    const RunResults broken = run_scene(scene, cfg);
    for (size_t q = 0; q < broken.runs.size(); ++q) {
        const auto &frames = broken.runs[q].frames;
        REQUIRE(frames.size() == scene.frames.size());
        CHECK_FALSE(frames[2].ok());
        if (!uses_fusion(broken.runs[q].quadrant)) {
            CHECK(frames[2].error == ErrorCode::InsufficientViews);
        }
        CHECK_FALSE(frames[2].pose.has_value());
        CHECK_FALSE(frames[2].message.empty());
        for (size_t f = 0; f < frames.size(); ++f) {
            if (f != 2) {
                CHECK(same_pose(frames[f].pose, clean.runs[q].frames[f].pose));
            }
        }
    }
    CHECK(broken.failed_frames() >= clean.failed_frames() + 2);
}

TEST_CASE("results are independent of parallelism and repeatable") {
    RunConfig cfg = quick_run();
    cfg.parallel = 1;
    const std::string one = results_to_string(run_scene(shared_scene(), cfg));
    cfg.parallel = 4;
    const std::string four = results_to_string(run_scene(shared_scene(), cfg));
    const std::string again = results_to_string(run_scene(shared_scene(), cfg));
    CHECK(one == four);
    CHECK(four == again);
    CHECK(results_to_string(results_from_string(one)) == one);
    CHECK(count_lines(timing_csv(results_from_string(one))) == 1 + 4 * 6);
}

TEST_CASE("same-view fusion mode runs") {
    RunConfig cfg = quick_run();
    cfg.fusion_mode = FusionMode::SameView;
    cfg.quadrants = {Quadrant::OrnOrpsm};
    const RunResults res = run_scene(shared_scene(), cfg);
    CHECK(res.runs[0].frames.size() == shared_scene().frames.size());
}

}

TEST_SUITE("commands") {

TEST_CASE("evaluation") {
    const Scene &scene = shared_scene();
    const RunResults res = run_scene(scene, quick_run());

    SUBCASE("perfect predictions score zero error") {
        RunResults perfect = res;
        for (MethodRun &run : perfect.runs) {
            for (size_t f = 0; f < run.frames.size(); ++f) {
                run.frames[f].pose = scene.frames[f].truth->pose;
                run.frames[f].views2d = scene.frames[f].truth->views2d;
                run.frames[f].error.reset();
            }
        }
        for (const EvalReport &r : evaluate(perfect, scene)) {
            CHECK(r.group("mean_all").mpjpe_mm == 0.0);
            CHECK(r.group("mean_all").aligned_mpjpe_mm < 1e-9);
            CHECK(r.group("mean_all").pckh[2] == 100.0);
            CHECK(r.failed_frames == 0);
        }
    }
    SUBCASE("four method rows") {
        const auto reports = evaluate(res, scene);
        REQUIRE(reports.size() == 4);
        const std::string csv = reports_csv(reports);
        CHECK(count_lines(csv) == 5);
        CHECK(csv.rfind("method,frames,failed_frames,", 0) == 0);
        CHECK(reports_json(reports).find("\"orn-orpsm\"") != std::string::npos);
        CHECK(count_lines(frame_errors_csv(reports, res)) == 1 + 4 * 6);
    }
    SUBCASE("error differences sum to the mean difference times the frame count") {
        const auto diffs = error_differences(res, scene);
        REQUIRE(diffs.size() == 3);
        const MethodRun &base = *res.find(Quadrant::SnPsm);
        for (const ErrorDifference &d : diffs) {
            const MethodRun &run = *res.find(*quadrant_from_string(d.method));
            double sum = 0.0, method_mean = 0.0, base_mean = 0.0;
            long n = 0;
            for (const auto &[id, diff] : d.frames) {
                sum += diff;
            }
            for (size_t f = 0; f < run.frames.size(); ++f) {
                if (run.frames[f].pose && base.frames[f].pose) {
                    method_mean += mpjpe(*run.frames[f].pose, scene.frames[f].truth->pose);
                    base_mean += mpjpe(*base.frames[f].pose, scene.frames[f].truth->pose);
                    ++n;
                }
            }
            REQUIRE(n == static_cast<long>(d.frames.size()));
            const double mean_diff = (method_mean - base_mean) / static_cast<double>(n);
            CHECK(std::abs(sum - mean_diff * static_cast<double>(n)) <= 1e-9);
            CHECK(std::is_sorted(d.frames.begin(), d.frames.end(),
                                 [](const auto &a, const auto &b) { return a.second < b.second; }));
        }
    }
    SUBCASE("mismatched inputs") {
        RunResults shorter = res;
        shorter.runs[0].frames.pop_back();
        CHECK_THROWS_WITH_AS(evaluate(shorter, scene), doctest::Contains("MismatchedInputs"), Error);
        RunResults renamed = res;
        renamed.runs[1].frames[0].frame_id = 999;
        CHECK_THROWS_WITH_AS(evaluate(renamed, scene), doctest::Contains("MismatchedInputs"), Error);
        Scene no_truth = scene;
        no_truth.frames[0].truth.reset();
        CHECK_THROWS_WITH_AS(evaluate(res, no_truth), doctest::Contains("MismatchedInputs"), Error);
    }
}

TEST_CASE("sweeps") {
    const Scene &scene = shared_scene();
    SUBCASE("a one-point sweep equals a direct run and evaluation") {
        SweepConfig sweep;
        sweep.base = quick_run();
        sweep.axes = {{"psm.n_bins", {8}}};
        const SweepResult r = run_sweep(scene, sweep);
        const auto reports = evaluate(run_scene(scene, quick_run()), scene);
        for (const EvalReport &rep : reports) {
            for (const GroupStats &g : rep.groups) {
                CHECK(sweep_value(r, 0, rep.method, g.group, "mpjpe_mm") == g.mpjpe_mm);
                CHECK(sweep_value(r, 0, rep.method, g.group, "pckh@1/6") == g.pckh[1]);
            }
        }
    }
    SUBCASE("lambda one reproduces the unfused 2D metrics") {
        SweepConfig sweep;
        sweep.base = quick_run();
        sweep.base.quadrants = {Quadrant::SnPsm, Quadrant::OrnPsm};
        sweep.axes = {{"fusion.lambda", {0.0, 0.5, 1.0}}};
        const SweepResult r = run_sweep(scene, sweep);
        for (const char *metric : {"pckh@1/2", "pckh@1/6", "pckh@1/12"}) {
            CHECK(sweep_value(r, 2, "orn-psm", "mean_all", metric) == sweep_value(r, 2, "sn-psm", "mean_all", metric));
        }
        const std::string csv = sweep_csv(r);
        CHECK(csv.rfind("point,fusion.lambda,method,group,metric,value\n", 0) == 0);
    }
    SUBCASE("config parsing") {
        const SweepConfig s = sweep_config_from_string(
            R"({"base": {"psm": {"n_bins": 8}}, "quadrants": ["sn-psm"],
                "sweep": [{"param": "scene.drop_prob", "values": [0.1, 0.2]}, {"param": "fusion.lambda", "values": [0.5]}]})");
        CHECK(s.base.psm.n_bins == 8);
        CHECK(s.base.quadrants == std::vector<Quadrant>{Quadrant::SnPsm});
        CHECK(s.axes.size() == 2);
        CHECK_THROWS_AS(sweep_config_from_string(R"({"sweep": [{"param": "psm.colour", "values": [1]}]})"), Error);
        CHECK_THROWS_AS(sweep_config_from_string(R"({"sweep": [{"param": "psm.n_bins", "values": []}]})"), Error);
        CHECK_THROWS_AS(sweep_config_from_string(R"({"extra": 1})"), Error);
    }
}

TEST_CASE("command entry points") {
    const auto dir = scratch_dir("commands");
    const auto cfg_path = dir / "scene_cfg.json";
    write_text_file(cfg_path, R"({"num_frames": 3, "corruption": {"drop_prob": 0.2}})");
    REQUIRE(cmd_generate({cfg_path, dir / "a.json", std::nullopt}) == kExitOk);
    REQUIRE(cmd_generate({cfg_path, dir / "b.json", std::nullopt}) == kExitOk);
    CHECK(read_text_file(dir / "a.json") == read_text_file(dir / "b.json"));
    REQUIRE(cmd_generate({cfg_path, dir / "c.json", 5}) == kExitOk);
    CHECK(read_text_file(dir / "a.json") != read_text_file(dir / "c.json"));
    CHECK(load_scene(dir / "a.json").warnings.empty());

    write_text_file(dir / "run.json", run_config_to_string(quick_run()));
    std::vector<std::string> logged;
    const LogSink sink = [&](LogLevel, const std::string &m) { logged.push_back(m); };
    const int rc = cmd_run({dir / "a.json", dir / "run.json", dir / "res.json", std::nullopt, 2}, sink);
    const RunResults res = results_from_string(read_text_file(dir / "res.json"));
    CHECK(rc == (res.failed_frames() > 0 ? kExitPartial : kExitOk));
    CHECK(res.runs.size() == 4);
    CHECK(std::filesystem::exists(dir / "res.json.timing.csv"));
    CHECK_FALSE(logged.empty());

    CHECK(cmd_run({dir / "a.json", dir / "run.json", dir / "one.json", Quadrant::SnOrpsm, 1}) != kExitFatal);
    CHECK(results_from_string(read_text_file(dir / "one.json")).runs.size() == 1);

    REQUIRE(cmd_eval({dir / "res.json", dir / "a.json", dir / "report"}) == kExitOk);
    for (const char *f : {"report.json", "report.csv", "frame_errors.csv", "error_diff.csv"}) {
        CHECK(std::filesystem::exists(dir / "report" / f));
    }
    write_text_file(dir / "short_cfg.json", R"({"num_frames": 2})");
    REQUIRE(cmd_generate({dir / "short_cfg.json", dir / "short.json", std::nullopt}) == kExitOk);
    CHECK_THROWS_AS(cmd_eval({dir / "res.json", dir / "short.json", dir / "report2"}), Error);

    write_text_file(dir / "sweep.json",
                    R"({"base": {"fusion": {"k_samples": 60}, "psm": {"n_bins": 8, "iterations": 1}},
                        "quadrants": ["sn-psm", "orn-psm"],
                        "sweep": [{"param": "scene.drop_prob", "values": [0.0, 0.5]}]})");
    CHECK(cmd_ablate({dir / "a.json", dir / "sweep.json", dir / "sweep.csv", 1, std::nullopt}) != kExitFatal);
    const std::string csv = read_text_file(dir / "sweep.csv");
    CHECK(csv.rfind("point,scene.drop_prob,method,group,metric,value\n", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("command line exit codes") {
    const auto dir = scratch_dir("cli");
    auto run = [&](const std::string &args) {
        const std::string cmd = std::string("ORPOSE_LOG=error \"") + ORPOSE_CLI_PATH + "\" " + args + " 2>/dev/null";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    const std::string d = dir.string();
    write_text_file(dir / "cfg.json", R"({"num_frames": 2})");
    write_text_file(dir / "quick.json", R"({"fusion": {"k_samples": 40}, "psm": {"n_bins": 8, "iterations": 1}})");
    CHECK(run("generate --config " + d + "/cfg.json --seed 3 --out " + d + "/s.json") == 0);
    CHECK(run("run --scene " + d + "/s.json --config " + d + "/quick.json --quadrant sn-psm --out " + d +
              "/r.json") == 0);
    CHECK(run("eval --scene " + d + "/s.json --results " + d + "/r.json --out " + d + "/rep") == 0);
    CHECK(std::filesystem::exists(dir / "rep" / "report.csv"));

    // every root heatmap empty: all frames error, the run is partial
    Scene scene = load_scene(dir / "s.json").scene;
    for (SceneFrame &f : scene.frames) {
        for (int v = 0; v < scene.num_views(); ++v) {
            f.heatmaps[static_cast<size_t>(v * scene.skeleton.num_joints() + scene.skeleton.root)] =
                Heatmap(scene.heatmap_width, scene.heatmap_height);
        }
    }
    save_scene(scene, dir / "broken.json");
    CHECK(run("run --scene " + d + "/broken.json --config " + d + "/quick.json --out " + d + "/rb.json") == 2);

    write_text_file(dir / "garbage.json", "{\"format\": \"orpose-scene\"");
    CHECK(run("run --scene " + d + "/garbage.json --out " + d + "/x.json") == 1);
    CHECK(run("run --scene " + d + "/missing.json --out " + d + "/x.json") == 1);
    CHECK(run("run --scene " + d + "/s.json --quadrant nope --out " + d + "/x.json") == 1);
    CHECK(run("frobnicate") == 1);
    write_text_file(dir / "badrun.json", R"({"psm": {"n_bins": 1}})");
    CHECK(run("run --scene " + d + "/s.json --config " + d + "/badrun.json --out " + d + "/x.json") == 1);
    std::filesystem::remove_all(dir);
}

}

TEST_SUITE("ablation") {

TEST_CASE("fusion gain grows with the occlusion rate") {
    SceneConfig sc;
    sc.num_frames = 200;
    sc.imu_noise_deg = 2.0;
    const Scene scene = build_scene(sc);
    SweepConfig sweep;
    sweep.base.psm.n_bins = 8;
    sweep.base.psm.iterations = 0;
    sweep.base.quadrants = {Quadrant::SnPsm, Quadrant::OrnPsm};
    const std::vector<double> drops{0.1, 0.3, 0.5};
    sweep.axes = {{"scene.drop_prob", drops}};
    const SweepResult r = run_sweep(scene, sweep);
    double previous = -1.0;
    for (int p = 0; p < static_cast<int>(drops.size()); ++p) {
        const double gap = sweep_value(r, p, "orn-psm", "mean_six", "pckh@1/2") -
                           sweep_value(r, p, "sn-psm", "mean_six", "pckh@1/2");
        MESSAGE("drop " << drops[static_cast<size_t>(p)] << ": ORN - SN PCKh@1/2 gap " << gap << " points");
        CHECK(gap >= 0.0);
        CHECK(gap > previous);
        previous = gap;
    }
}

}

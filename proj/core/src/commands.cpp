#include "orpose/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

namespace orpose {

using nlohmann::json;

namespace {

void emit(const LogSink &log, LogLevel level, const std::string &msg) {
    if (log) {
        log(level, msg);
    }
}

const std::vector<FrameTruth> &require_truth(const Scene &scene, std::vector<FrameTruth> &storage) {
    storage.clear();
    for (const SceneFrame &f : scene.frames) {
        if (!f.truth) {
            fail(ErrorCode::MismatchedInputs, "scene frame " + std::to_string(f.id) + " has no ground truth");
        }
        storage.push_back(*f.truth);
    }
    return storage;
}

void check_frames(const MethodRun &run, const Scene &scene) {
    if (run.frames.size() != scene.frames.size()) {
        fail(ErrorCode::MismatchedInputs, std::string(to_string(run.quadrant)) + " covers " +
                                              std::to_string(run.frames.size()) + " frames, scene has " +
                                              std::to_string(scene.frames.size()));
    }
    for (size_t i = 0; i < run.frames.size(); ++i) {
        if (run.frames[i].frame_id != scene.frames[i].id) {
            fail(ErrorCode::MismatchedInputs, "result frame " + std::to_string(run.frames[i].frame_id) +
                                                  " does not match scene frame " +
                                                  std::to_string(scene.frames[i].id));
        }
    }
}

std::string pckh_label(size_t t) {
    static constexpr const char *labels[] = {"pckh@1/2", "pckh@1/6", "pckh@1/12"};
    return labels[t];
}

const std::map<std::string, bool> &sweep_params() {
    // name -> integral
    static const std::map<std::string, bool> params{
        {"fusion.lambda", false},        {"fusion.k_samples", true},      {"fusion.depth_near_mm", false},
        {"fusion.depth_far_mm", false},  {"psm.orientation_weight", false}, {"psm.n_bins", true},
        {"psm.epsilon_mm", false},       {"psm.iterations", true},        {"psm.edge_mm", false},
        {"scene.imu_noise_deg", false},  {"scene.drop_prob", false},      {"scene.shift_prob", false},
        {"scene.clutter_prob", false},   {"scene.seed", true},
    };
    return params;
}

void apply_param(const std::string &name, double v, RunConfig &run, SceneConfig *scene) {
    if (sweep_params().at(name) && v != std::floor(v)) {
        fail(ErrorCode::InvalidConfig, name + " needs integral values");
    }
    if (name.rfind("scene.", 0) == 0 && scene == nullptr) {
        fail(ErrorCode::InvalidConfig, name + " requires a scene with a generator block");
    }
    if (name == "fusion.lambda") run.fusion.lambda = v;
    else if (name == "fusion.k_samples") run.fusion.k_samples = static_cast<int>(v);
    else if (name == "fusion.depth_near_mm") run.fusion.depth_near_mm = v;
    else if (name == "fusion.depth_far_mm") {
        run.fusion.depth_far_mm = v;
        run.depth_far_from_scene = false;
    } else if (name == "psm.orientation_weight") run.psm.orientation_weight = v;
    else if (name == "psm.n_bins") run.psm.n_bins = static_cast<int>(v);
    else if (name == "psm.epsilon_mm") run.psm.epsilon_mm = v;
    else if (name == "psm.iterations") run.psm.iterations = static_cast<int>(v);
    else if (name == "psm.edge_mm") run.psm.edge_mm = v;
    else if (name == "scene.imu_noise_deg") scene->imu_noise_deg = v;
    else if (name == "scene.drop_prob") scene->corruption.drop_prob = v;
    else if (name == "scene.shift_prob") scene->corruption.shift_prob = v;
    else if (name == "scene.clutter_prob") scene->corruption.clutter_prob = v;
    else if (name == "scene.seed") scene->seed = static_cast<std::uint64_t>(v);
}

std::string csv_header_groups(const EvalReport &r) {
    std::string h = "method,frames,failed_frames";
    for (const GroupStats &g : r.groups) {
        for (size_t t = 0; t < kPckhThresholds.size(); ++t) {
            h += "," + g.group + "_" + pckh_label(t);
        }
        h += "," + g.group + "_mpjpe_mm," + g.group + "_aligned_mpjpe_mm";
    }
    return h;
}

} // namespace

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::vector<EvalReport> evaluate(const RunResults &results, const Scene &scene) {
    if (results.runs.empty()) {
        fail(ErrorCode::EmptyInput, "results contain no method runs");
    }
    std::vector<FrameTruth> storage;
    const auto &truth = require_truth(scene, storage);
    std::vector<EvalReport> reports;
    for (const MethodRun &run : results.runs) {
        check_frames(run, scene);
        std::vector<FramePrediction> preds;
        for (const FrameResult &f : run.frames) {
            preds.push_back({f.pose, f.views2d});
        }
        reports.push_back(assemble_report(std::string(to_string(run.quadrant)), preds, truth, scene.skeleton));
    }
    return reports;
}

std::string reports_json(const std::vector<EvalReport> &reports) {
    json methods = json::array();
    for (const EvalReport &r : reports) {
        json groups = json::array();
        for (const GroupStats &g : r.groups) {
            json pck = json::object();
            for (size_t t = 0; t < kPckhThresholds.size(); ++t) {
                pck[pckh_label(t)] = g.pckh[t];
            }
            groups.push_back({{"group", g.group},
                              {"pckh", pck},
                              {"pckh_samples", g.pckh_count},
                              {"mpjpe_mm", g.mpjpe_mm},
                              {"aligned_mpjpe_mm", g.aligned_mpjpe_mm},
                              {"joint_samples", g.joint_count}});
        }
        methods.push_back({{"method", r.method},
                           {"frames", r.frames},
                           {"failed_frames", r.failed_frames},
                           {"groups", groups}});
    }
    return json{{"format", "orpose-report"}, {"version", 1}, {"methods", methods}}.dump(2);
}

std::string reports_csv(const std::vector<EvalReport> &reports) {
    if (reports.empty()) {
        return "";
    }
    std::ostringstream out;
    out << csv_header_groups(reports.front()) << '\n';
    for (const EvalReport &r : reports) {
        out << r.method << ',' << r.frames << ',' << r.failed_frames;
        for (const GroupStats &g : r.groups) {
            for (double p : g.pckh) {
                out << ',' << format_double(p);
            }
            out << ',' << format_double(g.mpjpe_mm) << ',' << format_double(g.aligned_mpjpe_mm);
        }
        out << '\n';
    }
    return out.str();
}

std::vector<ErrorDifference> error_differences(const RunResults &results, const Scene &scene, Quadrant baseline) {
    const MethodRun *base = results.find(baseline);
    if (base == nullptr) {
        fail(ErrorCode::MismatchedInputs, "baseline " + std::string(to_string(baseline)) + " missing from results");
    }
    check_frames(*base, scene);
    std::vector<FrameTruth> storage;
    const auto &truth = require_truth(scene, storage);
    std::vector<ErrorDifference> diffs;
    for (const MethodRun &run : results.runs) {
        if (run.quadrant == baseline) {
            continue;
        }
        check_frames(run, scene);
        ErrorDifference d;
        d.method = std::string(to_string(run.quadrant));
        for (size_t i = 0; i < run.frames.size(); ++i) {
            const FrameResult &a = run.frames[i];
            const FrameResult &b = base->frames[i];
            if (a.pose && b.pose) {
                d.frames.emplace_back(a.frame_id, mpjpe(*a.pose, truth[i].pose) - mpjpe(*b.pose, truth[i].pose));
            }
        }
        std::stable_sort(d.frames.begin(), d.frames.end(),
                         [](const auto &x, const auto &y) { return x.second < y.second; });
        diffs.push_back(std::move(d));
    }
    return diffs;
}

std::string error_differences_csv(const std::vector<ErrorDifference> &diffs) {
    std::ostringstream out;
    out << "method,rank,frame_id,diff_mm\n";
    for (const ErrorDifference &d : diffs) {
        for (size_t k = 0; k < d.frames.size(); ++k) {
            out << d.method << ',' << k << ',' << d.frames[k].first << ',' << format_double(d.frames[k].second)
                << '\n';
        }
    }
    return out.str();
}

std::string frame_errors_csv(const std::vector<EvalReport> &reports, const RunResults &results) {
    std::ostringstream out;
    out << "method,frame_id,mpjpe_mm,aligned_mpjpe_mm\n";
    for (size_t r = 0; r < reports.size(); ++r) {
        const auto &frames = results.runs[r].frames;
        for (size_t i = 0; i < frames.size(); ++i) {
            out << reports[r].method << ',' << frames[i].frame_id << ','
                << format_double(reports[r].frame_mpjpe[i]) << ','
                << format_double(reports[r].frame_aligned_mpjpe[i]) << '\n';
        }
    }
    return out.str();
}

SweepConfig sweep_config_from_string(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        fail(ErrorCode::ParseError, e.what());
    }
    if (!j.is_object()) {
        fail(ErrorCode::InvalidConfig, "sweep config must be an object");
    }
    for (const auto &item : j.items()) {
        if (item.key() != "base" && item.key() != "quadrants" && item.key() != "sweep") {
            fail(ErrorCode::InvalidConfig, "unknown key '" + item.key() + "' in sweep config");
        }
    }
    SweepConfig cfg;
    if (j.contains("base")) {
        cfg.base = run_config_from_string(j.at("base").dump());
    }
    try {
        if (j.contains("quadrants")) {
            json q{{"quadrants", j.at("quadrants")}};
            cfg.base.quadrants = run_config_from_string(q.dump()).quadrants;
        }
        if (j.contains("sweep")) {
            for (const json &axis : j.at("sweep")) {
                SweepAxis a;
                a.param = axis.at("param").get<std::string>();
                a.values = axis.at("values").get<std::vector<double>>();
                if (!sweep_params().contains(a.param)) {
                    fail(ErrorCode::InvalidConfig, "unknown sweep parameter '" + a.param + "'");
                }
                if (a.values.empty()) {
                    fail(ErrorCode::InvalidConfig, "sweep axis '" + a.param + "' has no values");
                }
                for (const SweepAxis &prev : cfg.axes) {
                    if (prev.param == a.param) {
                        fail(ErrorCode::InvalidConfig, "sweep parameter '" + a.param + "' repeated");
                    }
                }
                cfg.axes.push_back(std::move(a));
            }
        }
    } catch (const json::exception &e) {
        fail(ErrorCode::ParseError, e.what());
    }
    cfg.base.validate();
    return cfg;
}

SweepResult run_sweep(const Scene &scene, const SweepConfig &sweep, const LogSink &log) {
    size_t points = 1;
    for (const SweepAxis &a : sweep.axes) {
        points *= a.values.size();
    }
    SweepResult result;
    std::optional<SceneConfig> cached_cfg;
    std::optional<Scene> cached_scene;

    for (size_t p = 0; p < points; ++p) {
        RunConfig run = sweep.base;
        std::optional<SceneConfig> scene_cfg = scene.generator;
        bool scene_param = false;
        std::vector<std::pair<std::string, double>> params;
        size_t rest = p;
        std::vector<size_t> idx(sweep.axes.size());
        for (size_t a = sweep.axes.size(); a-- > 0;) {
            idx[a] = rest % sweep.axes[a].values.size();
            rest /= sweep.axes[a].values.size();
        }
        for (size_t a = 0; a < sweep.axes.size(); ++a) {
            const double v = sweep.axes[a].values[idx[a]];
            apply_param(sweep.axes[a].param, v, run, scene_cfg ? &*scene_cfg : nullptr);
            scene_param = scene_param || sweep.axes[a].param.rfind("scene.", 0) == 0;
            params.emplace_back(sweep.axes[a].param, v);
        }
        run.validate();

        const Scene *target = &scene;
        if (scene_param) {
            if (!cached_cfg || !(cached_cfg->corruption == scene_cfg->corruption &&
                                 cached_cfg->imu_noise_deg == scene_cfg->imu_noise_deg &&
                                 cached_cfg->seed == scene_cfg->seed)) {
                scene_cfg->validate();
                emit(log, LogLevel::Debug, "regenerating scene for sweep point " + std::to_string(p));
                cached_scene = build_scene(*scene_cfg);
                cached_cfg = scene_cfg;
            }
            target = &*cached_scene;
        }

        emit(log, LogLevel::Info, "sweep point " + std::to_string(p + 1) + "/" + std::to_string(points));
        const RunResults results = run_scene(*target, run);
        result.failed_frames += results.failed_frames();
        const auto reports = evaluate(results, *target);
        for (const EvalReport &r : reports) {
            auto row = [&](const std::string &group, const std::string &metric, double value) {
                result.rows.push_back({static_cast<int>(p), params, r.method, group, metric, value});
            };
            row("all", "failed_frames", static_cast<double>(r.failed_frames));
            for (const GroupStats &g : r.groups) {
                for (size_t t = 0; t < kPckhThresholds.size(); ++t) {
                    row(g.group, pckh_label(t), g.pckh[t]);
                }
                row(g.group, "mpjpe_mm", g.mpjpe_mm);
                row(g.group, "aligned_mpjpe_mm", g.aligned_mpjpe_mm);
            }
        }
    }
    return result;
}

std::string sweep_csv(const SweepResult &result) {
    std::ostringstream out;
    out << "point";
    if (!result.rows.empty()) {
        for (const auto &[name, value] : result.rows.front().params) {
            out << ',' << name;
        }
    }
    out << ",method,group,metric,value\n";
    for (const SweepRow &r : result.rows) {
        out << r.point;
        for (const auto &[name, value] : r.params) {
            out << ',' << format_double(value);
        }
        out << ',' << r.method << ',' << r.group << ',' << r.metric << ',' << format_double(r.value) << '\n';
    }
    return out.str();
}

int cmd_generate(const GenerateOptions &opts, const LogSink &log) {
    SceneConfig cfg = opts.config ? load_scene_config(*opts.config) : SceneConfig{};
    if (opts.seed) {
        cfg.seed = *opts.seed;
    }
    cfg.validate();
    emit(log, LogLevel::Info, "generating " + std::to_string(cfg.num_frames) + " frames, seed " +
                                  std::to_string(cfg.seed));
    save_scene(build_scene(cfg), opts.out);
    emit(log, LogLevel::Info, "wrote " + opts.out.string());
    return kExitOk;
}

namespace {

Scene load_scene_logged(const std::filesystem::path &path, const LogSink &log) {
    LoadedScene loaded = load_scene(path);
    for (const std::string &w : loaded.warnings) {
        emit(log, LogLevel::Warn, w);
    }
    emit(log, LogLevel::Debug, "loaded " + std::to_string(loaded.scene.frames.size()) + " frames from " +
                                   path.string());
    return std::move(loaded.scene);
}

} // namespace

int cmd_run(const RunOptions &opts, const LogSink &log) {
    const Scene scene = load_scene_logged(opts.scene, log);
    RunConfig cfg = opts.config ? load_run_config(*opts.config) : RunConfig{};
    if (opts.quadrant) {
        cfg.quadrants = {*opts.quadrant};
    }
    if (opts.parallel) {
        cfg.parallel = *opts.parallel;
    }
    cfg.validate();

    const RunResults results = run_scene(scene, cfg);
    write_text_file(opts.out, results_to_string(results));
    std::filesystem::path timing = opts.out;
    timing += ".timing.csv";
    write_text_file(timing, timing_csv(results));

    for (const MethodRun &run : results.runs) {
        for (const FrameResult &f : run.frames) {
            if (!f.ok()) {
                emit(log, LogLevel::Warn,
                     std::string(to_string(run.quadrant)) + " frame " + std::to_string(f.frame_id) + ": " + f.message);
            }
        }
    }
    const long failed = results.failed_frames();
    emit(log, LogLevel::Info, "wrote " + opts.out.string() + " (" + std::to_string(failed) + " failed frame runs)");
    return failed > 0 ? kExitPartial : kExitOk;
}

int cmd_eval(const EvalOptions &opts, const LogSink &log) {
    const Scene scene = load_scene_logged(opts.scene, log);
    const RunResults results = results_from_string(read_text_file(opts.results));
    const auto reports = evaluate(results, scene);

    std::error_code ec;
    std::filesystem::create_directories(opts.out, ec);
    if (ec) {
        fail(ErrorCode::IoError, "cannot create '" + opts.out.string() + "': " + ec.message());
    }
    write_text_file(opts.out / "report.json", reports_json(reports));
    write_text_file(opts.out / "report.csv", reports_csv(reports));
    write_text_file(opts.out / "frame_errors.csv", frame_errors_csv(reports, results));
    if (results.find(Quadrant::SnPsm) != nullptr) {
        write_text_file(opts.out / "error_diff.csv", error_differences_csv(error_differences(results, scene)));
    } else {
        emit(log, LogLevel::Warn, "no sn-psm run; skipping error_diff.csv");
    }
    for (const EvalReport &r : reports) {
        const GroupStats &all = r.group("mean_all");
        emit(log, LogLevel::Info,
             r.method + ": MPJPE " + format_double(all.mpjpe_mm) + " mm, PCKh@1/2 " + format_double(all.pckh[0]) + "%");
    }
    return kExitOk;
}

int cmd_ablate(const AblateOptions &opts, const LogSink &log) {
    Scene scene = load_scene_logged(opts.scene, log);
    SweepConfig sweep = sweep_config_from_string(read_text_file(opts.config));
    if (opts.parallel) {
        sweep.base.parallel = *opts.parallel;
    }
    if (opts.seed) {
        if (!scene.generator) {
            fail(ErrorCode::InvalidConfig, "--seed needs a scene with a generator block");
        }
        SceneConfig cfg = *scene.generator;
        cfg.seed = *opts.seed;
        scene = build_scene(cfg);
    }
    const SweepResult result = run_sweep(scene, sweep, log);
    write_text_file(opts.out, sweep_csv(result));
    emit(log, LogLevel::Info, "wrote " + opts.out.string());
    return result.failed_frames > 0 ? kExitPartial : kExitOk;
}

} // namespace orpose

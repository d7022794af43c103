#include "orpose/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace orpose {

using nlohmann::json;

std::string_view to_string(Quadrant q) {
    switch (q) {
    case Quadrant::SnPsm: return "sn-psm";
    case Quadrant::OrnPsm: return "orn-psm";
    case Quadrant::SnOrpsm: return "sn-orpsm";
    case Quadrant::OrnOrpsm: return "orn-orpsm";
    }
    return "?";
}

std::optional<Quadrant> quadrant_from_string(std::string_view s) {
    for (Quadrant q : kAllQuadrants) {
        if (to_string(q) == s) {
            return q;
        }
    }
    return std::nullopt;
}

void RunConfig::validate() const {
    fusion.validate();
    psm.validate();
    if (quadrants.empty()) {
        fail(ErrorCode::InvalidConfig, "at least one quadrant is required");
    }
    for (size_t i = 0; i < quadrants.size(); ++i) {
        for (size_t k = i + 1; k < quadrants.size(); ++k) {
            if (quadrants[i] == quadrants[k]) {
                fail(ErrorCode::InvalidConfig, "duplicate quadrant " + std::string(to_string(quadrants[i])));
            }
        }
    }
    if (parallel < 1) {
        fail(ErrorCode::InvalidConfig, "parallel must be >= 1");
    }
}

namespace {

std::string_view interp_name(Interpolation i) { return i == Interpolation::Bicubic ? "bicubic" : "bilinear"; }

Interpolation interp_from(const json &j) {
    const auto s = j.get<std::string>();
    if (s == "bilinear") {
        return Interpolation::Bilinear;
    }
    if (s == "bicubic") {
        return Interpolation::Bicubic;
    }
    fail(ErrorCode::InvalidConfig, "unknown interpolation '" + s + "'");
}

void reject_unknown(const json &j, std::initializer_list<std::string_view> keys, const std::string &where) {
    if (!j.is_object()) {
        fail(ErrorCode::InvalidConfig, where + " must be an object");
    }
    for (const auto &item : j.items()) {
        if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
            fail(ErrorCode::InvalidConfig, "unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <typename T>
void read_opt(const json &j, const char *key, T &out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

json pose3_json(const Pose3D &p) {
    json a = json::array();
    for (const Vec3 &v : p.joints) {
        a.push_back({v.x(), v.y(), v.z()});
    }
    return a;
}

json pose2_json(const std::vector<Pose2D> &views) {
    json a = json::array();
    for (const Pose2D &p : views) {
        json pts = json::array();
        for (int j = 0; j < p.size(); ++j) {
            const auto k = static_cast<size_t>(j);
            pts.push_back({p.joints[k].x(), p.joints[k].y(), p.confidence[k]});
        }
        a.push_back(std::move(pts));
    }
    return a;
}

std::optional<ErrorCode> error_code_from(std::string_view s) {
    for (int c = 0; c <= static_cast<int>(ErrorCode::ParseError); ++c) {
        if (to_string(static_cast<ErrorCode>(c)) == s) {
            return static_cast<ErrorCode>(c);
        }
    }
    return std::nullopt;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<FrameResult> process_frame(const Scene &scene, const SceneFrame &frame, const RunConfig &cfg) {
    const HeatmapSet raw = scene.heatmap_set(frame);
    std::optional<HeatmapSet> fused;
    std::optional<Error> fusion_error;
    double fusion_seconds = 0.0;

    std::vector<FrameResult> out;
    for (Quadrant q : cfg.quadrants) {
        const auto t0 = Clock::now();
        FrameResult r;
        r.frame_id = frame.id;
        bool fused_here = false;
        try {
            const HeatmapSet *maps = &raw;
            if (uses_fusion(q)) {
                // Shared between the two fused quadrants.
                if (!fused && !fusion_error) {
                    const auto tf = Clock::now();
                    try {
                        fused = cfg.fusion_mode == FusionMode::CrossView
                                    ? fuse_cross_view(raw, scene.skeleton, frame.imus, cfg.fusion)
                                    : fuse_same_view(raw, scene.skeleton, frame.imus, cfg.fusion);
                    } catch (const Error &e) {
                        fusion_error = e;
                    }
                    fusion_seconds = seconds_since(tf);
                    fused_here = true;
                }
                if (fusion_error) {
                    throw *fusion_error;
                }
                maps = &*fused;
            }
            r.views2d = decode_views(*maps);
            const Vec3 root = estimate_root(*maps, scene.skeleton.root, cfg.psm.floor);
            PsmConfig psm = cfg.psm;
            psm.use_orientation = uses_orientation(q);
            r.pose = recursive_refine(*maps, scene.skeleton, psm.use_orientation ? &frame.imus : nullptr, psm,
                                      root);
        } catch (const Error &e) {
            r.pose.reset();
            r.error = e.code();
            r.message = e.what();
        }
        r.seconds = seconds_since(t0);
        if (uses_fusion(q) && !fused_here) {
            r.seconds += fusion_seconds; // computed by the other fused quadrant
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

std::string run_config_to_string(const RunConfig &cfg) {
    json quadrants = json::array();
    for (Quadrant q : cfg.quadrants) {
        quadrants.push_back(std::string(to_string(q)));
    }
    json fusion{{"mode", cfg.fusion_mode == FusionMode::CrossView ? "cross" : "same"},
                {"lambda", cfg.fusion.lambda},
                {"k_samples", cfg.fusion.k_samples},
                {"depth_near_mm", cfg.fusion.depth_near_mm},
                {"interpolation", std::string(interp_name(cfg.fusion.interpolation))}};
    if (cfg.depth_far_from_scene) {
        fusion["depth_far_mm"] = "scene";
    } else {
        fusion["depth_far_mm"] = cfg.fusion.depth_far_mm;
    }
    return json{{"fusion", fusion},
                {"psm",
                 {{"n_bins", cfg.psm.n_bins},
                  {"edge_mm", cfg.psm.edge_mm},
                  {"epsilon_mm", cfg.psm.epsilon_mm},
                  {"orientation_weight", cfg.psm.orientation_weight},
                  {"iterations", cfg.psm.iterations},
                  {"floor", cfg.psm.floor},
                  {"interpolation", std::string(interp_name(cfg.psm.interpolation))}}},
                {"quadrants", quadrants},
                {"parallel", cfg.parallel}}
        .dump(2);
}

RunConfig run_config_from_string(const std::string &text) {
    try {
        const json j = json::parse(text);
        reject_unknown(j, {"fusion", "psm", "quadrants", "parallel"}, "run config");
        RunConfig cfg;
        if (j.contains("fusion")) {
            const json &f = j.at("fusion");
            reject_unknown(f, {"mode", "lambda", "k_samples", "depth_near_mm", "depth_far_mm", "interpolation"},
                           "fusion");
            if (f.contains("mode")) {
                const auto mode = f.at("mode").get<std::string>();
                if (mode == "cross") {
                    cfg.fusion_mode = FusionMode::CrossView;
                } else if (mode == "same") {
                    cfg.fusion_mode = FusionMode::SameView;
                } else {
                    fail(ErrorCode::InvalidConfig, "fusion.mode must be 'cross' or 'same'");
                }
            }
            read_opt(f, "lambda", cfg.fusion.lambda);
            read_opt(f, "k_samples", cfg.fusion.k_samples);
            read_opt(f, "depth_near_mm", cfg.fusion.depth_near_mm);
            if (f.contains("depth_far_mm")) {
                const json &far = f.at("depth_far_mm");
                if (far.is_string() && far.get<std::string>() == "scene") {
                    cfg.depth_far_from_scene = true;
                } else {
                    cfg.fusion.depth_far_mm = far.get<double>();
                    cfg.depth_far_from_scene = false;
                }
            }
            if (f.contains("interpolation")) {
                cfg.fusion.interpolation = interp_from(f.at("interpolation"));
            }
        }
        if (j.contains("psm")) {
            const json &p = j.at("psm");
            reject_unknown(p,
                           {"n_bins", "edge_mm", "epsilon_mm", "orientation_weight", "iterations", "floor",
                            "interpolation"},
                           "psm");
            read_opt(p, "n_bins", cfg.psm.n_bins);
            read_opt(p, "edge_mm", cfg.psm.edge_mm);
            read_opt(p, "epsilon_mm", cfg.psm.epsilon_mm);
            read_opt(p, "orientation_weight", cfg.psm.orientation_weight);
            read_opt(p, "iterations", cfg.psm.iterations);
            read_opt(p, "floor", cfg.psm.floor);
            if (p.contains("interpolation")) {
                cfg.psm.interpolation = interp_from(p.at("interpolation"));
            }
        }
        if (j.contains("quadrants")) {
            cfg.quadrants.clear();
            for (const json &q : j.at("quadrants")) {
                const auto parsed = quadrant_from_string(q.get<std::string>());
                if (!parsed) {
                    fail(ErrorCode::InvalidConfig, "unknown quadrant " + q.dump());
                }
                cfg.quadrants.push_back(*parsed);
            }
        }
        read_opt(j, "parallel", cfg.parallel);
        cfg.validate();
        return cfg;
    } catch (const json::exception &e) {
        fail(ErrorCode::ParseError, e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path &path) { return run_config_from_string(read_text_file(path)); }

long RunResults::failed_frames() const {
    long n = 0;
    for (const MethodRun &run : runs) {
        n += std::count_if(run.frames.begin(), run.frames.end(), [](const FrameResult &f) { return !f.ok(); });
    }
    return n;
}

const MethodRun *RunResults::find(Quadrant q) const {
    for (const MethodRun &run : runs) {
        if (run.quadrant == q) {
            return &run;
        }
    }
    return nullptr;
}

std::vector<Pose2D> decode_views(const HeatmapSet &set) {
    std::vector<Pose2D> views(static_cast<size_t>(set.num_views));
    for (int v = 0; v < set.num_views; ++v) {
        Pose2D &p = views[static_cast<size_t>(v)];
        for (int j = 0; j < set.num_joints; ++j) {
            const Peak peak = argmax_2d(set.at(v, j));
            p.joints.push_back(set.to_image(peak.location));
            p.confidence.push_back(peak.confidence);
        }
    }
    return views;
}

RunResults run_scene(const Scene &scene, const RunConfig &cfg_in) {
    cfg_in.validate();
    RunConfig cfg = cfg_in;
    if (cfg.depth_far_from_scene) {
        cfg.fusion.depth_far_mm = scene.room_diagonal_mm;
        cfg.fusion.validate();
    }

    const size_t n_frames = scene.frames.size();
    std::vector<std::vector<FrameResult>> per_frame(n_frames);
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n_frames) {
                return;
            }
            try {
                per_frame[i] = process_frame(scene, scene.frames[i], cfg);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(n_frames);
            }
        }
    };

    const size_t workers = std::min<size_t>(static_cast<size_t>(cfg.parallel), std::max<size_t>(n_frames, 1));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    RunResults results;
    for (size_t qi = 0; qi < cfg.quadrants.size(); ++qi) {
        MethodRun run;
        run.quadrant = cfg.quadrants[qi];
        for (auto &frame : per_frame) {
            run.frames.push_back(std::move(frame[qi]));
        }
        results.runs.push_back(std::move(run));
    }
    return results;
}

std::string results_to_string(const RunResults &results) {
    json runs = json::array();
    for (const MethodRun &run : results.runs) {
        json frames = json::array();
        for (const FrameResult &f : run.frames) {
            json jf{{"id", f.frame_id}, {"status", f.ok() ? "ok" : "error"}};
            if (f.pose) {
                jf["pose3d"] = pose3_json(*f.pose);
            }
            if (!f.views2d.empty()) {
                jf["pose2d"] = pose2_json(f.views2d);
            }
            if (f.error) {
                jf["error_code"] = std::string(to_string(*f.error));
                jf["message"] = f.message;
            }
            frames.push_back(std::move(jf));
        }
        runs.push_back({{"method", std::string(to_string(run.quadrant))}, {"frames", std::move(frames)}});
    }
    return json{{"format", "orpose-results"}, {"version", 1}, {"runs", std::move(runs)}}.dump();
}

RunResults results_from_string(const std::string &text) {
    try {
        const json root = json::parse(text);
        if (root.value("format", std::string()) != "orpose-results" || root.value("version", 0) != 1) {
            fail(ErrorCode::ParseError, "not an orpose results file (version 1)");
        }
        RunResults results;
        for (const json &jr : root.at("runs")) {
            MethodRun run;
            const auto q = quadrant_from_string(jr.at("method").get<std::string>());
            if (!q) {
                fail(ErrorCode::ParseError, "unknown method " + jr.at("method").dump());
            }
            run.quadrant = *q;
            for (const json &jf : jr.at("frames")) {
                FrameResult f;
                f.frame_id = jf.at("id").get<int>();
                if (jf.contains("pose3d")) {
                    Pose3D p;
                    for (const json &v : jf.at("pose3d")) {
                        p.joints.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
                    }
                    f.pose = std::move(p);
                }
                if (jf.contains("pose2d")) {
                    for (const json &view : jf.at("pose2d")) {
                        Pose2D p;
                        for (const json &pt : view) {
                            p.joints.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
                            p.confidence.push_back(pt.at(2).get<double>());
                        }
                        f.views2d.push_back(std::move(p));
                    }
                }
                if (jf.at("status").get<std::string>() != "ok") {
                    const auto code = error_code_from(jf.value("error_code", std::string()));
                    f.error = code.value_or(ErrorCode::ParseError);
                    f.message = jf.value("message", std::string());
                    f.pose.reset();
                }
                run.frames.push_back(std::move(f));
            }
            results.runs.push_back(std::move(run));
        }
        return results;
    } catch (const json::exception &e) {
        fail(ErrorCode::ParseError, e.what());
    }
}

std::string timing_csv(const RunResults &results) {
    std::ostringstream out;
    out << "frame_id,method,status,seconds\n";
    for (const MethodRun &run : results.runs) {
        for (const FrameResult &f : run.frames) {
            out << f.frame_id << ',' << to_string(run.quadrant) << ',' << (f.ok() ? "ok" : "error") << ','
                << f.seconds << '\n';
        }
    }
    return out.str();
}

} // namespace orpose

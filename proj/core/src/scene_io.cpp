#include "orpose/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "orpose/error.hpp"

namespace orpose {

using nlohmann::json;

namespace {

// Default motions when the joint names are known, otherwise none.
std::vector<LimbMotion> default_motions_or_empty(const Skeleton &skeleton) {
    try {
        return default_motions(skeleton);
    } catch (const Error &) {
        return {};
    }
}

json to_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }
json to_json(const Vec2 &v) { return json::array({v.x(), v.y()}); }

Vec3 vec3_from(const json &j) {
    if (!j.is_array() || j.size() != 3) {
        fail(ErrorCode::ParseError, "expected a 3-vector");
    }
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Vec2 vec2_from(const json &j) {
    if (!j.is_array() || j.size() < 2) {
        fail(ErrorCode::ParseError, "expected a 2-vector");
    }
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

json camera_to_json(const CameraParams &c) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) {
            rot.push_back(c.rotation(r, k));
        }
    }
    return json{{"fx", c.fx},     {"fy", c.fy},         {"cx", c.cx},
                {"cy", c.cy},     {"width", c.width},   {"height", c.height},
                {"rotation", rot}, {"translation", to_json(c.translation)}};
}

CameraParams camera_from_json(const json &j) {
    CameraParams c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const json &rot = j.at("rotation");
    if (!rot.is_array() || rot.size() != 9) {
        fail(ErrorCode::ParseError, "camera rotation must have 9 row-major entries");
    }
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) {
            c.rotation(r, k) = rot[static_cast<size_t>(3 * r + k)].get<double>();
        }
    }
    c.translation = vec3_from(j.at("translation"));
    return c;
}

json skeleton_to_json(const Skeleton &s) {
    json joints = json::array();
    for (int j = 0; j < s.num_joints(); ++j) {
        joints.push_back({{"name", s.joint_names[static_cast<size_t>(j)]},
                          {"group", std::string(to_string(s.joint_groups[static_cast<size_t>(j)]))}});
    }
    json limbs = json::array();
    for (const Limb &l : s.limbs) {
        limbs.push_back({{"m", l.m}, {"n", l.n}, {"length_mm", l.length_mm}});
    }
    return json{{"joints", joints},
                {"root", s.root},
                {"limbs", limbs},
                {"imu_limbs", s.imu_limbs},
                {"head", {{"top", s.head_top}, {"base", s.head_base}}}};
}

Skeleton skeleton_from_json(const json &j) {
    Skeleton s;
    for (const json &joint : j.at("joints")) {
        const std::string name = joint.at("name").get<std::string>();
        s.joint_names.push_back(name);
        if (joint.contains("group")) {
            const auto g = joint_group_from_string(joint.at("group").get<std::string>());
            if (!g) {
                fail(ErrorCode::ParseError, "unknown joint group for '" + name + "'");
            }
            s.joint_groups.push_back(*g);
        } else {
            s.joint_groups.push_back(joint_group_from_name(name));
        }
    }
    s.root = j.at("root").get<int>();
    for (const json &l : j.at("limbs")) {
        s.limbs.push_back({l.at("m").get<int>(), l.at("n").get<int>(), l.at("length_mm").get<double>()});
    }
    s.imu_limbs = j.at("imu_limbs").get<std::vector<int>>();
    s.head_top = j.at("head").at("top").get<int>();
    s.head_base = j.at("head").at("base").get<int>();
    s.validate();
    return s;
}

json scene_config_to_json(const SceneConfig &c) {
    json motions = json::array();
    for (const LimbMotion &m : c.motions) {
        motions.push_back({{"rest_direction", to_json(m.rest_direction)},
                           {"swing_deg", {m.swing_min, m.swing_max}},
                           {"abduct_deg", {m.abduct_min, m.abduct_max}}});
    }
    return json{
        {"num_cameras", c.num_cameras},
        {"ring_radius_mm", c.ring_radius_mm},
        {"camera_height_mm", c.camera_height_mm},
        {"focal_px", c.focal_px},
        {"image_width", c.image_width},
        {"image_height", c.image_height},
        {"heatmap_width", c.heatmap_width},
        {"heatmap_height", c.heatmap_height},
        {"blob_sigma_bins", c.blob_sigma_bins},
        {"blob_radius_sigmas", c.blob_radius_sigmas},
        {"num_frames", c.num_frames},
        {"root_jitter_mm", c.root_jitter_mm},
        {"max_extent_mm", c.max_extent_mm},
        {"skeleton", skeleton_to_json(c.skeleton)},
        {"motions", motions},
        {"corruption",
         {{"drop_prob", c.corruption.drop_prob},
          {"shift_prob", c.corruption.shift_prob},
          {"shift_sigma_bins", c.corruption.shift_sigma_bins},
          {"clutter_prob", c.corruption.clutter_prob},
          {"clutter_amplitude", c.corruption.clutter_amplitude}}},
        {"imu_noise_deg", c.imu_noise_deg},
        {"seed", c.seed},
    };
}

template <typename T>
void read_opt(const json &j, const char *key, T &out) {
    if (j.contains(key) && !j.at(key).is_null()) {
        out = j.at(key).get<T>();
    }
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

SceneConfig scene_config_from_json(const json &j) {
    reject_unknown(j,
                   {"num_cameras", "ring_radius_mm", "camera_height_mm", "focal_px", "image_width", "image_height",
                    "heatmap_width", "heatmap_height", "blob_sigma_bins", "blob_radius_sigmas", "num_frames",
                    "root_jitter_mm", "max_extent_mm", "imu_noise_deg", "seed", "skeleton", "motions", "corruption"},
                   "scene config");
    SceneConfig c;
    read_opt(j, "num_cameras", c.num_cameras);
    read_opt(j, "ring_radius_mm", c.ring_radius_mm);
    read_opt(j, "camera_height_mm", c.camera_height_mm);
    read_opt(j, "focal_px", c.focal_px);
    read_opt(j, "image_width", c.image_width);
    read_opt(j, "image_height", c.image_height);
    read_opt(j, "heatmap_width", c.heatmap_width);
    read_opt(j, "heatmap_height", c.heatmap_height);
    read_opt(j, "blob_sigma_bins", c.blob_sigma_bins);
    read_opt(j, "blob_radius_sigmas", c.blob_radius_sigmas);
    read_opt(j, "num_frames", c.num_frames);
    read_opt(j, "root_jitter_mm", c.root_jitter_mm);
    read_opt(j, "max_extent_mm", c.max_extent_mm);
    read_opt(j, "imu_noise_deg", c.imu_noise_deg);
    read_opt(j, "seed", c.seed);
    if (j.contains("skeleton")) {
        c.skeleton = skeleton_from_json(j.at("skeleton"));
        c.motions = default_motions_or_empty(c.skeleton);
    }
    if (j.contains("motions")) {
        c.motions.clear();
        for (const json &m : j.at("motions")) {
            LimbMotion lm;
            lm.rest_direction = vec3_from(m.at("rest_direction"));
            const auto swing = m.at("swing_deg").get<std::vector<double>>();
            const auto abduct = m.at("abduct_deg").get<std::vector<double>>();
            if (swing.size() != 2 || abduct.size() != 2) {
                fail(ErrorCode::ParseError, "motion ranges must be [min, max] pairs");
            }
            lm.swing_min = swing[0];
            lm.swing_max = swing[1];
            lm.abduct_min = abduct[0];
            lm.abduct_max = abduct[1];
            c.motions.push_back(lm);
        }
    }
    if (j.contains("corruption")) {
        const json &k = j.at("corruption");
        reject_unknown(k, {"drop_prob", "shift_prob", "shift_sigma_bins", "clutter_prob", "clutter_amplitude"},
                       "corruption config");
        read_opt(k, "drop_prob", c.corruption.drop_prob);
        read_opt(k, "shift_prob", c.corruption.shift_prob);
        read_opt(k, "shift_sigma_bins", c.corruption.shift_sigma_bins);
        read_opt(k, "clutter_prob", c.corruption.clutter_prob);
        read_opt(k, "clutter_amplitude", c.corruption.clutter_amplitude);
    }
    c.validate();
    return c;
}

json pose3_to_json(const Pose3D &p) {
    json a = json::array();
    for (const Vec3 &v : p.joints) {
        a.push_back(to_json(v));
    }
    return a;
}

Pose3D pose3_from_json(const json &j) {
    Pose3D p;
    for (const json &v : j) {
        p.joints.push_back(vec3_from(v));
    }
    return p;
}

template <typename F>
auto parse_guard(F &&f) {
    try {
        return f();
    } catch (const json::exception &e) {
        fail(ErrorCode::ParseError, e.what());
    }
}

} // namespace

HeatmapSet Scene::heatmap_set(const SceneFrame &frame) const {
    HeatmapSet set;
    set.num_views = num_views();
    set.num_joints = skeleton.num_joints();
    set.width = heatmap_width;
    set.height = heatmap_height;
    set.scale = heatmap_scale;
    set.cameras = cameras;
    set.maps = frame.heatmaps;
    return set;
}

void Scene::validate() const {
    skeleton.validate();
    if (cameras.empty()) {
        fail(ErrorCode::InvalidConfig, "scene has no cameras");
    }
    for (const CameraParams &c : cameras) {
        c.validate();
    }
    if (heatmap_width <= 0 || heatmap_height <= 0 || !(heatmap_scale > 0.0)) {
        fail(ErrorCode::InvalidConfig, "scene heatmap geometry must be positive");
    }
    const size_t slots = cameras.size() * static_cast<size_t>(skeleton.num_joints());
    for (const SceneFrame &f : frames) {
        if (f.heatmaps.size() != slots) {
            fail(ErrorCode::ShapeMismatch, "frame " + std::to_string(f.id) + " is missing heatmaps");
        }
        for (const Heatmap &h : f.heatmaps) {
            if (h.width != heatmap_width || h.height != heatmap_height ||
                h.values.size() != static_cast<size_t>(h.width) * h.height) {
                fail(ErrorCode::ShapeMismatch, "frame " + std::to_string(f.id) + " has a mis-sized heatmap");
            }
        }
        if (f.truth) {
            if (f.truth->pose.size() != skeleton.num_joints() || f.truth->views2d.size() != cameras.size() ||
                f.truth->head_length_px.size() != cameras.size()) {
                fail(ErrorCode::ShapeMismatch, "frame " + std::to_string(f.id) + " has inconsistent ground truth");
            }
        }
    }
}

FrameTruth truth_from_pose(const Pose3D &pose, const Skeleton &skeleton,
                           const std::vector<CameraParams> &cameras) {
    FrameTruth t;
    t.pose = pose;
    const Vec3 &top = pose.joints[static_cast<size_t>(skeleton.head_top)];
    const Vec3 &base = pose.joints[static_cast<size_t>(skeleton.head_base)];
    for (const CameraParams &cam : cameras) {
        Pose2D view;
        for (const Vec3 &p : pose.joints) {
            view.joints.push_back(project(p, cam));
            view.confidence.push_back(1.0);
        }
        t.views2d.push_back(std::move(view));
        t.head_length_px.push_back((project(top, cam) - project(base, cam)).norm());
    }
    return t;
}

Scene build_scene(const SceneConfig &cfg) {
    const SyntheticScene synth = generate_scene(cfg);
    Scene scene;
    scene.skeleton = cfg.skeleton;
    scene.cameras = synth.cameras;
    scene.heatmap_width = cfg.heatmap_width;
    scene.heatmap_height = cfg.heatmap_height;
    scene.heatmap_scale = cfg.heatmap_scale();
    scene.room_diagonal_mm = cfg.room_diagonal_mm();
    scene.generator = cfg;
    for (int i = 0; i < static_cast<int>(synth.frames.size()); ++i) {
        const GroundTruthFrame &gt = synth.frames[static_cast<size_t>(i)];
        ObservedFrame obs = observe_frame(cfg, synth.cameras, gt, i);
        SceneFrame f;
        f.id = i;
        f.truth = FrameTruth{gt.pose, gt.views, gt.head_length_px};
        f.imus = std::move(obs.imus);
        f.heatmaps = std::move(obs.heatmaps.maps);
        scene.frames.push_back(std::move(f));
    }
    return scene;
}

std::string scene_to_string(const Scene &scene) {
    json cams = json::array();
    for (const CameraParams &c : scene.cameras) {
        cams.push_back(camera_to_json(c));
    }
    json frames = json::array();
    const int M = scene.skeleton.num_joints();
    for (const SceneFrame &f : scene.frames) {
        json imu = json::array();
        for (const Vec3 &o : f.imus.orientations) {
            imu.push_back(to_json(o));
        }
        json maps = json::array();
        for (int v = 0; v < scene.num_views(); ++v) {
            json per_joint = json::array();
            for (int j = 0; j < M; ++j) {
                const Heatmap &h = f.heatmaps[static_cast<size_t>(v * M + j)];
                json values = json::array();
                for (float x : h.values) {
                    if (x == 0.0f) {
                        values.push_back(0); // keeps the mostly-empty maps compact
                    } else {
                        values.push_back(static_cast<double>(x));
                    }
                }
                per_joint.push_back(std::move(values));
            }
            maps.push_back(std::move(per_joint));
        }
        json jf{{"id", f.id}, {"imu", imu}, {"heatmaps", std::move(maps)}};
        if (f.imus.timestamp) {
            jf["timestamp"] = *f.imus.timestamp;
        }
        if (f.truth) {
            json views = json::array();
            for (const Pose2D &p : f.truth->views2d) {
                json pts = json::array();
                for (const Vec2 &y : p.joints) {
                    pts.push_back(to_json(y));
                }
                views.push_back(pts);
            }
            jf["ground_truth"] = {{"pose", pose3_to_json(f.truth->pose)},
                                  {"views", views},
                                  {"head_length_px", f.truth->head_length_px}};
        }
        frames.push_back(std::move(jf));
    }
    json root{{"format", "orpose-scene"},
              {"version", kSceneFormatVersion},
              {"skeleton", skeleton_to_json(scene.skeleton)},
              {"cameras", cams},
              {"heatmap",
               {{"width", scene.heatmap_width},
                {"height", scene.heatmap_height},
                {"scale", scene.heatmap_scale},
                {"convention", "image = (heatmap + 0.5) * scale"}}},
              {"room_diagonal_mm", scene.room_diagonal_mm},
              {"frames", std::move(frames)}};
    if (scene.generator) {
        root["generator"] = scene_config_to_json(*scene.generator);
    }
    return root.dump();
}

LoadedScene scene_from_string(const std::string &text) {
    return parse_guard([&] {
        const json root = json::parse(text);
        if (root.value("format", std::string()) != "orpose-scene") {
            fail(ErrorCode::ParseError, "not an orpose scene file");
        }
        if (root.at("version").get<int>() != kSceneFormatVersion) {
            fail(ErrorCode::ParseError, "unsupported scene version " + root.at("version").dump());
        }
        LoadedScene out;
        Scene &s = out.scene;
        s.skeleton = skeleton_from_json(root.at("skeleton"));
        for (const json &c : root.at("cameras")) {
            s.cameras.push_back(camera_from_json(c));
        }
        const json &hm = root.at("heatmap");
        s.heatmap_width = hm.at("width").get<int>();
        s.heatmap_height = hm.at("height").get<int>();
        s.heatmap_scale = hm.at("scale").get<double>();
        s.room_diagonal_mm = root.at("room_diagonal_mm").get<double>();
        if (root.contains("generator")) {
            s.generator = scene_config_from_json(root.at("generator"));
        }
        const int M = s.skeleton.num_joints();
        const int V = s.num_views();
        for (const json &jf : root.at("frames")) {
            SceneFrame f;
            f.id = jf.at("id").get<int>();
            for (const json &o : jf.at("imu")) {
                Vec3 v = vec3_from(o);
                const double n = v.norm();
                if (std::abs(n - 1.0) > 1e-6) {
                    if (!(n > 0.0)) {
                        fail(ErrorCode::ParseError, "zero IMU orientation in frame " + std::to_string(f.id));
                    }
                    out.warnings.push_back("frame " + std::to_string(f.id) + ": IMU vector renormalised");
                    v /= n;
                }
                f.imus.orientations.push_back(v);
            }
            if (jf.contains("timestamp")) {
                f.imus.timestamp = jf.at("timestamp").get<double>();
            }
            const json &maps = jf.at("heatmaps");
            if (!maps.is_array() || static_cast<int>(maps.size()) != V) {
                fail(ErrorCode::ParseError, "frame " + std::to_string(f.id) + ": one heatmap list per view required");
            }
            for (const json &per_joint : maps) {
                if (!per_joint.is_array() || static_cast<int>(per_joint.size()) != M) {
                    fail(ErrorCode::ParseError, "frame " + std::to_string(f.id) + ": one heatmap per joint required");
                }
                for (const json &values : per_joint) {
                    if (values.size() != static_cast<size_t>(s.heatmap_width) * s.heatmap_height) {
                        fail(ErrorCode::ParseError,
                             "frame " + std::to_string(f.id) + ": heatmap length differs from width x height");
                    }
                    Heatmap h(s.heatmap_width, s.heatmap_height);
                    for (size_t i = 0; i < values.size(); ++i) {
                        const double x = values[i].get<double>();
                        if (!std::isfinite(x)) {
                            fail(ErrorCode::ParseError, "non-finite heatmap value");
                        }
                        h.values[i] = static_cast<float>(x);
                    }
                    f.heatmaps.push_back(std::move(h));
                }
            }
            if (jf.contains("ground_truth")) {
                const json &g = jf.at("ground_truth");
                const Pose3D pose = pose3_from_json(g.at("pose"));
                if (pose.size() != M) {
                    fail(ErrorCode::ParseError, "ground-truth pose joint count differs from skeleton");
                }
                FrameTruth t;
                if (g.contains("views") && g.contains("head_length_px")) {
                    t.pose = pose;
                    for (const json &view : g.at("views")) {
                        Pose2D p;
                        for (const json &y : view) {
                            p.joints.push_back(vec2_from(y));
                            p.confidence.push_back(1.0);
                        }
                        t.views2d.push_back(std::move(p));
                    }
                    t.head_length_px = g.at("head_length_px").get<std::vector<double>>();
                } else {
                    t = truth_from_pose(pose, s.skeleton, s.cameras);
                }
                f.truth = std::move(t);
            }
            s.frames.push_back(std::move(f));
        }
        s.validate();
        for (const SceneFrame &f : s.frames) {
            check_imu_frame(f.imus, s.skeleton);
        }
        return out;
    });
}

std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        fail(ErrorCode::IoError, "failed writing '" + path.string() + "'");
    }
}

void save_scene(const Scene &scene, const std::filesystem::path &path) {
    write_text_file(path, scene_to_string(scene));
}

LoadedScene load_scene(const std::filesystem::path &path) { return scene_from_string(read_text_file(path)); }

std::string scene_config_to_string(const SceneConfig &cfg) { return scene_config_to_json(cfg).dump(2); }

SceneConfig scene_config_from_string(const std::string &text) {
    return parse_guard([&] { return scene_config_from_json(json::parse(text)); });
}

SceneConfig load_scene_config(const std::filesystem::path &path) {
    return scene_config_from_string(read_text_file(path));
}

} // namespace orpose

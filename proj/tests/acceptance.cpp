// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "orpose/commands.hpp"
#include "orpose/fusion.hpp"
#include "orpose/metrics.hpp"
#include "orpose/pipeline.hpp"
#include "orpose/psm.hpp"
#include "orpose/scene_io.hpp"
#include "orpose/synth.hpp"
#include "support.hpp"

using namespace orpose;
using namespace testing;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string &what, const std::string &measured) {
    std::printf("criterion %d: %s  %s [%s]\n", id, pass ? "PASS" : "FAIL", what.c_str(), measured.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. tree DP against exhaustive search

void criterion_dp() {
    const auto t0 = Clock::now();
    Rng rng(1001);
    const int px = 256;
    const std::vector<CameraParams> cams{
        look_at(Vec3(3000, 0, 500), Vec3::Zero(), Vec3::UnitZ(), 300, px, px),
        look_at(Vec3(0, 3000, 300), Vec3::Zero(), Vec3::UnitZ(), 300, px, px)};
    int mismatches = 0, infeasible = 0;
    for (int trial = 0; trial < 500; ++trial) {
        Skeleton s = chain_skeleton(3);
        for (Limb &l : s.limbs) {
            l.length_mm = uniform(rng, 150.0, 700.0);
        }
        PsmConfig cfg;
        cfg.n_bins = 4;
        cfg.edge_mm = 1000.0;
        cfg.epsilon_mm = uniform(rng, 60.0, 300.0);
        cfg.orientation_weight = uniform(rng, 0.0, 3.0);
        const ImuFrame imus{{random_unit(rng), random_unit(rng)}, {}};

        HeatmapSet set(cams, 3, 16, 16, 16.0);
        for (Heatmap &h : set.maps) {
            for (float &v : h.values) {
                v = static_cast<float>(uniform(rng, 0.05, 1.0));
            }
        }
        const StateGrid g = build_state_grid(Vec3(uniform(rng, -100, 100), uniform(rng, -100, 100), 0), 1000.0, 4);
        const auto unary = unary_potentials(g, set, cfg.floor);
        const PotentialTable pot = make_potentials(unary, s, &imus, cfg);
        const auto centers = g.centers();
        const int S = g.size();

        // Independent objective: pairwise tables, then all S^3 assignments.
        auto pair = [&](int e, int a, int b) {
            const Vec3 d = centers[static_cast<size_t>(a)] - centers[static_cast<size_t>(b)];
            const double len = d.norm();
            if (std::abs(len - s.limbs[static_cast<size_t>(e)].length_mm) > cfg.epsilon_mm) {
                return -std::numeric_limits<double>::infinity();
            }
            if (len <= 1e-9) {
                return -cfg.orientation_weight;
            }
            return cfg.orientation_weight * d.dot(imus.orientations[static_cast<size_t>(e)]) / len;
        };
        double best = -std::numeric_limits<double>::infinity();
        std::vector<int> arg{-1, -1, -1};
        for (int a = 0; a < S; ++a) {
            for (int b = 0; b < S; ++b) {
                const double p1 = pair(0, b, a);
                if (!std::isfinite(p1)) {
                    continue;
                }
                for (int c = 0; c < S; ++c) {
                    const double p2 = pair(1, c, b);
                    if (!std::isfinite(p2)) {
                        continue;
                    }
                    const double total = unary[0][static_cast<size_t>(a)] + unary[1][static_cast<size_t>(b)] +
                                         unary[2][static_cast<size_t>(c)] + p1 + p2;
                    if (total > best) {
                        best = total;
                        arg = {a, b, c};
                    }
                }
            }
        }
        try {
            const MapEstimate est = infer_map(g, pot, s, cfg);
            if (!std::isfinite(best) || est.states != arg || std::abs(est.log_score - best) > 1e-9) {
                ++mismatches;
            }
        } catch (const Error &e) {
            if (std::isfinite(best) || e.code() != ErrorCode::Infeasible) {
                ++mismatches;
            }
            ++infeasible;
        }
    }
    const double secs = since(t0);
    report(1, mismatches == 0 && secs < 60.0, "tree DP equals exhaustive search, 500 instances, < 60 s",
           fmt("%d mismatches, %d infeasible instances, %.1f s", mismatches, infeasible, secs));
}

// ---------------------------------------------------------------------------
// 2. geometric round trips

void criterion_geometry() {
    const auto t0 = Clock::now();
    Rng rng(1002);
    double worst_ray = 0.0, worst_tri = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<CameraParams> cams;
        const int n = 2 + trial % 3;
        for (int k = 0; k < n; ++k) {
            cams.push_back(random_camera(rng));
        }
        const Vec3 p(uniform(rng, -800, 800), uniform(rng, -800, 800), uniform(rng, -800, 800));
        std::vector<Observation> obs;
        for (const CameraParams &c : cams) {
            const Vec2 y = project(p, c);
            const Ray r = back_project(y, c);
            const double depth = (p - r.origin).dot(r.direction);
            worst_ray = std::max(worst_ray, (r.origin + depth * r.direction - p).norm());
            obs.push_back({y, &c});
        }
        worst_tri = std::max(worst_tri, (triangulate(obs) - p).norm());
    }
    const double secs = since(t0);
    const bool pass = worst_ray < 1e-6 && worst_tri < 1e-6 && secs < 1.0;
    report(2, pass, "project/back_project/triangulate round trips < 1e-6 mm on 1000 configs, < 1 s",
           fmt("ray %.3g mm, triangulation %.3g mm, %.3f s", worst_ray, worst_tri, secs));
}

// ---------------------------------------------------------------------------
// 3. fusion identities

HeatmapSet random_set(Rng &rng, int views, int joints) {
    std::vector<CameraParams> cams;
    for (int v = 0; v < views; ++v) {
        cams.push_back(random_camera(rng));
    }
    HeatmapSet set(cams, joints, 16, 16, 16.0);
    for (Heatmap &h : set.maps) {
        h = random_map(rng, 16, 16, 0.6);
    }
    return set;
}

void criterion_fusion() {
    const auto t0 = Clock::now();
    Rng rng(1003);
    const Skeleton skel = default_skeleton();
    std::set<int> imu_joints;
    for (int e : skel.imu_limbs) {
        imu_joints.insert(skel.limbs[static_cast<size_t>(e)].m);
        imu_joints.insert(skel.limbs[static_cast<size_t>(e)].n);
    }
    int identity_bad = 0, single_view_bad = 0, pass_through_bad = 0, order_bad = 0;
    for (int trial = 0; trial < 3; ++trial) {
        const HeatmapSet set = random_set(rng, 4, skel.num_joints());
        ImuFrame imus;
        for (size_t i = 0; i < skel.imu_limbs.size(); ++i) {
            imus.orientations.push_back(random_unit(rng));
        }
        FusionConfig cfg;
        cfg.depth_far_mm = 12000.0;

        FusionConfig one = cfg;
        one.lambda = 1.0;
        identity_bad += fuse_cross_view(set, skel, imus, one).maps == set.maps ? 0 : 1;
        identity_bad += fuse_same_view(set, skel, imus, one).maps == set.maps ? 0 : 1;

        const HeatmapSet fused = fuse_cross_view(set, skel, imus, cfg);
        for (int v = 0; v < set.num_views; ++v) {
            for (int j = 0; j < set.num_joints; ++j) {
                if (!imu_joints.contains(j)) {
                    pass_through_bad += fused.at(v, j) == set.at(v, j) ? 0 : 1;
                }
            }
        }

        // Reverse the IMU limb list together with its orientations.
        Skeleton reversed = skel;
        std::reverse(reversed.imu_limbs.begin(), reversed.imu_limbs.end());
        ImuFrame reversed_imus = imus;
        std::reverse(reversed_imus.orientations.begin(), reversed_imus.orientations.end());
        order_bad += fuse_cross_view(set, reversed, reversed_imus, cfg).maps == fused.maps ? 0 : 1;

        HeatmapSet single(std::vector<CameraParams>{set.cameras[0]}, skel.num_joints(), 16, 16, 16.0);
        for (int j = 0; j < skel.num_joints(); ++j) {
            single.at(0, j) = set.at(0, j);
        }
        single_view_bad +=
            fuse_cross_view(single, skel, imus, cfg).maps == fuse_same_view(single, skel, imus, cfg).maps ? 0 : 1;
    }
    const double secs = since(t0);
    const bool pass = identity_bad + single_view_bad + pass_through_bad + order_bad == 0 && secs < 5.0;
    report(3, pass, "fusion identities exact on randomized sets, < 5 s",
           fmt("lambda=1 %d, V=1 %d, pass-through %d, order %d mismatches, %.2f s", identity_bad, single_view_bad,
               pass_through_bad, order_bad, secs));
}

// ---------------------------------------------------------------------------
// 4. noise-free discretization bound

void criterion_noise_free() {
    SceneConfig sc;
    sc.num_frames = 100;
    const SyntheticScene scene = generate_scene(sc);
    PsmConfig cfg; // N=16, edge 2000, T=4
    double worst = 0.0, sum = 0.0, slowest = 0.0;
    long over = 0, count = 0;
    for (const GroundTruthFrame &gt : scene.frames) {
        const HeatmapSet set = render_heatmaps(gt, scene.cameras, sc);
        const auto t0 = Clock::now();
        const Pose3D est =
            recursive_refine(set, sc.skeleton, &gt.imus, cfg, estimate_root(set, sc.skeleton.root, cfg.floor));
        slowest = std::max(slowest, since(t0));
        for (int j = 0; j < sc.skeleton.num_joints(); ++j) {
            const double e = (est.joints[static_cast<size_t>(j)] - gt.pose.joints[static_cast<size_t>(j)]).norm();
            worst = std::max(worst, e);
            sum += e;
            over += e > 7.0 ? 1 : 0;
            ++count;
        }
    }
    report(4, worst <= 7.0 && slowest <= 10.0,
           "noise-free ORPSM per-joint error <= 7 mm on 100 frames, <= 10 s/frame",
           fmt("worst %.2f mm, mean %.2f mm, %ld/%ld joints over 7 mm, slowest frame %.2f s", worst,
               sum / static_cast<double>(count), over, count, slowest));
}

// ---------------------------------------------------------------------------
// 5-7 share the corrupted scenes

struct SeedRun {
    Scene scene;
    RunResults results;
};

std::vector<SeedRun> corrupted_runs() {
    std::vector<SeedRun> out;
    for (std::uint64_t seed : {1, 2, 3}) {
        SceneConfig sc;
        sc.num_frames = 200;
        sc.seed = seed;
        sc.corruption.drop_prob = 0.3;
        sc.imu_noise_deg = 2.0;
        SeedRun r{build_scene(sc), {}};
        const auto t0 = Clock::now();
        r.results = run_scene(r.scene, RunConfig{});
        std::printf("  seed %llu: 200 frames, 4 methods, %.0f s\n", static_cast<unsigned long long>(seed), since(t0));
        std::fflush(stdout);
        out.push_back(std::move(r));
    }
    return out;
}

void criterion_occlusion_2d(const SeedRun &run) {
    const auto reports = evaluate(run.results, run.scene);
    auto find = [&](const char *name) -> const EvalReport & {
        return *std::find_if(reports.begin(), reports.end(), [&](const EvalReport &r) { return r.method == name; });
    };
    const double orn = find("orn-psm").group("mean_six").pckh[0];
    const double sn = find("sn-psm").group("mean_six").pckh[0];
    const double orn_other = find("orn-psm").group("others").pckh[0];
    const double sn_other = find("sn-psm").group("others").pckh[0];

    // Non-IMU joints must decode to the same peaks with and without fusion.
    const Skeleton &skel = run.scene.skeleton;
    std::set<int> imu_joints;
    for (int e : skel.imu_limbs) {
        imu_joints.insert(skel.limbs[static_cast<size_t>(e)].m);
        imu_joints.insert(skel.limbs[static_cast<size_t>(e)].n);
    }
    long differing = 0;
    const auto &a = run.results.find(Quadrant::OrnPsm)->frames;
    const auto &b = run.results.find(Quadrant::SnPsm)->frames;
    for (size_t f = 0; f < a.size(); ++f) {
        for (size_t v = 0; v < a[f].views2d.size(); ++v) {
            for (int j = 0; j < skel.num_joints(); ++j) {
                if (!imu_joints.contains(j) &&
                    a[f].views2d[v].joints[static_cast<size_t>(j)] != b[f].views2d[v].joints[static_cast<size_t>(j)]) {
                    ++differing;
                }
            }
        }
    }
    const bool pass = orn - sn >= 5.0 && differing == 0 && orn_other == sn_other;
    report(5, pass, "fused PCKh@1/2 on IMU-linked joints >= unfused + 5 points, non-IMU joints unchanged",
           fmt("IMU-linked %.2f%% vs %.2f%% (+%.2f), others %.2f%% vs %.2f%%, %ld differing non-IMU peaks", orn, sn,
               orn - sn, orn_other, sn_other, differing));
}

void criterion_quadrants(const std::vector<SeedRun> &runs) {
    std::array<double, 4> sum{};
    long frames = 0, skipped = 0;
    for (const SeedRun &r : runs) {
        const size_t n = r.scene.frames.size();
        for (size_t f = 0; f < n; ++f) {
            bool all_ok = true;
            for (const MethodRun &m : r.results.runs) {
                all_ok = all_ok && m.frames[f].pose.has_value();
            }
            if (!all_ok) {
                ++skipped;
                continue;
            }
            for (const MethodRun &m : r.results.runs) {
                sum[static_cast<size_t>(m.quadrant)] += mpjpe(*m.frames[f].pose, r.scene.frames[f].truth->pose);
            }
            ++frames;
        }
    }
    std::array<double, 4> mean{};
    for (size_t q = 0; q < 4; ++q) {
        mean[q] = sum[q] / static_cast<double>(frames);
    }
    const double sn_psm = mean[0], orn_psm = mean[1], sn_orpsm = mean[2], orn_orpsm = mean[3];
    const double lo = std::min(orn_psm, sn_orpsm), hi = std::max(orn_psm, sn_orpsm);
    const bool pass = orn_orpsm <= lo && hi <= sn_psm && orn_orpsm <= 0.9 * sn_psm && frames >= 200;
    report(6, pass, "MPJPE ORN+ORPSM <= min(ORN+PSM, SN+ORPSM) <= max <= SN+PSM, >= 10% gain, 3 seeds x 200 frames",
           fmt("SN+PSM %.2f, ORN+PSM %.2f, SN+ORPSM %.2f, ORN+ORPSM %.2f mm (-%.1f%%) over %ld frames, %ld skipped",
               sn_psm, orn_psm, sn_orpsm, orn_orpsm, 100.0 * (1.0 - orn_orpsm / sn_psm), frames, skipped));
}

void criterion_procrustes(const std::vector<SeedRun> &runs) {
    long frames = 0, worse = 0;
    double worst_increase = 0.0;
    for (const SeedRun &r : runs) {
        for (const MethodRun &m : r.results.runs) {
            for (size_t f = 0; f < m.frames.size(); ++f) {
                if (!m.frames[f].pose) {
                    continue;
                }
                const Pose3D &gt = r.scene.frames[f].truth->pose;
                const double raw = mpjpe(*m.frames[f].pose, gt);
                const double aligned = mpjpe(procrustes_align(*m.frames[f].pose, gt), gt);
                ++frames;
                if (aligned > raw + 1e-9) {
                    ++worse;
                    worst_increase = std::max(worst_increase, aligned - raw);
                }
            }
        }
    }
    Rng rng(1007);
    double worst_recovery = 0.0;
    SceneConfig sc;
    const auto cams = make_camera_ring(sc);
    for (int trial = 0; trial < 200; ++trial) {
        const Pose3D gt = generate_frame(sc, cams, trial).pose;
        const Mat3 R = Eigen::AngleAxisd(uniform(rng, 0, M_PI), random_unit(rng)).toRotationMatrix();
        const double s = uniform(rng, 0.5, 2.0);
        const Vec3 t(uniform(rng, -3e3, 3e3), uniform(rng, -3e3, 3e3), uniform(rng, -3e3, 3e3));
        Pose3D pred = gt;
        for (Vec3 &p : pred.joints) {
            p = s * R * p + t;
        }
        worst_recovery = std::max(worst_recovery, mpjpe(procrustes_align(pred, gt), gt));
    }
    report(7, worse == 0 && worst_recovery < 1e-9,
           "aligned MPJPE <= raw MPJPE on every frame, exact similarity recovery to 1e-9",
           fmt("%ld/%ld estimated frames with aligned > raw (worst +%.2f mm), recovery error %.2g mm", worse, frames,
               worst_increase, worst_recovery));
}

// ---------------------------------------------------------------------------
// 8. determinism through the run command

void criterion_determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "orpose_acceptance";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    SceneConfig sc;
    sc.num_frames = 8;
    sc.corruption.drop_prob = 0.3;
    sc.imu_noise_deg = 2.0;
    save_scene(build_scene(sc), dir / "scene.json");
    std::vector<std::string> outputs;
    for (int parallel : {1, 4, 1, 4}) {
        const auto out = dir / ("r" + std::to_string(outputs.size()) + ".json");
        cmd_run({dir / "scene.json", std::nullopt, out, std::nullopt, parallel});
        outputs.push_back(read_text_file(out));
    }
    const bool same = std::all_of(outputs.begin(), outputs.end(), [&](const std::string &s) { return s == outputs[0]; });
    std::filesystem::remove_all(dir);
    report(8, same, "run output bit-identical across parallelism {1, 4} and repeated runs",
           fmt("%zu runs, %zu bytes each, %s", outputs.size(), outputs[0].size(), same ? "identical" : "differ"));
}

// ---------------------------------------------------------------------------
// 9. throughput

void criterion_throughput() {
    SceneConfig sc;
    sc.num_frames = 20;
    sc.corruption.drop_prob = 0.3;
    sc.imu_noise_deg = 2.0;
    const Scene scene = build_scene(sc);
    RunConfig cfg;
    cfg.parallel = 1;
    cfg.quadrants = {Quadrant::OrnOrpsm};
    const RunResults res = run_scene(scene, cfg);
    double slowest = 0.0, total = 0.0;
    for (const FrameResult &f : res.runs[0].frames) {
        slowest = std::max(slowest, f.seconds);
        total += f.seconds;
    }
    report(9, slowest <= 5.0, "full ORN+ORPSM (N=16, T=4, V=4) <= 5 s/frame on one core",
           fmt("mean %.3f s/frame, slowest %.3f s over %zu frames", total / static_cast<double>(res.runs[0].frames.size()),
               slowest, res.runs[0].frames.size()));
}

} // namespace

int main() {
    criterion_dp();
    criterion_geometry();
    criterion_fusion();
    criterion_noise_free();
    const std::vector<SeedRun> runs = corrupted_runs();
    criterion_occlusion_2d(runs.front());
    criterion_quadrants(runs);
    criterion_procrustes(runs);
    criterion_determinism();
    criterion_throughput();
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

#include <benchmark/benchmark.h>

#include "orpose/fusion.hpp"
#include "orpose/psm.hpp"
#include "orpose/synth.hpp"

using namespace orpose;

namespace {

struct Fixture {
    SceneConfig cfg;
    std::vector<CameraParams> cameras;
    GroundTruthFrame truth;
    ObservedFrame observed;

    Fixture() {
        cfg.corruption.drop_prob = 0.3;
        cfg.imu_noise_deg = 2.0;
        cameras = make_camera_ring(cfg);
        truth = generate_frame(cfg, cameras, 0);
        observed = observe_frame(cfg, cameras, truth, 0);
    }
};

const Fixture &fixture() {
    static const Fixture f;
    return f;
}

FusionConfig fusion_config() {
    FusionConfig c;
    c.depth_far_mm = fixture().cfg.room_diagonal_mm();
    return c;
}

void BM_FuseCrossView(benchmark::State &state) {
    const Fixture &f = fixture();
    FusionConfig c = fusion_config();
    c.k_samples = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(fuse_cross_view(f.observed.heatmaps, f.cfg.skeleton, f.observed.imus, c));
    }
}
BENCHMARK(BM_FuseCrossView)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FuseSameView(benchmark::State &state) {
    const Fixture &f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(fuse_same_view(f.observed.heatmaps, f.cfg.skeleton, f.observed.imus, fusion_config()));
    }
}
BENCHMARK(BM_FuseSameView)->Unit(benchmark::kMillisecond);

void BM_UnaryPotentials(benchmark::State &state) {
    const Fixture &f = fixture();
    const StateGrid g = build_state_grid(Vec3::Zero(), 2000.0, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(unary_potentials(g, f.observed.heatmaps, 1e-6));
    }
}
BENCHMARK(BM_UnaryPotentials)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_InferMap(benchmark::State &state) {
    const Fixture &f = fixture();
    PsmConfig cfg;
    cfg.n_bins = static_cast<int>(state.range(0));
    const StateGrid g = build_state_grid(f.truth.pose.joints[0], cfg.edge_mm, cfg.n_bins);
    const PotentialTable pot =
        make_potentials(unary_potentials(g, f.observed.heatmaps, cfg.floor), f.cfg.skeleton, &f.observed.imus, cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(infer_map(g, pot, f.cfg.skeleton, cfg));
    }
}
BENCHMARK(BM_InferMap)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_RecursiveRefine(benchmark::State &state) {
    const Fixture &f = fixture();
    PsmConfig cfg;
    cfg.iterations = static_cast<int>(state.range(0));
    const Vec3 root = estimate_root(f.observed.heatmaps, f.cfg.skeleton.root, cfg.floor);
    for (auto _ : state) {
        benchmark::DoNotOptimize(recursive_refine(f.observed.heatmaps, f.cfg.skeleton, &f.observed.imus, cfg, root));
    }
}
BENCHMARK(BM_RecursiveRefine)->Arg(0)->Arg(4)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();

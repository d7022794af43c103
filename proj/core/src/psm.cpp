#include "orpose/psm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "orpose/error.hpp"

namespace orpose {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kCoincident = 1e-9;

// Pairwise log-potential of a limb given J_m - J_n.
inline double pair_term(const Vec3 &diff, const LimbPotential &lp, const OrientationPotential *op) {
    const double dist = diff.norm();
    if (!(std::abs(dist - lp.prior_mm) <= lp.epsilon_mm)) {
        return kNegInf;
    }
    if (op == nullptr) {
        return 0.0;
    }
    if (dist <= kCoincident) {
        return -op->weight;
    }
    return op->weight * diff.dot(op->orientation) / dist;
}

void check_potentials(const PotentialTable &pot, const Skeleton &skeleton) {
    if (static_cast<int>(pot.unary.size()) != skeleton.num_joints()) {
        fail(ErrorCode::ShapeMismatch, "potential table joint count differs from skeleton");
    }
    if (static_cast<int>(pot.limbs.size()) != skeleton.num_limbs()) {
        fail(ErrorCode::ShapeMismatch, "potential table limb count differs from skeleton");
    }
    for (const auto &op : pot.orientations) {
        if (op.limb < 0 || op.limb >= skeleton.num_limbs()) {
            fail(ErrorCode::ShapeMismatch, "orientation potential references unknown limb");
        }
    }
}

std::vector<const OrientationPotential *> orientation_lookup(const PotentialTable &pot,
                                                             const Skeleton &skeleton,
                                                             const PsmConfig &cfg) {
    std::vector<const OrientationPotential *> by_limb(static_cast<size_t>(skeleton.num_limbs()), nullptr);
    if (cfg.use_orientation) {
        for (const auto &op : pot.orientations) {
            by_limb[static_cast<size_t>(op.limb)] = &op;
        }
    }
    return by_limb;
}

// Shared tree DP. `message` fills, for each parent state, the best child
// state (ties -> smallest index) and its value given the child's belief.
template <typename MessageFn>
MapEstimate run_tree_dp(const PotentialTable &pot, const Skeleton &skeleton,
                        const std::vector<int> &state_counts, MessageFn &&message) {
    const TreeOrder tree = tree_order(skeleton);
    const int M = skeleton.num_joints();

    std::vector<std::vector<double>> belief(static_cast<size_t>(M));
    for (int j = 0; j < M; ++j) {
        if (static_cast<int>(pot.unary[static_cast<size_t>(j)].size()) != state_counts[static_cast<size_t>(j)]) {
            fail(ErrorCode::ShapeMismatch, "unary size differs from state space size");
        }
        belief[static_cast<size_t>(j)] = pot.unary[static_cast<size_t>(j)];
    }
    // best child state for every parent state, per child joint
    std::vector<std::vector<int>> backptr(static_cast<size_t>(M));

    std::vector<double> msg;
    for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
        const int c = *it;
        const int p = tree.parent[static_cast<size_t>(c)];
        if (p < 0) {
            continue;
        }
        const int e = tree.parent_limb[static_cast<size_t>(c)];
        auto &bp = backptr[static_cast<size_t>(c)];
        msg.assign(static_cast<size_t>(state_counts[static_cast<size_t>(p)]), kNegInf);
        bp.assign(msg.size(), -1);
        message(p, c, e, belief[static_cast<size_t>(c)], msg, bp);
        auto &bparent = belief[static_cast<size_t>(p)];
        for (size_t x = 0; x < msg.size(); ++x) {
            bparent[x] += msg[x];
        }
    }

    const auto &broot = belief[static_cast<size_t>(skeleton.root)];
    const auto best = std::max_element(broot.begin(), broot.end());
    if (best == broot.end() || !(*best > kNegInf)) {
        fail(ErrorCode::Infeasible, "no limb-length feasible assignment in the state space");
    }

    MapEstimate out;
    out.log_score = *best;
    out.states.assign(static_cast<size_t>(M), -1);
    out.states[static_cast<size_t>(skeleton.root)] = static_cast<int>(best - broot.begin());
    for (int j : tree.order) {
        const int p = tree.parent[static_cast<size_t>(j)];
        if (p >= 0) {
            out.states[static_cast<size_t>(j)] =
                backptr[static_cast<size_t>(j)][static_cast<size_t>(out.states[static_cast<size_t>(p)])];
        }
    }
    return out;
}

} // namespace

Vec3 StateGrid::bin_center(int index) const {
    const int iz = index % bins;
    const int iy = (index / bins) % bins;
    const int ix = index / (bins * bins);
    const double w = bin_width();
    const double half = 0.5 * edge_mm;
    return center + Vec3(-half + (ix + 0.5) * w, -half + (iy + 0.5) * w, -half + (iz + 0.5) * w);
}

std::vector<Vec3> StateGrid::centers() const {
    std::vector<Vec3> out(static_cast<size_t>(size()));
    for (int i = 0; i < size(); ++i) {
        out[static_cast<size_t>(i)] = bin_center(i);
    }
    return out;
}

StateGrid build_state_grid(const Vec3 &root, double edge_mm, int n_bins) {
    if (!(edge_mm > 0.0) || !std::isfinite(edge_mm) || n_bins < 2 || !root.allFinite()) {
        fail(ErrorCode::InvalidConfig, "state grid needs edge > 0, N >= 2 and a finite centre");
    }
    return StateGrid{root, edge_mm, n_bins};
}

void PsmConfig::validate() const {
    if (n_bins < 2 || !(edge_mm > 0.0) || !(epsilon_mm > 0.0) || iterations < 0 || !(floor > 0.0) ||
        !(orientation_weight >= 0.0)) {
        fail(ErrorCode::InvalidConfig,
             "PSM config needs N >= 2, edge > 0, epsilon > 0, T >= 0, floor > 0, w >= 0");
    }
}

std::vector<std::vector<double>> unary_potentials(const StateGrid &grid, const HeatmapSet &set,
                                                  double floor, Interpolation interp) {
    const int S = grid.size();
    const auto centers = grid.centers();
    std::vector<std::vector<double>> acc(static_cast<size_t>(set.num_joints),
                                         std::vector<double>(static_cast<size_t>(S), 0.0));
    for (int v = 0; v < set.num_views; ++v) {
        const CameraParams &cam = set.cameras[static_cast<size_t>(v)];
        for (int x = 0; x < S; ++x) {
            const auto img = try_project(centers[static_cast<size_t>(x)], cam);
            if (!img) {
                continue;
            }
            const Vec2 h = set.to_heatmap(*img);
            if (!set.at(v, 0).contains(h)) {
                continue;
            }
            for (int j = 0; j < set.num_joints; ++j) {
                acc[static_cast<size_t>(j)][static_cast<size_t>(x)] += set.at(v, j).sample(h, interp);
            }
        }
    }
    for (auto &scores : acc) {
        for (double &s : scores) {
            s = std::log(std::max(floor, s / set.num_views));
        }
    }
    return acc;
}

std::vector<double> unary_potential(const StateGrid &grid, const HeatmapSet &set, int joint,
                                    double floor, Interpolation interp) {
    const int S = grid.size();
    std::vector<double> acc(static_cast<size_t>(S), 0.0);
    for (int v = 0; v < set.num_views; ++v) {
        const CameraParams &cam = set.cameras[static_cast<size_t>(v)];
        const Heatmap &h = set.at(v, joint);
        for (int x = 0; x < S; ++x) {
            const auto img = try_project(grid.bin_center(x), cam);
            if (!img) {
                continue;
            }
            const Vec2 p = set.to_heatmap(*img);
            if (h.contains(p)) {
                acc[static_cast<size_t>(x)] += h.sample(p, interp);
            }
        }
    }
    for (double &s : acc) {
        s = std::log(std::max(floor, s / set.num_views));
    }
    return acc;
}

PotentialTable make_potentials(std::vector<std::vector<double>> unary, const Skeleton &skeleton,
                               const ImuFrame *imus, const PsmConfig &cfg) {
    PotentialTable pot;
    pot.unary = std::move(unary);
    for (const Limb &limb : skeleton.limbs) {
        pot.limbs.push_back({limb.length_mm, cfg.epsilon_mm});
    }
    if (cfg.use_orientation && imus != nullptr) {
        check_imu_frame(*imus, skeleton);
        for (size_t i = 0; i < skeleton.imu_limbs.size(); ++i) {
            pot.orientations.push_back({skeleton.imu_limbs[i], imus->orientations[i], cfg.orientation_weight});
        }
    }
    return pot;
}

bool limb_length_feasible(const Vec3 &a, const Vec3 &b, double prior_mm, double epsilon_mm) {
    return std::abs((a - b).norm() - prior_mm) <= epsilon_mm;
}

double orientation_score(const Vec3 &a, const Vec3 &b, const Vec3 &o) {
    const Vec3 d = a - b;
    const double n = d.norm();
    if (n <= kCoincident) {
        fail(ErrorCode::DegenerateLimb, "orientation of a zero-length limb");
    }
    return d.dot(o) / n;
}

MapEstimate infer_map(const StateGrid &grid, const PotentialTable &potentials,
                      const Skeleton &skeleton, const PsmConfig &cfg) {
    check_potentials(potentials, skeleton);
    const auto orient = orientation_lookup(potentials, skeleton, cfg);
    const int N = grid.bins;
    const double w = grid.bin_width();
    const std::vector<int> counts(static_cast<size_t>(skeleton.num_joints()), grid.size());

    // On a shared lattice the pairwise term depends only on the integer
    // offset between the two bins, so it is tabulated once per limb.
    struct Offset {
        int di, dj, dk, linear;
        double score;
    };
    std::vector<Offset> offsets;

    auto message = [&](int p, int c, int e, const std::vector<double> &child_belief,
                       std::vector<double> &msg, std::vector<int> &bp) {
        const Limb &limb = skeleton.limbs[static_cast<size_t>(e)];
        const LimbPotential &lp = potentials.limbs[static_cast<size_t>(e)];
        const OrientationPotential *op = orient[static_cast<size_t>(e)];
        const double sign = (limb.m == c) ? 1.0 : -1.0; // J_m - J_n = sign * (child - parent)
        (void)p;
        offsets.clear();
        for (int di = -(N - 1); di < N; ++di) {
            for (int dj = -(N - 1); dj < N; ++dj) {
                for (int dk = -(N - 1); dk < N; ++dk) {
                    const Vec3 diff = sign * w * Vec3(di, dj, dk);
                    const double s = pair_term(diff, lp, op);
                    if (s > kNegInf) {
                        offsets.push_back({di, dj, dk, (di * N + dj) * N + dk, s});
                    }
                }
            }
        }
        // Ascending linear offset == ascending child index for a fixed parent.
        std::stable_sort(offsets.begin(), offsets.end(),
                         [](const Offset &a, const Offset &b) { return a.linear < b.linear; });

        for (int ix = 0; ix < N; ++ix) {
            for (int iy = 0; iy < N; ++iy) {
                for (int iz = 0; iz < N; ++iz) {
                    const int xp = (ix * N + iy) * N + iz;
                    double best = kNegInf;
                    int arg = -1;
                    for (const Offset &o : offsets) {
                        const int cx = ix + o.di, cy = iy + o.dj, cz = iz + o.dk;
                        if (cx < 0 || cx >= N || cy < 0 || cy >= N || cz < 0 || cz >= N) {
                            continue;
                        }
                        const int xc = xp + o.linear;
                        const double val = child_belief[static_cast<size_t>(xc)] + o.score;
                        if (val > best) {
                            best = val;
                            arg = xc;
                        }
                    }
                    msg[static_cast<size_t>(xp)] = best;
                    bp[static_cast<size_t>(xp)] = arg;
                }
            }
        }
    };

    MapEstimate out = run_tree_dp(potentials, skeleton, counts, message);
    out.pose.joints.resize(static_cast<size_t>(skeleton.num_joints()));
    for (int j = 0; j < skeleton.num_joints(); ++j) {
        out.pose.joints[static_cast<size_t>(j)] = grid.bin_center(out.states[static_cast<size_t>(j)]);
    }
    return out;
}

MapEstimate infer_map(std::span<const StateGrid> grids, const PotentialTable &potentials,
                      const Skeleton &skeleton, const PsmConfig &cfg) {
    check_potentials(potentials, skeleton);
    if (static_cast<int>(grids.size()) != skeleton.num_joints()) {
        fail(ErrorCode::ShapeMismatch, "one state grid per joint is required");
    }
    const auto orient = orientation_lookup(potentials, skeleton, cfg);
    std::vector<int> counts;
    std::vector<std::vector<Vec3>> centers;
    for (const StateGrid &g : grids) {
        counts.push_back(g.size());
        centers.push_back(g.centers());
    }

    auto message = [&](int p, int c, int e, const std::vector<double> &child_belief,
                       std::vector<double> &msg, std::vector<int> &bp) {
        const Limb &limb = skeleton.limbs[static_cast<size_t>(e)];
        const LimbPotential &lp = potentials.limbs[static_cast<size_t>(e)];
        const OrientationPotential *op = orient[static_cast<size_t>(e)];
        const auto &pc = centers[static_cast<size_t>(p)];
        const auto &cc = centers[static_cast<size_t>(c)];
        const bool child_is_m = limb.m == c;
        for (size_t xp = 0; xp < pc.size(); ++xp) {
            double best = kNegInf;
            int arg = -1;
            for (size_t xc = 0; xc < cc.size(); ++xc) {
                const Vec3 diff = child_is_m ? Vec3(cc[xc] - pc[xp]) : Vec3(pc[xp] - cc[xc]);
                const double val = child_belief[xc] + pair_term(diff, lp, op);
                if (val > best) {
                    best = val;
                    arg = static_cast<int>(xc);
                }
            }
            msg[xp] = best;
            bp[xp] = arg;
        }
    };

    MapEstimate out = run_tree_dp(potentials, skeleton, counts, message);
    out.pose.joints.resize(static_cast<size_t>(skeleton.num_joints()));
    for (int j = 0; j < skeleton.num_joints(); ++j) {
        out.pose.joints[static_cast<size_t>(j)] =
            centers[static_cast<size_t>(j)][static_cast<size_t>(out.states[static_cast<size_t>(j)])];
    }
    return out;
}

double log_score(std::span<const Vec3> positions, std::span<const int> states,
                 const PotentialTable &potentials, const Skeleton &skeleton, const PsmConfig &cfg) {
    check_potentials(potentials, skeleton);
    const auto orient = orientation_lookup(potentials, skeleton, cfg);
    double score = 0.0;
    for (int j = 0; j < skeleton.num_joints(); ++j) {
        score += potentials.unary[static_cast<size_t>(j)][static_cast<size_t>(states[static_cast<size_t>(j)])];
    }
    for (int e = 0; e < skeleton.num_limbs(); ++e) {
        const Limb &l = skeleton.limbs[static_cast<size_t>(e)];
        score += pair_term(positions[static_cast<size_t>(l.m)] - positions[static_cast<size_t>(l.n)],
                           potentials.limbs[static_cast<size_t>(e)], orient[static_cast<size_t>(e)]);
    }
    return score;
}

RefineTrace recursive_refine_trace(const HeatmapSet &set, const Skeleton &skeleton,
                                   const ImuFrame *imus, const PsmConfig &cfg, const Vec3 &root) {
    cfg.validate();
    if (set.num_joints != skeleton.num_joints()) {
        fail(ErrorCode::ConfigMismatch, "heatmap joint count differs from skeleton");
    }
    RefineTrace trace;
    const StateGrid grid = build_state_grid(root, cfg.edge_mm, cfg.n_bins);
    MapEstimate est = infer_map(grid, make_potentials(unary_potentials(grid, set, cfg.floor, cfg.interpolation),
                                                      skeleton, imus, cfg),
                                skeleton, cfg);
    trace.levels.push_back(est.pose);

    double width = grid.bin_width();
    std::vector<StateGrid> grids(static_cast<size_t>(skeleton.num_joints()));
    std::vector<std::vector<double>> unary(static_cast<size_t>(skeleton.num_joints()));
    for (int t = 0; t < cfg.iterations; ++t) {
        for (int j = 0; j < skeleton.num_joints(); ++j) {
            grids[static_cast<size_t>(j)] = build_state_grid(est.pose.joints[static_cast<size_t>(j)], width, 2);
            unary[static_cast<size_t>(j)] =
                unary_potential(grids[static_cast<size_t>(j)], set, j, cfg.floor, cfg.interpolation);
        }
        est = infer_map(std::span<const StateGrid>(grids), make_potentials(unary, skeleton, imus, cfg),
                        skeleton, cfg);
        trace.levels.push_back(est.pose);
        width *= 0.5;
    }
    trace.final_bin_width_mm = width;
    return trace;
}

Pose3D recursive_refine(const HeatmapSet &set, const Skeleton &skeleton, const ImuFrame *imus,
                        const PsmConfig &cfg, const Vec3 &root) {
    return recursive_refine_trace(set, skeleton, imus, cfg, root).levels.back();
}

Vec3 estimate_root(const HeatmapSet &set, int root_joint, double floor) {
    if (root_joint < 0 || root_joint >= set.num_joints) {
        fail(ErrorCode::InvalidConfig, "root joint index out of range");
    }
    std::vector<Observation> obs;
    for (int v = 0; v < set.num_views; ++v) {
        const Peak peak = argmax_2d(set.at(v, root_joint));
        if (peak.confidence > floor) {
            obs.push_back({set.to_image(peak.location), &set.cameras[static_cast<size_t>(v)]});
        }
    }
    if (obs.size() < 2) {
        fail(ErrorCode::InsufficientViews, "root joint decodable in fewer than two views");
    }
    return triangulate(obs);
}

} // namespace orpose

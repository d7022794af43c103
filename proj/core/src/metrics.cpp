#include "orpose/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "orpose/error.hpp"

namespace orpose {

namespace {

constexpr std::array<JointGroup, 6> kSix{JointGroup::Hip,      JointGroup::Knee,  JointGroup::Ankle,
                                         JointGroup::Shoulder, JointGroup::Elbow, JointGroup::Wrist};

struct Accumulator {
    std::array<long, 3> hits{};
    long pckh_count = 0;
    double err = 0.0;
    double aligned = 0.0;
    long joint_count = 0;

    void add(const Accumulator &o) {
        for (size_t i = 0; i < 3; ++i) {
            hits[i] += o.hits[i];
        }
        pckh_count += o.pckh_count;
        err += o.err;
        aligned += o.aligned;
        joint_count += o.joint_count;
    }

    GroupStats stats(std::string name) const {
        GroupStats g;
        g.group = std::move(name);
        for (size_t i = 0; i < 3; ++i) {
            g.pckh[i] = pckh_count > 0 ? 100.0 * static_cast<double>(hits[i]) / static_cast<double>(pckh_count) : 0.0;
        }
        g.pckh_count = pckh_count;
        g.mpjpe_mm = joint_count > 0 ? err / static_cast<double>(joint_count) : 0.0;
        g.aligned_mpjpe_mm = joint_count > 0 ? aligned / static_cast<double>(joint_count) : 0.0;
        g.joint_count = joint_count;
        return g;
    }
};

} // namespace

std::vector<bool> pckh(const Pose2D &pred, const Pose2D &gt, double head_length_px, double t) {
    if (pred.size() != gt.size()) {
        fail(ErrorCode::ShapeMismatch, "PCKh poses differ in joint count");
    }
    if (!(head_length_px > 0.0) || !(t > 0.0)) {
        fail(ErrorCode::InvalidConfig, "PCKh needs positive head length and threshold");
    }
    std::vector<bool> out(static_cast<size_t>(pred.size()));
    const double thr = t * head_length_px;
    for (int j = 0; j < pred.size(); ++j) {
        out[static_cast<size_t>(j)] = (pred.joints[static_cast<size_t>(j)] - gt.joints[static_cast<size_t>(j)]).norm() < thr;
    }
    return out;
}

double mpjpe(const Pose3D &pred, const Pose3D &gt) {
    if (pred.size() != gt.size() || pred.size() == 0) {
        fail(ErrorCode::ShapeMismatch, "MPJPE poses differ in joint count");
    }
    double sum = 0.0;
    for (int j = 0; j < pred.size(); ++j) {
        sum += (pred.joints[static_cast<size_t>(j)] - gt.joints[static_cast<size_t>(j)]).norm();
    }
    return sum / pred.size();
}

Similarity procrustes_transform(const Pose3D &pred, const Pose3D &gt) {
    if (pred.size() != gt.size()) {
        fail(ErrorCode::ShapeMismatch, "Procrustes poses differ in joint count");
    }
    const int n = pred.size();
    if (n < 3) {
        fail(ErrorCode::DegenerateConfiguration, "Procrustes needs at least three joints");
    }
    Vec3 mu_p = Vec3::Zero(), mu_g = Vec3::Zero();
    for (int j = 0; j < n; ++j) {
        mu_p += pred.joints[static_cast<size_t>(j)];
        mu_g += gt.joints[static_cast<size_t>(j)];
    }
    mu_p /= n;
    mu_g /= n;

    Mat3 cov = Mat3::Zero();
    double var_p = 0.0;
    for (int j = 0; j < n; ++j) {
        const Vec3 p = pred.joints[static_cast<size_t>(j)] - mu_p;
        const Vec3 g = gt.joints[static_cast<size_t>(j)] - mu_g;
        cov += g * p.transpose();
        var_p += p.squaredNorm();
    }
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (!(var_p > 0.0) || sv(1) <= 1e-12 * sv(0)) {
        fail(ErrorCode::DegenerateConfiguration, "Procrustes on collinear joints");
    }
    Mat3 D = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
        D(2, 2) = -1.0;
    }
    Similarity s;
    s.rotation = svd.matrixU() * D * svd.matrixV().transpose();
    s.scale = (sv.asDiagonal() * D).trace() / var_p;
    s.translation = mu_g - s.scale * s.rotation * mu_p;
    return s;
}

Pose3D procrustes_align(const Pose3D &pred, const Pose3D &gt) {
    const Similarity s = procrustes_transform(pred, gt);
    Pose3D out = pred;
    for (Vec3 &p : out.joints) {
        p = s.apply(p);
    }
    return out;
}

const GroupStats &EvalReport::group(const std::string &name) const {
    for (const auto &g : groups) {
        if (g.group == name) {
            return g;
        }
    }
    fail(ErrorCode::InvalidConfig, "report has no group '" + name + "'");
}

EvalReport assemble_report(const std::string &method, const std::vector<FramePrediction> &preds,
                           const std::vector<FrameTruth> &truth, const Skeleton &skeleton) {
    if (preds.empty()) {
        fail(ErrorCode::EmptyInput, "no frames to evaluate");
    }
    if (preds.size() != truth.size()) {
        fail(ErrorCode::MismatchedInputs, "prediction and ground-truth frame counts differ");
    }
    const int M = skeleton.num_joints();
    std::vector<Accumulator> per_joint(static_cast<size_t>(M));

    EvalReport report;
    report.method = method;
    report.frames = static_cast<long>(preds.size());
    for (size_t f = 0; f < preds.size(); ++f) {
        const FramePrediction &pred = preds[f];
        const FrameTruth &gt = truth[f];
        if (gt.pose.size() != M) {
            fail(ErrorCode::MismatchedInputs, "ground-truth pose joint count differs from skeleton");
        }
        if (!pred.views2d.empty()) {
            if (pred.views2d.size() != gt.views2d.size() || gt.head_length_px.size() != gt.views2d.size()) {
                fail(ErrorCode::MismatchedInputs, "2D view counts differ between prediction and truth");
            }
            for (size_t v = 0; v < gt.views2d.size(); ++v) {
                for (size_t t = 0; t < kPckhThresholds.size(); ++t) {
                    const auto ok = pckh(pred.views2d[v], gt.views2d[v], gt.head_length_px[v], kPckhThresholds[t]);
                    for (int j = 0; j < M; ++j) {
                        per_joint[static_cast<size_t>(j)].hits[t] += ok[static_cast<size_t>(j)] ? 1 : 0;
                    }
                }
                for (int j = 0; j < M; ++j) {
                    ++per_joint[static_cast<size_t>(j)].pckh_count;
                }
            }
        }
        if (!pred.pose) {
            ++report.failed_frames;
            report.frame_mpjpe.push_back(std::numeric_limits<double>::quiet_NaN());
            report.frame_aligned_mpjpe.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        if (pred.pose->size() != M) {
            fail(ErrorCode::MismatchedInputs, "predicted pose joint count differs from skeleton");
        }
        const Pose3D aligned = procrustes_align(*pred.pose, gt.pose);
        for (int j = 0; j < M; ++j) {
            auto &acc = per_joint[static_cast<size_t>(j)];
            acc.err += (pred.pose->joints[static_cast<size_t>(j)] - gt.pose.joints[static_cast<size_t>(j)]).norm();
            acc.aligned += (aligned.joints[static_cast<size_t>(j)] - gt.pose.joints[static_cast<size_t>(j)]).norm();
            ++acc.joint_count;
        }
        report.frame_mpjpe.push_back(mpjpe(*pred.pose, gt.pose));
        report.frame_aligned_mpjpe.push_back(mpjpe(aligned, gt.pose));
    }

    Accumulator six, others, all;
    for (JointGroup g : kSix) {
        Accumulator acc;
        for (int j = 0; j < M; ++j) {
            if (skeleton.joint_groups[static_cast<size_t>(j)] == g) {
                acc.add(per_joint[static_cast<size_t>(j)]);
            }
        }
        six.add(acc);
        report.groups.push_back(acc.stats(std::string(to_string(g))));
    }
    for (int j = 0; j < M; ++j) {
        if (skeleton.joint_groups[static_cast<size_t>(j)] == JointGroup::Other) {
            others.add(per_joint[static_cast<size_t>(j)]);
        }
        all.add(per_joint[static_cast<size_t>(j)]);
    }
    report.groups.push_back(six.stats("mean_six"));
    report.groups.push_back(others.stats("others"));
    report.groups.push_back(all.stats("mean_all"));
    return report;
}

} // namespace orpose

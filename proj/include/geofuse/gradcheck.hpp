#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "geofuse/pipeline.hpp"

// Central finite differences against the analytic backward pass on a tiny
// end-to-end pipeline (12 points, 8x8 image). Error metric per coordinate:
// |analytic - fd| / max(1, |analytic|, |fd|).

namespace geofuse {

inline constexpr double kGradTolF32 = 1e-4;
inline constexpr double kGradTolF64 = 1e-6;

struct GradTensorReport {
    std::string name;
    double max_rel = 0.0;
};

struct GradReport {
    std::vector<GradTensorReport> tensors;
    double max_rel = 0.0;
};

inline ModelConfig tiny_model_config(MergeStage stage, MergeMode mode) {
    ModelConfig mc;
    mc.net.local_widths = {8, 8};
    mc.net.global_widths = {8, 16};
    mc.net.head_widths = {12, 8};
    mc.net.out_channels = 7;
    mc.merge.feat_channels = 7;
    mc.merge.out_channels = 12;
    mc.seg.in_channels = 12;
    mc.seg.c1 = 6;
    mc.seg.c2 = 6;
    mc.seg.c3 = 6;
    mc.seg.num_classes = 3;
    mc.merge_stage = stage;
    mc.merge_mode = mode;
    return mc;
}

/// Deterministic small view: points spread over the frustum, one forced pixel
/// collision, one point marked invisible, a sprinkle of ignored labels.
template <typename T>
ViewBatch<T> tiny_view(int n_points, int size, int num_classes, std::uint64_t seed) {
    CameraRig rig;
    rig.width = size;
    rig.height = size;
    rig.fx = rig.fy = size;
    rig.cx = rig.cy = size / 2.0;

    Rng rng(seed);
    ViewBatch<T> view;
    view.width = size;
    view.height = size;
    view.enc_points = Tensor<T>({n_points, 3});

    std::vector<Eigen::Vector3d> pts(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        double z = rng.uniform(0.5, 2.0);
        double u = rng.uniform(0.5, size - 0.5);
        double v = rng.uniform(0.5, size - 0.5);
        pts[static_cast<std::size_t>(i)] = {(u - rig.cx) * z / rig.fx, (v - rig.cy) * z / rig.fy,
                                            z};
    }
    if (n_points >= 2) pts[1] = pts[0] * 1.5;  // same ray, deeper: a pixel collision

    for (int i = 0; i < n_points; ++i) {
        const Eigen::Vector3d& p = pts[static_cast<std::size_t>(i)];
        view.enc_points.at2(i, 0) = static_cast<T>(p.x());
        view.enc_points.at2(i, 1) = static_cast<T>(p.y());
        view.enc_points.at2(i, 2) = static_cast<T>(p.z());
        view.projections.push_back(project(rig, p));
    }
    view.scatter_visible.assign(static_cast<std::size_t>(n_points), 1);
    if (n_points >= 4) view.scatter_visible[3] = 0;

    view.rgb = Tensor<T>({3, size, size});
    for (auto& v : view.rgb.v) v = static_cast<T>(rng.uniform());
    view.labels = ImageU8(size, size, 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            view.labels.at(y, x, 0) =
                static_cast<std::uint8_t>(rng.uniform_int(0, num_classes - 1));
    for (int k = 0; k < size; ++k)  // a few ignored pixels
        view.labels.at(static_cast<int>(rng.bounded(static_cast<std::uint64_t>(size))),
                       static_cast<int>(rng.bounded(static_cast<std::uint64_t>(size))), 0) = 255;
    return view;
}

inline double gradcheck_loss(Model<double>& model, const ViewBatch<double>& view) {
    PipelineCache<double> cache;
    model_forward(model, view, true, cache);
    return model_loss(model, view, cache).loss;
}

/// Analytic gradients at precision T versus central differences of the same
/// function. The difference quotient is evaluated through the float64
/// pipeline at T's exact parameter point: train-mode batch norm on a tiny
/// batch puts enough curvature in the loss that a float32-evaluated quotient
/// has an error floor above any useful tolerance, while the function itself
/// is identical (float values embed exactly into double).
template <typename T>
GradReport gradcheck_pipeline(MergeStage stage, MergeMode mode, double h, int probes_per_tensor,
                              std::uint64_t seed) {
    Model<T> model;
    model.cfg = tiny_model_config(stage, mode);
    model.init(seed);
    ViewBatch<T> view = tiny_view<T>(12, 8, model.cfg.seg.num_classes, seed ^ 0x5bd1e995ULL);

    PipelineCache<T> cache;
    model_forward(model, view, true, cache);
    model_loss(model, view, cache);
    model_backward(model, view, cache);
    std::map<std::string, Tensor<T>> analytic;
    for (auto& [name, p] : model.params)
        if (p.learnable) analytic.emplace(name, p.grad);
    model.params.zero_grads();

    // float64 twin holding T's parameter and input values exactly
    Model<double> ref;
    ref.cfg = model.cfg;
    ref.init(seed);
    for (auto& [name, p] : ref.params) {
        const Tensor<T>& src = model.params.at(name).value;
        for (std::size_t i = 0; i < p.value.v.size(); ++i)
            p.value.v[i] = static_cast<double>(src.v[i]);
    }
    ViewBatch<double> ref_view;
    ref_view.width = view.width;
    ref_view.height = view.height;
    ref_view.labels = view.labels;
    ref_view.scatter_visible = view.scatter_visible;
    ref_view.projections = view.projections;
    ref_view.enc_points = Tensor<double>(view.enc_points.shape);
    for (std::size_t i = 0; i < view.enc_points.v.size(); ++i)
        ref_view.enc_points.v[i] = static_cast<double>(view.enc_points.v[i]);
    ref_view.rgb = Tensor<double>(view.rgb.shape);
    for (std::size_t i = 0; i < view.rgb.v.size(); ++i)
        ref_view.rgb.v[i] = static_cast<double>(view.rgb.v[i]);

    GradReport report;
    Rng pick(seed ^ 0xda3e39cb94b95bdbULL);
    for (auto& [name, p] : ref.params) {
        if (!p.learnable) continue;
        GradTensorReport tr{name, 0.0};
        const std::size_t m = p.value.v.size();
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(probes_per_tensor), m);
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t ci = (k == m) ? j : pick.bounded(m);
            const double orig = p.value.v[ci];
            p.value.v[ci] = orig + h;
            double lp = gradcheck_loss(ref, ref_view);
            p.value.v[ci] = orig - h;
            double lm = gradcheck_loss(ref, ref_view);
            p.value.v[ci] = orig;
            double fd = (lp - lm) / (2.0 * h);
            double a = static_cast<double>(analytic.at(name).v[ci]);
            double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
            tr.max_rel = std::max(tr.max_rel, rel);
        }
        report.max_rel = std::max(report.max_rel, tr.max_rel);
        report.tensors.push_back(std::move(tr));
    }
    return report;
}

/// Runs both precisions over the early/local, early/padding, and late
/// wirings; prints a summary (per-tensor when verbose). Returns 0 iff the
/// float32 worst error < kGradTolF32 and the float64 worst < kGradTolF64.
int gradcheck_main(std::ostream& out, bool verbose = false);

}  // namespace geofuse

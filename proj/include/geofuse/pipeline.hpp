#pragma once

#include <cstdint>
#include <vector>

#include "geofuse/fusion.hpp"
#include "geofuse/geometry.hpp"
#include "geofuse/lpointnet.hpp"
#include "geofuse/seghead.hpp"
#include "geofuse/visibility.hpp"

// Full model: lpointnet -> scatter -> merge -> seg head -> logits, with the
// ablation wirings (early/late merge, local/padding, fov/visible cloud,
// camera/world coordinates) and the RGB-only baseline.

namespace geofuse {

enum class MergeStage { early, late };
enum class CloudScope { visible, fov };
enum class CoordSystem { camera, world };

struct ModelConfig {
    NetConfig net;
    MergeConfig merge;
    SegConfig seg;
    MergeStage merge_stage = MergeStage::early;
    MergeMode merge_mode = MergeMode::local;
    bool rgb_only = false;  // baseline: W_rgb path + seg head, no 3D branch
    int ignore_id = 255;

    void validate() const {
        net.validate();
        merge.validate();
        seg.validate();
        if (net.out_channels != merge.feat_channels)
            throw DataError("config: lpointnet out_channels must equal merge feat_channels");
        if (merge.out_channels != seg.in_channels)
            throw DataError("config: merge out_channels must equal seg head in_channels");
    }
};

template <typename T>
struct Model {
    ModelConfig cfg;
    ParamStore<T> params;

    /// Registers and initializes every parameter group in one fixed draw
    /// order (p3d, merge, seg) so a seed fully determines the weights.
    void init(std::uint64_t seed) {
        if (cfg.rgb_only) {
            // the baseline is exactly the unoccupied-pixel path of local merge
            cfg.merge_stage = MergeStage::early;
            cfg.merge_mode = MergeMode::local;
        }
        cfg.validate();
        params = ParamStore<T>{};
        Rng rng(seed);
        lpn_init_params(params, cfg.net, rng);
        merge_init_params(params, cfg.merge, rng);
        seg_init_params(params, cfg.seg, rng);
    }
};

/// One preprocessed view: the encoder's input rows, which of them scatter,
/// their pixel projections, and the 2D data.
template <typename T>
struct ViewBatch {
    Tensor<T> enc_points;  // [N, in_channels]; N may be 0 (empty frustum)
    std::vector<std::uint8_t> scatter_visible;
    std::vector<PixelProjection> projections;
    Tensor<T> rgb;  // [3, H, W]
    ImageU8 labels{1, 1, 1};
    int width = 0, height = 0;
};

struct ViewFlags {
    CoordSystem coords = CoordSystem::camera;
    CloudScope scope = CloudScope::visible;
    double theta_deg = 2.0;
    int vis_cell_size = 8;
    bool append_rgb = false;
};

/// Frustum-select, visibility-filter, and package one view for the model.
/// cloud_scope picks the encoder rows (fov: every frustum point with the
/// visibility mask attached; visible: the visible subset only); scattering
/// always uses visible points. world coordinates are re-centered at the
/// full-scene centroid.
template <typename T>
ViewBatch<T> build_view(const PointCloud& cloud_world, const CameraRig& rig, const ImageF& rgb,
                        const ImageU8& labels, const ViewFlags& flags) {
    if (rgb.width != rig.width || rgb.height != rig.height || rgb.channels != 3)
        throw DataError("build_view: rgb image does not match camera size");
    if (labels.width != rig.width || labels.height != rig.height || labels.channels != 1)
        throw DataError("build_view: label image does not match camera size");

    ViewBatch<T> view;
    view.width = rig.width;
    view.height = rig.height;
    view.labels = labels;
    view.rgb = Tensor<T>({3, rig.height, rig.width});
    std::size_t plane = static_cast<std::size_t>(rig.width) * rig.height;
    for (int y = 0; y < rig.height; ++y)
        for (int x = 0; x < rig.width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                view.rgb.v[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * rig.width + x] =
                    static_cast<T>(rgb.at(y, x, ch));

    PointCloud cam = to_camera_frame(cloud_world, rig);
    std::vector<std::uint32_t> frustum = frustum_select(cam, rig);
    PointCloud fr_cam = gather(cam, frustum);
    VisibilityConfig vcfg;
    vcfg.theta_deg = flags.theta_deg;
    vcfg.cell_size = flags.vis_cell_size;
    VisibilityResult vis = visible_mask(fr_cam, rig, vcfg);

    std::vector<std::uint32_t> enc_rows;  // indices into the frustum subset
    enc_rows.reserve(frustum.size());
    if (flags.scope == CloudScope::fov) {
        for (std::uint32_t j = 0; j < frustum.size(); ++j) enc_rows.push_back(j);
        view.scatter_visible = vis.visible;
    } else {
        for (std::uint32_t j = 0; j < frustum.size(); ++j)
            if (vis.visible[j]) enc_rows.push_back(j);
        view.scatter_visible.assign(enc_rows.size(), 1);
    }

    bool use_color = flags.append_rgb && cloud_world.has_colors();
    int cols = use_color ? 6 : 3;
    int n = static_cast<int>(enc_rows.size());
    view.enc_points = Tensor<T>({n, cols});
    view.projections.reserve(enc_rows.size());

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    if (flags.coords == CoordSystem::world && cloud_world.size() > 0) {
        for (const auto& p : cloud_world.positions) centroid += p;
        centroid /= static_cast<double>(cloud_world.size());
    }

    for (int i = 0; i < n; ++i) {
        std::uint32_t j = enc_rows[static_cast<std::size_t>(i)];
        std::uint32_t world_idx = frustum[j];
        Eigen::Vector3d p = flags.coords == CoordSystem::camera
                                ? fr_cam.positions[j]
                                : cloud_world.positions[world_idx] - centroid;
        view.enc_points.at2(i, 0) = static_cast<T>(p.x());
        view.enc_points.at2(i, 1) = static_cast<T>(p.y());
        view.enc_points.at2(i, 2) = static_cast<T>(p.z());
        if (use_color) {
            const Eigen::Vector3f& c = cloud_world.colors[world_idx];
            view.enc_points.at2(i, 3) = static_cast<T>(c.x());
            view.enc_points.at2(i, 4) = static_cast<T>(c.y());
            view.enc_points.at2(i, 5) = static_cast<T>(c.z());
        }
        view.projections.push_back(project(rig, fr_cam.positions[j]));
    }
    return view;
}

template <typename T>
struct PipelineCache {
    bool used_points = false;
    Tensor<T> features;  // [N, feat_channels]
    LpnCache<T> lpn;
    SparseFeatureMap<T> map;
    SparseFeatureMap<T> stem_map;  // empty map driving the RGB stem in late mode
    MergeCache<T> merge;
    SegCache<T> seg;
    Tensor<T> seg_feat;  // last decoder block
    LateFuseCache<T> late;
    Tensor<T> cls_in;  // classifier input (seg_feat, or the late-fused map)
    Tensor<T> logits;
    Tensor<T> softmax;
    CeResult ce;
};

template <typename T>
SparseFeatureMap<T> empty_feature_map(int channels, int width, int height) {
    SparseFeatureMap<T> map;
    map.width = width;
    map.height = height;
    map.channels = channels;
    map.values = Tensor<T>({channels, height, width});
    std::size_t pixels = static_cast<std::size_t>(width) * height;
    map.occupied.assign(pixels, 0);
    map.source_index.assign(pixels, SparseFeatureMap<T>::kNoSource);
    map.source_depth.assign(pixels, T(0));
    return map;
}

/// Forward to logits. A view with no frustum points (or the rgb_only
/// baseline) runs the RGB path against an empty feature map.
template <typename T>
const Tensor<T>& model_forward(Model<T>& model, const ViewBatch<T>& view, bool train,
                               PipelineCache<T>& cache) {
    const ModelConfig& cfg = model.cfg;
    cache = PipelineCache<T>{};
    cache.used_points = !cfg.rgb_only && view.enc_points.shape[0] > 0;

    if (cache.used_points) {
        cache.features = lpn_forward(view.enc_points, model.params, cfg.net, train, cache.lpn);
        cache.map = scatter_features(cache.features, view.scatter_visible, view.projections,
                                     view.width, view.height);
    } else {
        cache.map = empty_feature_map<T>(cfg.merge.feat_channels, view.width, view.height);
    }

    bool early = cfg.merge_stage == MergeStage::early;
    if (!early)
        cache.stem_map = empty_feature_map<T>(cfg.merge.feat_channels, view.width, view.height);
    Tensor<T> merged = merge_forward(view.rgb, early ? cache.map : cache.stem_map, model.params,
                                     cfg.merge, early ? cfg.merge_mode : MergeMode::local, train,
                                     cache.merge);

    cache.seg_feat = seg_features_forward(merged, model.params, cfg.seg, train, cache.seg);
    if (!early) {
        cache.cls_in = late_fuse_forward(cache.seg_feat, cache.map, model.params, cfg.merge,
                                         cache.late);
    } else {
        cache.cls_in = cache.seg_feat;
    }
    cache.logits = seg_classify(cache.cls_in, model.params);
    return cache.logits;
}

template <typename T>
CeResult model_loss(Model<T>& model, const ViewBatch<T>& view, PipelineCache<T>& cache) {
    cache.ce = cross_entropy_forward(cache.logits, view.labels, model.cfg.ignore_id, cache.softmax);
    return cache.ce;
}

/// Full reverse pass; parameter gradients accumulate in model.params.
template <typename T>
void model_backward(Model<T>& model, const ViewBatch<T>& view, PipelineCache<T>& cache) {
    const ModelConfig& cfg = model.cfg;
    Tensor<T> dlogits;
    cross_entropy_backward(cache.softmax, view.labels, cfg.ignore_id, cache.ce.pixels, dlogits);
    Tensor<T> dcls_in = seg_classify_backward(dlogits, cache.cls_in, model.params);

    Tensor<T> dseg_feat, dmap;
    bool early = cfg.merge_stage == MergeStage::early;
    if (!early) {
        late_fuse_backward(dcls_in, model.params, cfg.merge, cache.late, dseg_feat, dmap);
    } else {
        dseg_feat = dcls_in;
    }

    Tensor<T> dmerged = seg_features_backward(dseg_feat, model.params, cfg.seg, cache.seg);

    Tensor<T> drgb, dmap_early;
    merge_backward(dmerged, view.rgb, early ? cache.map : cache.stem_map, model.params, cfg.merge,
                   cache.merge, drgb, dmap_early);
    if (early) dmap = dmap_early;

    if (cache.used_points) {
        Tensor<T> dfeatures = scatter_backward(cache.map, dmap,
                                               static_cast<std::size_t>(view.enc_points.shape[0]));
        lpn_backward(dfeatures, model.params, cfg.net, cache.lpn);
    }
}

/// Eval-mode prediction (running BN statistics), argmaxed to a label image.
template <typename T>
ImageU8 model_predict(Model<T>& model, const ViewBatch<T>& view) {
    PipelineCache<T> cache;
    model_forward(model, view, false, cache);
    return argmax_labels(cache.logits);
}

}  // namespace geofuse

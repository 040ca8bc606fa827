#pragma once

#include <cstdint>
#include <vector>

#include "geofuse/geometry.hpp"
#include "geofuse/nn.hpp"
#include "geofuse/params.hpp"

// 2D-3D fusion: scatter per-point features into a sparse image, merge with
// RGB into a dense 64-channel map (pixel-wise affine + shared BN + ReLU),
// plus the late-merge 1x1 fuse used after the decoder.

namespace geofuse {

enum class MergeMode { local, padding };

struct MergeConfig {
    int feat_channels = 61;  // scattered point-feature channels
    int out_channels = 64;   // merged map channels

    void validate() const {
        if (feat_channels < 1 || out_channels < 1)
            throw DataError("merge: channel counts must be positive");
    }
};

template <typename T>
struct SparseFeatureMap {
    static constexpr std::uint32_t kNoSource = 0xFFFFFFFFu;

    int width = 0, height = 0, channels = 0;
    Tensor<T> values;                         // [C, H, W], zero where unoccupied
    std::vector<std::uint8_t> occupied;       // H*W
    std::vector<std::uint32_t> source_index;  // H*W, kNoSource where unoccupied
    std::vector<T> source_depth;              // H*W, 0 where unoccupied

    std::size_t occupied_count() const {
        std::size_t n = 0;
        for (std::uint8_t o : occupied) n += o;
        return n;
    }
};

/// Writes each visible in-bounds point's feature vector at its pixel.
/// Collisions keep the smallest depth; equal depths keep the lowest point
/// index. Losing and invisible points leave no trace (and receive no
/// gradient).
template <typename T>
SparseFeatureMap<T> scatter_features(const Tensor<T>& features,
                                     const std::vector<std::uint8_t>& visible,
                                     const std::vector<PixelProjection>& projections, int width,
                                     int height) {
    std::size_t n = projections.size();
    if (features.shape.size() != 2 || static_cast<std::size_t>(features.shape[0]) != n ||
        visible.size() != n)
        throw DataError("scatter: features/visible/projections row counts disagree");
    int c = features.shape[1];
    SparseFeatureMap<T> map;
    map.width = width;
    map.height = height;
    map.channels = c;
    map.values = Tensor<T>({c, height, width});
    std::size_t pixels = static_cast<std::size_t>(width) * height;
    map.occupied.assign(pixels, 0);
    map.source_index.assign(pixels, SparseFeatureMap<T>::kNoSource);
    map.source_depth.assign(pixels, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        if (!visible[i] || !projections[i].in_bounds) continue;
        std::size_t px = static_cast<std::size_t>(projections[i].row) * width + projections[i].col;
        T depth = static_cast<T>(projections[i].depth);
        if (map.occupied[px] && !(depth < map.source_depth[px])) continue;
        map.occupied[px] = 1;
        map.source_index[px] = static_cast<std::uint32_t>(i);
        map.source_depth[px] = depth;
    }
    std::size_t plane = pixels;
    for (std::size_t px = 0; px < pixels; ++px) {
        if (!map.occupied[px]) continue;
        std::uint32_t src = map.source_index[px];
        for (int ch = 0; ch < c; ++ch)
            map.values.v[static_cast<std::size_t>(ch) * plane + px] = features.at2(static_cast<int>(src), ch);
    }
    return map;
}

/// Routes the loss gradient of the map values back to the winning points
/// only; all other rows stay zero.
template <typename T>
Tensor<T> scatter_backward(const SparseFeatureMap<T>& map, const Tensor<T>& dvalues,
                           std::size_t num_points) {
    int c = map.channels;
    Tensor<T> dfeatures({static_cast<int>(num_points), c});
    std::size_t plane = static_cast<std::size_t>(map.width) * map.height;
    for (std::size_t px = 0; px < plane; ++px) {
        if (!map.occupied[px]) continue;
        std::uint32_t src = map.source_index[px];
        for (int ch = 0; ch < c; ++ch)
            dfeatures.at2(static_cast<int>(src), ch) +=
                dvalues.v[static_cast<std::size_t>(ch) * plane + px];
    }
    return dfeatures;
}

// Parameter registration for the merge stage. The late-fuse tensors are
// always allocated so every run shares one checkpoint schema (and one RNG
// draw sequence) regardless of ablation flags.
template <typename T>
void merge_init_params(ParamStore<T>& store, const MergeConfig& cfg, Rng& rng) {
    cfg.validate();
    int in_fused = cfg.feat_channels + 3;
    Param<T>& wf = store.add("merge/W_fused", {cfg.out_channels, in_fused});
    glorot_uniform(wf.value, in_fused, cfg.out_channels, rng);
    store.add("merge/b_fused", {cfg.out_channels});
    Param<T>& wr = store.add("merge/W_rgb", {cfg.out_channels, 3});
    glorot_uniform(wr.value, 3, cfg.out_channels, rng);
    store.add("merge/b_rgb", {cfg.out_channels});
    Param<T>& g = store.add("merge/bn_g", {cfg.out_channels});
    g.value.fill(T(1));
    store.add("merge/bn_b", {cfg.out_channels});
    store.add("merge/bn_rm", {cfg.out_channels}, false);
    Param<T>& rv = store.add("merge/bn_rv", {cfg.out_channels}, false);
    rv.value.fill(T(1));
    int in_late = cfg.out_channels + cfg.feat_channels;
    Param<T>& wl = store.add("merge/late/W", {cfg.out_channels, in_late});
    glorot_uniform(wl.value, in_late, cfg.out_channels, rng);
    store.add("merge/late/b", {cfg.out_channels});
}

template <typename T>
struct MergeCache {
    Tensor<T> concat;   // [feat+3, H, W] fused-path input (padding/occupied pixels)
    Tensor<T> pre_bn;   // [out, H, W]
    Tensor<T> bn_xhat;  // [out, H, W]
    BnStats<T> bn_stats;
    Tensor<T> out;  // post-ReLU
    MergeMode mode = MergeMode::local;
    bool train = false;
};

/// Pixel-wise affine merge of RGB and the sparse feature map, then one BN
/// over all H*W pixels (shared by both paths) and ReLU.
///   local:   occupied pixels use W_fused on [feat, rgb]; the rest use W_rgb on rgb.
///   padding: every pixel uses W_fused on [feat-or-zeros, rgb].
/// An all-unoccupied map in local mode is exactly the RGB-only path.
template <typename T>
Tensor<T> merge_forward(const Tensor<T>& rgb, const SparseFeatureMap<T>& map,
                        ParamStore<T>& store, const MergeConfig& cfg, MergeMode mode, bool train,
                        MergeCache<T>& cache) {
    cfg.validate();
    int h = rgb.shape[1], w = rgb.shape[2];
    if (rgb.shape[0] != 3) throw DataError("merge: rgb must be [3, H, W]");
    if (map.height != h || map.width != w) throw DataError("merge: feature map size mismatch");
    if (map.channels != cfg.feat_channels) throw DataError("merge: feature channel mismatch");
    int fc = cfg.feat_channels, oc = cfg.out_channels;
    std::size_t plane = static_cast<std::size_t>(h) * w;

    cache = MergeCache<T>{};
    cache.mode = mode;
    cache.train = train;
    cache.concat = Tensor<T>({fc + 3, h, w});
    for (int ch = 0; ch < fc; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            cache.concat.v[static_cast<std::size_t>(ch) * plane + px] =
                map.values.v[static_cast<std::size_t>(ch) * plane + px];
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            cache.concat.v[static_cast<std::size_t>(fc + ch) * plane + px] =
                rgb.v[static_cast<std::size_t>(ch) * plane + px];

    // fused path over the whole image, then the rgb path overwrites the
    // pixels it owns (all of them in local mode when nothing is occupied)
    conv1x1_forward(cache.concat, store.at("merge/W_fused").value, store.at("merge/b_fused").value,
                    cache.pre_bn);
    if (mode == MergeMode::local) {
        Tensor<T> rgb_path;
        conv1x1_forward(rgb, store.at("merge/W_rgb").value, store.at("merge/b_rgb").value, rgb_path);
        for (int ch = 0; ch < oc; ++ch)
            for (std::size_t px = 0; px < plane; ++px)
                if (!map.occupied[px])
                    cache.pre_bn.v[static_cast<std::size_t>(ch) * plane + px] =
                        rgb_path.v[static_cast<std::size_t>(ch) * plane + px];
    }

    Tensor<T> y;
    bn_chw_forward(cache.pre_bn, store.at("merge/bn_g").value, store.at("merge/bn_b").value,
                   store.at("merge/bn_rm").value, store.at("merge/bn_rv").value, train,
                   static_cast<T>(kBnMomentum), static_cast<T>(kBnEps), y, cache.bn_xhat,
                   cache.bn_stats);
    relu_forward(y, cache.out);
    return cache.out;
}

/// Returns (drgb, dfmap_values); parameter gradients accumulate in the store.
template <typename T>
void merge_backward(const Tensor<T>& dout, const Tensor<T>& rgb, const SparseFeatureMap<T>& map,
                    ParamStore<T>& store, const MergeConfig& cfg, const MergeCache<T>& cache,
                    Tensor<T>& drgb, Tensor<T>& dfmap) {
    int h = rgb.shape[1], w = rgb.shape[2];
    int fc = cfg.feat_channels, oc = cfg.out_channels;
    std::size_t plane = static_cast<std::size_t>(h) * w;

    Tensor<T> dy, dpre;
    relu_backward(cache.out, dout, dy);
    bn_chw_backward(cache.bn_xhat, cache.bn_stats, store.at("merge/bn_g").value, dy, cache.train,
                    store.at("merge/bn_g").grad, store.at("merge/bn_b").grad, dpre);

    // split the pre-BN gradient between the two affine paths
    Tensor<T> dpre_fused = dpre;
    if (cache.mode == MergeMode::local) {
        Tensor<T> dpre_rgb({oc, h, w});
        for (int ch = 0; ch < oc; ++ch)
            for (std::size_t px = 0; px < plane; ++px) {
                std::size_t at = static_cast<std::size_t>(ch) * plane + px;
                if (!map.occupied[px]) {
                    dpre_rgb.v[at] = dpre.v[at];
                    dpre_fused.v[at] = T(0);
                }
            }
        Tensor<T> drgb_unocc;
        conv1x1_backward(rgb, store.at("merge/W_rgb").value, dpre_rgb,
                         store.at("merge/W_rgb").grad, store.at("merge/b_rgb").grad, drgb_unocc);
        drgb = drgb_unocc;
    } else {
        drgb = Tensor<T>({3, h, w});
    }

    Tensor<T> dconcat;
    conv1x1_backward(cache.concat, store.at("merge/W_fused").value, dpre_fused,
                     store.at("merge/W_fused").grad, store.at("merge/b_fused").grad, dconcat);
    dfmap = Tensor<T>({fc, h, w});
    for (int ch = 0; ch < fc; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            dfmap.v[static_cast<std::size_t>(ch) * plane + px] =
                dconcat.v[static_cast<std::size_t>(ch) * plane + px];
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            drgb.v[static_cast<std::size_t>(ch) * plane + px] +=
                dconcat.v[static_cast<std::size_t>(fc + ch) * plane + px];
}

template <typename T>
struct LateFuseCache {
    Tensor<T> concat;  // [dec+feat, H, W]
};

/// Late-merge wiring: the sparse map is concatenated to the decoder's last
/// feature block and a 1x1 conv fuses back to out_channels (no extra
/// activation) ahead of the classifier.
template <typename T>
Tensor<T> late_fuse_forward(const Tensor<T>& dec_feat, const SparseFeatureMap<T>& map,
                            ParamStore<T>& store, const MergeConfig& cfg, LateFuseCache<T>& cache) {
    int h = dec_feat.shape[1], w = dec_feat.shape[2];
    if (dec_feat.shape[0] != cfg.out_channels) throw DataError("late fuse: decoder channel mismatch");
    if (map.height != h || map.width != w) throw DataError("late fuse: feature map size mismatch");
    int dc = cfg.out_channels, fc = cfg.feat_channels;
    std::size_t plane = static_cast<std::size_t>(h) * w;
    cache.concat = Tensor<T>({dc + fc, h, w});
    for (int ch = 0; ch < dc; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            cache.concat.v[static_cast<std::size_t>(ch) * plane + px] =
                dec_feat.v[static_cast<std::size_t>(ch) * plane + px];
    for (int ch = 0; ch < fc; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            cache.concat.v[static_cast<std::size_t>(dc + ch) * plane + px] =
                map.values.v[static_cast<std::size_t>(ch) * plane + px];
    Tensor<T> y;
    conv1x1_forward(cache.concat, store.at("merge/late/W").value, store.at("merge/late/b").value, y);
    return y;
}

template <typename T>
void late_fuse_backward(const Tensor<T>& dy, ParamStore<T>& store, const MergeConfig& cfg,
                        const LateFuseCache<T>& cache, Tensor<T>& ddec, Tensor<T>& dfmap) {
    int h = cache.concat.shape[1], w = cache.concat.shape[2];
    int dc = cfg.out_channels, fc = cfg.feat_channels;
    std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor<T> dconcat;
    conv1x1_backward(cache.concat, store.at("merge/late/W").value, dy,
                     store.at("merge/late/W").grad, store.at("merge/late/b").grad, dconcat);
    ddec = Tensor<T>({dc, h, w});
    dfmap = Tensor<T>({fc, h, w});
    for (int ch = 0; ch < dc; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            ddec.v[static_cast<std::size_t>(ch) * plane + px] =
                dconcat.v[static_cast<std::size_t>(ch) * plane + px];
    for (int ch = 0; ch < fc; ++ch)
        for (std::size_t px = 0; px < plane; ++px)
            dfmap.v[static_cast<std::size_t>(ch) * plane + px] =
                dconcat.v[static_cast<std::size_t>(dc + ch) * plane + px];
}

}  // namespace geofuse

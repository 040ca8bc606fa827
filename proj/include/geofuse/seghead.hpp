#pragma once

#include <array>
#include <string>
#include <vector>

#include "geofuse/nn.hpp"
#include "geofuse/params.hpp"

// Compact encoder-decoder segmentation head: three conv(3x3)+BN+ReLU blocks
// with 2x2 max pooling, mirrored by three upsample+skip+conv blocks, then a
// 1x1 classifier. The last decoder block keeps in_channels channels so the
// late-merge path can splice in ahead of the classifier.

namespace geofuse {

struct SegConfig {
    int in_channels = 64;
    int c1 = 64, c2 = 128, c3 = 128;
    int num_classes = 5;

    // decoder widths mirror the encoder back down
    int d3() const { return c3; }
    int d2() const { return c1; }
    int d1() const { return in_channels; }

    void validate() const {
        if (in_channels < 1 || c1 < 1 || c2 < 1 || c3 < 1)
            throw DataError("seg head: channel counts must be positive");
        if (num_classes < 2) throw DataError("seg head: need at least two classes");
    }
};

namespace detail {

struct SegBlock {
    std::string name;
    int in = 0, out = 0;
};

inline std::array<SegBlock, 6> seg_blocks(const SegConfig& cfg) {
    return {{{"seg/enc1", cfg.in_channels, cfg.c1},
             {"seg/enc2", cfg.c1, cfg.c2},
             {"seg/enc3", cfg.c2, cfg.c3},
             {"seg/dec3", cfg.c3 + cfg.c3, cfg.d3()},
             {"seg/dec2", cfg.d3() + cfg.c2, cfg.d2()},
             {"seg/dec1", cfg.d2() + cfg.c1, cfg.d1()}}};
}

}  // namespace detail

template <typename T>
void seg_init_params(ParamStore<T>& store, const SegConfig& cfg, Rng& rng) {
    cfg.validate();
    for (const auto& blk : detail::seg_blocks(cfg)) {
        Param<T>& w = store.add(blk.name + "/W", {blk.out, blk.in, 3, 3});
        glorot_uniform(w.value, blk.in * 9, blk.out * 9, rng);
        store.add(blk.name + "/b", {blk.out});
        Param<T>& g = store.add(blk.name + "/bn_g", {blk.out});
        g.value.fill(T(1));
        store.add(blk.name + "/bn_b", {blk.out});
        store.add(blk.name + "/bn_rm", {blk.out}, false);
        Param<T>& rv = store.add(blk.name + "/bn_rv", {blk.out}, false);
        rv.value.fill(T(1));
    }
    Param<T>& w = store.add("seg/cls/W", {cfg.num_classes, cfg.d1()});
    glorot_uniform(w.value, cfg.d1(), cfg.num_classes, rng);
    store.add("seg/cls/b", {cfg.num_classes});
}

template <typename T>
struct SegCache {
    std::array<Tensor<T>, 6> conv_in;
    std::array<Tensor<T>, 6> bn_xhat;
    std::array<BnStats<T>, 6> bn_stats;
    std::array<Tensor<T>, 6> act;  // s1, s2, s3, d3, d2, d1
    std::array<std::vector<std::int32_t>, 3> pool_argmax;
    bool train = false;
};

namespace detail {

template <typename T>
Tensor<T> seg_block_forward(const std::string& name, const Tensor<T>& x, ParamStore<T>& store,
                            bool train, Tensor<T>& conv_in, Tensor<T>& bn_xhat,
                            BnStats<T>& bn_stats, Tensor<T>& act) {
    conv_in = x;
    Tensor<T> conv, y;
    conv3x3_forward(x, store.at(name + "/W").value, store.at(name + "/b").value, conv);
    bn_chw_forward(conv, store.at(name + "/bn_g").value, store.at(name + "/bn_b").value,
                   store.at(name + "/bn_rm").value, store.at(name + "/bn_rv").value, train,
                   static_cast<T>(kBnMomentum), static_cast<T>(kBnEps), y, bn_xhat, bn_stats);
    relu_forward(y, act);
    return act;
}

template <typename T>
Tensor<T> seg_block_backward(const std::string& name, const Tensor<T>& dact, ParamStore<T>& store,
                             const Tensor<T>& conv_in, const Tensor<T>& bn_xhat,
                             const BnStats<T>& bn_stats, const Tensor<T>& act, bool train) {
    Tensor<T> dy, dconv, dx;
    relu_backward(act, dact, dy);
    bn_chw_backward(bn_xhat, bn_stats, store.at(name + "/bn_g").value, dy, train,
                    store.at(name + "/bn_g").grad, store.at(name + "/bn_b").grad, dconv);
    conv3x3_backward(conv_in, store.at(name + "/W").value, dconv, store.at(name + "/W").grad,
                     store.at(name + "/b").grad, dx);
    return dx;
}

template <typename T>
Tensor<T> concat_chw(const Tensor<T>& a, const Tensor<T>& b) {
    int h = a.shape[1], w = a.shape[2];
    Tensor<T> out({a.shape[0] + b.shape[0], h, w});
    std::size_t na = a.numel();
    for (std::size_t i = 0; i < na; ++i) out.v[i] = a.v[i];
    for (std::size_t i = 0; i < b.numel(); ++i) out.v[na + i] = b.v[i];
    return out;
}

}  // namespace detail

/// Runs the encoder-decoder and returns the last 64-channel decoder block
/// (pre-classifier). H and W must be divisible by 8.
template <typename T>
Tensor<T> seg_features_forward(const Tensor<T>& image, ParamStore<T>& store, const SegConfig& cfg,
                               bool train, SegCache<T>& cache) {
    cfg.validate();
    if (image.shape.size() != 3 || image.shape[0] != cfg.in_channels)
        throw DataError("seg head: input must be [in_channels, H, W]");
    int h = image.shape[1], w = image.shape[2];
    if (h % 8 != 0 || w % 8 != 0)
        throw DataError("seg head: H and W must be divisible by 8");
    auto blocks = detail::seg_blocks(cfg);
    cache = SegCache<T>{};
    cache.train = train;

    auto block = [&](int i, const Tensor<T>& x) {
        return detail::seg_block_forward(blocks[static_cast<std::size_t>(i)].name, x, store, train,
                                         cache.conv_in[static_cast<std::size_t>(i)],
                                         cache.bn_xhat[static_cast<std::size_t>(i)],
                                         cache.bn_stats[static_cast<std::size_t>(i)],
                                         cache.act[static_cast<std::size_t>(i)]);
    };

    Tensor<T> s1 = block(0, image);
    Tensor<T> p1, p2, p3;
    maxpool2x2_forward(s1, p1, cache.pool_argmax[0]);
    Tensor<T> s2 = block(1, p1);
    maxpool2x2_forward(s2, p2, cache.pool_argmax[1]);
    Tensor<T> s3 = block(2, p2);
    maxpool2x2_forward(s3, p3, cache.pool_argmax[2]);

    Tensor<T> u3;
    upsample2x_forward(p3, u3);
    Tensor<T> d3 = block(3, detail::concat_chw(u3, s3));
    Tensor<T> u2;
    upsample2x_forward(d3, u2);
    Tensor<T> d2 = block(4, detail::concat_chw(u2, s2));
    Tensor<T> u1;
    upsample2x_forward(d2, u1);
    return block(5, detail::concat_chw(u1, s1));
}

template <typename T>
Tensor<T> seg_classify(const Tensor<T>& features, ParamStore<T>& store) {
    Tensor<T> logits;
    conv1x1_forward(features, store.at("seg/cls/W").value, store.at("seg/cls/b").value, logits);
    return logits;
}

template <typename T>
Tensor<T> seg_classify_backward(const Tensor<T>& dlogits, const Tensor<T>& features,
                                ParamStore<T>& store) {
    Tensor<T> dfeat;
    conv1x1_backward(features, store.at("seg/cls/W").value, dlogits, store.at("seg/cls/W").grad,
                     store.at("seg/cls/b").grad, dfeat);
    return dfeat;
}

/// Backward through the encoder-decoder given the gradient at the last
/// decoder block; returns the gradient w.r.t. the input image.
template <typename T>
Tensor<T> seg_features_backward(const Tensor<T>& dfeat, ParamStore<T>& store, const SegConfig& cfg,
                                const SegCache<T>& cache) {
    auto blocks = detail::seg_blocks(cfg);
    auto block_bwd = [&](int i, const Tensor<T>& d) {
        return detail::seg_block_backward(blocks[static_cast<std::size_t>(i)].name, d, store,
                                          cache.conv_in[static_cast<std::size_t>(i)],
                                          cache.bn_xhat[static_cast<std::size_t>(i)],
                                          cache.bn_stats[static_cast<std::size_t>(i)],
                                          cache.act[static_cast<std::size_t>(i)], cache.train);
    };
    auto split = [&](const Tensor<T>& d, int ca, Tensor<T>& da, Tensor<T>& db) {
        int h = d.shape[1], w = d.shape[2];
        int cb = d.shape[0] - ca;
        da = Tensor<T>({ca, h, w});
        db = Tensor<T>({cb, h, w});
        std::size_t na = da.numel();
        for (std::size_t i = 0; i < na; ++i) da.v[i] = d.v[i];
        for (std::size_t i = 0; i < db.numel(); ++i) db.v[i] = d.v[na + i];
    };

    // decoder blocks: gradient w.r.t. concat(u_i, s_i) splits into the
    // upsample path and the skip, the skip part joining the encoder backward
    Tensor<T> dcat1 = block_bwd(5, dfeat);
    Tensor<T> du1, ds1_skip;
    split(dcat1, cfg.d2(), du1, ds1_skip);
    Tensor<T> dd2;
    upsample2x_backward(du1, dd2);

    Tensor<T> dcat2 = block_bwd(4, dd2);
    Tensor<T> du2, ds2_skip;
    split(dcat2, cfg.d3(), du2, ds2_skip);
    Tensor<T> dd3;
    upsample2x_backward(du2, dd3);

    Tensor<T> dcat3 = block_bwd(3, dd3);
    Tensor<T> du3, ds3_skip;
    split(dcat3, cfg.c3, du3, ds3_skip);
    Tensor<T> dp3;
    upsample2x_backward(du3, dp3);

    Tensor<T> ds3;
    maxpool2x2_backward(cache.pool_argmax[2], dp3, cache.act[2].shape[1], cache.act[2].shape[2], ds3);
    for (std::size_t i = 0; i < ds3.numel(); ++i) ds3.v[i] += ds3_skip.v[i];
    Tensor<T> dp2 = block_bwd(2, ds3);

    Tensor<T> ds2;
    maxpool2x2_backward(cache.pool_argmax[1], dp2, cache.act[1].shape[1], cache.act[1].shape[2], ds2);
    for (std::size_t i = 0; i < ds2.numel(); ++i) ds2.v[i] += ds2_skip.v[i];
    Tensor<T> dp1 = block_bwd(1, ds2);

    Tensor<T> ds1;
    maxpool2x2_backward(cache.pool_argmax[0], dp1, cache.act[0].shape[1], cache.act[0].shape[2], ds1);
    for (std::size_t i = 0; i < ds1.numel(); ++i) ds1.v[i] += ds1_skip.v[i];
    return block_bwd(0, ds1);
}

}  // namespace geofuse

#pragma once

#include <string>
#include <vector>

#include "geofuse/nn.hpp"
#include "geofuse/params.hpp"

// PointNet-style per-point encoder with the spatial transformers removed.
// Two shared MLP stages (each layer: linear -> BN -> ReLU), a channel-wise
// max pool over all points, local||global concatenation, and a per-point
// head MLP whose final layer is linear only.

namespace geofuse {

struct NetConfig {
    std::vector<int> local_widths = {64, 64};
    std::vector<int> global_widths = {64, 128, 1024};
    std::vector<int> head_widths = {512, 256, 128};
    int out_channels = 61;
    int input_channels = 3;
    bool append_rgb = false;  // feed point color alongside xyz (off: color goes via 2D only)

    int in_channels() const { return input_channels + (append_rgb ? 3 : 0); }

    void validate() const {
        if (local_widths.empty() || global_widths.empty() || head_widths.empty())
            throw DataError("lpointnet: width lists must be nonempty");
        for (int w : local_widths)
            if (w < 1) throw DataError("lpointnet: widths must be positive");
        for (int w : global_widths)
            if (w < 1) throw DataError("lpointnet: widths must be positive");
        for (int w : head_widths)
            if (w < 1) throw DataError("lpointnet: widths must be positive");
        if (out_channels < 1) throw DataError("lpointnet: out_channels must be positive");
        if (input_channels < 1) throw DataError("lpointnet: input_channels must be positive");
    }
};

namespace detail {

struct LpnLayer {
    std::string name;  // parameter prefix, e.g. "p3d/local0"
    int in = 0, out = 0;
};

// All linear+BN+ReLU layers in forward order; the concat sits between the
// last "global" layer and the first "head" layer.
inline std::vector<LpnLayer> lpn_layers(const NetConfig& cfg) {
    std::vector<LpnLayer> layers;
    int c = cfg.in_channels();
    for (std::size_t i = 0; i < cfg.local_widths.size(); ++i) {
        layers.push_back({"p3d/local" + std::to_string(i), c, cfg.local_widths[i]});
        c = cfg.local_widths[i];
    }
    for (std::size_t i = 0; i < cfg.global_widths.size(); ++i) {
        layers.push_back({"p3d/global" + std::to_string(i), c, cfg.global_widths[i]});
        c = cfg.global_widths[i];
    }
    c = cfg.local_widths.back() + cfg.global_widths.back();
    for (std::size_t i = 0; i < cfg.head_widths.size(); ++i) {
        layers.push_back({"p3d/head" + std::to_string(i), c, cfg.head_widths[i]});
        c = cfg.head_widths[i];
    }
    return layers;
}

}  // namespace detail

template <typename T>
struct LpnCache {
    Tensor<T> input;
    std::vector<Tensor<T>> lin_in;   // dense input per layer
    std::vector<Tensor<T>> bn_xhat;  // BN normalized values per layer
    std::vector<BnStats<T>> bn_stats;
    std::vector<Tensor<T>> act;  // post-ReLU per layer
    Tensor<T> global_vec;        // [G] pooled vector
    std::vector<std::int32_t> argmax;
    Tensor<T> concat;  // [N, L+G]
    bool train = false;
};

/// Registers parameters and fills them: Glorot-uniform weights in layer
/// order, zero biases, BN scale 1 / shift 0 / running mean 0 / running var 1.
template <typename T>
void lpn_init_params(ParamStore<T>& store, const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    auto init_dense_bn = [&](const std::string& name, int in, int out, bool bn) {
        Param<T>& w = store.add(name + "/W", {in, out});
        glorot_uniform(w.value, in, out, rng);
        store.add(name + "/b", {out});
        if (bn) {
            Param<T>& g = store.add(name + "/bn_g", {out});
            g.value.fill(T(1));
            store.add(name + "/bn_b", {out});
            store.add(name + "/bn_rm", {out}, false);
            Param<T>& rv = store.add(name + "/bn_rv", {out}, false);
            rv.value.fill(T(1));
        }
    };
    for (const auto& layer : detail::lpn_layers(cfg))
        init_dense_bn(layer.name, layer.in, layer.out, true);
    init_dense_bn("p3d/out", cfg.head_widths.back(), cfg.out_channels, false);
}

/// Per-point features [N, out_channels]. Train mode normalizes with batch
/// statistics over the N points and updates running stats; eval mode uses
/// running stats. N must be >= 1 (the global max is undefined otherwise).
template <typename T>
Tensor<T> lpn_forward(const Tensor<T>& points, ParamStore<T>& store, const NetConfig& cfg,
                      bool train, LpnCache<T>& cache) {
    cfg.validate();
    if (points.shape.size() != 2 || points.shape[1] != cfg.in_channels())
        throw DataError("lpointnet: input must be [N, " + std::to_string(cfg.in_channels()) + "]");
    int n = points.shape[0];
    if (n < 1) throw DataError("lpointnet: empty point set (global max undefined)");

    auto layers = detail::lpn_layers(cfg);
    std::size_t n_local = cfg.local_widths.size();
    std::size_t n_global = cfg.global_widths.size();

    cache = LpnCache<T>{};
    cache.train = train;
    cache.input = points;
    cache.lin_in.resize(layers.size());
    cache.bn_xhat.resize(layers.size());
    cache.bn_stats.resize(layers.size());
    cache.act.resize(layers.size());

    Tensor<T> x = points;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        if (li == n_local + n_global) {
            // concat local features with the pooled global vector
            const Tensor<T>& local = cache.act[n_local - 1];
            const Tensor<T>& glob = cache.act[n_local + n_global - 1];
            channel_max_forward(glob, cache.global_vec, cache.argmax);
            int l = local.shape[1], g = cache.global_vec.shape[0];
            cache.concat = Tensor<T>({n, l + g});
            for (int i = 0; i < n; ++i) {
                for (int c = 0; c < l; ++c) cache.concat.at2(i, c) = local.at2(i, c);
                for (int c = 0; c < g; ++c)
                    cache.concat.at2(i, l + c) = cache.global_vec.v[static_cast<std::size_t>(c)];
            }
            x = cache.concat;
        }
        const auto& layer = layers[li];
        cache.lin_in[li] = x;
        Tensor<T> lin, y;
        dense_forward(x, store.at(layer.name + "/W").value, store.at(layer.name + "/b").value, lin);
        bn_rows_forward(lin, store.at(layer.name + "/bn_g").value,
                        store.at(layer.name + "/bn_b").value, store.at(layer.name + "/bn_rm").value,
                        store.at(layer.name + "/bn_rv").value, train, static_cast<T>(kBnMomentum),
                        static_cast<T>(kBnEps), y, cache.bn_xhat[li], cache.bn_stats[li]);
        relu_forward(y, cache.act[li]);
        x = cache.act[li];
    }

    Tensor<T> out;
    dense_forward(x, store.at("p3d/out/W").value, store.at("p3d/out/b").value, out);
    return out;
}

/// Reverse-mode pass; accumulates parameter gradients in the store and
/// returns the gradient w.r.t. the input coordinates.
template <typename T>
Tensor<T> lpn_backward(const Tensor<T>& grad_features, ParamStore<T>& store, const NetConfig& cfg,
                       const LpnCache<T>& cache) {
    auto layers = detail::lpn_layers(cfg);
    if (cache.act.size() != layers.size())
        throw DataError("lpointnet: cache does not match this configuration");
    std::size_t n_local = cfg.local_widths.size();
    std::size_t n_global = cfg.global_widths.size();
    int n = cache.input.shape[0];
    if (grad_features.shape.size() != 2 || grad_features.shape[0] != n ||
        grad_features.shape[1] != cfg.out_channels)
        throw DataError("lpointnet: grad_features shape mismatch");

    Tensor<T> d;
    dense_backward(cache.act.back(), store.at("p3d/out/W").value, grad_features,
                   store.at("p3d/out/W").grad, store.at("p3d/out/b").grad, d);

    Tensor<T> d_local_skip;  // gradient flowing directly into the local features
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        Tensor<T> dy, dbn;
        relu_backward(cache.act[li], d, dy);
        bn_rows_backward(cache.bn_xhat[li], cache.bn_stats[li], store.at(layer.name + "/bn_g").value,
                         dy, cache.train, store.at(layer.name + "/bn_g").grad,
                         store.at(layer.name + "/bn_b").grad, dbn);
        dense_backward(cache.lin_in[li], store.at(layer.name + "/W").value, dbn,
                       store.at(layer.name + "/W").grad, store.at(layer.name + "/b").grad, d);
        if (li == n_local + n_global) {
            // split concat gradient: local part passes through, global part
            // routes through the max pool to the argmax rows
            int l = cfg.local_widths.back(), g = cfg.global_widths.back();
            d_local_skip = Tensor<T>({n, l});
            Tensor<T> dglob({g});
            for (int i = 0; i < n; ++i) {
                for (int c = 0; c < l; ++c) d_local_skip.at2(i, c) = d.at2(i, c);
                for (int c = 0; c < g; ++c) dglob.v[static_cast<std::size_t>(c)] += d.at2(i, l + c);
            }
            channel_max_backward(cache.argmax, dglob, n, d);
        }
        if (li == n_local) {
            // entering the local stage from the global stage: add the concat skip
            for (std::size_t i = 0; i < d.numel(); ++i) d.v[i] += d_local_skip.v[i];
        }
    }
    return d;
}

}  // namespace geofuse

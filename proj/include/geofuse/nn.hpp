#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "geofuse/errors.hpp"
#include "geofuse/image.hpp"
#include "geofuse/rng.hpp"
#include "geofuse/tensor.hpp"

// Layer primitives over Tensor<T>, each with an explicit backward. All loops
// are sequential and single-threaded so results are reproducible bit for bit.
// Parameter gradients accumulate (+=); input gradients are overwritten.

namespace geofuse {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

// ---- dense over point rows: y[N,Cout] = x[N,Cin] * W[Cin,Cout] + b ----
// The forward kernel is hand-rolled rather than a library GEMM: every output
// element accumulates strictly sequentially along k, so a row's result is a
// function of that row's content alone. Library GEMMs switch kernels on tail
// rows and reassociate the sum, which breaks bitwise permutation equivariance
// of the per-point MLPs. The backward has no such contract and uses GEMM.

template <typename T>
void dense_forward(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b, Tensor<T>& y) {
    int n = x.shape[0], cin = x.shape[1], cout = W.shape[1];
    if (W.shape[0] != cin) throw DataError("dense: weight/input channel mismatch");
    y = Tensor<T>({n, cout});
    constexpr int kRows = 8;
    for (int i0 = 0; i0 < n; i0 += kRows) {
        int r_end = std::min(n - i0, kRows);
        for (int r = 0; r < r_end; ++r) {
            T* yr = y.data() + static_cast<std::size_t>(i0 + r) * cout;
            for (int j = 0; j < cout; ++j) yr[j] = b.v[static_cast<std::size_t>(j)];
        }
        for (int k = 0; k < cin; ++k) {
            const T* wr = W.data() + static_cast<std::size_t>(k) * cout;
            for (int r = 0; r < r_end; ++r) {
                T s = x.v[static_cast<std::size_t>(i0 + r) * cin + k];
                T* yr = y.data() + static_cast<std::size_t>(i0 + r) * cout;
                for (int j = 0; j < cout; ++j) yr[j] += s * wr[j];
            }
        }
    }
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& dy, Tensor<T>& dW,
                    Tensor<T>& db, Tensor<T>& dx) {
    int n = x.shape[0], cin = x.shape[1], cout = W.shape[1];
    CMapM<T> xm(x.data(), n, cin);
    CMapM<T> wm(W.data(), cin, cout);
    CMapM<T> dym(dy.data(), n, cout);
    MapM<T> dwm(dW.data(), cin, cout);
    dwm.noalias() += xm.transpose() * dym;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cout; ++c) db.v[static_cast<std::size_t>(c)] += dy.at2(i, c);
    dx = Tensor<T>({n, cin});
    MapM<T> dxm(dx.data(), n, cin);
    dxm.noalias() = dym * wm.transpose();
}

// ---- batch norm ----
// Biased variance (1/N), xhat = (x - mean) / sqrt(var + eps), y = gamma*xhat + beta.
// Running stats: r = (1-momentum)*r + momentum*batch_stat. In eval mode the
// running stats take the place of the batch stats and the backward treats
// them as constants (the "frozen" path).

// One epsilon and momentum shared by every normalization layer in the model.
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

template <typename T>
struct BnStats {
    std::vector<T> mean, inv_std;
};

template <typename T>
void bn_rows_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool train, T momentum,
                     T eps, Tensor<T>& y, Tensor<T>& xhat, BnStats<T>& stats) {
    int n = x.shape[0], c = x.shape[1];
    if (train && n < 1) throw DataError("batchnorm: empty batch");
    stats.mean.assign(static_cast<std::size_t>(c), T(0));
    stats.inv_std.assign(static_cast<std::size_t>(c), T(0));
    if (train) {
        for (int j = 0; j < c; ++j) {
            T m = T(0);
            for (int i = 0; i < n; ++i) m += x.at2(i, j);
            m /= static_cast<T>(n);
            T var = T(0);
            for (int i = 0; i < n; ++i) {
                T d = x.at2(i, j) - m;
                var += d * d;
            }
            var /= static_cast<T>(n);
            stats.mean[static_cast<std::size_t>(j)] = m;
            stats.inv_std[static_cast<std::size_t>(j)] = T(1) / std::sqrt(var + eps);
            running_mean.v[static_cast<std::size_t>(j)] =
                (T(1) - momentum) * running_mean.v[static_cast<std::size_t>(j)] + momentum * m;
            running_var.v[static_cast<std::size_t>(j)] =
                (T(1) - momentum) * running_var.v[static_cast<std::size_t>(j)] + momentum * var;
        }
    } else {
        for (int j = 0; j < c; ++j) {
            stats.mean[static_cast<std::size_t>(j)] = running_mean.v[static_cast<std::size_t>(j)];
            stats.inv_std[static_cast<std::size_t>(j)] =
                T(1) / std::sqrt(running_var.v[static_cast<std::size_t>(j)] + eps);
        }
    }
    y = Tensor<T>({n, c});
    xhat = Tensor<T>({n, c});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            T h = (x.at2(i, j) - stats.mean[static_cast<std::size_t>(j)]) *
                  stats.inv_std[static_cast<std::size_t>(j)];
            xhat.at2(i, j) = h;
            y.at2(i, j) = gamma.v[static_cast<std::size_t>(j)] * h + beta.v[static_cast<std::size_t>(j)];
        }
}

// train_stats=true: full backward through the batch mean/variance.
// train_stats=false: stats are constants (eval-mode gradients).
template <typename T>
void bn_rows_backward(const Tensor<T>& xhat, const BnStats<T>& stats, const Tensor<T>& gamma,
                      const Tensor<T>& dy, bool train_stats, Tensor<T>& dgamma, Tensor<T>& dbeta,
                      Tensor<T>& dx) {
    int n = xhat.shape[0], c = xhat.shape[1];
    dx = Tensor<T>({n, c});
    for (int j = 0; j < c; ++j) {
        T sum_dy = T(0), sum_dyh = T(0);
        for (int i = 0; i < n; ++i) {
            sum_dy += dy.at2(i, j);
            sum_dyh += dy.at2(i, j) * xhat.at2(i, j);
        }
        dgamma.v[static_cast<std::size_t>(j)] += sum_dyh;
        dbeta.v[static_cast<std::size_t>(j)] += sum_dy;
        T g = gamma.v[static_cast<std::size_t>(j)];
        T istd = stats.inv_std[static_cast<std::size_t>(j)];
        if (train_stats) {
            T inv_n = T(1) / static_cast<T>(n);
            for (int i = 0; i < n; ++i) {
                dx.at2(i, j) = g * istd * inv_n *
                               (static_cast<T>(n) * dy.at2(i, j) - sum_dy - xhat.at2(i, j) * sum_dyh);
            }
        } else {
            for (int i = 0; i < n; ++i) dx.at2(i, j) = dy.at2(i, j) * g * istd;
        }
    }
}

// CHW variant: statistics per channel over all H*W pixels.

template <typename T>
void bn_chw_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, bool train, T momentum,
                    T eps, Tensor<T>& y, Tensor<T>& xhat, BnStats<T>& stats) {
    int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    std::size_t plane = static_cast<std::size_t>(h) * w;
    stats.mean.assign(static_cast<std::size_t>(c), T(0));
    stats.inv_std.assign(static_cast<std::size_t>(c), T(0));
    if (train) {
        for (int j = 0; j < c; ++j) {
            const T* p = x.data() + static_cast<std::size_t>(j) * plane;
            T m = T(0);
            for (std::size_t i = 0; i < plane; ++i) m += p[i];
            m /= static_cast<T>(plane);
            T var = T(0);
            for (std::size_t i = 0; i < plane; ++i) {
                T d = p[i] - m;
                var += d * d;
            }
            var /= static_cast<T>(plane);
            stats.mean[static_cast<std::size_t>(j)] = m;
            stats.inv_std[static_cast<std::size_t>(j)] = T(1) / std::sqrt(var + eps);
            running_mean.v[static_cast<std::size_t>(j)] =
                (T(1) - momentum) * running_mean.v[static_cast<std::size_t>(j)] + momentum * m;
            running_var.v[static_cast<std::size_t>(j)] =
                (T(1) - momentum) * running_var.v[static_cast<std::size_t>(j)] + momentum * var;
        }
    } else {
        for (int j = 0; j < c; ++j) {
            stats.mean[static_cast<std::size_t>(j)] = running_mean.v[static_cast<std::size_t>(j)];
            stats.inv_std[static_cast<std::size_t>(j)] =
                T(1) / std::sqrt(running_var.v[static_cast<std::size_t>(j)] + eps);
        }
    }
    y = Tensor<T>({c, h, w});
    xhat = Tensor<T>({c, h, w});
    for (int j = 0; j < c; ++j) {
        const T* p = x.data() + static_cast<std::size_t>(j) * plane;
        T* ph = xhat.data() + static_cast<std::size_t>(j) * plane;
        T* py = y.data() + static_cast<std::size_t>(j) * plane;
        T m = stats.mean[static_cast<std::size_t>(j)], istd = stats.inv_std[static_cast<std::size_t>(j)];
        T g = gamma.v[static_cast<std::size_t>(j)], bb = beta.v[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < plane; ++i) {
            T hh = (p[i] - m) * istd;
            ph[i] = hh;
            py[i] = g * hh + bb;
        }
    }
}

template <typename T>
void bn_chw_backward(const Tensor<T>& xhat, const BnStats<T>& stats, const Tensor<T>& gamma,
                     const Tensor<T>& dy, bool train_stats, Tensor<T>& dgamma, Tensor<T>& dbeta,
                     Tensor<T>& dx) {
    int c = xhat.shape[0], h = xhat.shape[1], w = xhat.shape[2];
    std::size_t plane = static_cast<std::size_t>(h) * w;
    dx = Tensor<T>({c, h, w});
    for (int j = 0; j < c; ++j) {
        const T* ph = xhat.data() + static_cast<std::size_t>(j) * plane;
        const T* pd = dy.data() + static_cast<std::size_t>(j) * plane;
        T* px = dx.data() + static_cast<std::size_t>(j) * plane;
        T sum_dy = T(0), sum_dyh = T(0);
        for (std::size_t i = 0; i < plane; ++i) {
            sum_dy += pd[i];
            sum_dyh += pd[i] * ph[i];
        }
        dgamma.v[static_cast<std::size_t>(j)] += sum_dyh;
        dbeta.v[static_cast<std::size_t>(j)] += sum_dy;
        T g = gamma.v[static_cast<std::size_t>(j)];
        T istd = stats.inv_std[static_cast<std::size_t>(j)];
        if (train_stats) {
            T inv_n = T(1) / static_cast<T>(plane);
            for (std::size_t i = 0; i < plane; ++i) {
                px[i] = g * istd * inv_n * (static_cast<T>(plane) * pd[i] - sum_dy - ph[i] * sum_dyh);
            }
        } else {
            for (std::size_t i = 0; i < plane; ++i) px[i] = pd[i] * g * istd;
        }
    }
}

// ---- relu ----

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
    y = Tensor<T>(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.v[i] = x.v[i] > T(0) ? x.v[i] : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
    dx = Tensor<T>(y.shape);
    for (std::size_t i = 0; i < y.numel(); ++i) dx.v[i] = y.v[i] > T(0) ? dy.v[i] : T(0);
}

// ---- channel-wise max over points: x[N,C] -> y[C]; ties pick the lowest row ----

template <typename T>
void channel_max_forward(const Tensor<T>& x, Tensor<T>& y, std::vector<std::int32_t>& argmax) {
    int n = x.shape[0], c = x.shape[1];
    if (n < 1) throw DataError("channel_max: empty point set");
    y = Tensor<T>({c});
    argmax.assign(static_cast<std::size_t>(c), 0);
    for (int j = 0; j < c; ++j) {
        T best = x.at2(0, j);
        std::int32_t at = 0;
        for (int i = 1; i < n; ++i) {
            if (x.at2(i, j) > best) {
                best = x.at2(i, j);
                at = i;
            }
        }
        y.v[static_cast<std::size_t>(j)] = best;
        argmax[static_cast<std::size_t>(j)] = at;
    }
}

template <typename T>
void channel_max_backward(const std::vector<std::int32_t>& argmax, const Tensor<T>& dy, int n,
                          Tensor<T>& dx) {
    int c = static_cast<int>(argmax.size());
    dx = Tensor<T>({n, c});
    for (int j = 0; j < c; ++j)
        dx.at2(argmax[static_cast<std::size_t>(j)], j) += dy.v[static_cast<std::size_t>(j)];
}

// ---- conv 3x3, stride 1, zero padding 1 (same size), via im2col + GEMM ----
// K has shape {Cout, Cin, 3, 3}; row-major flattening views it as [Cout, Cin*9].

template <typename T>
void im2col3x3(const Tensor<T>& x, Tensor<T>& col) {
    int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
    col = Tensor<T>({cin * 9, h * w});
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* dst = col.data() + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) *
                                          static_cast<std::size_t>(h) * w;
                for (int y = 0; y < h; ++y) {
                    int sy = y + ky - 1;
                    for (int xx = 0; xx < w; ++xx) {
                        int sx = xx + kx - 1;
                        dst[static_cast<std::size_t>(y) * w + xx] =
                            (sy >= 0 && sy < h && sx >= 0 && sx < w) ? x.at3(ci, sy, sx) : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void conv3x3_forward(const Tensor<T>& x, const Tensor<T>& K, const Tensor<T>& b, Tensor<T>& y) {
    int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
    int cout = K.shape[0];
    if (K.shape[1] != cin) throw DataError("conv3x3: kernel/input channel mismatch");
    Tensor<T> col;
    im2col3x3(x, col);
    y = Tensor<T>({cout, h, w});
    CMapM<T> km(K.data(), cout, cin * 9);
    CMapM<T> cm(col.data(), cin * 9, h * w);
    MapM<T> ym(y.data(), cout, h * w);
    ym.noalias() = km * cm;
    std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int co = 0; co < cout; ++co) {
        T bias = b.v[static_cast<std::size_t>(co)];
        T* p = y.data() + static_cast<std::size_t>(co) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += bias;
    }
}

template <typename T>
void conv3x3_backward(const Tensor<T>& x, const Tensor<T>& K, const Tensor<T>& dy, Tensor<T>& dK,
                      Tensor<T>& db, Tensor<T>& dx) {
    int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
    int cout = K.shape[0];
    std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor<T> col;
    im2col3x3(x, col);  // rebuilt instead of cached; cheap next to the GEMMs
    CMapM<T> dym(dy.data(), cout, h * w);
    CMapM<T> cm(col.data(), cin * 9, h * w);
    MapM<T> dkm(dK.data(), cout, cin * 9);
    dkm.noalias() += dym * cm.transpose();
    for (int co = 0; co < cout; ++co) {
        const T* p = dy.data() + static_cast<std::size_t>(co) * plane;
        T s = T(0);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
        db.v[static_cast<std::size_t>(co)] += s;
    }
    Tensor<T> dcol({cin * 9, h * w});
    CMapM<T> km(K.data(), cout, cin * 9);
    MapM<T> dcm(dcol.data(), cin * 9, h * w);
    dcm.noalias() = km.transpose() * dym;
    dx = Tensor<T>({cin, h, w});
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* src = dcol.data() + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * plane;
                for (int y = 0; y < h; ++y) {
                    int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int xx = 0; xx < w; ++xx) {
                        int sx = xx + kx - 1;
                        if (sx < 0 || sx >= w) continue;
                        dx.at3(ci, sy, sx) += src[static_cast<std::size_t>(y) * w + xx];
                    }
                }
            }
        }
    }
}

// ---- conv 1x1 ---- K shape {Cout, Cin}

template <typename T>
void conv1x1_forward(const Tensor<T>& x, const Tensor<T>& K, const Tensor<T>& b, Tensor<T>& y) {
    int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
    int cout = K.shape[0];
    if (K.shape[1] != cin) throw DataError("conv1x1: kernel/input channel mismatch");
    y = Tensor<T>({cout, h, w});
    CMapM<T> km(K.data(), cout, cin);
    CMapM<T> xm(x.data(), cin, h * w);
    MapM<T> ym(y.data(), cout, h * w);
    ym.noalias() = km * xm;
    std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int co = 0; co < cout; ++co) {
        T bias = b.v[static_cast<std::size_t>(co)];
        T* p = y.data() + static_cast<std::size_t>(co) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += bias;
    }
}

template <typename T>
void conv1x1_backward(const Tensor<T>& x, const Tensor<T>& K, const Tensor<T>& dy, Tensor<T>& dK,
                      Tensor<T>& db, Tensor<T>& dx) {
    int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
    int cout = K.shape[0];
    std::size_t plane = static_cast<std::size_t>(h) * w;
    CMapM<T> dym(dy.data(), cout, h * w);
    CMapM<T> xm(x.data(), cin, h * w);
    MapM<T> dkm(dK.data(), cout, cin);
    dkm.noalias() += dym * xm.transpose();
    for (int co = 0; co < cout; ++co) {
        const T* p = dy.data() + static_cast<std::size_t>(co) * plane;
        T s = T(0);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
        db.v[static_cast<std::size_t>(co)] += s;
    }
    dx = Tensor<T>({cin, h, w});
    CMapM<T> km(K.data(), cout, cin);
    MapM<T> dxm(dx.data(), cin, h * w);
    dxm.noalias() = km.transpose() * dym;
}

// ---- max pool 2x2, stride 2; ties keep the lowest linear index in the plane ----

template <typename T>
void maxpool2x2_forward(const Tensor<T>& x, Tensor<T>& y, std::vector<std::int32_t>& argmax) {
    int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (h % 2 != 0 || w % 2 != 0) throw DataError("maxpool2x2: spatial dims must be even");
    int oh = h / 2, ow = w / 2;
    y = Tensor<T>({c, oh, ow});
    argmax.assign(static_cast<std::size_t>(c) * oh * ow, 0);
    for (int ci = 0; ci < c; ++ci) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                T best{};
                std::int32_t at = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dxx = 0; dxx < 2; ++dxx) {
                        int sy = oy * 2 + dy, sx = ox * 2 + dxx;
                        T v = x.at3(ci, sy, sx);
                        if (at < 0 || v > best) {
                            best = v;
                            at = sy * w + sx;
                        }
                    }
                }
                y.at3(ci, oy, ox) = best;
                argmax[(static_cast<std::size_t>(ci) * oh + oy) * ow + ox] = at;
            }
        }
    }
}

template <typename T>
void maxpool2x2_backward(const std::vector<std::int32_t>& argmax, const Tensor<T>& dy, int h,
                         int w, Tensor<T>& dx) {
    int c = dy.shape[0], oh = dy.shape[1], ow = dy.shape[2];
    dx = Tensor<T>({c, h, w});
    std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < c; ++ci) {
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                std::int32_t at = argmax[(static_cast<std::size_t>(ci) * oh + oy) * ow + ox];
                dx.v[static_cast<std::size_t>(ci) * plane + at] += dy.at3(ci, oy, ox);
            }
    }
}

// ---- nearest-neighbour 2x upsample ----

template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
    int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    y = Tensor<T>({c, h * 2, w * 2});
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < h * 2; ++yy)
            for (int xx = 0; xx < w * 2; ++xx) y.at3(ci, yy, xx) = x.at3(ci, yy / 2, xx / 2);
}

template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>& dx) {
    int c = dy.shape[0], h2 = dy.shape[1], w2 = dy.shape[2];
    dx = Tensor<T>({c, h2 / 2, w2 / 2});
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < h2; ++yy)
            for (int xx = 0; xx < w2; ++xx) dx.at3(ci, yy / 2, xx / 2) += dy.at3(ci, yy, xx);
}

// ---- softmax cross entropy over a [C,H,W] logit map ----
// Mean over pixels whose label != ignore_id; the per-pixel terms accumulate
// in double regardless of T. All pixels ignored -> loss 0, all_ignored set.

struct CeResult {
    double loss = 0.0;
    std::size_t pixels = 0;
    bool all_ignored = false;
};

template <typename T>
CeResult cross_entropy_forward(const Tensor<T>& logits, const ImageU8& labels, int ignore_id,
                               Tensor<T>& softmax) {
    int c = logits.shape[0], h = logits.shape[1], w = logits.shape[2];
    if (labels.height != h || labels.width != w || labels.channels != 1)
        throw DataError("cross_entropy: label image does not match logit map");
    softmax = Tensor<T>({c, h, w});
    std::size_t plane = static_cast<std::size_t>(h) * w;
    CeResult res;
    double acc = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t px = static_cast<std::size_t>(y) * w + x;
            T m = logits.v[px];
            for (int j = 1; j < c; ++j) m = std::max(m, logits.v[static_cast<std::size_t>(j) * plane + px]);
            T se = T(0);
            for (int j = 0; j < c; ++j)
                se += std::exp(logits.v[static_cast<std::size_t>(j) * plane + px] - m);
            T lse = m + std::log(se);
            for (int j = 0; j < c; ++j)
                softmax.v[static_cast<std::size_t>(j) * plane + px] =
                    std::exp(logits.v[static_cast<std::size_t>(j) * plane + px] - lse);
            int lbl = labels.at(y, x, 0);
            if (lbl == ignore_id) continue;
            if (lbl < 0 || lbl >= c) throw DataError("cross_entropy: label id out of range");
            acc += static_cast<double>(lse - logits.v[static_cast<std::size_t>(lbl) * plane + px]);
            ++res.pixels;
        }
    }
    if (res.pixels == 0) {
        res.all_ignored = true;
        res.loss = 0.0;
    } else {
        res.loss = acc / static_cast<double>(res.pixels);
    }
    return res;
}

template <typename T>
void cross_entropy_backward(const Tensor<T>& softmax, const ImageU8& labels, int ignore_id,
                            std::size_t pixels, Tensor<T>& dlogits) {
    int c = softmax.shape[0], h = softmax.shape[1], w = softmax.shape[2];
    dlogits = Tensor<T>({c, h, w});
    if (pixels == 0) return;
    std::size_t plane = static_cast<std::size_t>(h) * w;
    T inv = T(1) / static_cast<T>(pixels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int lbl = labels.at(y, x, 0);
            if (lbl == ignore_id) continue;
            std::size_t px = static_cast<std::size_t>(y) * w + x;
            for (int j = 0; j < c; ++j) {
                T p = softmax.v[static_cast<std::size_t>(j) * plane + px];
                dlogits.v[static_cast<std::size_t>(j) * plane + px] =
                    (p - (j == lbl ? T(1) : T(0))) * inv;
            }
        }
    }
}

// ---- misc ----

template <typename T>
void glorot_uniform(Tensor<T>& w, int fan_in, int fan_out, Rng& rng) {
    double a = std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
    for (std::size_t i = 0; i < w.numel(); ++i) w.v[i] = static_cast<T>(rng.uniform(-a, a));
}

/// Per-pixel argmax over the class axis; ties resolve to the lowest class id.
template <typename T>
ImageU8 argmax_labels(const Tensor<T>& logits) {
    int c = logits.shape[0], h = logits.shape[1], w = logits.shape[2];
    ImageU8 out(w, h, 1);
    std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::size_t px = static_cast<std::size_t>(y) * w + x;
            int best = 0;
            T bv = logits.v[px];
            for (int j = 1; j < c; ++j) {
                T v = logits.v[static_cast<std::size_t>(j) * plane + px];
                if (v > bv) {
                    bv = v;
                    best = j;
                }
            }
            out.at(y, x, 0) = static_cast<std::uint8_t>(best);
        }
    return out;
}

}  // namespace geofuse

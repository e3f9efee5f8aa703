#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "signet/common.hpp"
#include "signet/rng.hpp"
#include "signet/tensor.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Convolution kernels. conv_fwd, conv_dinput and conv_dweight are linear in
// each operand and each one's derivative is expressible with the other two,
// so the triple is closed under differentiation to any order. That closure
// carries the critic's gradient-penalty double backward.
// ---------------------------------------------------------------------------

struct ConvGeom {
    std::size_t stride = 1;
    std::size_t pad = 1;
};

namespace detail {

/// Conv kernels accumulate in the storage precision for the float
/// instantiation (the double instantiation, where the gradient oracles run,
/// accumulates in double).
template <class T>
using conv_acc_t = std::conditional_t<std::is_same_v<T, float>, float, double>;

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, ConvGeom g) {
    require(in + 2 * g.pad >= k, "conv2d: kernel " + std::to_string(k) + " exceeds padded extent " +
                                     std::to_string(in + 2 * g.pad));
    return (in + 2 * g.pad - k) / g.stride + 1;
}

/// Output indices o with 0 <= o*stride + tap - pad < extent, as [lo, hi).
inline void conv_tap_range(std::size_t tap, ConvGeom g, std::size_t in_extent,
                           std::size_t out_extent, std::size_t& lo, std::size_t& hi) {
    std::ptrdiff_t off = static_cast<std::ptrdiff_t>(tap) - static_cast<std::ptrdiff_t>(g.pad);
    std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
    std::ptrdiff_t l = off < 0 ? (-off + s - 1) / s : 0;
    std::ptrdiff_t top = static_cast<std::ptrdiff_t>(in_extent) - 1 - off;
    std::ptrdiff_t hh = top < 0 ? 0 : top / s + 1;
    if (hh > static_cast<std::ptrdiff_t>(out_extent)) hh = static_cast<std::ptrdiff_t>(out_extent);
    if (l > hh) l = hh;
    lo = static_cast<std::size_t>(l);
    hi = static_cast<std::size_t>(hh);
}

/// Gathers one sample's input into a (ci*k*k) x (oh*ow) patch matrix so the
/// convolution becomes a dense product with contiguous inner loops. Padding
/// cells are zero.
template <class T>
void im2col(const T* xp, conv_acc_t<T>* col, std::size_t ci, std::size_t h, std::size_t wd,
            std::size_t k, std::size_t oh, std::size_t ow, ConvGeom g) {
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
    const std::size_t pos = oh * ow;
    for (std::size_t cin = 0; cin < ci; ++cin)
        for (std::size_t kh = 0; kh < k; ++kh) {
            std::size_t y_lo, y_hi;
            conv_tap_range(kh, g, h, oh, y_lo, y_hi);
            for (std::size_t kw = 0; kw < k; ++kw) {
                conv_acc_t<T>* dst = col + ((cin * k + kh) * k + kw) * pos;
                std::fill(dst, dst + pos, conv_acc_t<T>(0));
                std::size_t x_lo, x_hi;
                conv_tap_range(kw, g, wd, ow, x_lo, x_hi);
                std::ptrdiff_t xoff = static_cast<std::ptrdiff_t>(kw) - pad;
                for (std::size_t y = y_lo; y < y_hi; ++y) {
                    const T* xrow = xp + cin * h * wd +
                                    (static_cast<std::ptrdiff_t>(y) * s +
                                     static_cast<std::ptrdiff_t>(kh) - pad) * wd + xoff;
                    conv_acc_t<T>* drow = dst + y * ow;
                    for (std::size_t xx = x_lo; xx < x_hi; ++xx)
                        drow[xx] = static_cast<conv_acc_t<T>>(xrow[xx * g.stride]);
                }
            }
        }
}

/// Adjoint of im2col: scatter-adds the patch matrix back onto the input.
template <class T>
void col2im(const conv_acc_t<T>* col, T* xp, std::size_t ci, std::size_t h, std::size_t wd,
            std::size_t k, std::size_t oh, std::size_t ow, ConvGeom g) {
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
    const std::size_t pos = oh * ow;
    std::vector<conv_acc_t<T>> acc(ci * h * wd, conv_acc_t<T>(0));
    for (std::size_t cin = 0; cin < ci; ++cin)
        for (std::size_t kh = 0; kh < k; ++kh) {
            std::size_t y_lo, y_hi;
            conv_tap_range(kh, g, h, oh, y_lo, y_hi);
            for (std::size_t kw = 0; kw < k; ++kw) {
                const conv_acc_t<T>* src = col + ((cin * k + kh) * k + kw) * pos;
                std::size_t x_lo, x_hi;
                conv_tap_range(kw, g, wd, ow, x_lo, x_hi);
                std::ptrdiff_t xoff = static_cast<std::ptrdiff_t>(kw) - pad;
                for (std::size_t y = y_lo; y < y_hi; ++y) {
                    conv_acc_t<T>* arow = acc.data() + cin * h * wd +
                                          (static_cast<std::ptrdiff_t>(y) * s +
                                           static_cast<std::ptrdiff_t>(kh) - pad) * wd + xoff;
                    const conv_acc_t<T>* srow = src + y * ow;
                    for (std::size_t xx = x_lo; xx < x_hi; ++xx)
                        arow[xx * g.stride] += srow[xx];
                }
            }
        }
    for (std::size_t i = 0; i < acc.size(); ++i) xp[i] = static_cast<T>(acc[i]);
}

template <class T>
void conv_fwd_kernel(const std::vector<T>& x, const std::vector<T>& w, std::vector<T>& out,
                     std::size_t n, std::size_t ci, std::size_t h, std::size_t wd,
                     std::size_t co, std::size_t k, std::size_t oh, std::size_t ow, ConvGeom g) {
    const std::size_t q = ci * k * k, pos = oh * ow;
    parallel_for(n, [&](std::size_t in) {
        std::vector<conv_acc_t<T>> col(q * pos);
        im2col(x.data() + in * ci * h * wd, col.data(), ci, h, wd, k, oh, ow, g);
        std::vector<conv_acc_t<T>> row(pos);
        for (std::size_t c = 0; c < co; ++c) {
            std::fill(row.begin(), row.end(), conv_acc_t<T>(0));
            const T* wrow = w.data() + c * q;
            for (std::size_t j = 0; j < q; ++j) {
                conv_acc_t<T> wv = static_cast<conv_acc_t<T>>(wrow[j]);
                if (wv == conv_acc_t<T>(0)) continue;
                const conv_acc_t<T>* crow = col.data() + j * pos;
                for (std::size_t p = 0; p < pos; ++p) row[p] += wv * crow[p];
            }
            T* op = out.data() + (in * co + c) * pos;
            for (std::size_t p = 0; p < pos; ++p) op[p] = static_cast<T>(row[p]);
        }
    });
}

template <class T>
void conv_dinput_kernel(const std::vector<T>& gy, const std::vector<T>& w, std::vector<T>& gx,
                        std::size_t n, std::size_t ci, std::size_t h, std::size_t wd,
                        std::size_t co, std::size_t k, std::size_t oh, std::size_t ow, ConvGeom g) {
    const std::size_t q = ci * k * k, pos = oh * ow;
    parallel_for(n, [&](std::size_t in) {
        // D = W^T * G, then scatter back onto the input grid
        std::vector<conv_acc_t<T>> d(q * pos, conv_acc_t<T>(0));
        const T* gp = gy.data() + in * co * pos;
        for (std::size_t c = 0; c < co; ++c) {
            const T* wrow = w.data() + c * q;
            const T* grow = gp + c * pos;
            for (std::size_t j = 0; j < q; ++j) {
                conv_acc_t<T> wv = static_cast<conv_acc_t<T>>(wrow[j]);
                if (wv == conv_acc_t<T>(0)) continue;
                conv_acc_t<T>* drow = d.data() + j * pos;
                for (std::size_t p = 0; p < pos; ++p)
                    drow[p] += wv * static_cast<conv_acc_t<T>>(grow[p]);
            }
        }
        col2im(d.data(), gx.data() + in * ci * h * wd, ci, h, wd, k, oh, ow, g);
    });
}

template <class T>
void conv_dweight_kernel(const std::vector<T>& x, const std::vector<T>& gy, std::vector<T>& gw,
                         std::size_t n, std::size_t ci, std::size_t h, std::size_t wd,
                         std::size_t co, std::size_t k, std::size_t oh, std::size_t ow, ConvGeom g) {
    const std::size_t q = ci * k * k, pos = oh * ow;
    std::vector<conv_acc_t<T>> acc(co * q, conv_acc_t<T>(0));
    std::vector<conv_acc_t<T>> col(q * pos);
    for (std::size_t in = 0; in < n; ++in) {
        im2col(x.data() + in * ci * h * wd, col.data(), ci, h, wd, k, oh, ow, g);
        const T* gp = gy.data() + in * co * pos;
        parallel_for(co, [&](std::size_t c) {
            const T* grow = gp + c * pos;
            conv_acc_t<T>* arow = acc.data() + c * q;
            for (std::size_t j = 0; j < q; ++j) {
                const conv_acc_t<T>* crow = col.data() + j * pos;
                conv_acc_t<T> a = conv_acc_t<T>(0);
                for (std::size_t p = 0; p < pos; ++p)
                    a += static_cast<conv_acc_t<T>>(grow[p]) * crow[p];
                arow[j] += a;
            }
        });
    }
    for (std::size_t i = 0; i < co * q; ++i) gw[i] = static_cast<T>(acc[i]);
}

}  // namespace detail

template <class T>
TensorT<T> conv_dinput(const TensorT<T>& gy, const TensorT<T>& w, std::size_t h, std::size_t wd,
                       ConvGeom g);
template <class T>
TensorT<T> conv_dweight(const TensorT<T>& x, const TensorT<T>& gy, std::size_t k, ConvGeom g);

/// Cross-correlation of x (N,Cin,H,W) with w (Cout,Cin,K,K), no bias.
template <class T>
TensorT<T> conv_fwd(const TensorT<T>& x, const TensorT<T>& w, ConvGeom g) {
    require(x.ndim() == 4, "conv2d: input must be N x C x H x W, got " + shape_str(x.shape()));
    require(w.ndim() == 4, "conv2d: weight must be Cout x Cin x K x K, got " + shape_str(w.shape()));
    require(w.dim(2) == w.dim(3), "conv2d: kernel must be square, got " + shape_str(w.shape()));
    require(x.dim(1) == w.dim(1), "conv2d: input channels (" + std::to_string(x.dim(1)) +
                                      ") do not match weight channels (" + std::to_string(w.dim(1)) + ")");
    std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    std::size_t co = w.dim(0), k = w.dim(2);
    std::size_t oh = detail::conv_out_extent(h, k, g), ow = detail::conv_out_extent(wd, k, g);
    TensorT<T> out = TensorT<T>::zeros({n, co, oh, ow});
    detail::conv_fwd_kernel(x.data(), w.data(), out.data(), n, ci, h, wd, co, k, oh, ow, g);
    detail::record<T>(out, {x, w}, [x, w, h, wd, k, g](const TensorT<T>& gout) {
        return std::vector<TensorT<T>>{conv_dinput(gout, w, h, wd, g), conv_dweight(x, gout, k, g)};
    });
    return out;
}

/// Adjoint of conv_fwd in the input slot; also the transposed-conv forward.
template <class T>
TensorT<T> conv_dinput(const TensorT<T>& gy, const TensorT<T>& w, std::size_t h, std::size_t wd,
                       ConvGeom g) {
    std::size_t n = gy.dim(0), co = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    std::size_t ci = w.dim(1), k = w.dim(2);
    require(w.dim(0) == co, "conv2d backward: channel mismatch (" + std::to_string(w.dim(0)) + " vs " +
                                std::to_string(co) + ")");
    TensorT<T> out = TensorT<T>::zeros({n, ci, h, wd});
    detail::conv_dinput_kernel(gy.data(), w.data(), out.data(), n, ci, h, wd, co, k, oh, ow, g);
    detail::record<T>(out, {gy, w}, [gy, w, k, g](const TensorT<T>& gout) {
        return std::vector<TensorT<T>>{conv_fwd(gout, w, g), conv_dweight(gout, gy, k, g)};
    });
    return out;
}

/// Adjoint of conv_fwd in the weight slot.
template <class T>
TensorT<T> conv_dweight(const TensorT<T>& x, const TensorT<T>& gy, std::size_t k, ConvGeom g) {
    std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    std::size_t co = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    require(gy.dim(0) == n, "conv2d backward: batch mismatch");
    TensorT<T> out = TensorT<T>::zeros({co, ci, k, k});
    detail::conv_dweight_kernel(x.data(), gy.data(), out.data(), n, ci, h, wd, co, k, oh, ow, g);
    std::size_t hh = h, ww = wd;
    detail::record<T>(out, {x, gy}, [x, gy, hh, ww, g](const TensorT<T>& gout) {
        return std::vector<TensorT<T>>{conv_dinput(gy, gout, hh, ww, g), conv_fwd(x, gout, g)};
    });
    return out;
}

/// Adds a per-channel bias across N, H, W.
template <class T>
TensorT<T> channel_sums(const TensorT<T>& a);
template <class T>
TensorT<T> broadcast_channel(const TensorT<T>& v, std::vector<std::size_t> shape);

template <class T>
TensorT<T> add_channel(const TensorT<T>& x, const TensorT<T>& bias) {
    require(x.ndim() == 4 && bias.ndim() == 1 && bias.dim(0) == x.dim(1),
            "bias: expected " + std::to_string(x.dim(1)) + " channels, got shape " + shape_str(bias.shape()));
    return add(x, broadcast_channel(bias, x.shape()));
}

/// Sums an N x C x H x W tensor over N, H, W -> length-C vector.
template <class T>
TensorT<T> channel_sums(const TensorT<T>& a) {
    require(a.ndim() == 4, "channel_sums: expected rank 4, got " + shape_str(a.shape()));
    std::size_t n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
    TensorT<T> out = TensorT<T>::zeros({c});
    std::vector<double> acc(c, 0.0);
    const auto& av = a.data();
    for (std::size_t in = 0; in < n; ++in)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* p = av.data() + (in * c + ch) * hw;
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += static_cast<double>(p[i]);
            acc[ch] += s;
        }
    for (std::size_t ch = 0; ch < c; ++ch) out.at(ch) = static_cast<T>(acc[ch]);
    auto shape = a.shape();
    detail::record<T>(out, {a}, [shape](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{broadcast_channel(g, shape)};
    });
    return out;
}

/// Spreads a length-C vector across an N x C x H x W shape.
template <class T>
TensorT<T> broadcast_channel(const TensorT<T>& v, std::vector<std::size_t> shape) {
    require(v.ndim() == 1 && shape.size() == 4 && shape[1] == v.dim(0),
            "broadcast_channel: vector " + shape_str(v.shape()) + " vs target " + shape_str(shape));
    std::size_t n = shape[0], c = shape[1], hw = shape[2] * shape[3];
    TensorT<T> out = TensorT<T>::zeros(shape);
    auto& ov = out.data();
    const auto& vv = v.data();
    for (std::size_t in = 0; in < n; ++in)
        for (std::size_t ch = 0; ch < c; ++ch)
            std::fill(ov.begin() + (in * c + ch) * hw, ov.begin() + (in * c + ch + 1) * hw, vv[ch]);
    detail::record<T>(out, {v}, [](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{channel_sums(g)};
    });
    return out;
}

// ---------------------------------------------------------------------------
// Layer-level operations.
// ---------------------------------------------------------------------------

/// 3x3 same-size convolution (padding 1) with bias, the detector building
/// block. General geometry is available through conv2d_g for the GAN nets.
template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    require(w.ndim() == 4 && w.dim(2) == 3 && w.dim(3) == 3,
            "conv2d: expected a 3x3 kernel, got " + shape_str(w.shape()));
    return add_channel(conv_fwd(x, w, ConvGeom{1, 1}), b);
}

template <class T>
TensorT<T> conv2d_g(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, ConvGeom g) {
    return add_channel(conv_fwd(x, w, g), b);
}

/// Transposed convolution: x (N,Cin,h,w), weight (Cin,Cout,K,K); output
/// extent (h-1)*stride - 2*pad + K. Shares kernels with conv_dinput.
template <class T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            ConvGeom g) {
    require(x.ndim() == 4 && w.ndim() == 4, "conv_transpose2d: rank-4 input and weight required");
    require(x.dim(1) == w.dim(0), "conv_transpose2d: input channels (" + std::to_string(x.dim(1)) +
                                      ") do not match weight in-channels (" + std::to_string(w.dim(0)) + ")");
    std::size_t k = w.dim(2);
    std::size_t oh = (x.dim(2) - 1) * g.stride + k - 2 * g.pad;
    std::size_t ow = (x.dim(3) - 1) * g.stride + k - 2 * g.pad;
    return add_channel(conv_dinput(x, w, oh, ow, g), b);
}

/// Affine map on a batch: (N,F) x (F,O) + bias(O).
template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    require(x.ndim() == 2, "linear: input must be N x F, got " + shape_str(x.shape()));
    require(w.ndim() == 2, "linear: weight must be F x O, got " + shape_str(w.shape()));
    require(x.dim(1) == w.dim(0), "linear: input features (" + std::to_string(x.dim(1)) +
                                      ") do not match weight rows (" + std::to_string(w.dim(0)) + ")");
    require(b.ndim() == 1 && b.dim(0) == w.dim(1),
            "linear: bias length " + std::to_string(b.size()) + " does not match outputs " +
                std::to_string(w.dim(1)));
    return add(matmul(x, w), repeat_rows(b, x.dim(0)));
}

enum class Activation { Relu, Tanh, LeakyRelu02 };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        default: return "leaky_relu(0.2)";
    }
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    TensorT<T> mask = TensorT<T>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    auto& mv = mask.data();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        bool pos = xv[i] > T(0);
        ov[i] = pos ? xv[i] : T(0);
        mv[i] = pos ? T(1) : T(0);
    }
    detail::record<T>(out, {x}, [mask](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(g, mask)};
    });
    return out;
}

template <class T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope = T(0.2)) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    TensorT<T> mask = TensorT<T>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    auto& mv = mask.data();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        bool pos = xv[i] > T(0);
        ov[i] = pos ? xv[i] : slope * xv[i];
        mv[i] = pos ? T(1) : slope;
    }
    detail::record<T>(out, {x}, [mask](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(g, mask)};
    });
    return out;
}

template <class T>
TensorT<T> tanh_t(const TensorT<T>& x) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = std::tanh(xv[i]);
    detail::record<T>(out, {x}, [out](const TensorT<T>& g) {
        // d tanh = 1 - tanh^2
        return std::vector<TensorT<T>>{mul(g, add_scalar(neg(square(out)), T(1)))};
    });
    return out;
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    TensorT<T> out = TensorT<T>::zeros(x.shape());
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = T(1) / (T(1) + std::exp(-xv[i]));
    detail::record<T>(out, {x}, [out](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(g, mul(out, add_scalar(neg(out), T(1))))};
    });
    return out;
}

template <class T>
TensorT<T> activation(Activation kind, const TensorT<T>& x) {
    switch (kind) {
        case Activation::Relu: return relu(x);
        case Activation::Tanh: return tanh_t(x);
        default: return leaky_relu(x, T(0.2));
    }
}

/// 2x2 max pooling, stride 2. Ties break to the first cell in row-major
/// scan order so the backward route is deterministic.
template <class T>
TensorT<T> maxpool2d(const TensorT<T>& x) {
    require(x.ndim() == 4, "maxpool2d: input must be N x C x H x W, got " + shape_str(x.shape()));
    std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    require(h % 2 == 0 && w % 2 == 0,
            "maxpool2d: spatial extents must be even, got " + std::to_string(h) + "x" + std::to_string(w));
    std::size_t oh = h / 2, ow = w / 2;
    TensorT<T> out = TensorT<T>::zeros({n, c, oh, ow});
    auto idx = std::make_shared<std::vector<std::uint32_t>>(n * c * oh * ow);
    const auto& xv = x.data();
    auto& ov = out.data();
    for (std::size_t pc = 0; pc < n * c; ++pc) {
        const T* xp = xv.data() + pc * h * w;
        T* op = ov.data() + pc * oh * ow;
        std::uint32_t* ip = idx->data() + pc * oh * ow;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                std::size_t best = (2 * y) * w + 2 * xx;
                T bv = xp[best];
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        std::size_t i = (2 * y + dy) * w + (2 * xx + dx);
                        if (xp[i] > bv) {
                            bv = xp[i];
                            best = i;
                        }
                    }
                op[y * ow + xx] = bv;
                ip[y * ow + xx] = static_cast<std::uint32_t>(best);
            }
    }
    auto in_shape = x.shape();
    detail::record<T>(out, {x}, [idx, in_shape, oh, ow, h, w](const TensorT<T>& g) {
        TensorT<T> gx = TensorT<T>::zeros(in_shape);
        auto& gv = gx.data();
        const auto& gg = g.data();
        std::size_t planes = in_shape[0] * in_shape[1];
        for (std::size_t pc = 0; pc < planes; ++pc) {
            const std::uint32_t* ip = idx->data() + pc * oh * ow;
            const T* gp = gg.data() + pc * oh * ow;
            T* xp = gv.data() + pc * h * w;
            for (std::size_t i = 0; i < oh * ow; ++i) xp[ip[i]] += gp[i];
        }
        return std::vector<TensorT<T>>{gx};
    });
    return out;
}

/// Repeatedly halves the spatial extent until 1x1 (power-of-two extents).
template <class T>
TensorT<T> maxpool_to_1x1(const TensorT<T>& x) {
    TensorT<T> t = x;
    while (t.dim(2) > 1 || t.dim(3) > 1) t = maxpool2d(t);
    return t;
}

enum class Mode { Train, Eval };

/// Inverted dropout: train mode zeroes with probability p and rescales
/// survivors by 1/(1-p); eval mode is the identity.
template <class T>
TensorT<T> dropout(const TensorT<T>& x, double p, Mode mode, std::uint64_t seed) {
    require(p >= 0.0 && p < 1.0, "dropout: rate must be in [0,1), got " + std::to_string(p));
    if (mode == Mode::Eval || p == 0.0) return x;
    TensorT<T> mask = TensorT<T>::zeros(x.shape());
    Rng rng(seed);
    T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    auto& mv = mask.data();
    for (std::size_t i = 0; i < mv.size(); ++i) mv[i] = (rng.uniform() < p) ? T(0) : keep_scale;
    return mul(x, mask);
}

/// Mean softmax cross-entropy over a batch of logits, stabilized by
/// max-subtraction.
template <class T>
TensorT<T> cross_entropy(const TensorT<T>& logits, const std::vector<std::size_t>& labels) {
    require(logits.ndim() == 2, "cross_entropy: logits must be N x K, got " + shape_str(logits.shape()));
    std::size_t n = logits.dim(0), k = logits.dim(1);
    require(k >= 2, "cross_entropy: need at least 2 classes");
    require(labels.size() == n, "cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i)
        require(labels[i] < k, "cross_entropy: label " + std::to_string(labels[i]) + " out of range [0," +
                                   std::to_string(k) + ") at row " + std::to_string(i));

    const auto& lv = logits.data();
    TensorT<T> dmean = TensorT<T>::zeros({n, k});  // (softmax - onehot)/N, fixed for backward
    auto& dv = dmean.data();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = lv.data() + i * k;
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
        double logz = std::log(z) + mx;
        loss += logz - static_cast<double>(row[labels[i]]);
        for (std::size_t j = 0; j < k; ++j) {
            double soft = std::exp(static_cast<double>(row[j]) - logz);
            dv[i * k + j] = static_cast<T>((soft - (labels[i] == j ? 1.0 : 0.0)) / static_cast<double>(n));
        }
    }
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(loss / static_cast<double>(n)));
    detail::record<T>(out, {logits}, [dmean, n, k](const TensorT<T>& g) {
        return std::vector<TensorT<T>>{mul(broadcast_scalar(g, {n, k}), dmean)};
    });
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization. Composed entirely from primitives, so its backward
// (including the batch-statistics paths) falls out of the tape.
// ---------------------------------------------------------------------------

struct BatchNormConfig {
    double momentum = 0.1;
    double epsilon = 1e-5;
};

template <class T>
struct BatchNormStateT {
    TensorT<T> gamma;         // per-channel scale, trainable
    TensorT<T> beta;          // per-channel shift, trainable
    TensorT<T> running_mean;  // per-channel buffers
    TensorT<T> running_var;
    BatchNormConfig cfg;
    Mode mode = Mode::Train;

    static BatchNormStateT make(std::size_t channels, BatchNormConfig cfg = {}) {
        BatchNormStateT s;
        s.gamma = TensorT<T>::full({channels}, T(1));
        s.beta = TensorT<T>::zeros({channels});
        s.running_mean = TensorT<T>::zeros({channels});
        s.running_var = TensorT<T>::full({channels}, T(1));
        s.gamma.set_requires_grad(true);
        s.beta.set_requires_grad(true);
        s.cfg = cfg;
        return s;
    }
};

using BatchNormState = BatchNormStateT<float>;

template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& x, BatchNormStateT<T>& state) {
    require(x.ndim() == 4, "batchnorm2d: input must be N x C x H x W, got " + shape_str(x.shape()));
    std::size_t c = x.dim(1);
    require(state.gamma.size() == c, "batchnorm2d: state has " + std::to_string(state.gamma.size()) +
                                         " channels, input has " + std::to_string(c));
    std::size_t cnt = x.dim(0) * x.dim(2) * x.dim(3);
    T eps = static_cast<T>(state.cfg.epsilon);

    if (state.mode == Mode::Train) {
        require(cnt >= 2, "batchnorm2d: train mode needs at least 2 values per channel, got " +
                              std::to_string(cnt));
        TensorT<T> mean_c = scale(channel_sums(x), T(1) / static_cast<T>(cnt));
        TensorT<T> centered = sub(x, broadcast_channel(mean_c, x.shape()));
        TensorT<T> var_c = scale(channel_sums(square(centered)), T(1) / static_cast<T>(cnt));
        TensorT<T> inv_std = reciprocal(sqrt_t(add_scalar(var_c, eps)));
        TensorT<T> xhat = mul(centered, broadcast_channel(inv_std, x.shape()));
        TensorT<T> out = add(mul(xhat, broadcast_channel(state.gamma, x.shape())),
                             broadcast_channel(state.beta, x.shape()));
        // Running statistics track the unbiased variance.
        double m = state.cfg.momentum;
        double unbias = static_cast<double>(cnt) / static_cast<double>(cnt - 1);
        for (std::size_t ch = 0; ch < c; ++ch) {
            state.running_mean.at(ch) =
                static_cast<T>((1.0 - m) * state.running_mean.at(ch) + m * mean_c.at(ch));
            state.running_var.at(ch) =
                static_cast<T>((1.0 - m) * state.running_var.at(ch) + m * unbias * var_c.at(ch));
        }
        return out;
    }

    TensorT<T> inv = TensorT<T>::zeros({c});
    for (std::size_t ch = 0; ch < c; ++ch)
        inv.at(ch) = T(1) / std::sqrt(state.running_var.at(ch) + eps);
    TensorT<T> centered = sub(x, broadcast_channel(state.running_mean, x.shape()));
    TensorT<T> xhat = mul(centered, broadcast_channel(inv, x.shape()));
    return add(mul(xhat, broadcast_channel(state.gamma, x.shape())),
               broadcast_channel(state.beta, x.shape()));
}

// ---------------------------------------------------------------------------
// Per-sample input-gradient norm, the core of the WGAN-GP penalty.
// ---------------------------------------------------------------------------

/// Returns ||d critic / d x||_2 per sample as a length-N tensor that remains
/// differentiable w.r.t. the critic's parameters. The critic must be built
/// from the double-differentiable subset (conv, linear, leaky_relu, sum/mean
/// reductions); model-level callers validate that before landing here.
template <class T>
TensorT<T> input_grad_norm(TapeT<T>& tape,
                           const std::function<TensorT<T>(const TensorT<T>&)>& critic_eval,
                           const TensorT<T>& x_hat) {
    TensorT<T> x = x_hat;
    x.set_requires_grad(true);
    TensorT<T> scores = critic_eval(x);
    TensorT<T> total = sum(scores);
    TensorT<T> gx = grad_of(tape, total, {x}, /*create_graph=*/true)[0];
    std::size_t n = x.dim(0);
    TensorT<T> flat = reshape(gx, {n, gx.size() / n});
    return sqrt_t(row_sums(square(flat)));
}

}  // namespace signet

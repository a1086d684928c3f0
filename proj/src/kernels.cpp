#include "evocnn/kernels.hpp"

#include <algorithm>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace evocnn::kernels {

ConvGeometry ConvGeometry::make(std::size_t batch, std::size_t in_c, std::size_t in_h, std::size_t in_w,
                                std::size_t out_c, std::size_t k_h, std::size_t k_w, std::size_t stride) {
    ConvGeometry g;
    g.batch = batch;
    g.in_c = in_c;
    g.in_h = in_h;
    g.in_w = in_w;
    g.out_c = out_c;
    g.k_h = k_h;
    g.k_w = k_w;
    g.stride = stride;
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    g.pad_h = (k_h - 1) / 2;
    g.pad_w = (k_w - 1) / 2;
    return g;
}

PoolGeometry PoolGeometry::make(std::size_t batch, std::size_t channels, std::size_t in_h, std::size_t in_w,
                                std::size_t pool_h, std::size_t pool_w) {
    PoolGeometry g;
    g.batch = batch;
    g.channels = channels;
    g.in_h = in_h;
    g.in_w = in_w;
    g.pool_h = pool_h;
    g.pool_w = pool_w;
    g.out_h = (in_h + pool_h - 1) / pool_h;
    g.out_w = (in_w + pool_w - 1) / pool_w;
    return g;
}

namespace {

// Output index range [lo, hi) whose input coordinate o*stride + k - pad falls inside [0, extent).
struct Span1 {
    std::size_t lo, hi;
};

inline Span1 valid_outputs(std::size_t k, std::size_t pad, std::size_t stride, std::size_t extent,
                           std::size_t out_extent) {
    // need o*stride + k >= pad and o*stride + k - pad <= extent - 1
    std::size_t lo = 0;
    if (pad > k) lo = (pad - k + stride - 1) / stride;
    const std::int64_t top = static_cast<std::int64_t>(extent) - 1 + static_cast<std::int64_t>(pad) -
                             static_cast<std::int64_t>(k);
    if (top < 0) return {0, 0};
    std::size_t hi = static_cast<std::size_t>(top) / stride + 1;
    hi = std::min(hi, out_extent);
    if (lo >= hi) return {0, 0};
    return {lo, hi};
}

// One (sample, filter) plane of the forward convolution.
inline void conv_forward_unit(const ConvGeometry& g, const double* in, const double* w, double bias,
                              double* out, std::size_t n, std::size_t oc) {
    double* o = out + (n * g.out_c + oc) * g.out_h * g.out_w;
    std::fill(o, o + g.out_h * g.out_w, bias);
    for (std::size_t ic = 0; ic < g.in_c; ++ic) {
        const double* x = in + (n * g.in_c + ic) * g.in_h * g.in_w;
        const double* wk = w + (oc * g.in_c + ic) * g.k_h * g.k_w;
        for (std::size_t kh = 0; kh < g.k_h; ++kh) {
            const Span1 rows = valid_outputs(kh, g.pad_h, g.stride, g.in_h, g.out_h);
            for (std::size_t kw = 0; kw < g.k_w; ++kw) {
                const Span1 cols = valid_outputs(kw, g.pad_w, g.stride, g.in_w, g.out_w);
                const double wv = wk[kh * g.k_w + kw];
                for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
                    const double* xr = x + (oh * g.stride + kh - g.pad_h) * g.in_w;
                    double* orow = o + oh * g.out_w;
                    if (g.stride == 1) {
                        const double* xs = xr + (cols.lo + kw - g.pad_w);
                        for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) orow[ow] += wv * xs[ow - cols.lo];
                    } else {
                        for (std::size_t ow = cols.lo; ow < cols.hi; ++ow)
                            orow[ow] += wv * xr[ow * g.stride + kw - g.pad_w];
                    }
                }
            }
        }
    }
}

// Input gradient of one sample.
inline void conv_backward_input_unit(const ConvGeometry& g, const double* grad, const double* w, double* gin,
                                     std::size_t n) {
    double* gi = gin + n * g.in_c * g.in_h * g.in_w;
    std::fill(gi, gi + g.in_c * g.in_h * g.in_w, 0.0);
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
        const double* go = grad + (n * g.out_c + oc) * g.out_h * g.out_w;
        for (std::size_t ic = 0; ic < g.in_c; ++ic) {
            double* gx = gi + ic * g.in_h * g.in_w;
            const double* wk = w + (oc * g.in_c + ic) * g.k_h * g.k_w;
            for (std::size_t kh = 0; kh < g.k_h; ++kh) {
                const Span1 rows = valid_outputs(kh, g.pad_h, g.stride, g.in_h, g.out_h);
                for (std::size_t kw = 0; kw < g.k_w; ++kw) {
                    const Span1 cols = valid_outputs(kw, g.pad_w, g.stride, g.in_w, g.out_w);
                    const double wv = wk[kh * g.k_w + kw];
                    for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
                        double* xr = gx + (oh * g.stride + kh - g.pad_h) * g.in_w;
                        const double* grow = go + oh * g.out_w;
                        for (std::size_t ow = cols.lo; ow < cols.hi; ++ow)
                            xr[ow * g.stride + kw - g.pad_w] += wv * grow[ow];
                    }
                }
            }
        }
    }
}

// Weight and bias gradients of one filter, accumulated over the batch in sample order.
inline void conv_backward_params_unit(const ConvGeometry& g, const double* grad, const double* in, double* gw,
                                      double* gb, std::size_t oc) {
    double* gwk = gw + oc * g.in_c * g.k_h * g.k_w;
    std::fill(gwk, gwk + g.in_c * g.k_h * g.k_w, 0.0);
    double bsum = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
        const double* go = grad + (n * g.out_c + oc) * g.out_h * g.out_w;
        for (std::size_t i = 0; i < g.out_h * g.out_w; ++i) bsum += go[i];
        for (std::size_t ic = 0; ic < g.in_c; ++ic) {
            const double* x = in + (n * g.in_c + ic) * g.in_h * g.in_w;
            for (std::size_t kh = 0; kh < g.k_h; ++kh) {
                const Span1 rows = valid_outputs(kh, g.pad_h, g.stride, g.in_h, g.out_h);
                for (std::size_t kw = 0; kw < g.k_w; ++kw) {
                    const Span1 cols = valid_outputs(kw, g.pad_w, g.stride, g.in_w, g.out_w);
                    double acc = 0.0;
                    for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
                        const double* xr = x + (oh * g.stride + kh - g.pad_h) * g.in_w;
                        const double* grow = go + oh * g.out_w;
                        for (std::size_t ow = cols.lo; ow < cols.hi; ++ow)
                            acc += grow[ow] * xr[ow * g.stride + kw - g.pad_w];
                    }
                    gwk[(ic * g.k_h + kh) * g.k_w + kw] += acc;
                }
            }
        }
    }
    gb[oc] = bsum;
}

inline void maxpool_unit(const PoolGeometry& g, const double* in, double* out, std::size_t* argmax,
                         std::size_t n, std::size_t c) {
    const std::size_t plane = (n * g.channels + c);
    const double* x = in + plane * g.in_h * g.in_w;
    double* o = out + plane * g.out_h * g.out_w;
    std::size_t* am = argmax + plane * g.out_h * g.out_w;
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        const std::size_t h0 = oh * g.pool_h, h1 = std::min(h0 + g.pool_h, g.in_h);
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::size_t w0 = ow * g.pool_w, w1 = std::min(w0 + g.pool_w, g.in_w);
            std::size_t best = h0 * g.in_w + w0;
            for (std::size_t h = h0; h < h1; ++h) {
                for (std::size_t w = w0; w < w1; ++w) {
                    if (x[h * g.in_w + w] > x[best]) best = h * g.in_w + w;
                }
            }
            o[oh * g.out_w + ow] = x[best];
            am[oh * g.out_w + ow] = plane * g.in_h * g.in_w + best;
        }
    }
}

inline void dense_forward_unit(const DenseGeometry& g, const double* in, const double* w, const double* b,
                               double* out, std::size_t n) {
    const double* x = in + n * g.in_features;
    for (std::size_t u = 0; u < g.units; ++u) {
        const double* wr = w + u * g.in_features;
        double acc = b[u];
        for (std::size_t i = 0; i < g.in_features; ++i) acc += wr[i] * x[i];
        out[n * g.units + u] = acc;
    }
}

inline void dense_backward_input_unit(const DenseGeometry& g, const double* grad, const double* w, double* gin,
                                      std::size_t n) {
    double* gi = gin + n * g.in_features;
    std::fill(gi, gi + g.in_features, 0.0);
    for (std::size_t u = 0; u < g.units; ++u) {
        const double gu = grad[n * g.units + u];
        const double* wr = w + u * g.in_features;
        for (std::size_t i = 0; i < g.in_features; ++i) gi[i] += gu * wr[i];
    }
}

inline void dense_backward_params_unit(const DenseGeometry& g, const double* grad, const double* in, double* gw,
                                       double* gb, std::size_t u) {
    double* gr = gw + u * g.in_features;
    std::fill(gr, gr + g.in_features, 0.0);
    double bsum = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
        const double gu = grad[n * g.units + u];
        bsum += gu;
        const double* x = in + n * g.in_features;
        for (std::size_t i = 0; i < g.in_features; ++i) gr[i] += gu * x[i];
    }
    gb[u] = bsum;
}

}  // namespace

namespace serial {

void conv_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weights,
                  std::span<const double> bias, std::span<double> out) {
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t oc = 0; oc < g.out_c; ++oc)
            conv_forward_unit(g, input.data(), weights.data(), bias[oc], out.data(), n, oc);
}

void conv_backward_input(const ConvGeometry& g, std::span<const double> grad_pre,
                         std::span<const double> weights, std::span<double> grad_in) {
    for (std::size_t n = 0; n < g.batch; ++n)
        conv_backward_input_unit(g, grad_pre.data(), weights.data(), grad_in.data(), n);
}

void conv_backward_params(const ConvGeometry& g, std::span<const double> grad_pre, std::span<const double> input,
                          std::span<double> grad_w, std::span<double> grad_b) {
    for (std::size_t oc = 0; oc < g.out_c; ++oc)
        conv_backward_params_unit(g, grad_pre.data(), input.data(), grad_w.data(), grad_b.data(), oc);
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> out,
                     std::span<std::size_t> argmax) {
    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t c = 0; c < g.channels; ++c) maxpool_unit(g, input.data(), out.data(), argmax.data(), n, c);
}

void dense_forward(const DenseGeometry& g, std::span<const double> input, std::span<const double> weights,
                   std::span<const double> bias, std::span<double> out) {
    for (std::size_t n = 0; n < g.batch; ++n)
        dense_forward_unit(g, input.data(), weights.data(), bias.data(), out.data(), n);
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> grad_out,
                          std::span<const double> weights, std::span<double> grad_in) {
    for (std::size_t n = 0; n < g.batch; ++n)
        dense_backward_input_unit(g, grad_out.data(), weights.data(), grad_in.data(), n);
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> grad_out, std::span<const double> input,
                           std::span<double> grad_w, std::span<double> grad_b) {
    for (std::size_t u = 0; u < g.units; ++u)
        dense_backward_params_unit(g, grad_out.data(), input.data(), grad_w.data(), grad_b.data(), u);
}

}  // namespace serial

namespace parallel {

void conv_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weights,
                  std::span<const double> bias, std::span<double> out) {
    const auto units = static_cast<std::int64_t>(g.batch * g.out_c);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < units; ++i) {
        const auto n = static_cast<std::size_t>(i) / g.out_c;
        const auto oc = static_cast<std::size_t>(i) % g.out_c;
        conv_forward_unit(g, input.data(), weights.data(), bias[oc], out.data(), n, oc);
    }
}

void conv_backward_input(const ConvGeometry& g, std::span<const double> grad_pre,
                         std::span<const double> weights, std::span<double> grad_in) {
    const auto units = static_cast<std::int64_t>(g.batch);
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < units; ++n)
        conv_backward_input_unit(g, grad_pre.data(), weights.data(), grad_in.data(), static_cast<std::size_t>(n));
}

void conv_backward_params(const ConvGeometry& g, std::span<const double> grad_pre, std::span<const double> input,
                          std::span<double> grad_w, std::span<double> grad_b) {
    const auto units = static_cast<std::int64_t>(g.out_c);
#pragma omp parallel for schedule(static)
    for (std::int64_t oc = 0; oc < units; ++oc)
        conv_backward_params_unit(g, grad_pre.data(), input.data(), grad_w.data(), grad_b.data(),
                                  static_cast<std::size_t>(oc));
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> out,
                     std::span<std::size_t> argmax) {
    const auto units = static_cast<std::int64_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < units; ++i)
        maxpool_unit(g, input.data(), out.data(), argmax.data(), static_cast<std::size_t>(i) / g.channels,
                     static_cast<std::size_t>(i) % g.channels);
}

void dense_forward(const DenseGeometry& g, std::span<const double> input, std::span<const double> weights,
                   std::span<const double> bias, std::span<double> out) {
    const auto units = static_cast<std::int64_t>(g.batch);
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < units; ++n)
        dense_forward_unit(g, input.data(), weights.data(), bias.data(), out.data(), static_cast<std::size_t>(n));
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> grad_out,
                          std::span<const double> weights, std::span<double> grad_in) {
    const auto units = static_cast<std::int64_t>(g.batch);
#pragma omp parallel for schedule(static)
    for (std::int64_t n = 0; n < units; ++n)
        dense_backward_input_unit(g, grad_out.data(), weights.data(), grad_in.data(), static_cast<std::size_t>(n));
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> grad_out, std::span<const double> input,
                           std::span<double> grad_w, std::span<double> grad_b) {
    const auto units = static_cast<std::int64_t>(g.units);
#pragma omp parallel for schedule(static)
    for (std::int64_t u = 0; u < units; ++u)
        dense_backward_params_unit(g, grad_out.data(), input.data(), grad_w.data(), grad_b.data(),
                                   static_cast<std::size_t>(u));
}

}  // namespace parallel

void set_thread_count(int threads) {
#ifdef _OPENMP
    if (threads <= 0) threads = omp_get_num_procs();
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace evocnn::kernels

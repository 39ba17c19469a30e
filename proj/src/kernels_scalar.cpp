#include <cmath>
#include <cstring>

#include "msdci/kernels.hpp"

// Reference kernels. These define the accumulation order every other
// backend must reproduce bitwise:
//   forward  — per output element, taps in (ic, ky, kx) order;
//   weights  — per weight element, terms in (n, oy, ox) order;
//   input    — per input element, terms in (n, oy, oc, ic, ky, kx, ox) order.

namespace msdci::kernels::scalar {

void conv_forward(const double* in, const double* w, double* out, const ConvGeom& g) {
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    const std::size_t ksize = g.kernel_h * g.kernel_w;
    for (std::size_t n = 0; n < g.batch; ++n) {
        const double* in_n = in + n * g.in_channels * in_plane;
        double* out_n = out + n * g.out_channels * out_plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * g.stride) -
                                       static_cast<std::ptrdiff_t>(g.pad_h);
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * g.stride) -
                                           static_cast<std::ptrdiff_t>(g.pad_w);
                for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
                    const double* w_oc = w + oc * g.in_channels * ksize;
                    double acc = 0.0;
                    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                        const double* in_c = in_n + ic * in_plane;
                        const double* w_c = w_oc + ic * ksize;
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                            const std::ptrdiff_t iy = iy0 + static_cast<std::ptrdiff_t>(ky * g.dilation);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                            const double* in_row = in_c + static_cast<std::size_t>(iy) * g.in_w;
                            const double* w_row = w_c + ky * g.kernel_w;
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const std::ptrdiff_t ix = ix0 + static_cast<std::ptrdiff_t>(kx * g.dilation);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                                acc += w_row[kx] * in_row[static_cast<std::size_t>(ix)];
                            }
                        }
                    }
                    out_n[oc * out_plane + oy * g.out_w + ox] = acc;
                }
            }
        }
    }
}

void conv_backward_weights(const double* in, const double* gout, double* gw, const ConvGeom& g) {
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    const std::size_t ksize = g.kernel_h * g.kernel_w;
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                    double acc = 0.0;
                    for (std::size_t n = 0; n < g.batch; ++n) {
                        const double* in_c = in + (n * g.in_channels + ic) * in_plane;
                        const double* g_c = gout + (n * g.out_channels + oc) * out_plane;
                        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride) -
                                                      static_cast<std::ptrdiff_t>(g.pad_h) +
                                                      static_cast<std::ptrdiff_t>(ky * g.dilation);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                            const double* in_row = in_c + static_cast<std::size_t>(iy) * g.in_w;
                            const double* g_row = g_c + oy * g.out_w;
                            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride) -
                                                          static_cast<std::ptrdiff_t>(g.pad_w) +
                                                          static_cast<std::ptrdiff_t>(kx * g.dilation);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                                acc += in_row[static_cast<std::size_t>(ix)] * g_row[ox];
                            }
                        }
                    }
                    gw[(oc * g.in_channels + ic) * ksize + ky * g.kernel_w + kx] = acc;
                }
            }
        }
    }
}

void conv_backward_input(const double* w, const double* gout, double* gin, const ConvGeom& g) {
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    const std::size_t ksize = g.kernel_h * g.kernel_w;
    std::memset(gin, 0, g.in_size() * sizeof(double));
    for (std::size_t n = 0; n < g.batch; ++n) {
        double* gin_n = gin + n * g.in_channels * in_plane;
        const double* g_n = gout + n * g.out_channels * out_plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * g.stride) -
                                       static_cast<std::ptrdiff_t>(g.pad_h);
            for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
                const double* g_row_base = g_n + oc * out_plane + oy * g.out_w;
                const double* w_oc = w + oc * g.in_channels * ksize;
                for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                    double* gin_c = gin_n + ic * in_plane;
                    const double* w_c = w_oc + ic * ksize;
                    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                        const std::ptrdiff_t iy = iy0 + static_cast<std::ptrdiff_t>(ky * g.dilation);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                        double* gin_row = gin_c + static_cast<std::size_t>(iy) * g.in_w;
                        const double* w_row = w_c + ky * g.kernel_w;
                        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                            const std::ptrdiff_t ix_base = -static_cast<std::ptrdiff_t>(g.pad_w) +
                                                           static_cast<std::ptrdiff_t>(kx * g.dilation);
                            const double wv = w_row[kx];
                            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                                const std::ptrdiff_t ix = ix_base +
                                                          static_cast<std::ptrdiff_t>(ox * g.stride);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                                gin_row[static_cast<std::size_t>(ix)] += wv * g_row_base[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void relu(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gout, double* gin, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gin[i] = x[i] > 0.0 ? gout[i] : 0.0;
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace msdci::kernels::scalar

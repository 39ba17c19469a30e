#include "msdci/kernels.hpp"

// AVX2 backend. Compiled with -mavx2 in its own translation unit; callers
// reach it only through the dispatch table after a runtime CPU check.
//
// Every kernel here is written so each vector lane owns one output element
// and performs the exact scalar sequence of IEEE mul/add operations
// (no FMA, no cross-lane reductions), which keeps results bitwise equal
// to the scalar backend.

#ifdef __AVX2__

#include <immintrin.h>

#include <cstring>
#include <vector>

namespace msdci::kernels::avx2 {

bool compiled_in() { return true; }

namespace {

// Valid (in-bounds) tap range along one axis for a given output coordinate.
inline void tap_range(std::size_t o, std::size_t stride, std::size_t pad, std::size_t dilation,
                      std::size_t kernel, std::size_t in_extent, std::size_t& k_lo,
                      std::size_t& k_hi) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(o * stride) -
                                static_cast<std::ptrdiff_t>(pad);
    k_lo = 0;
    while (k_lo < kernel &&
           base + static_cast<std::ptrdiff_t>(k_lo * dilation) < 0) {
        ++k_lo;
    }
    k_hi = kernel;
    while (k_hi > k_lo &&
           base + static_cast<std::ptrdiff_t>((k_hi - 1) * dilation) >=
               static_cast<std::ptrdiff_t>(in_extent)) {
        --k_hi;
    }
}

// w[oc][ic][ky][kx] -> wt[ic][ky][kx][oc]
std::vector<double> transpose_weights(const double* w, const ConvGeom& g) {
    const std::size_t ksize = g.kernel_h * g.kernel_w;
    std::vector<double> wt(g.weight_size());
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        for (std::size_t t = 0; t < g.in_channels * ksize; ++t) {
            wt[t * g.out_channels + oc] = w[oc * g.in_channels * ksize + t];
        }
    }
    return wt;
}

}  // namespace

void conv_forward(const double* in, const double* w, double* out, const ConvGeom& g) {
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    const std::size_t ksize = g.kernel_h * g.kernel_w;
    const std::size_t cout = g.out_channels;
    const std::vector<double> wt = transpose_weights(w, g);
    const double* wtp = wt.data();

    for (std::size_t n = 0; n < g.batch; ++n) {
        const double* in_n = in + n * g.in_channels * in_plane;
        double* out_n = out + n * cout * out_plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            std::size_t ky_lo, ky_hi;
            tap_range(oy, g.stride, g.pad_h, g.dilation, g.kernel_h, g.in_h, ky_lo, ky_hi);
            const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * g.stride) -
                                       static_cast<std::ptrdiff_t>(g.pad_h);
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                std::size_t kx_lo, kx_hi;
                tap_range(ox, g.stride, g.pad_w, g.dilation, g.kernel_w, g.in_w, kx_lo, kx_hi);
                const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * g.stride) -
                                           static_cast<std::ptrdiff_t>(g.pad_w);
                std::size_t oc = 0;
                for (; oc + 4 <= cout; oc += 4) {
                    __m256d acc = _mm256_setzero_pd();
                    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                        const double* in_c = in_n + ic * in_plane;
                        const double* wt_c = wtp + ic * ksize * cout;
                        for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                            const std::size_t iy = static_cast<std::size_t>(
                                iy0 + static_cast<std::ptrdiff_t>(ky * g.dilation));
                            const double* in_row = in_c + iy * g.in_w;
                            const double* wt_row = wt_c + ky * g.kernel_w * cout;
                            for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                                const std::size_t ix = static_cast<std::size_t>(
                                    ix0 + static_cast<std::ptrdiff_t>(kx * g.dilation));
                                const __m256d xv = _mm256_set1_pd(in_row[ix]);
                                const __m256d wv = _mm256_loadu_pd(wt_row + kx * cout + oc);
                                acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, xv));
                            }
                        }
                    }
                    alignas(32) double lanes[4];
                    _mm256_store_pd(lanes, acc);
                    double* o = out_n + oc * out_plane + oy * g.out_w + ox;
                    o[0] = lanes[0];
                    o[out_plane] = lanes[1];
                    o[2 * out_plane] = lanes[2];
                    o[3 * out_plane] = lanes[3];
                }
                for (; oc < cout; ++oc) {
                    const double* w_oc = w + oc * g.in_channels * ksize;
                    double acc = 0.0;
                    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                        const double* in_c = in_n + ic * in_plane;
                        const double* w_c = w_oc + ic * ksize;
                        for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                            const std::size_t iy = static_cast<std::size_t>(
                                iy0 + static_cast<std::ptrdiff_t>(ky * g.dilation));
                            const double* in_row = in_c + iy * g.in_w;
                            const double* w_row = w_c + ky * g.kernel_w;
                            for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                                const std::size_t ix = static_cast<std::size_t>(
                                    ix0 + static_cast<std::ptrdiff_t>(kx * g.dilation));
                                acc += w_row[kx] * in_row[ix];
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
    const std::size_t cout = g.out_channels;
    const std::size_t taps = g.in_channels * ksize;

    // gout[n][oc][oy][ox] -> gt[n][oy][ox][oc]; accumulate into gwt[tap][oc].
    std::vector<double> gt(g.out_size());
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t oc = 0; oc < cout; ++oc) {
            const double* src = gout + (n * cout + oc) * out_plane;
            double* dst = gt.data() + n * out_plane * cout + oc;
            for (std::size_t p = 0; p < out_plane; ++p) dst[p * cout] = src[p];
        }
    }
    std::vector<double> gwt(g.weight_size(), 0.0);

    for (std::size_t n = 0; n < g.batch; ++n) {
        const double* in_n = in + n * g.in_channels * in_plane;
        const double* gt_n = gt.data() + n * out_plane * cout;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            std::size_t ky_lo, ky_hi;
            tap_range(oy, g.stride, g.pad_h, g.dilation, g.kernel_h, g.in_h, ky_lo, ky_hi);
            const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * g.stride) -
                                       static_cast<std::ptrdiff_t>(g.pad_h);
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                std::size_t kx_lo, kx_hi;
                tap_range(ox, g.stride, g.pad_w, g.dilation, g.kernel_w, g.in_w, kx_lo, kx_hi);
                const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * g.stride) -
                                           static_cast<std::ptrdiff_t>(g.pad_w);
                const double* g_pos = gt_n + (oy * g.out_w + ox) * cout;
                for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                    const double* in_c = in_n + ic * in_plane;
                    for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const std::size_t iy = static_cast<std::size_t>(
                            iy0 + static_cast<std::ptrdiff_t>(ky * g.dilation));
                        const double* in_row = in_c + iy * g.in_w;
                        for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                            const std::size_t ix = static_cast<std::size_t>(
                                ix0 + static_cast<std::ptrdiff_t>(kx * g.dilation));
                            const double xv = in_row[ix];
                            double* gw_tap =
                                gwt.data() + ((ic * g.kernel_h + ky) * g.kernel_w + kx) * cout;
                            const __m256d xb = _mm256_set1_pd(xv);
                            std::size_t oc = 0;
                            for (; oc + 4 <= cout; oc += 4) {
                                const __m256d gv = _mm256_loadu_pd(g_pos + oc);
                                const __m256d acc = _mm256_loadu_pd(gw_tap + oc);
                                _mm256_storeu_pd(gw_tap + oc,
                                                 _mm256_add_pd(acc, _mm256_mul_pd(xb, gv)));
                            }
                            for (; oc < cout; ++oc) gw_tap[oc] += xv * g_pos[oc];
                        }
                    }
                }
            }
        }
    }

    for (std::size_t oc = 0; oc < cout; ++oc) {
        for (std::size_t t = 0; t < taps; ++t) {
            gw[oc * taps + t] = gwt[t * cout + oc];
        }
    }
}

void conv_backward_input(const double* w, const double* gout, double* gin, const ConvGeom& g) {
    if (g.stride != 1) {
        // Strided scatter has no contiguous lane mapping; defer to reference.
        scalar::conv_backward_input(w, gout, gin, g);
        return;
    }
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    const std::size_t ksize = g.kernel_h * g.kernel_w;
    std::memset(gin, 0, g.in_size() * sizeof(double));

    for (std::size_t n = 0; n < g.batch; ++n) {
        double* gin_n = gin + n * g.in_channels * in_plane;
        const double* g_n = gout + n * g.out_channels * out_plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy) -
                                       static_cast<std::ptrdiff_t>(g.pad_h);
            for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
                const double* g_row = g_n + oc * out_plane + oy * g.out_w;
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
                            const std::ptrdiff_t ix_off = static_cast<std::ptrdiff_t>(kx * g.dilation) -
                                                          static_cast<std::ptrdiff_t>(g.pad_w);
                            // With stride 1, ix = ox + ix_off, so the valid
                            // range is max(0,-ix_off) <= ox < min(out_w, in_w - ix_off).
                            const std::ptrdiff_t lo_s = ix_off < 0 ? -ix_off : 0;
                            std::ptrdiff_t hi_s = static_cast<std::ptrdiff_t>(g.in_w) - ix_off;
                            if (hi_s > static_cast<std::ptrdiff_t>(g.out_w)) {
                                hi_s = static_cast<std::ptrdiff_t>(g.out_w);
                            }
                            if (hi_s < lo_s) hi_s = lo_s;
                            const std::size_t ox_lo = static_cast<std::size_t>(lo_s);
                            const std::size_t ox_hi = static_cast<std::size_t>(hi_s);
                            const double wv = w_row[kx];
                            const __m256d wb = _mm256_set1_pd(wv);
                            double* dst = gin_row + ix_off;
                            std::size_t ox = ox_lo;
                            for (; ox + 4 <= ox_hi; ox += 4) {
                                const __m256d gv = _mm256_loadu_pd(g_row + ox);
                                const __m256d dv = _mm256_loadu_pd(dst + ox);
                                _mm256_storeu_pd(dst + ox,
                                                 _mm256_add_pd(dv, _mm256_mul_pd(wb, gv)));
                            }
                            for (; ox < ox_hi; ++ox) dst[ox] += wv * g_row[ox];
                        }
                    }
                }
            }
        }
    }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i,
                         _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void relu(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_and_pd(mask, xv));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gout, double* gin, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(gin + i, _mm256_and_pd(mask, _mm256_loadu_pd(gout + i)));
    }
    for (; i < n; ++i) gin[i] = x[i] > 0.0 ? gout[i] : 0.0;
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d c1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d c2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d ib1 = _mm256_set1_pd(bias1);
    const __m256d ib2 = _mm256_set1_pd(bias2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(c1, gv));
        vv = _mm256_add_pd(_mm256_mul_pd(b2, vv), _mm256_mul_pd(c2, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_div_pd(mv, ib1);
        const __m256d vhat = _mm256_div_pd(vv, ib2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        const __m256d pv = _mm256_loadu_pd(p + i);
        _mm256_storeu_pd(p + i,
                         _mm256_sub_pd(pv, _mm256_mul_pd(lrv, _mm256_div_pd(mhat, denom))));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace msdci::kernels::avx2

#else  // !__AVX2__

namespace msdci::kernels::avx2 {

bool compiled_in() { return false; }

void conv_forward(const double* in, const double* w, double* out, const ConvGeom& g) {
    scalar::conv_forward(in, w, out, g);
}
void conv_backward_weights(const double* in, const double* gout, double* gw, const ConvGeom& g) {
    scalar::conv_backward_weights(in, gout, gw, g);
}
void conv_backward_input(const double* w, const double* gout, double* gin, const ConvGeom& g) {
    scalar::conv_backward_input(w, gout, gin, g);
}
void add(const double* a, const double* b, double* out, std::size_t n) {
    scalar::add(a, b, out, n);
}
void relu(const double* x, double* out, std::size_t n) { scalar::relu(x, out, n); }
void relu_backward(const double* x, const double* gout, double* gin, std::size_t n) {
    scalar::relu_backward(x, gout, gin, n);
}
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
    scalar::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bias1, bias2);
}

}  // namespace msdci::kernels::avx2

#endif  // __AVX2__

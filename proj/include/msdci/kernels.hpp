#pragma once

#include <cstddef>
#include <string>

namespace msdci::kernels {

/// Geometry of one 2-D convolution. Spatial arithmetic is
/// out = floor((in + 2*pad - ((k-1)*dilation + 1)) / stride) + 1.
struct ConvGeom {
    std::size_t batch = 1;
    std::size_t in_channels = 1, in_h = 0, in_w = 0;
    std::size_t out_channels = 1, kernel_h = 1, kernel_w = 1;
    std::size_t stride = 1, dilation = 1;
    std::size_t pad_h = 0, pad_w = 0;
    std::size_t out_h = 0, out_w = 0;

    std::size_t in_size() const { return batch * in_channels * in_h * in_w; }
    std::size_t out_size() const { return batch * out_channels * out_h * out_w; }
    std::size_t weight_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
};

enum class Backend { scalar, avx2 };

/// Backend resolved once per process: MSDCI_KERNELS=scalar|avx2|auto wins,
/// otherwise runtime CPU detection. avx2 is refused when unavailable.
Backend active_backend();
void set_backend(Backend b);  // test hook
bool avx2_supported();
const char* backend_name(Backend b);

// All kernels below produce bitwise-identical results on every backend:
// the vector variants assign one accumulator lane per output element and
// keep the scalar accumulation order (and use mul+add, never fma).

/// out[n][oc][oy][ox] = sum over in-bounds taps (ic,ky,kx) of
/// w[oc][ic][ky][kx] * in[n][ic][oy*S - pad_h + ky*d][ox*S - pad_w + kx*d].
/// Zero-padding taps are skipped, in both backends.
void conv_forward(const double* in, const double* w, double* out, const ConvGeom& g);

/// gw[oc][ic][ky][kx] = sum over (n,oy,ox) of in(...) * gout[n][oc][oy][ox].
void conv_backward_weights(const double* in, const double* gout, double* gw, const ConvGeom& g);

/// gb[oc] = sum over (n,oy,ox) of gout.
void conv_backward_bias(const double* gout, double* gb, const ConvGeom& g);

/// gin accumulation, contribution order (n, oy, oc, ic, ky, kx, ox).
void conv_backward_input(const double* w, const double* gout, double* gin, const ConvGeom& g);

// Elementwise kernels.
void add(const double* a, const double* b, double* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
/// gin[i] = x[i] > 0 ? gout[i] : 0  (grad of relu at the forward input x).
void relu_backward(const double* x, const double* gout, double* gin, std::size_t n);

/// Bias-corrected Adam:
///   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g;
///   p -= lr * (m/bias1) / (sqrt(v/bias2) + eps)
/// with bias1 = 1-b1^t, bias2 = 1-b2^t precomputed by the caller.
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2);

// Reference implementations (always available; the dispatch table points
// here when AVX2 is off). Exposed for equivalence tests.
namespace scalar {
void conv_forward(const double* in, const double* w, double* out, const ConvGeom& g);
void conv_backward_weights(const double* in, const double* gout, double* gw, const ConvGeom& g);
void conv_backward_input(const double* w, const double* gout, double* gin, const ConvGeom& g);
void add(const double* a, const double* b, double* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
void relu_backward(const double* x, const double* gout, double* gin, std::size_t n);
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2);
}  // namespace scalar

namespace avx2 {
bool compiled_in();
void conv_forward(const double* in, const double* w, double* out, const ConvGeom& g);
void conv_backward_weights(const double* in, const double* gout, double* gw, const ConvGeom& g);
void conv_backward_input(const double* w, const double* gout, double* gin, const ConvGeom& g);
void add(const double* a, const double* b, double* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
void relu_backward(const double* x, const double* gout, double* gin, std::size_t n);
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2);
}  // namespace avx2

}  // namespace msdci::kernels

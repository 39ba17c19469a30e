#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "msdci/kernels.hpp"

namespace msdci::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend detect_backend() {
    if (const char* env = std::getenv("MSDCI_KERNELS")) {
        const std::string v(env);
        if (v == "scalar") return Backend::scalar;
        if (v == "avx2") {
            if (!avx2_supported()) {
                throw std::runtime_error("MSDCI_KERNELS=avx2 but AVX2 is unavailable");
            }
            return Backend::avx2;
        }
        if (v != "auto" && !v.empty()) {
            throw std::runtime_error("MSDCI_KERNELS must be scalar, avx2, or auto (got '" + v + "')");
        }
    }
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

std::atomic<int> g_backend{-1};

Backend resolve() {
    int b = g_backend.load(std::memory_order_relaxed);
    if (b < 0) {
        b = static_cast<int>(detect_backend());
        g_backend.store(b, std::memory_order_relaxed);
    }
    return static_cast<Backend>(b);
}

}  // namespace

bool avx2_supported() { return avx2::compiled_in() && cpu_has_avx2(); }

Backend active_backend() { return resolve(); }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported()) {
        throw std::runtime_error("cannot select AVX2 backend: unsupported on this CPU/build");
    }
    g_backend.store(static_cast<int>(b), std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

void conv_forward(const double* in, const double* w, double* out, const ConvGeom& g) {
    if (resolve() == Backend::avx2) {
        avx2::conv_forward(in, w, out, g);
    } else {
        scalar::conv_forward(in, w, out, g);
    }
}

void conv_backward_weights(const double* in, const double* gout, double* gw, const ConvGeom& g) {
    if (resolve() == Backend::avx2) {
        avx2::conv_backward_weights(in, gout, gw, g);
    } else {
        scalar::conv_backward_weights(in, gout, gw, g);
    }
}

void conv_backward_bias(const double* gout, double* gb, const ConvGeom& g) {
    const std::size_t out_plane = g.out_h * g.out_w;
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        double acc = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
            const double* g_c = gout + (n * g.out_channels + oc) * out_plane;
            for (std::size_t p = 0; p < out_plane; ++p) acc += g_c[p];
        }
        gb[oc] = acc;
    }
}

void conv_backward_input(const double* w, const double* gout, double* gin, const ConvGeom& g) {
    if (resolve() == Backend::avx2) {
        avx2::conv_backward_input(w, gout, gin, g);
    } else {
        scalar::conv_backward_input(w, gout, gin, g);
    }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    if (resolve() == Backend::avx2) {
        avx2::add(a, b, out, n);
    } else {
        scalar::add(a, b, out, n);
    }
}

void relu(const double* x, double* out, std::size_t n) {
    if (resolve() == Backend::avx2) {
        avx2::relu(x, out, n);
    } else {
        scalar::relu(x, out, n);
    }
}

void relu_backward(const double* x, const double* gout, double* gin, std::size_t n) {
    if (resolve() == Backend::avx2) {
        avx2::relu_backward(x, gout, gin, n);
    } else {
        scalar::relu_backward(x, gout, gin, n);
    }
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
    if (resolve() == Backend::avx2) {
        avx2::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bias1, bias2);
    } else {
        scalar::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bias1, bias2);
    }
}

}  // namespace msdci::kernels

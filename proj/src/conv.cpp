#include "msdci/conv.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace msdci {

ConvLayer make_conv(std::size_t out_ch, std::size_t in_ch, std::size_t kernel_h,
                    std::size_t kernel_w, std::size_t stride, std::size_t dilation,
                    std::size_t pad_h, std::size_t pad_w, bool with_bias, Activation act,
                    Rng& rng) {
    ConvLayer layer;
    layer.weights = Tensor({out_ch, in_ch, kernel_h, kernel_w});
    const double bound = std::sqrt(1.0 / static_cast<double>(in_ch * kernel_h * kernel_w));
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
        layer.weights[i] = rng.uniform(-bound, bound);
    }
    if (with_bias) {
        Tensor b({out_ch});
        for (std::size_t i = 0; i < out_ch; ++i) b[i] = rng.uniform(-bound, bound);
        layer.bias = std::move(b);
    }
    layer.stride = stride;
    layer.dilation = dilation;
    layer.pad_h = pad_h;
    layer.pad_w = pad_w;
    layer.activation = act;
    return layer;
}

kernels::ConvGeom conv_geometry(const Tensor& input, const ConvLayer& layer) {
    if (input.rank() != 4) {
        throw std::invalid_argument("conv2d: input must be rank 4, got " + input.shape_string());
    }
    if (layer.stride == 0 || layer.dilation == 0) {
        throw std::invalid_argument("conv2d: stride and dilation must be positive");
    }
    kernels::ConvGeom g;
    g.batch = input.extent(0);
    g.in_channels = input.extent(1);
    g.in_h = input.extent(2);
    g.in_w = input.extent(3);
    g.out_channels = layer.out_channels();
    g.kernel_h = layer.kernel_h();
    g.kernel_w = layer.kernel_w();
    g.stride = layer.stride;
    g.dilation = layer.dilation;
    g.pad_h = layer.pad_h;
    g.pad_w = layer.pad_w;
    if (g.in_channels != layer.in_channels()) {
        throw std::invalid_argument("conv2d: channel axis mismatch: input has " +
                                    std::to_string(g.in_channels) + " channels, layer expects " +
                                    std::to_string(layer.in_channels()));
    }
    const std::size_t eff_h = (g.kernel_h - 1) * g.dilation + 1;
    const std::size_t eff_w = (g.kernel_w - 1) * g.dilation + 1;
    if (g.in_h + 2 * g.pad_h < eff_h) {
        throw std::invalid_argument("conv2d: height axis too small: padded extent " +
                                    std::to_string(g.in_h + 2 * g.pad_h) +
                                    " < effective kernel " + std::to_string(eff_h));
    }
    if (g.in_w + 2 * g.pad_w < eff_w) {
        throw std::invalid_argument("conv2d: width axis too small: padded extent " +
                                    std::to_string(g.in_w + 2 * g.pad_w) +
                                    " < effective kernel " + std::to_string(eff_w));
    }
    g.out_h = (g.in_h + 2 * g.pad_h - eff_h) / g.stride + 1;
    g.out_w = (g.in_w + 2 * g.pad_w - eff_w) / g.stride + 1;
    return g;
}

std::array<std::size_t, 2> conv_output_extent(const Tensor& input, const ConvLayer& layer) {
    const auto g = conv_geometry(input, layer);
    return {g.out_h, g.out_w};
}

namespace {

void add_channel_bias(Tensor& out, const Tensor& bias) {
    const std::size_t n = out.extent(0), c = out.extent(1);
    const std::size_t plane = out.extent(2) * out.extent(3);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double* p = out.data() + (i * c + j) * plane;
            const double b = bias[j];
            for (std::size_t k = 0; k < plane; ++k) p[k] += b;
        }
    }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
    const auto g = conv_geometry(input, layer);
    Tensor out({g.batch, g.out_channels, g.out_h, g.out_w});
    kernels::conv_forward(input.data(), layer.weights.data(), out.data(), g);
    if (layer.bias) add_channel_bias(out, *layer.bias);
    if (layer.activation == Activation::relu) {
        kernels::relu(out.data(), out.data(), out.size());
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out) {
    const auto g = conv_geometry(input, layer);
    const std::vector<std::size_t> out_shape = {g.batch, g.out_channels, g.out_h, g.out_w};
    if (grad_out.shape() != out_shape) {
        throw std::invalid_argument("conv2d_backward: grad_out shape " + grad_out.shape_string() +
                                    " does not match forward output shape");
    }

    const Tensor* g_eff = &grad_out;
    Tensor masked;
    if (layer.activation == Activation::relu) {
        // Recompute the pre-activation to recover the ReLU mask.
        Tensor preact({g.batch, g.out_channels, g.out_h, g.out_w});
        kernels::conv_forward(input.data(), layer.weights.data(), preact.data(), g);
        if (layer.bias) add_channel_bias(preact, *layer.bias);
        masked = Tensor(preact.shape());
        kernels::relu_backward(preact.data(), grad_out.data(), masked.data(), masked.size());
        g_eff = &masked;
    }

    ConvGrads grads;
    grads.input = Tensor(input.shape());
    grads.weights = Tensor(layer.weights.shape());
    kernels::conv_backward_input(layer.weights.data(), g_eff->data(), grads.input.data(), g);
    kernels::conv_backward_weights(input.data(), g_eff->data(), grads.weights.data(), g);
    if (layer.bias) {
        Tensor gb({layer.out_channels()});
        kernels::conv_backward_bias(g_eff->data(), gb.data(), g);
        grads.bias = std::move(gb);
    }
    return grads;
}

Tensor relu_forward(const Tensor& x) {
    Tensor out(x.shape());
    kernels::relu(x.data(), out.data(), out.size());
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require_same_shape(input, grad_out, "relu_backward");
    Tensor gin(input.shape());
    kernels::relu_backward(input.data(), grad_out.data(), gin.data(), gin.size());
    return gin;
}

Tensor add_forward(const Tensor& a, const Tensor& b) { return add(a, b); }

}  // namespace msdci

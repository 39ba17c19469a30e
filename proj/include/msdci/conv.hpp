#pragma once

#include <array>
#include <optional>

#include "msdci/kernels.hpp"
#include "msdci/rng.hpp"
#include "msdci/tensor.hpp"

namespace msdci {

enum class Activation { none, relu };

/// A 2-D convolution layer. Weights are out_channels x in_channels x F_H x F_W.
/// Sampling and decomposition layers carry no bias and no activation.
struct ConvLayer {
    Tensor weights;
    std::optional<Tensor> bias;  // length out_channels
    std::size_t stride = 1;
    std::size_t dilation = 1;
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;
    Activation activation = Activation::none;

    std::size_t out_channels() const { return weights.extent(0); }
    std::size_t in_channels() const { return weights.extent(1); }
    std::size_t kernel_h() const { return weights.extent(2); }
    std::size_t kernel_w() const { return weights.extent(3); }
};

/// Uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)], fan_in = in*F_H*F_W.
ConvLayer make_conv(std::size_t out_ch, std::size_t in_ch, std::size_t kernel_h,
                    std::size_t kernel_w, std::size_t stride, std::size_t dilation,
                    std::size_t pad_h, std::size_t pad_w, bool with_bias, Activation act,
                    Rng& rng);

/// Output spatial extents; throws on channel mismatch or when the effective
/// kernel exceeds the padded input.
std::array<std::size_t, 2> conv_output_extent(const Tensor& input, const ConvLayer& layer);

kernels::ConvGeom conv_geometry(const Tensor& input, const ConvLayer& layer);

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

struct ConvGrads {
    Tensor input;
    Tensor weights;
    std::optional<Tensor> bias;
};

/// Gradients of sum(grad_out ⊙ conv2d_forward(input, layer)) with respect to
/// input, weights, and bias. Recomputes the pre-activation internally when
/// the layer has a ReLU.
ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

Tensor add_forward(const Tensor& a, const Tensor& b);
// The gradient of add passes through unchanged to both operands.

}  // namespace msdci

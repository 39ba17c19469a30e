#pragma once

#include "msdci/rng.hpp"
#include "msdci/tensor.hpp"

namespace msdci {

enum class Mode { train, eval };

/// Per-channel batch normalization state. running_var stays strictly positive.
struct BatchNormLayer {
    Tensor scale;         // gamma, length C
    Tensor shift;         // beta, length C
    Tensor running_mean;  // length C
    Tensor running_var;   // length C
    double epsilon = 1e-5;
    double momentum = 0.1;

    std::size_t channels() const { return scale.extent(0); }
};

/// scale = 1, shift = 0, running stats at the standard-normal fixed point.
BatchNormLayer make_batchnorm(std::size_t channels);

struct BnCache {
    Tensor batch_mean;  // per channel, train mode only
    Tensor batch_var;   // population variance over (N,H,W)
};

/// Train mode normalizes with batch statistics (population variance over the
/// N*H*W slice per channel) and updates the running statistics in place:
///   running = (1 - momentum) * running + momentum * batch.
/// Eval mode normalizes with the running statistics and leaves them alone.
/// Train mode on a batch of size < 2 is an error.
Tensor bn_forward(const Tensor& x, BatchNormLayer& layer, Mode mode, BnCache* cache = nullptr);

struct BnGrads {
    Tensor input;
    Tensor scale;
    Tensor shift;
};

BnGrads bn_backward(const Tensor& x, const BatchNormLayer& layer, Mode mode,
                    const BnCache& cache, const Tensor& grad_out);

}  // namespace msdci

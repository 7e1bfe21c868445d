#pragma once

#include "mrfusion/nn/param_set.hpp"

namespace mrfusion::nn {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of every trainable parameter:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Parameters without an entry in `grads` are treated as having zero gradient.
template <typename T>
void adam_step(ParamSet<T>& params, const Gradients<T>& grads, const AdamConfig& config);

}  // namespace mrfusion::nn

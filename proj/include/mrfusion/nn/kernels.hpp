#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mrfusion/nn/tensor.hpp"

// Stateless forward/backward kernels. Image tensors are H x W x C or
// N x H x W x C (channels last); a rank-3 input is treated as a batch of one
// and produces a rank-3 output.
namespace mrfusion::nn::kernels {

enum class Padding { same, valid };

struct ConvGeometry {
    std::size_t batch, in_h, in_w, in_c;
    std::size_t kernel, filters, stride, pad;
    std::size_t out_h, out_w;
};

ConvGeometry conv_geometry(const Shape& input, const Shape& weights, std::size_t stride,
                           Padding padding);

/// Cross-correlation with zero padding:
/// out[y,x,f] = bias[f] + sum_{k,l,c} w[k,l,c,f] * in[y*s + k - p, x*s + l - p, c].
/// With `per_sample_gemm` each sample is multiplied separately, so its result
/// does not depend on the other samples in the batch.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 std::size_t stride, Padding padding, bool per_sample_gemm = true);

template <typename T>
struct Conv2dGrads {
    Tensor<T> input;  // empty unless requested
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& out_grad, std::size_t stride, Padding padding,
                               bool need_input_grad);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& out_grad);

template <typename T>
struct PoolResult {
    Tensor<T> output;
    std::vector<std::uint32_t> argmax;  // flat input index feeding each output cell
};

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride);

/// Per-channel maximum over all spatial positions: H x W x C -> C,
/// N x H x W x C -> N x C.
template <typename T>
PoolResult<T> global_maxpool(const Tensor<T>& input);

/// Routes each output gradient to its recorded argmax.
template <typename T>
Tensor<T> pool_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                        const Tensor<T>& out_grad);

template <typename T>
struct BatchNormCache {
    Tensor<T> normalized;
    std::vector<T> inv_std;
    std::vector<double> batch_mean;
    std::vector<double> batch_var;  // biased
    std::size_t count = 0;          // elements per channel
};

/// Normalizes every channel (last axis) over all leading axes with batch
/// statistics. The leading axis must have extent >= 2.
template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                          double eps, BatchNormCache<T>& cache);

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var, double eps);

template <typename T>
struct BatchNormGrads {
    Tensor<T> input, gamma, beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_train_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                           const Tensor<T>& out_grad);

template <typename T>
BatchNormGrads<T> batchnorm_infer_backward(const Tensor<T>& input, const Tensor<T>& gamma,
                                           const Tensor<T>& running_mean,
                                           const Tensor<T>& running_var, double eps,
                                           const Tensor<T>& out_grad);

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// 1 / (1 - rate).
template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double rate, std::mt19937_64& rng);

template <typename T>
Tensor<T> multiply(const Tensor<T>& a, const Tensor<T>& b);

/// out = input . weights + bias for input N or B x N, weights N x M.
/// Accumulates sequentially over N so every row is independent of the batch.
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
    Tensor<T> input, weights, bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& out_grad, bool need_input_grad);

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

template <typename T>
struct SoftmaxCrossEntropy {
    double loss = 0;
    Tensor<T> probs;
};

/// Mean categorical cross-entropy of `labels` (one-hot rows) under
/// softmax(logits). Throws InputError when a label row is not one-hot.
template <typename T>
SoftmaxCrossEntropy<T> softmax_crossentropy(const Tensor<T>& logits, const Tensor<T>& labels);

/// Gradient of the mean loss w.r.t. the logits: (probs - labels) / batch.
template <typename T>
Tensor<T> softmax_crossentropy_backward(const Tensor<T>& probs, const Tensor<T>& labels);

/// Concatenates B x N_i matrices along the feature axis.
template <typename T>
Tensor<T> concat_features(const std::vector<const Tensor<T>*>& parts);

}  // namespace mrfusion::nn::kernels

#pragma once

#include <random>
#include <string>
#include <vector>

#include "mrfusion/nn/kernels.hpp"
#include "mrfusion/nn/tape.hpp"

// Differentiable ops recorded on a GradientTape. Parameters are looked up by
// name in the tape's ParamSet.
namespace mrfusion::nn {

using kernels::Padding;

struct BatchNormSettings {
    double eps = 1e-5;
    double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
};

/// Train mode multiplies the whole batch in one GEMM; infer mode multiplies
/// sample by sample so outputs are independent of batch composition.
template <typename T>
Var conv2d(GradientTape<T>& tape, Var x, const std::string& weight, const std::string& bias,
           std::size_t stride, Padding padding, Mode mode);

template <typename T>
Var relu(GradientTape<T>& tape, Var x);

/// In train mode uses batch statistics and, when `running_stats` is given,
/// folds them into `<prefix>.running_mean` / `<prefix>.running_var` there.
template <typename T>
Var batchnorm(GradientTape<T>& tape, Var x, const std::string& prefix, Mode mode,
              ParamSet<T>* running_stats = nullptr, BatchNormSettings settings = {});

template <typename T>
Var maxpool2d(GradientTape<T>& tape, Var x, std::size_t window, std::size_t stride);

template <typename T>
Var global_maxpool(GradientTape<T>& tape, Var x);

template <typename T>
Var dropout(GradientTape<T>& tape, Var x, double rate, Mode mode, std::mt19937_64& rng);

template <typename T>
Var dense(GradientTape<T>& tape, Var x, const std::string& weight, const std::string& bias);

template <typename T>
Var concat(GradientTape<T>& tape, const std::vector<Var>& parts);

template <typename T>
Var softmax(GradientTape<T>& tape, Var logits);

template <typename T>
struct LossOutput {
    Var loss;
    Tensor<T> probs;
};

template <typename T>
LossOutput<T> softmax_crossentropy(GradientTape<T>& tape, Var logits, const Tensor<T>& one_hot);

/// B x L one-hot matrix for 0-based class indices.
template <typename T>
Tensor<T> one_hot(const std::vector<std::size_t>& classes, std::size_t num_classes);

}  // namespace mrfusion::nn

#pragma once

#include <string>
#include <vector>

#include "mrfusion/nn/kernels.hpp"
#include "mrfusion/nn/tensor.hpp"

namespace mrfusion::model {

using nn::kernels::Padding;
using nn::Shape;

enum class LayerKind { conv2d, maxpool2d, global_maxpool, batchnorm, relu, dropout, dense, softmax };

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t kernel_size = 0;  // conv2d, maxpool2d
    std::size_t filters = 0;      // conv2d, dense
    std::size_t stride = 1;
    Padding padding = Padding::same;
    double rate = 0.0;  // dropout

    static LayerSpec conv(std::size_t kernel, std::size_t filters) {
        return {LayerKind::conv2d, kernel, filters, 1, Padding::same, 0.0};
    }
    static LayerSpec maxpool(std::size_t window) {
        return {LayerKind::maxpool2d, window, 0, window, Padding::valid, 0.0};
    }
    static LayerSpec global_maxpool() { return {LayerKind::global_maxpool}; }
    static LayerSpec batchnorm() { return {LayerKind::batchnorm}; }
    static LayerSpec relu() { return {LayerKind::relu}; }

    void validate() const;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// e.g. "conv2d(7,128,1,same)", "maxpool2d(2,2)", "relu".
std::string to_string(const LayerSpec& spec);
LayerSpec parse_layer_spec(const std::string& text);

enum class InputSource { pan, ms, fused };

std::string to_string(InputSource s);
InputSource parse_input_source(const std::string& s);

struct InputShape {
    std::size_t h = 0, w = 0, c = 0;
    friend bool operator==(const InputShape&, const InputShape&) = default;
};

std::string to_string(const InputShape& s);
InputShape parse_input_shape(const std::string& s);

/// One convolutional branch: an ordered layer list applied to one input
/// source, ending in a global max pool that yields the branch features.
struct BranchConfig {
    std::string name;
    InputSource source = InputSource::pan;
    InputShape input;
    std::vector<LayerSpec> layers;

    /// Throws ConfigError unless the branch ends in global_maxpool, conv
    /// filter counts never decrease, and the shapes compose.
    void validate() const;

    /// Per-sample H x W x C after every layer (C alone after global_maxpool).
    std::vector<Shape> layer_shapes() const;

    std::size_t feature_width() const;

    std::string layers_string() const;
};

/// Filter counts are divided by `width_divisor` (floored at 1) to obtain
/// narrower variants of the same topology; 1 gives the full-width branch.
BranchConfig build_pcnn(std::size_t width_divisor = 1, std::size_t patch = 32);
BranchConfig build_mscnn(std::size_t width_divisor = 1, std::size_t ms_bands = 4,
                         std::size_t ms_patch = 8);
BranchConfig build_cnnps_branch(std::size_t width_divisor = 1, std::size_t bands = 4,
                                std::size_t patch = 32);

}  // namespace mrfusion::model

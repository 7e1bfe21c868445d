#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrfusion/nn/param_set.hpp"

namespace mrfusion::nn {

/// Parameter checkpoint ("MRFW1"):
///   magic "MRFW1" | u64 count
///   count x { u64 name_len | name (UTF-8) | u64 rank | rank x u64 extent | f32 values }
///   u8 adam_present
///   if present: u64 step | u64 n | n x { u64 name_len | name | f32 m[] | f32 v[] }
/// All integers and floats little-endian; moment arrays take the shape of
/// the same-named parameter.
struct CheckpointData {
    struct Entry {
        std::string name;
        Tensor<float> value;
    };
    struct Moments {
        std::string name;
        Tensor<float> first, second;
    };
    std::vector<Entry> entries;
    bool has_adam = false;
    std::int64_t adam_step = 0;
    std::vector<Moments> moments;
};

void write_checkpoint(const std::string& path, const ParamSet<float>& params, bool with_adam);

CheckpointData read_checkpoint(const std::string& path);

/// Copies checkpoint values into an existing layout. Every parameter of
/// `params` must be present with identical shape.
void load_checkpoint(const std::string& path, ParamSet<float>& params);

}  // namespace mrfusion::nn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrfusion/nn/tensor.hpp"

namespace mrfusion::data {

using nn::Shape;
using nn::Tensor;

/// Integer raster (labels, object ids), row-major H x W.
struct IntRaster {
    std::size_t h = 0, w = 0;
    std::vector<std::int32_t> values;

    IntRaster() = default;
    IntRaster(std::size_t h_, std::size_t w_, std::int32_t fill = 0)
        : h(h_), w(w_), values(h_ * w_, fill) {}

    std::int32_t& at(std::size_t y, std::size_t x) { return values[y * w + x]; }
    std::int32_t at(std::size_t y, std::size_t x) const { return values[y * w + x]; }

    friend bool operator==(const IntRaster&, const IntRaster&) = default;
};

enum class RasterType { f32, i32 };

struct RasterHeader {
    std::size_t h = 0, w = 0, c = 0;
    RasterType dtype = RasterType::f32;
};

// Raster container: magic "MRRAST1\n", ASCII header "h w c dtype\n" with
// dtype in {f32, i32}, then the row-major little-endian payload.

/// Writes an H x W x C tensor (rank 2 is written with c = 1).
void write_raster(const std::string& path, const Tensor<float>& raster);
void write_raster(const std::string& path, const IntRaster& raster);

RasterHeader read_raster_header(const std::string& path);

/// Reads an f32 raster as an H x W x C tensor.
Tensor<float> read_raster(const std::string& path);

/// Reads an i32 single-band raster.
IntRaster read_int_raster(const std::string& path);

}  // namespace mrfusion::data

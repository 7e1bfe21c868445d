#pragma once

#include <string>
#include <vector>

#include "mrfusion/data/raster.hpp"

namespace mrfusion::data {

/// Per-band min/max used for normalization (and its inverse).
struct BandStats {
    std::vector<float> min, max;

    std::size_t bands() const noexcept { return min.size(); }
    friend bool operator==(const BandStats&, const BandStats&) = default;
};

/// Co-registered PAN / MS scene with ground truth.
struct RasterPair {
    Tensor<float> pan;    // Hp x Wp x 1
    Tensor<float> ms;     // Hp/r x Wp/r x c
    Tensor<float> fused;  // Hp x Wp x c full-resolution multi-band scene; empty when absent
    std::size_t ratio = 4;
    IntRaster labels;   // Hp x Wp, 0 = unlabeled, classes are 1-based
    IntRaster objects;  // Hp x Wp, 0 = no object
    BandStats pan_stats, ms_stats, fused_stats;
    bool normalized = false;
    std::vector<std::string> class_names;  // entry k-1 names class k

    std::size_t height() const { return pan.extent(0); }
    std::size_t width() const { return pan.extent(1); }
    std::size_t bands() const { return ms.extent(2); }
    std::size_t num_classes() const noexcept { return class_names.size(); }
    bool has_fused() const noexcept { return !fused.empty(); }
};

/// Checks shapes, ratio divisibility, label range and label purity of
/// objects. Throws DimensionError or LabelError.
void validate(const RasterPair& rp);

BandStats compute_band_stats(const Tensor<float>& raster);

struct NormalizeResult {
    Tensor<float> values;
    std::vector<bool> constant_band;  // bands mapped to zeros

    bool warning() const;
};

/// (v - min) / (max - min) per band; constant bands map to zeros and are
/// flagged.
NormalizeResult normalize(const Tensor<float>& raster, const BandStats& stats);

/// Normalizes every source of `rp` with full-scene stats and records them.
/// Returns one warning line per constant band.
std::vector<std::string> normalize_scene(RasterPair& rp);

// Dataset manifest: key=value text listing raster paths (relative to the
// manifest), ratio, band count and comma-separated class names.

void write_dataset(const std::string& manifest_path, const RasterPair& rp);

/// Loads and validates a dataset; normalizes it unless already stored
/// normalized. Warnings (constant bands) are appended to `warnings`.
RasterPair read_dataset(const std::string& manifest_path, bool normalize = true,
                        std::vector<std::string>* warnings = nullptr);

}  // namespace mrfusion::data

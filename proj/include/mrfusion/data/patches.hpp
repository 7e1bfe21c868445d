#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mrfusion/data/dataset.hpp"
#include "mrfusion/model/fusion_model.hpp"

namespace mrfusion::data {

/// PAN pixel coordinate (column x, row y).
struct Anchor {
    std::size_t x = 0, y = 0;
    friend auto operator<=>(const Anchor&, const Anchor&) = default;
};

/// Co-registered PAN / MS windows around a labeled anchor. The anchor sits
/// at PAN-local (d/2, d/2).
struct PatchPair {
    Tensor<float> pan;    // d x d x 1
    Tensor<float> ms;     // d/r x d/r x c
    Tensor<float> fused;  // d x d x c, only when the scene has a fused raster
    std::int32_t label = 0;
    std::int32_t object_id = 0;
    Anchor anchor;
    std::size_t pan_origin_x = 0, pan_origin_y = 0;
    std::size_t ms_origin_x = 0, ms_origin_y = 0;
};

/// Training-time extraction on the r-aligned lattice.
/// Throws AlignmentError, BoundsError or LabelError.
PatchPair extract_patch_pair(const RasterPair& rp, Anchor anchor, std::size_t d);

/// Map-time extraction for any anchor: PAN origin (x - d/2, y - d/2), MS origin
/// floor(origin / r); out-of-scene pixels replicate the nearest edge. The
/// label fields are copied from the anchor pixel (possibly 0).
PatchPair extract_clamped_patch_pair(const RasterPair& rp, Anchor anchor, std::size_t d);

/// Labeled, aligned, in-bounds anchors in row-major order. A nonzero
/// `per_object_cap` keeps at most that many anchors per object, evenly
/// strided over the object's anchors.
std::vector<Anchor> enumerate_anchors(const RasterPair& rp, std::size_t d,
                                      std::size_t per_object_cap = 0);

std::vector<PatchPair> enumerate_samples(const RasterPair& rp, std::size_t d,
                                         std::size_t per_object_cap = 0);

/// Stacks the selected samples into batched model inputs (PAN, MS and, when
/// present, fused).
model::ModelInput make_batch(const std::vector<PatchPair>& samples,
                             std::span<const std::size_t> indices);
model::ModelInput make_batch(const std::vector<PatchPair>& samples);

/// Zero-based class indices (label - 1) of the selected samples.
std::vector<std::size_t> class_indices(const std::vector<PatchPair>& samples,
                                       std::span<const std::size_t> indices);

}  // namespace mrfusion::data

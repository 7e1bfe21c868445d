#pragma once

#include "mrfusion/data/patches.hpp"
#include "mrfusion/model/fusion_model.hpp"

namespace mrfusion::training {

struct PredictOptions {
    std::size_t stride = 1;
    std::size_t patch = 32;
    std::size_t batch_size = 64;
};

struct MapResult {
    data::IntRaster labels;    // Hp x Wp, 1-based classes
    nn::Tensor<float> proba;   // Hp x Wp x L
    std::size_t anchors = 0;   // number of classified windows
};

/// Classifies the scene at PAN resolution. The scene is cut into stride x
/// stride blocks; each block is classified once from the window anchored at
/// its centre pixel (clamped to the scene) and every pixel of the block
/// receives that result. Windows use edge-clamped extraction, so border
/// pixels are labeled too. Throws DimensionError for scenes smaller than the
/// patch and StateError for untrained models.
MapResult predict_map(const model::FusionModel& model, const data::RasterPair& rp,
                      const PredictOptions& options = {});

}  // namespace mrfusion::training

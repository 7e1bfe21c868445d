#include "mrfusion/training/predict_map.hpp"

#include <algorithm>

#include "mrfusion/util/parallel.hpp"

namespace mrfusion::training {

MapResult predict_map(const model::FusionModel& model, const data::RasterPair& rp, const PredictOptions& options) {
    if (!model.trained()) throw StateError("predict_map needs a trained model");
    if (options.stride < 1) throw ConfigError("stride must be >= 1");
    if (options.batch_size < 1) throw ConfigError("batch size must be >= 1");
    const std::size_t H = rp.height(), W = rp.width(), d = options.patch, s = options.stride;
    if (H < d || W < d)
        throw DimensionError("scene " + std::to_string(H) + "x" + std::to_string(W) + " is smaller than the " +
                             std::to_string(d) + "-pixel patch");

    struct Block {
        std::size_t y0, x0;
        data::Anchor anchor;
    };
    std::vector<Block> blocks;
    for (std::size_t y0 = 0; y0 < H; y0 += s)
        for (std::size_t x0 = 0; x0 < W; x0 += s)
            blocks.push_back({y0, x0, {std::min(x0 + s / 2, W - 1), std::min(y0 + s / 2, H - 1)}});

    const std::size_t L = model.num_classes();
    MapResult res{data::IntRaster(H, W), nn::Tensor<float>(nn::Shape{H, W, L}), blocks.size()};
    const std::size_t bs = options.batch_size;
    const std::size_t n_batches = (blocks.size() + bs - 1) / bs;

    util::parallel_for(n_batches, [&](std::size_t b) {
        const std::size_t lo = b * bs, hi = std::min(blocks.size(), lo + bs);
        std::vector<data::PatchPair> pairs;
        pairs.reserve(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) pairs.push_back(data::extract_clamped_patch_pair(rp, blocks[i].anchor, d));
        const auto probs = model::predict_proba(model, data::make_batch(pairs));
        for (std::size_t i = lo; i < hi; ++i) {
            const float* p = probs.raw() + (i - lo) * L;
            const auto label = static_cast<std::int32_t>(std::max_element(p, p + L) - p + 1);
            const auto& blk = blocks[i];
            for (std::size_t y = blk.y0; y < std::min(H, blk.y0 + s); ++y)
                for (std::size_t x = blk.x0; x < std::min(W, blk.x0 + s); ++x) {
                    res.labels.at(y, x) = label;
                    std::copy(p, p + L, &res.proba.at(y, x, 0));
                }
        }
    });
    return res;
}

}  // namespace mrfusion::training

#include "mrfusion/data/patches.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace mrfusion::data {

namespace {

void check_patch_size(const RasterPair& rp, std::size_t d) {
    if (d < 2 || d % 2 != 0) throw DimensionError("patch size must be even and >= 2, got " + std::to_string(d));
    if (d % rp.ratio != 0)
        throw DimensionError("patch size " + std::to_string(d) + " is not divisible by ratio " +
                             std::to_string(rp.ratio));
}

// Copies an h x w window of `src` starting at (oy, ox); coordinates outside the
// raster are clamped to the nearest edge.
Tensor<float> window(const Tensor<float>& src, long long oy, long long ox, std::size_t h, std::size_t w) {
    const std::size_t c = src.extent(2);
    const long long sh = static_cast<long long>(src.extent(0)), sw = static_cast<long long>(src.extent(1));
    Tensor<float> out(Shape{h, w, c});
    for (std::size_t y = 0; y < h; ++y) {
        const long long yy = std::clamp(oy + static_cast<long long>(y), 0LL, sh - 1);
        for (std::size_t x = 0; x < w; ++x) {
            const long long xx = std::clamp(ox + static_cast<long long>(x), 0LL, sw - 1);
            const float* s = &src.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), 0);
            std::copy(s, s + c, &out.at(y, x, 0));
        }
    }
    return out;
}

long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

PatchPair extract_patch_pair(const RasterPair& rp, Anchor anchor, std::size_t d) {
    check_patch_size(rp, d);
    const std::size_t half = d / 2, r = rp.ratio;
    if (anchor.x < half || anchor.y < half || anchor.x + half > rp.width() || anchor.y + half > rp.height())
        throw BoundsError("window of anchor (" + std::to_string(anchor.x) + "," + std::to_string(anchor.y) +
                          ") leaves the scene");
    const std::size_t ox = anchor.x - half, oy = anchor.y - half;
    if (ox % r != 0 || oy % r != 0)
        throw AlignmentError("anchor (" + std::to_string(anchor.x) + "," + std::to_string(anchor.y) +
                             ") is not on the ratio-" + std::to_string(r) + " lattice");
    const auto label = rp.labels.at(anchor.y, anchor.x);
    if (label <= 0)
        throw LabelError("anchor (" + std::to_string(anchor.x) + "," + std::to_string(anchor.y) +
                         ") is unlabeled");

    PatchPair pp;
    pp.anchor = anchor;
    pp.label = label;
    pp.object_id = rp.objects.at(anchor.y, anchor.x);
    pp.pan_origin_x = ox;
    pp.pan_origin_y = oy;
    pp.ms_origin_x = ox / r;
    pp.ms_origin_y = oy / r;
    const auto sox = static_cast<long long>(ox), soy = static_cast<long long>(oy);
    pp.pan = window(rp.pan, soy, sox, d, d);
    pp.ms = window(rp.ms, soy / static_cast<long long>(r), sox / static_cast<long long>(r), d / r, d / r);
    if (rp.has_fused()) pp.fused = window(rp.fused, soy, sox, d, d);
    return pp;
}

PatchPair extract_clamped_patch_pair(const RasterPair& rp, Anchor anchor, std::size_t d) {
    check_patch_size(rp, d);
    if (anchor.x >= rp.width() || anchor.y >= rp.height())
        throw BoundsError("anchor outside the scene");
    const auto r = static_cast<long long>(rp.ratio);
    const long long ox = static_cast<long long>(anchor.x) - static_cast<long long>(d / 2);
    const long long oy = static_cast<long long>(anchor.y) - static_cast<long long>(d / 2);

    PatchPair pp;
    pp.anchor = anchor;
    pp.label = rp.labels.at(anchor.y, anchor.x);
    pp.object_id = rp.objects.at(anchor.y, anchor.x);
    pp.pan = window(rp.pan, oy, ox, d, d);
    pp.ms = window(rp.ms, floor_div(oy, r), floor_div(ox, r), d / rp.ratio, d / rp.ratio);
    if (rp.has_fused()) pp.fused = window(rp.fused, oy, ox, d, d);
    // Origins are reported clamped to the scene.
    pp.pan_origin_x = static_cast<std::size_t>(std::max(ox, 0LL));
    pp.pan_origin_y = static_cast<std::size_t>(std::max(oy, 0LL));
    pp.ms_origin_x = static_cast<std::size_t>(std::max(floor_div(ox, r), 0LL));
    pp.ms_origin_y = static_cast<std::size_t>(std::max(floor_div(oy, r), 0LL));
    return pp;
}

std::vector<Anchor> enumerate_anchors(const RasterPair& rp, std::size_t d, std::size_t per_object_cap) {
    check_patch_size(rp, d);
    std::vector<Anchor> all;
    const std::size_t half = d / 2;
    if (rp.height() < d || rp.width() < d) return all;
    for (std::size_t y = half; y + half <= rp.height(); y += rp.ratio)
        for (std::size_t x = half; x + half <= rp.width(); x += rp.ratio)
            if (rp.labels.at(y, x) > 0) all.push_back({x, y});
    if (per_object_cap == 0) return all;

    std::map<std::int32_t, std::vector<std::size_t>> by_object;
    for (std::size_t i = 0; i < all.size(); ++i) by_object[rp.objects.at(all[i].y, all[i].x)].push_back(i);
    std::vector<std::size_t> keep;
    for (const auto& [obj, idx] : by_object) {
        if (idx.size() <= per_object_cap) {
            keep.insert(keep.end(), idx.begin(), idx.end());
            continue;
        }
        for (std::size_t k = 0; k < per_object_cap; ++k) keep.push_back(idx[k * idx.size() / per_object_cap]);
    }
    std::sort(keep.begin(), keep.end());
    std::vector<Anchor> out;
    out.reserve(keep.size());
    for (auto i : keep) out.push_back(all[i]);
    return out;
}

std::vector<PatchPair> enumerate_samples(const RasterPair& rp, std::size_t d, std::size_t per_object_cap) {
    std::vector<PatchPair> out;
    for (const auto& a : enumerate_anchors(rp, d, per_object_cap)) out.push_back(extract_patch_pair(rp, a, d));
    return out;
}

model::ModelInput make_batch(const std::vector<PatchPair>& samples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw InputError("cannot build an empty batch");
    const auto& first = samples.at(indices[0]);
    auto stack = [&](auto member) {
        const Tensor<float>& proto = first.*member;
        if (proto.empty()) return Tensor<float>();
        Shape shape{indices.size()};
        shape.insert(shape.end(), proto.shape().begin(), proto.shape().end());
        Tensor<float> out(shape);
        const std::size_t n = proto.size();
        for (std::size_t b = 0; b < indices.size(); ++b) {
            const Tensor<float>& t = samples.at(indices[b]).*member;
            if (t.shape() != proto.shape())
                throw DimensionError("samples in one batch disagree in patch shape");
            std::copy(t.raw(), t.raw() + n, out.raw() + b * n);
        }
        return out;
    };
    model::ModelInput in;
    in.pan = stack(&PatchPair::pan);
    in.ms = stack(&PatchPair::ms);
    in.fused = stack(&PatchPair::fused);
    return in;
}

model::ModelInput make_batch(const std::vector<PatchPair>& samples) {
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return make_batch(samples, idx);
}

std::vector<std::size_t> class_indices(const std::vector<PatchPair>& samples,
                                       std::span<const std::size_t> indices) {
    std::vector<std::size_t> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        const auto lab = samples.at(i).label;
        if (lab < 1) throw LabelError("sample without a class label");
        out.push_back(static_cast<std::size_t>(lab - 1));
    }
    return out;
}

}  // namespace mrfusion::data

#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mrfusion/data/dataset.hpp"

namespace mrfusion::testing {

/// Random-valued h x w scene with ratio r and c MS bands. `label(y, x)`
/// gives the class of each PAN pixel; every class forms one object whose id
/// equals the label.
template <typename LabelFn>
data::RasterPair make_scene(std::size_t h, std::size_t w, std::size_t r, std::size_t c, LabelFn label,
                            std::uint64_t seed = 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    data::RasterPair rp;
    rp.ratio = r;
    rp.pan = nn::Tensor<float>(nn::Shape{h, w, 1});
    rp.ms = nn::Tensor<float>(nn::Shape{h / r, w / r, c});
    rp.fused = nn::Tensor<float>(nn::Shape{h, w, c});
    for (auto& v : rp.pan.storage()) v = u(rng);
    for (auto& v : rp.ms.storage()) v = u(rng);
    for (auto& v : rp.fused.storage()) v = u(rng);
    rp.labels = data::IntRaster(h, w);
    rp.objects = data::IntRaster(h, w);
    int max_label = 1;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const int k = static_cast<int>(label(y, x));
            rp.labels.at(y, x) = k;
            rp.objects.at(y, x) = k;
            max_label = std::max(max_label, k);
        }
    for (int k = 1; k <= max_label; ++k) rp.class_names.push_back("c" + std::to_string(k));
    return rp;
}

struct ClassSignature {
    std::vector<double> ms_mean;  // per band, reflectance units
    double pan_mean = 0;
    double dx_energy = 0, dy_energy = 0;  // mean squared PAN step inside an object
    double ms_dx_energy = 0;              // same for the MS band mean along x
};

/// Per-class statistics of a synthetic scene in reflectance units, undoing
/// the digital-number map offset 100 + 20 b, gain 1000 (1 + 0.1 b).
inline std::map<std::int32_t, ClassSignature> class_signatures(const data::RasterPair& rp) {
    const std::size_t c = rp.bands(), r = rp.ratio;
    auto refl = [](double dn, std::size_t b) { return (dn - (100.0 + 20.0 * b)) / (1000.0 * (1.0 + 0.1 * b)); };
    struct Acc {
        std::vector<double> ms;
        double n_ms = 0, pan = 0, n_pan = 0, dx = 0, ndx = 0, dy = 0, ndy = 0, mdx = 0, nmdx = 0;
    };
    std::map<std::int32_t, Acc> acc;
    const auto& obj = rp.objects;
    for (std::size_t y = 0; y < rp.height(); ++y)
        for (std::size_t x = 0; x < rp.width(); ++x) {
            const auto k = rp.labels.at(y, x);
            if (k <= 0) continue;
            auto& a = acc[k];
            const double p = refl(rp.pan.at(y, x, 0), 0);
            a.pan += p;
            a.n_pan += 1;
            if (x + 1 < rp.width() && obj.at(y, x + 1) == obj.at(y, x)) {
                const double q = refl(rp.pan.at(y, x + 1, 0), 0) - p;
                a.dx += q * q;
                a.ndx += 1;
            }
            if (y + 1 < rp.height() && obj.at(y + 1, x) == obj.at(y, x)) {
                const double q = refl(rp.pan.at(y + 1, x, 0), 0) - p;
                a.dy += q * q;
                a.ndy += 1;
            }
        }
    auto ms_mean = [&](std::size_t my, std::size_t mx) {
        double s = 0;
        for (std::size_t b = 0; b < c; ++b) s += refl(rp.ms.at(my, mx, b), b);
        return s / static_cast<double>(c);
    };
    // An MS cell belongs to a class when its whole footprint does.
    auto cell_object = [&](std::size_t my, std::size_t mx) -> std::int32_t {
        const auto o = obj.at(my * r, mx * r);
        for (std::size_t dy = 0; dy < r; ++dy)
            for (std::size_t dx = 0; dx < r; ++dx)
                if (obj.at(my * r + dy, mx * r + dx) != o) return 0;
        return o;
    };
    for (std::size_t my = 0; my < rp.ms.extent(0); ++my)
        for (std::size_t mx = 0; mx < rp.ms.extent(1); ++mx) {
            const auto o = cell_object(my, mx);
            if (o <= 0) continue;
            auto& a = acc[rp.labels.at(my * r, mx * r)];
            a.ms.resize(c, 0.0);
            for (std::size_t b = 0; b < c; ++b) a.ms[b] += refl(rp.ms.at(my, mx, b), b);
            a.n_ms += 1;
            if (mx + 1 < rp.ms.extent(1) && cell_object(my, mx + 1) == o) {
                const double q = ms_mean(my, mx + 1) - ms_mean(my, mx);
                a.mdx += q * q;
                a.nmdx += 1;
            }
        }
    std::map<std::int32_t, ClassSignature> out;
    for (auto& [k, a] : acc) {
        ClassSignature s;
        for (double v : a.ms) s.ms_mean.push_back(v / a.n_ms);
        s.pan_mean = a.pan / a.n_pan;
        s.dx_energy = a.dx / a.ndx;
        s.dy_energy = a.dy / a.ndy;
        s.ms_dx_energy = a.mdx / a.nmdx;
        out[k] = s;
    }
    return out;
}

}  // namespace mrfusion::testing

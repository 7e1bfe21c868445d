#include "mrfusion/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mrfusion::data {

ClassDesign class_design(std::size_t label) {
    if (label < 1) throw LabelError("class ids are 1-based");
    return {(label - 1) / 2, (label - 1) % 2};
}

std::vector<double> class_spectrum(std::size_t spectrum_id, std::size_t num_spectra, std::size_t bands,
                                   double amplitude) {
    if (num_spectra == 0 || spectrum_id >= num_spectra) throw ConfigError("spectrum id out of range");
    std::vector<double> v(bands);
    const double phase = std::numbers::pi * static_cast<double>(spectrum_id) / static_cast<double>(num_spectra);
    for (std::size_t b = 0; b < bands; ++b)
        v[b] = amplitude * std::cos(2.0 * std::numbers::pi * static_cast<double>(b) / static_cast<double>(bands) + phase);
    return v;
}

namespace {

struct Rect {
    std::size_t x0, y0, w, h;
};

}  // namespace

RasterPair synth_generate(const SynthConfig& cfg) {
    const std::size_t L = cfg.num_classes, r = cfg.ratio, c = cfg.bands, S = cfg.scene_size;
    if (L < 2) throw ConfigError("synthetic scenes need at least 2 classes");
    if (cfg.objects_per_class < 1) throw ConfigError("objects_per_class must be >= 1");
    if (r < 2) throw ConfigError("ratio must be >= 2");
    if (c < 2) throw ConfigError("synthetic scenes need at least 2 bands");
    if (S == 0 || S % r != 0) throw ConfigError("scene size must be a positive multiple of the ratio");

    const std::size_t n_obj = L * cfg.objects_per_class;
    const auto g = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_obj))));
    const std::size_t cell = (S / g) / r * r;
    if (cell < 3 * r)
        throw ConfigError("scene of " + std::to_string(S) + " pixels is too small for " + std::to_string(n_obj) +
                          " objects");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Object layout: one rectangle per grid cell, cells drawn at random.
    std::vector<std::size_t> cells(g * g);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
    std::shuffle(cells.begin(), cells.end(), rng);
    const std::size_t min_side = (cell / 2 + r - 1) / r, max_side = cell / r - 1;  // in units of r
    std::vector<Rect> rects(n_obj);
    std::vector<std::int32_t> obj_label(n_obj);
    for (std::size_t o = 0; o < n_obj; ++o) {
        std::uniform_int_distribution<std::size_t> side(min_side, max_side);
        const std::size_t w = side(rng) * r, h = side(rng) * r;
        const std::size_t cx = cells[o] % g, cy = cells[o] / g;
        const std::size_t ox = std::uniform_int_distribution<std::size_t>(0, (cell - w) / r)(rng) * r;
        const std::size_t oy = std::uniform_int_distribution<std::size_t>(0, (cell - h) / r)(rng) * r;
        rects[o] = {cx * cell + ox, cy * cell + oy, w, h};
        obj_label[o] = static_cast<std::int32_t>(o % L + 1);
    }

    RasterPair rp;
    rp.ratio = r;
    rp.labels = IntRaster(S, S);
    rp.objects = IntRaster(S, S);
    for (std::size_t k = 1; k <= L; ++k) rp.class_names.push_back("class" + std::to_string(k));

    // Full-resolution reflectance scene: background 0.5 plus per-object
    // spectrum, jitter and oriented period-r stripes.
    const std::size_t n_spec = (L + 1) / 2;
    Tensor<float> hr(Shape{S, S, c}, 0.5f);
    for (std::size_t o = 0; o < n_obj; ++o) {
        const auto design = class_design(static_cast<std::size_t>(obj_label[o]));
        auto spec = class_spectrum(design.spectrum, n_spec, c, cfg.spectral_amplitude);
        const double bright = cfg.brightness_jitter * gauss(rng);
        for (auto& v : spec) v += bright + cfg.spectral_jitter * gauss(rng);
        const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
        const auto& rc = rects[o];
        for (std::size_t y = rc.y0; y < rc.y0 + rc.h; ++y)
            for (std::size_t x = rc.x0; x < rc.x0 + rc.w; ++x) {
                const std::size_t t = design.texture == 0 ? x : y;
                const double tex = cfg.texture_amplitude *
                                   std::sin(2.0 * std::numbers::pi * static_cast<double>(t % r) /
                                                static_cast<double>(r) + phase);
                for (std::size_t b = 0; b < c; ++b) hr.at(y, x, b) = static_cast<float>(0.5 + spec[b] + tex);
                rp.labels.at(y, x) = obj_label[o];
                rp.objects.at(y, x) = static_cast<std::int32_t>(o + 1);
            }
    }
    for (auto& v : hr.storage()) v += static_cast<float>(cfg.fine_noise * gauss(rng));

    Tensor<float> pan(Shape{S, S, 1});
    for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x) {
            double s = 0.0;
            for (std::size_t b = 0; b < c; ++b) s += hr.at(y, x, b);
            pan.at(y, x, 0) = static_cast<float>(s / static_cast<double>(c) + cfg.pan_noise * gauss(rng));
        }

    const std::size_t M = S / r;
    Tensor<float> ms(Shape{M, M, c});
    for (std::size_t my = 0; my < M; ++my)
        for (std::size_t mx = 0; mx < M; ++mx)
            for (std::size_t b = 0; b < c; ++b) {
                double s = 0.0;
                for (std::size_t dy = 0; dy < r; ++dy)
                    for (std::size_t dx = 0; dx < r; ++dx) s += hr.at(my * r + dy, mx * r + dx, b);
                ms.at(my, mx, b) = static_cast<float>(s / static_cast<double>(r * r) + cfg.ms_noise * gauss(rng));
            }

    // Digital numbers with a per-band gain and offset.
    auto to_dn = [](Tensor<float>& t, double gain0) {
        const std::size_t bands = t.extent(2), n = t.size() / bands;
        for (std::size_t b = 0; b < bands; ++b) {
            const double gain = gain0 * (1.0 + 0.1 * static_cast<double>(b));
            const double offset = 100.0 + 20.0 * static_cast<double>(b);
            for (std::size_t i = 0; i < n; ++i) t[i * bands + b] = static_cast<float>(offset + gain * t[i * bands + b]);
        }
    };
    to_dn(pan, 1000.0);
    to_dn(ms, 1000.0);
    to_dn(hr, 1000.0);
    rp.pan = std::move(pan);
    rp.ms = std::move(ms);
    rp.fused = std::move(hr);
    validate(rp);
    return rp;
}

RasterPair synth_generate(std::size_t num_classes, std::size_t objects_per_class, std::size_t scene_size,
                          std::size_t r, std::size_t c, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.num_classes = num_classes;
    cfg.objects_per_class = objects_per_class;
    cfg.scene_size = scene_size;
    cfg.ratio = r;
    cfg.bands = c;
    cfg.seed = seed;
    return synth_generate(cfg);
}

}  // namespace mrfusion::data

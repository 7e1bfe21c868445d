#pragma once

#include <cstdint>
#include <vector>

#include "mrfusion/data/dataset.hpp"

namespace mrfusion::data {

/// Synthetic scene parameters. Amplitudes and noise levels are in
/// reflectance units before the per-band digital-number scaling.
struct SynthConfig {
    std::size_t num_classes = 4;
    std::size_t objects_per_class = 20;
    std::size_t scene_size = 512;
    std::size_t ratio = 4;
    std::size_t bands = 4;
    std::uint64_t seed = 0;

    double spectral_amplitude = 0.12;
    double texture_amplitude = 0.10;
    double brightness_jitter = 0.02;
    double spectral_jitter = 0.008;
    double fine_noise = 0.02;  // per band and full-resolution pixel
    double pan_noise = 0.01;
    double ms_noise = 0.01;
};

/// Class k (1-based) is the pair (spectrum (k-1)/2, texture (k-1)%2).
/// Classes 2j+1 and 2j+2 are spectral twins; classes with equal texture id
/// are texture twins.
struct ClassDesign {
    std::size_t spectrum = 0;
    std::size_t texture = 0;  // 0: stripes varying along x, 1: along y
};

ClassDesign class_design(std::size_t label);

/// Zero-sum per-band offset of a spectrum id, so PAN brightness carries no
/// spectral information.
std::vector<double> class_spectrum(std::size_t spectrum_id, std::size_t num_spectra, std::size_t bands,
                                   double amplitude);

/// Scene of labeled axis-aligned rectangles (r-aligned, jittered sizes).
/// PAN is the band mean of a full-resolution multi-band scene, MS its r x r
/// block mean; the textures have period r so they vanish in MS. Values are
/// raw digital numbers; call normalize_scene before training.
RasterPair synth_generate(const SynthConfig& config);

RasterPair synth_generate(std::size_t num_classes, std::size_t objects_per_class, std::size_t scene_size,
                          std::size_t r, std::size_t c, std::uint64_t seed);

}  // namespace mrfusion::data

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mrfusion/data/patches.hpp"

namespace mrfusion::data {

/// Symmetries of the square. Rotations are counter-clockwise; hflip mirrors
/// columns, vflip mirrors rows, transpose swaps rows and columns and
/// antitranspose mirrors across the other diagonal.
enum class Transform : std::uint8_t {
    identity,
    rot90,
    rot180,
    rot270,
    hflip,
    vflip,
    transpose,
    antitranspose,
};

inline constexpr std::array<Transform, 8> kAllTransforms{
    Transform::identity, Transform::rot90, Transform::rot180,    Transform::rot270,
    Transform::hflip,    Transform::vflip, Transform::transpose, Transform::antitranspose};

/// The augmentation menu.
inline constexpr std::array<Transform, 6> kAugmentations{
    Transform::rot90, Transform::rot180, Transform::rot270,
    Transform::hflip, Transform::vflip,  Transform::transpose};

std::string to_string(Transform t);

/// compose(a, b) applies b first, then a.
Transform compose(Transform a, Transform b);
Transform inverse(Transform t);

/// Source pixel read by output pixel (y, x) of an n x n image.
std::pair<std::size_t, std::size_t> source_pixel(Transform t, std::size_t y, std::size_t x, std::size_t n);

/// Applies `t` to a square n x n x c tensor.
Tensor<float> apply_transform(const Tensor<float>& patch, Transform t);

/// Same transform on every patch of the pair; label, object and anchor are
/// preserved.
PatchPair augment(const PatchPair& pp, Transform t);

/// Each sample followed by two copies under distinct transforms drawn
/// uniformly without replacement from the menu; output size is exactly 3x.
std::vector<PatchPair> build_training_set(const std::vector<PatchPair>& samples, std::uint64_t seed);

}  // namespace mrfusion::data

#include "mrfusion/data/augment.hpp"

#include <random>

namespace mrfusion::data {

namespace {

// Each transform as a signed permutation matrix acting on centred pixel
// coordinates (u, v) = (2y - (n-1), 2x - (n-1)).
struct Mat {
    int a, b, c, d;  // [[a, b], [c, d]]
    friend bool operator==(const Mat&, const Mat&) = default;
};

constexpr Mat matrix(Transform t) {
    switch (t) {
        case Transform::identity: return {1, 0, 0, 1};
        case Transform::rot90: return {0, -1, 1, 0};
        case Transform::rot180: return {-1, 0, 0, -1};
        case Transform::rot270: return {0, 1, -1, 0};
        case Transform::hflip: return {1, 0, 0, -1};
        case Transform::vflip: return {-1, 0, 0, 1};
        case Transform::transpose: return {0, 1, 1, 0};
        case Transform::antitranspose: return {0, -1, -1, 0};
    }
    return {1, 0, 0, 1};
}

Transform from_matrix(const Mat& m) {
    for (auto t : kAllTransforms)
        if (matrix(t) == m) return t;
    throw StateError("matrix is not a symmetry of the square");
}

Mat mul(const Mat& p, const Mat& q) {
    return {p.a * q.a + p.b * q.c, p.a * q.b + p.b * q.d, p.c * q.a + p.d * q.c, p.c * q.b + p.d * q.d};
}

}  // namespace

std::string to_string(Transform t) {
    switch (t) {
        case Transform::identity: return "identity";
        case Transform::rot90: return "rot90";
        case Transform::rot180: return "rot180";
        case Transform::rot270: return "rot270";
        case Transform::hflip: return "hflip";
        case Transform::vflip: return "vflip";
        case Transform::transpose: return "transpose";
        case Transform::antitranspose: return "antitranspose";
    }
    return "?";
}

Transform compose(Transform a, Transform b) { return from_matrix(mul(matrix(a), matrix(b))); }

Transform inverse(Transform t) {
    const Mat m = matrix(t);
    return from_matrix({m.a, m.c, m.b, m.d});
}

std::pair<std::size_t, std::size_t> source_pixel(Transform t, std::size_t y, std::size_t x, std::size_t n) {
    const Mat m = matrix(t);
    const long long k = static_cast<long long>(n) - 1;
    const long long u = 2 * static_cast<long long>(y) - k, v = 2 * static_cast<long long>(x) - k;
    // Orthogonal, so the inverse is the transpose.
    const long long su = m.a * u + m.c * v, sv = m.b * u + m.d * v;
    return {static_cast<std::size_t>((su + k) / 2), static_cast<std::size_t>((sv + k) / 2)};
}

Tensor<float> apply_transform(const Tensor<float>& patch, Transform t) {
    if (patch.rank() != 3 || patch.extent(0) != patch.extent(1))
        throw DimensionError("transforms need a square n x n x c patch, got " + nn::shape_string(patch.shape()));
    const std::size_t n = patch.extent(0), c = patch.extent(2);
    Tensor<float> out(patch.shape());
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const auto [sy, sx] = source_pixel(t, y, x, n);
            for (std::size_t b = 0; b < c; ++b) out.at(y, x, b) = patch.at(sy, sx, b);
        }
    return out;
}

PatchPair augment(const PatchPair& pp, Transform t) {
    PatchPair out = pp;
    out.pan = apply_transform(pp.pan, t);
    out.ms = apply_transform(pp.ms, t);
    if (!pp.fused.empty()) out.fused = apply_transform(pp.fused, t);
    return out;
}

std::vector<PatchPair> build_training_set(const std::vector<PatchPair>& samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    constexpr std::size_t m = kAugmentations.size();
    std::vector<PatchPair> out;
    out.reserve(samples.size() * 3);
    for (const auto& s : samples) {
        const auto i = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
        auto j = std::uniform_int_distribution<std::size_t>(0, m - 2)(rng);
        if (j >= i) ++j;
        out.push_back(s);
        out.push_back(augment(s, kAugmentations[i]));
        out.push_back(augment(s, kAugmentations[j]));
    }
    return out;
}

}  // namespace mrfusion::data

#include <doctest.h>

#include <fstream>
#include <random>

#include "mrfusion/forest/random_forest.hpp"
#include "mrfusion/util/errors.hpp"
#include "support/tmpdir.hpp"

using namespace mrfusion;
using namespace mrfusion::forest;
using nn::Shape;

namespace {

struct Blobs {
    Tensor<float> X;
    std::vector<std::int32_t> y;
};

// Gaussian blobs in F dimensions, centres 4 apart along distinct axes.
Blobs blobs(std::size_t n_per_class, std::size_t L, std::size_t F, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.0f, 1.0f);
    Blobs b{Tensor<float>(Shape{n_per_class * L, F}), {}};
    for (std::size_t k = 0; k < L; ++k)
        for (std::size_t i = 0; i < n_per_class; ++i) {
            const std::size_t row = b.y.size();
            for (std::size_t f = 0; f < F; ++f) b.X[row * F + f] = g(rng) + (f % L == k ? 4.0f : 0.0f);
            b.y.push_back(static_cast<std::int32_t>(k + 1));
        }
    return b;
}

double hit_rate(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
    return double(hits) / double(a.size());
}

ForestConfig small(std::size_t trees = 50, std::uint64_t seed = 1) {
    ForestConfig c;
    c.n_trees = trees;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_SUITE("random forest") {
    TEST_CASE("separable blobs") {
        const auto train = blobs(100, 3, 6, 1), test = blobs(100, 3, 6, 2);
        const auto rf = RandomForest::fit(train.X, train.y, 3, small(100));
        CHECK(hit_rate(rf.predict(train.X).labels, train.y) >= 0.99);
        CHECK(hit_rate(rf.predict(test.X).labels, test.y) >= 0.95);
        CHECK_FALSE(rf.degenerate());
    }

    TEST_CASE("without bootstrap, unlimited trees memorise distinct points") {
        const auto train = blobs(60, 4, 3, 3);
        auto cfg = small(10);
        cfg.bootstrap = false;
        const auto rf = RandomForest::fit(train.X, train.y, 4, cfg);
        CHECK(rf.predict(train.X).labels == train.y);
    }

    TEST_CASE("single-class training data gives a constant, flagged predictor") {
        auto b = blobs(20, 2, 3, 4);
        std::fill(b.y.begin(), b.y.end(), 2);
        const auto rf = RandomForest::fit(b.X, b.y, 3, small(5));
        CHECK(rf.degenerate());
        const auto p = rf.predict(blobs(10, 2, 3, 5).X);
        for (auto l : p.labels) CHECK(l == 2);
        for (std::size_t i = 0; i < p.labels.size(); ++i) CHECK(p.proba[i * 3 + 1] == 1.0);
    }

    TEST_CASE("fitting is deterministic per seed") {
        const auto b = blobs(40, 3, 5, 6);
        CHECK(RandomForest::fit(b.X, b.y, 3, small(20, 9)) == RandomForest::fit(b.X, b.y, 3, small(20, 9)));
        CHECK_FALSE(RandomForest::fit(b.X, b.y, 3, small(20, 9)) == RandomForest::fit(b.X, b.y, 3, small(20, 10)));
    }

    TEST_CASE("a stump splits halfway between neighbouring values") {
        Tensor<float> X(Shape{2, 1}, std::vector<float>{1.0f, 3.0f});
        auto cfg = small(1);
        cfg.bootstrap = false;
        const auto rf = RandomForest::fit(X, {1, 2}, 2, cfg);
        REQUIRE(rf.trees()[0].nodes[0].feature == 0);
        CHECK(rf.trees()[0].nodes[0].threshold == 2.0f);
        Tensor<float> q(Shape{3, 1}, std::vector<float>{1.9f, 2.0f, 2.1f});
        CHECK(rf.predict(q).labels == std::vector<std::int32_t>{1, 1, 2});
    }

    TEST_CASE("vote fractions form a distribution") {
        const auto b = blobs(50, 4, 4, 7);
        const auto rf = RandomForest::fit(b.X, b.y, 4, small(37));
        const auto p = rf.predict(blobs(30, 4, 4, 8).X);
        for (std::size_t i = 0; i < p.labels.size(); ++i) {
            double s = 0, best = 0;
            for (std::size_t k = 0; k < 4; ++k) {
                CHECK(p.proba[i * 4 + k] >= 0.0);
                s += p.proba[i * 4 + k];
                best = std::max(best, p.proba[i * 4 + k]);
            }
            CHECK(std::abs(s - 1.0) <= 1e-9);
            CHECK(p.proba[i * 4 + std::size_t(p.labels[i] - 1)] == best);
        }
    }

    TEST_CASE("training predictions are invariant to a monotone feature map") {
        // integer-valued features so x * x + 1 stays exact in float
        std::mt19937_64 rng(10);
        const std::size_t n = 150, F = 4;
        Tensor<float> X(Shape{n, F}), Y(Shape{n, F});
        std::vector<std::int32_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 1 + std::int32_t(i % 3);
            for (std::size_t f = 0; f < F; ++f) {
                const float v = float(rng() % 300 + (f == std::size_t(y[i]) ? 200 : 0));
                X[i * F + f] = v;
                Y[i * F + f] = v * v + 1.0f;
            }
        }
        auto cfg = small(25, 3);
        cfg.bootstrap = false;
        const auto a = RandomForest::fit(X, y, 3, cfg), b = RandomForest::fit(Y, y, 3, cfg);
        CHECK(a.predict(X).labels == b.predict(Y).labels);
        CHECK(a.predict(X).proba == b.predict(Y).proba);
    }

    TEST_CASE("leaf histograms of a tree account for its whole sample") {
        const auto b = blobs(30, 3, 4, 11);
        auto cfg = small(15);
        cfg.min_leaf = 3;
        cfg.max_depth = 4;
        const auto rf = RandomForest::fit(b.X, b.y, 3, cfg);
        for (const auto& t : rf.trees()) {
            std::uint64_t total = 0;
            for (auto h : t.hists) total += h;
            CHECK(total == b.y.size());
            for (std::size_t leaf = 0; leaf < t.leaf_count(3); ++leaf)
                CHECK(t.hists[leaf * 3] + t.hists[leaf * 3 + 1] + t.hists[leaf * 3 + 2] >= 3);
            // depth bound: follow every path from the root
            std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
            while (!stack.empty()) {
                auto [k, depth] = stack.back();
                stack.pop_back();
                CHECK(depth <= 4);
                if (t.nodes[k].feature >= 0) {
                    stack.push_back({t.nodes[k].left, depth + 1});
                    stack.push_back({t.nodes[k].right, depth + 1});
                }
            }
        }
    }

    TEST_CASE("errors") {
        const auto b = blobs(10, 2, 3, 12);
        const auto rf = RandomForest::fit(b.X, b.y, 2, small(3));
        CHECK_THROWS_AS(rf.predict(Tensor<float>(Shape{2, 4})), InputError);
        CHECK_THROWS_AS(RandomForest::fit(b.X, b.y, 2, small(0)), ConfigError);
        auto wrong = b.y;
        wrong[0] = 3;
        CHECK_THROWS_AS(RandomForest::fit(b.X, wrong, 2, small(3)), InputError);
        CHECK_THROWS_AS(RandomForest::fit(b.X, {1, 2}, 2, small(3)), InputError);
        auto nan = b.X;
        nan[4] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_AS(RandomForest::fit(nan, b.y, 2, small(3)), InputError);
    }

    TEST_CASE("files") {
        testing::TempDir dir;
        const auto b = blobs(30, 3, 4, 13);
        const auto rf = RandomForest::fit(b.X, b.y, 3, small(12));
        rf.save(dir.file("rf.bin"));
        const auto back = RandomForest::load(dir.file("rf.bin"));
        CHECK(back == rf);
        CHECK(back.predict(b.X).proba == rf.predict(b.X).proba);

        std::ifstream in(dir.file("rf.bin"), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        std::ofstream(dir.file("cut.bin"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
        CHECK_THROWS_AS(RandomForest::load(dir.file("cut.bin")), FormatError);
        bytes[0] = 'X';
        std::ofstream(dir.file("magic.bin"), std::ios::binary) << bytes;
        CHECK_THROWS_AS(RandomForest::load(dir.file("magic.bin")), FormatError);
        CHECK_THROWS_AS(RandomForest::load(dir.file("none.bin")), IoError);
    }
}

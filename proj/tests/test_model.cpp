#include <doctest.h>

#include <numeric>
#include <random>

#include "mrfusion/model/fusion_model.hpp"
#include "support/gradcheck.hpp"
#include "support/tmpdir.hpp"

using namespace mrfusion;
using namespace mrfusion::model;
using nn::Shape;
using testing::random_tensor;

namespace {

ModelInput random_input(std::size_t n, std::uint64_t seed, std::size_t d = 32, std::size_t r = 4,
                        std::size_t c = 4) {
    std::mt19937_64 rng(seed);
    ModelInput in;
    in.pan = random_tensor({n, d, d, 1}, rng, 0.0, 1.0).cast<float>();
    in.ms = random_tensor({n, d / r, d / r, c}, rng, 0.0, 1.0).cast<float>();
    return in;
}

std::vector<Shape> conv_outputs(const BranchConfig& b) {
    std::vector<Shape> out;
    const auto shapes = b.layer_shapes();
    for (std::size_t i = 0; i < b.layers.size(); ++i)
        if (b.layers[i].kind == LayerKind::conv2d) out.push_back(shapes[i]);
    return out;
}

Tensor<float> row_slice(const Tensor<float>& t, std::size_t row) {
    const std::size_t w = t.size() / t.extent(0);
    Shape s = t.shape();
    s[0] = 1;
    return Tensor<float>(s, std::vector<float>(t.raw() + row * w, t.raw() + (row + 1) * w));
}

ModelInput permuted(const ModelInput& in, const std::vector<std::size_t>& perm) {
    auto gather = [&](const Tensor<float>& t) {
        Shape shape = t.shape();
        shape[0] = perm.size();
        Tensor<float> out(shape);
        const std::size_t w = t.size() / t.extent(0);
        for (std::size_t i = 0; i < perm.size(); ++i)
            std::copy(t.raw() + perm[i] * w, t.raw() + (perm[i] + 1) * w, out.raw() + i * w);
        return out;
    };
    return {gather(in.pan), gather(in.ms), {}};
}

void zero_branch(FusionModel& m, const std::string& branch) {
    for (auto& e : m.params().entries())
        if (e.name.rfind(branch + ".", 0) == 0 && e.name.find("running_var") == std::string::npos) e.value.fill(0.0f);
}

}  // namespace

TEST_SUITE("architecture") {
    TEST_CASE("P-CNN stages and feature width") {
        const auto b = build_pcnn();
        CHECK(b.input == InputShape{32, 32, 1});
        CHECK(b.layers.back().kind == LayerKind::global_maxpool);
        CHECK(conv_outputs(b) == std::vector<Shape>{{32, 32, 128}, {16, 16, 256}, {8, 8, 512}});
        const auto shapes = b.layer_shapes();
        CHECK(shapes[shapes.size() - 2] == Shape{4, 4, 512});
        CHECK(shapes.back() == Shape{512});
        CHECK(b.feature_width() == 512);
        CHECK(b.layers[0] == LayerSpec::conv(7, 128));
    }

    TEST_CASE("MS-CNN keeps 8x8 and has no pooling") {
        const auto b = build_mscnn();
        CHECK(b.input == InputShape{8, 8, 4});
        CHECK(conv_outputs(b) == std::vector<Shape>{{8, 8, 256}, {8, 8, 512}, {8, 8, 1024}});
        for (const auto& l : b.layers) CHECK(l.kind != LayerKind::maxpool2d);
        CHECK(b.feature_width() == 1024);
    }

    TEST_CASE("CNN_PS stages") {
        const auto b = build_cnnps_branch();
        CHECK(b.input == InputShape{32, 32, 4});
        CHECK(conv_outputs(b) == std::vector<Shape>{{32, 32, 256}, {16, 16, 512}, {8, 8, 1024}});
        const auto shapes = b.layer_shapes();
        CHECK(shapes[shapes.size() - 2] == Shape{4, 4, 1024});
        CHECK(b.feature_width() == 1024);
        CHECK(build_cnnps(5).feature_width() == 1024);
    }

    TEST_CASE("each conv is followed by relu then batch norm") {
        for (const auto& b : {build_pcnn(), build_mscnn(), build_cnnps_branch()})
            for (std::size_t i = 0; i < b.layers.size(); ++i)
                if (b.layers[i].kind == LayerKind::conv2d) {
                    CHECK(b.layers[i + 1].kind == LayerKind::relu);
                    CHECK(b.layers[i + 2].kind == LayerKind::batchnorm);
                }
    }

    TEST_CASE("head width follows the class count") {
        CHECK(build_mrfusion(13).params().at("head.weight").shape() == Shape{1536, 13});
        CHECK(build_mrfusion(8).params().at("head.weight").shape() == Shape{1536, 8});
        CHECK(build_mrfusion(8).feature_width() == 1536);
        CHECK_THROWS_AS(build_mrfusion(1), ConfigError);
        CHECK_THROWS_AS(build_cnnps(0), ConfigError);
    }

    TEST_CASE("width divisor narrows every conv") {
        const auto b = build_pcnn(4);
        CHECK(conv_outputs(b) == std::vector<Shape>{{32, 32, 32}, {16, 16, 64}, {8, 8, 128}});
        CHECK(build_mrfusion(4, 0, 8).feature_width() == 64 + 128);
    }

    TEST_CASE("branch validation") {
        auto b = build_pcnn();
        b.layers.pop_back();
        CHECK_THROWS_AS(b.validate(), ConfigError);
        auto d = build_mscnn();
        d.layers[3] = LayerSpec::conv(3, 64);  // second conv narrower than the first
        CHECK_THROWS_AS(d.validate(), ConfigError);
        auto e = build_pcnn();
        e.layers[0].kernel_size = 4;
        CHECK_THROWS_AS(e.validate(), ConfigError);
    }

    TEST_CASE("layer specs round-trip through text") {
        for (const auto& b : {build_pcnn(), build_mscnn(), build_cnnps_branch()})
            for (const auto& l : b.layers) CHECK(parse_layer_spec(to_string(l)) == l);
        CHECK_THROWS(parse_layer_spec("conv2d(3"));
        CHECK_THROWS(parse_layer_spec("bogus"));
    }
}

TEST_SUITE("forward") {
    TEST_CASE("full-width forward gives probability rows") {
        auto m = build_mrfusion(13, 1);
        auto p = predict_proba(m, random_input(2, 2));
        REQUIRE(p.shape() == Shape{2, 13});
        for (std::size_t r = 0; r < 2; ++r) {
            double s = 0;
            for (std::size_t j = 0; j < 13; ++j) s += p[r * 13 + j];
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
        auto one = predict_proba(m, random_input(1, 3));
        CHECK(one.shape() == Shape{1, 13});
    }

    TEST_CASE("full-width feature extraction is 1536 wide, PAN first") {
        auto m = build_mrfusion(4, 1);
        for (std::size_t n : {1u, 3u}) {
            auto f = extract_features(m, random_input(n, 4));
            CHECK(f.features.shape() == Shape{n, 1536});
            CHECK_FALSE(f.from_trained_model);
        }
        CHECK(m.branches()[0].source == InputSource::pan);
        CHECK(m.branches()[1].source == InputSource::ms);
        m.set_trained(true);
        CHECK(extract_features(m, random_input(1, 4)).from_trained_model);
    }

    TEST_CASE("CNN_PS consumes the fused raster") {
        auto m = build_cnnps(3, 1, 8);
        std::mt19937_64 rng(5);
        ModelInput in;
        in.fused = random_tensor({2, 32, 32, 4}, rng).cast<float>();
        CHECK(predict_proba(m, in).shape() == Shape{2, 3});
        CHECK_THROWS(predict_proba(m, random_input(2, 1)));
    }

    TEST_CASE("identical samples give identical rows") {
        auto m = build_mrfusion(5, 3, 4);
        auto in = random_input(1, 6);
        ModelInput two = permuted(in, {0, 0});
        auto p = predict_proba(m, two);
        CHECK(row_slice(p, 0).storage() == row_slice(p, 1).storage());
    }

    TEST_CASE("head applied to the features reproduces forward exactly") {
        auto m = build_mrfusion(6, 4, 4);
        auto in = random_input(5, 7);
        CHECK(head_proba(m, extract_features(m, in).features) == predict_proba(m, in));
    }

    TEST_CASE("permuting the batch permutes the output rows") {
        auto m = build_mrfusion(4, 5, 4);
        auto in = random_input(6, 8);
        std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
        auto p = predict_proba(m, in), q = predict_proba(m, permuted(in, perm));
        for (std::size_t i = 0; i < perm.size(); ++i) CHECK(row_slice(q, i) == row_slice(p, perm[i]));
    }

    TEST_CASE("a zeroed branch ignores its input") {
        for (const std::string branch : {"ms", "pan"}) {
            auto m = build_mrfusion(4, 6, 4);
            zero_branch(m, branch);
            auto a = random_input(3, 9), b = random_input(3, 10);
            if (branch == "ms")
                b.pan = a.pan;
            else
                b.ms = a.ms;
            CHECK_MESSAGE(predict_proba(m, a) == predict_proba(m, b), branch);
        }
    }

    TEST_CASE("PAN and MS batch sizes must agree") {
        auto m = build_mrfusion(4, 0, 8);
        auto in = random_input(3, 1);
        in.ms = random_input(2, 1).ms;
        CHECK_THROWS_AS(predict_proba(m, in), InputError);
    }

    TEST_CASE("train mode engages dropout and updates running statistics") {
        auto m = build_mrfusion(4, 7, 8);
        const auto before = m.params().at("pan.bn1.running_mean");
        auto in = random_input(4, 11);
        auto p1 = forward(m, in, Mode::train, 1), p2 = forward(m, in, Mode::train, 2);
        CHECK_FALSE(p1 == p2);
        CHECK_FALSE(m.params().at("pan.bn1.running_mean") == before);
    }

    TEST_CASE("initialisation is seeded") {
        CHECK(build_mrfusion(4, 11, 8).params() == build_mrfusion(4, 11, 8).params());
        CHECK_FALSE(build_mrfusion(4, 11, 8).params() == build_mrfusion(4, 12, 8).params());
    }

    TEST_CASE("ablations keep a single branch") {
        auto pan = build_ablation(ModelKind::pan_only, 4, 0);
        auto ms = build_ablation(ModelKind::ms_only, 4, 0);
        CHECK(pan.branches().size() == 1);
        CHECK(pan.branches()[0].source == InputSource::pan);
        CHECK(pan.feature_width() == 512);
        CHECK(ms.branches()[0].source == InputSource::ms);
        CHECK(ms.feature_width() == 1024);
        CHECK_THROWS_AS(build_ablation(ModelKind::mrfusion, 4), ConfigError);
        for (auto k : {ModelKind::mrfusion, ModelKind::cnnps, ModelKind::pan_only, ModelKind::ms_only})
            CHECK(parse_model_kind(to_string(k)) == k);
        CHECK_THROWS_AS(parse_model_kind("resnet"), ConfigError);
    }
}

TEST_SUITE("model files") {
    TEST_CASE("save and load reproduce predictions bitwise") {
        testing::TempDir dir;
        for (auto kind : {ModelKind::mrfusion, ModelKind::cnnps, ModelKind::ms_only}) {
            auto m = build_model(kind, 3, 21, 8, 0.4, 4);
            m.set_trained(true);
            const auto path = dir.file(to_string(kind) + ".ckpt");
            save_model(path, m);
            auto loaded = load_model(manifest_path_for(path));
            CHECK(loaded.kind() == kind);
            CHECK(loaded.trained());
            CHECK(loaded.params() == m.params());
            std::mt19937_64 rng(3);
            ModelInput in = random_input(2, 12);
            in.fused = random_tensor({2, 32, 32, 4}, rng).cast<float>();
            CHECK(predict_proba(loaded, in) == predict_proba(m, in));
        }
        CHECK_THROWS_AS(load_model(dir.file("missing.manifest")), IoError);
    }
}

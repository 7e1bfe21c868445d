#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mrfusion::testing {

using nn::Mode;
using nn::Padding;
using nn::Shape;

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

Var weighted_sum(GradientTape<double>& tape, Var x, const Tensor<double>& w) {
    const auto& v = tape.value(x);
    if (v.size() != w.size()) throw DimensionError("weighted_sum: projection size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
    return tape.record(Tensor<double>(Shape{1}, s), tape.requires_grad(x),
                       [x, w](GradientTape<double>& t, const Tensor<double>& dy) {
                           Tensor<double> g(t.value(x).shape());
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] = w[i] * dy[0];
                           t.accumulate(x, g);
                       });
}

Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(shape);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

Tensor<double> spaced_tensor(const Shape& shape, std::mt19937_64& rng, double margin) {
    Tensor<double> t(shape);
    std::vector<std::size_t> rank(t.size());
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);
    const double step = 4.0 * margin;
    const double half = static_cast<double>(t.size()) / 2.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = (static_cast<double>(rank[i]) + 0.5 - half) * step + 0.25 * step;
    return t;
}

namespace {

double eval_loss(const ParamSet<double>& params, const Tensor<double>& input, const LossBuilder& build) {
    GradientTape<double> tape(params);
    Var x = tape.input(input, false);
    return tape.value(build(tape, x))[0];
}

}  // namespace

GradCheck gradient_check(ParamSet<double>& params, Tensor<double> input, bool check_input, const LossBuilder& build,
                         double h) {
    GradCheck res;
    nn::Gradients<double> grads;
    Tensor<double> input_grad;
    {
        GradientTape<double> tape(params);
        Var x = tape.input(input, check_input);
        Var loss = build(tape, x);
        grads = tape.backward(loss);
        if (check_input) input_grad = tape.grad(x);
    }
    auto note = [&](double a, double n, const std::string& where) {
        const double e = relative_error(a, n);
        ++res.checked;
        if (e > res.max_rel_error || res.worst.empty()) {
            res.max_rel_error = e;
            res.worst = where;
        }
    };
    for (auto& e : params.entries()) {
        if (!e.trainable) continue;
        const auto& g = grads.at(e.name);
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double saved = e.value[i];
            e.value[i] = saved + h;
            const double up = eval_loss(params, input, build);
            e.value[i] = saved - h;
            const double down = eval_loss(params, input, build);
            e.value[i] = saved;
            note(g[i], (up - down) / (2.0 * h), e.name + "[" + std::to_string(i) + "]");
        }
    }
    if (check_input) {
        for (std::size_t i = 0; i < input.size(); ++i) {
            const double saved = input[i];
            input[i] = saved + h;
            const double up = eval_loss(params, input, build);
            input[i] = saved - h;
            const double down = eval_loss(params, input, build);
            input[i] = saved;
            const double a = input_grad.empty() ? 0.0 : input_grad[i];
            note(a, (up - down) / (2.0 * h), "input[" + std::to_string(i) + "]");
        }
    }
    return res;
}

std::vector<std::string> gradient_suite_layers() {
    return {"conv2d",  "relu",    "batchnorm_train", "batchnorm_infer", "maxpool2d", "global_maxpool",
            "dropout", "dense",   "concat",          "softmax",         "softmax_crossentropy"};
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct Case {
    ParamSet<double> params;
    Tensor<double> input;
    LossBuilder build;
    std::string shape;
};

Case make_case(const std::string& layer, std::mt19937_64& rng) {
    Case c;
    std::ostringstream desc;
    if (layer == "conv2d") {
        const std::size_t n = pick(rng, 1, 2), k = 2 * pick(rng, 0, 2) + 1;
        const std::size_t h = pick(rng, k, k + 4), w = pick(rng, k, k + 4);
        const std::size_t ch = pick(rng, 1, 3), f = pick(rng, 1, 3), stride = pick(rng, 1, 2);
        const Padding pad = pick(rng, 0, 1) ? Padding::same : Padding::valid;
        c.params.add("w", random_tensor({k, k, ch, f}, rng));
        c.params.add("b", random_tensor({f}, rng));
        c.input = random_tensor({n, h, w, ch}, rng);
        const auto out = nn::kernels::conv_geometry(c.input.shape(), c.params.at("w").shape(), stride, pad);
        auto proj = random_tensor({n, out.out_h, out.out_w, f}, rng);
        c.build = [=](GradientTape<double>& t, Var x) {
            return weighted_sum(t, nn::conv2d(t, x, "w", "b", stride, pad, Mode::train), proj);
        };
        desc << n << "x" << h << "x" << w << "x" << ch << " k" << k << " f" << f << " s" << stride
             << (pad == Padding::same ? " same" : " valid");
    } else if (layer == "relu") {
        const Shape s{pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5), pick(rng, 1, 3)};
        c.input = spaced_tensor(s, rng);
        auto proj = random_tensor(s, rng);
        c.build = [=](GradientTape<double>& t, Var x) { return weighted_sum(t, nn::relu(t, x), proj); };
        desc << nn::shape_string(s);
    } else if (layer == "batchnorm_train" || layer == "batchnorm_infer") {
        const std::size_t ch = pick(rng, 1, 3);
        const Shape s{pick(rng, 2, 4), pick(rng, 1, 3), pick(rng, 1, 3), ch};
        c.params.add("bn.gamma", random_tensor({ch}, rng, 0.5, 1.5));
        c.params.add("bn.beta", random_tensor({ch}, rng));
        c.params.add("bn.running_mean", random_tensor({ch}, rng), false);
        c.params.add("bn.running_var", random_tensor({ch}, rng, 0.5, 2.0), false);
        c.input = random_tensor(s, rng);
        auto proj = random_tensor(s, rng);
        const Mode mode = layer == "batchnorm_train" ? Mode::train : Mode::infer;
        c.build = [=](GradientTape<double>& t, Var x) {
            return weighted_sum(t, nn::batchnorm(t, x, "bn", mode), proj);
        };
        desc << nn::shape_string(s);
    } else if (layer == "maxpool2d") {
        const std::size_t win = pick(rng, 2, 3), stride = pick(rng, 1, win);
        std::size_t h = pick(rng, win, win + 4), w = pick(rng, win, win + 4);
        if (win == stride) {
            h -= h % win;
            w -= w % win;
        }
        const Shape s{pick(rng, 1, 2), h, w, pick(rng, 1, 3)};
        c.input = spaced_tensor(s, rng);
        const auto out = nn::kernels::maxpool2d(c.input, win, stride).output;
        auto proj = random_tensor(out.shape(), rng);
        c.build = [=](GradientTape<double>& t, Var x) {
            return weighted_sum(t, nn::maxpool2d(t, x, win, stride), proj);
        };
        desc << nn::shape_string(s) << " window " << win << " stride " << stride;
    } else if (layer == "global_maxpool") {
        const Shape s{pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5), pick(rng, 1, 4)};
        c.input = spaced_tensor(s, rng);
        auto proj = random_tensor({s[0], s[3]}, rng);
        c.build = [=](GradientTape<double>& t, Var x) { return weighted_sum(t, nn::global_maxpool(t, x), proj); };
        desc << nn::shape_string(s);
    } else if (layer == "dropout") {
        const Shape s{pick(rng, 1, 4), pick(rng, 1, 12)};
        const double rate = std::uniform_real_distribution<double>(0.0, 0.8)(rng);
        const std::uint64_t mask_seed = rng();
        c.input = random_tensor(s, rng);
        auto proj = random_tensor(s, rng);
        c.build = [=](GradientTape<double>& t, Var x) {
            std::mt19937_64 mask_rng(mask_seed);  // same mask on every evaluation
            return weighted_sum(t, nn::dropout(t, x, rate, Mode::train, mask_rng), proj);
        };
        desc << nn::shape_string(s) << " rate " << rate;
    } else if (layer == "dense") {
        const std::size_t b = pick(rng, 1, 4), n = pick(rng, 1, 6), m = pick(rng, 1, 5);
        c.params.add("w", random_tensor({n, m}, rng));
        c.params.add("b", random_tensor({m}, rng));
        c.input = random_tensor({b, n}, rng);
        auto proj = random_tensor({b, m}, rng);
        c.build = [=](GradientTape<double>& t, Var x) { return weighted_sum(t, nn::dense(t, x, "w", "b"), proj); };
        desc << b << "x" << n << " -> " << m;
    } else if (layer == "concat") {
        const std::size_t b = pick(rng, 1, 3), n = pick(rng, 1, 4), parts = pick(rng, 2, 3);
        std::size_t total = 0;
        for (std::size_t p = 0; p < parts; ++p) {
            const std::size_t m = pick(rng, 1, 4);
            total += m;
            c.params.add("w" + std::to_string(p), random_tensor({n, m}, rng));
            c.params.add("b" + std::to_string(p), random_tensor({m}, rng));
        }
        c.input = random_tensor({b, n}, rng);
        auto proj = random_tensor({b, total}, rng);
        c.build = [=](GradientTape<double>& t, Var x) {
            std::vector<Var> vs;
            for (std::size_t p = 0; p < parts; ++p)
                vs.push_back(nn::dense(t, x, "w" + std::to_string(p), "b" + std::to_string(p)));
            return weighted_sum(t, nn::concat(t, vs), proj);
        };
        desc << parts << " parts, " << b << "x" << total;
    } else if (layer == "softmax") {
        const Shape s{pick(rng, 1, 4), pick(rng, 2, 8)};
        c.input = random_tensor(s, rng, -3.0, 3.0);
        auto proj = random_tensor(s, rng);
        c.build = [=](GradientTape<double>& t, Var x) { return weighted_sum(t, nn::softmax(t, x), proj); };
        desc << nn::shape_string(s);
    } else if (layer == "softmax_crossentropy") {
        const std::size_t b = pick(rng, 1, 5), l = pick(rng, 2, 8);
        std::vector<std::size_t> cls(b);
        for (auto& k : cls) k = pick(rng, 0, l - 1);
        auto labels = nn::one_hot<double>(cls, l);
        c.input = random_tensor({b, l}, rng, -3.0, 3.0);
        c.build = [=](GradientTape<double>& t, Var x) { return nn::softmax_crossentropy(t, x, labels).loss; };
        desc << b << "x" << l;
    } else {
        throw ConfigError("unknown layer kind " + layer);
    }
    c.shape = desc.str();
    return c;
}

}  // namespace

LayerSuiteResult run_layer_gradient_suite(const std::string& layer, std::size_t n_shapes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LayerSuiteResult res{layer, 0, 0.0, ""};
    for (std::size_t i = 0; i < n_shapes; ++i) {
        Case c = make_case(layer, rng);
        const auto g = gradient_check(c.params, c.input, true, c.build);
        ++res.shapes;
        if (g.max_rel_error >= res.max_rel_error) {
            res.max_rel_error = g.max_rel_error;
            res.worst = c.shape + " at " + g.worst;
        }
    }
    return res;
}

}  // namespace mrfusion::testing

#include "mrfusion/nn/layers.hpp"

#include <memory>

namespace mrfusion::nn {

template <typename T>
Var conv2d(GradientTape<T>& tape, Var x, const std::string& weight, const std::string& bias,
           std::size_t stride, Padding padding, Mode mode) {
    const auto& params = tape.params();
    Tensor<T> out = kernels::conv2d(tape.value(x), params.at(weight), params.at(bias), stride,
                                    padding, mode == Mode::infer);
    return tape.record(
        std::move(out), true,
        [x, weight, bias, stride, padding](GradientTape<T>& t, const Tensor<T>& dy) {
            const bool need_dx = t.requires_grad(x);
            auto g = kernels::conv2d_backward(t.value(x), t.params().at(weight), dy, stride,
                                              padding, need_dx);
            if (t.params().entry(weight).trainable) {
                auto& gw = t.param_grad(weight);
                for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += g.weights[i];
            }
            if (t.params().entry(bias).trainable) {
                auto& gb = t.param_grad(bias);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.bias[i];
            }
            if (need_dx) t.accumulate(x, g.input);
        });
}

template <typename T>
Var relu(GradientTape<T>& tape, Var x) {
    return tape.record(kernels::relu(tape.value(x)), tape.requires_grad(x),
                       [x](GradientTape<T>& t, const Tensor<T>& dy) {
                           t.accumulate(x, kernels::relu_backward(t.value(x), dy));
                       });
}

template <typename T>
Var batchnorm(GradientTape<T>& tape, Var x, const std::string& prefix, Mode mode,
              ParamSet<T>* running_stats, BatchNormSettings settings) {
    const auto& params = tape.params();
    const std::string gamma = prefix + ".gamma";
    const std::string beta = prefix + ".beta";
    const std::string rmean = prefix + ".running_mean";
    const std::string rvar = prefix + ".running_var";
    const double eps = settings.eps;

    if (mode == Mode::infer) {
        Tensor<T> out = kernels::batchnorm_infer(tape.value(x), params.at(gamma), params.at(beta),
                                                 params.at(rmean), params.at(rvar), eps);
        return tape.record(std::move(out), true,
                           [x, gamma, beta, rmean, rvar, eps](GradientTape<T>& t,
                                                              const Tensor<T>& dy) {
                               const auto& p = t.params();
                               auto g = kernels::batchnorm_infer_backward(
                                   t.value(x), p.at(gamma), p.at(rmean), p.at(rvar), eps, dy);
                               auto& gg = t.param_grad(gamma);
                               auto& gb = t.param_grad(beta);
                               for (std::size_t i = 0; i < gg.size(); ++i) {
                                   gg[i] += g.gamma[i];
                                   gb[i] += g.beta[i];
                               }
                               t.accumulate(x, g.input);
                           });
    }

    auto cache = std::make_shared<kernels::BatchNormCache<T>>();
    Tensor<T> out =
        kernels::batchnorm_train(tape.value(x), params.at(gamma), params.at(beta), eps, *cache);
    if (running_stats) {
        auto& rm = running_stats->at(rmean);
        auto& rv = running_stats->at(rvar);
        const double mom = settings.momentum;
        const double n = static_cast<double>(cache->count);
        for (std::size_t c = 0; c < rm.size(); ++c) {
            const double unbiased = cache->batch_var[c] * n / (n - 1.0);
            rm[c] = static_cast<T>(mom * rm[c] + (1.0 - mom) * cache->batch_mean[c]);
            rv[c] = static_cast<T>(mom * rv[c] + (1.0 - mom) * unbiased);
        }
    }
    return tape.record(std::move(out), true,
                       [x, gamma, beta, cache](GradientTape<T>& t, const Tensor<T>& dy) {
                           auto g = kernels::batchnorm_train_backward(*cache, t.params().at(gamma),
                                                                      dy);
                           auto& gg = t.param_grad(gamma);
                           auto& gb = t.param_grad(beta);
                           for (std::size_t i = 0; i < gg.size(); ++i) {
                               gg[i] += g.gamma[i];
                               gb[i] += g.beta[i];
                           }
                           t.accumulate(x, g.input);
                       });
}

template <typename T>
Var maxpool2d(GradientTape<T>& tape, Var x, std::size_t window, std::size_t stride) {
    auto r = kernels::maxpool2d(tape.value(x), window, stride);
    auto argmax = std::make_shared<std::vector<std::uint32_t>>(std::move(r.argmax));
    return tape.record(std::move(r.output), tape.requires_grad(x),
                       [x, argmax](GradientTape<T>& t, const Tensor<T>& dy) {
                           t.accumulate(x, kernels::pool_backward(t.value(x).shape(), *argmax, dy));
                       });
}

template <typename T>
Var global_maxpool(GradientTape<T>& tape, Var x) {
    auto r = kernels::global_maxpool(tape.value(x));
    auto argmax = std::make_shared<std::vector<std::uint32_t>>(std::move(r.argmax));
    return tape.record(std::move(r.output), tape.requires_grad(x),
                       [x, argmax](GradientTape<T>& t, const Tensor<T>& dy) {
                           t.accumulate(x, kernels::pool_backward(t.value(x).shape(), *argmax, dy));
                       });
}

template <typename T>
Var dropout(GradientTape<T>& tape, Var x, double rate, Mode mode, std::mt19937_64& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    if (mode == Mode::infer || rate == 0.0) {
        return tape.record(tape.value(x), tape.requires_grad(x),
                           [x](GradientTape<T>& t, const Tensor<T>& dy) { t.accumulate(x, dy); });
    }
    auto mask = std::make_shared<Tensor<T>>(
        kernels::dropout_mask<T>(tape.value(x).shape(), rate, rng));
    return tape.record(kernels::multiply(tape.value(x), *mask), tape.requires_grad(x),
                       [x, mask](GradientTape<T>& t, const Tensor<T>& dy) {
                           t.accumulate(x, kernels::multiply(dy, *mask));
                       });
}

template <typename T>
Var dense(GradientTape<T>& tape, Var x, const std::string& weight, const std::string& bias) {
    const auto& params = tape.params();
    Tensor<T> out = kernels::dense(tape.value(x), params.at(weight), params.at(bias));
    return tape.record(std::move(out), true,
                       [x, weight, bias](GradientTape<T>& t, const Tensor<T>& dy) {
                           const bool need_dx = t.requires_grad(x);
                           auto g = kernels::dense_backward(t.value(x), t.params().at(weight), dy,
                                                            need_dx);
                           if (t.params().entry(weight).trainable) {
                               auto& gw = t.param_grad(weight);
                               for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += g.weights[i];
                           }
                           if (t.params().entry(bias).trainable) {
                               auto& gb = t.param_grad(bias);
                               for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.bias[i];
                           }
                           if (need_dx) t.accumulate(x, g.input);
                       });
}

template <typename T>
Var concat(GradientTape<T>& tape, const std::vector<Var>& parts) {
    std::vector<const Tensor<T>*> values;
    bool needs = false;
    for (auto p : parts) {
        values.push_back(&tape.value(p));
        needs = needs || tape.requires_grad(p);
    }
    Tensor<T> out = kernels::concat_features(values);
    return tape.record(std::move(out), needs, [parts](GradientTape<T>& t, const Tensor<T>& dy) {
        const std::size_t rows = dy.extent(0);
        const std::size_t width = dy.extent(1);
        std::size_t offset = 0;
        for (auto p : parts) {
            const std::size_t w = t.value(p).extent(1);
            if (t.requires_grad(p)) {
                Tensor<T> g(Shape{rows, w});
                for (std::size_t r = 0; r < rows; ++r)
                    std::copy(dy.raw() + r * width + offset, dy.raw() + r * width + offset + w,
                              g.raw() + r * w);
                t.accumulate(p, g);
            }
            offset += w;
        }
    });
}

template <typename T>
Var softmax(GradientTape<T>& tape, Var logits) {
    Tensor<T> probs = kernels::softmax(tape.value(logits));
    const std::size_t cols = probs.shape().back();
    auto cached = std::make_shared<Tensor<T>>(probs);
    return tape.record(std::move(probs), tape.requires_grad(logits),
                       [logits, cached, cols](GradientTape<T>& t, const Tensor<T>& dy) {
                           const auto& p = *cached;
                           Tensor<T> g(p.shape());
                           for (std::size_t r = 0; r < p.size() / cols; ++r) {
                               T dot{0};
                               for (std::size_t j = 0; j < cols; ++j)
                                   dot += dy[r * cols + j] * p[r * cols + j];
                               for (std::size_t j = 0; j < cols; ++j)
                                   g[r * cols + j] = p[r * cols + j] * (dy[r * cols + j] - dot);
                           }
                           t.accumulate(logits, g);
                       });
}

template <typename T>
LossOutput<T> softmax_crossentropy(GradientTape<T>& tape, Var logits, const Tensor<T>& one_hot) {
    auto r = kernels::softmax_crossentropy(tape.value(logits), one_hot);
    auto probs = std::make_shared<Tensor<T>>(r.probs);
    auto labels = std::make_shared<Tensor<T>>(one_hot);
    Var loss = tape.record(Tensor<T>(Shape{1}, static_cast<T>(r.loss)), tape.requires_grad(logits),
                           [logits, probs, labels](GradientTape<T>& t, const Tensor<T>& dy) {
                               Tensor<T> g = kernels::softmax_crossentropy_backward(*probs, *labels);
                               for (auto& v : g.data()) v *= dy[0];
                               t.accumulate(logits, g);
                           });
    return {loss, std::move(r.probs)};
}

template <typename T>
Tensor<T> one_hot(const std::vector<std::size_t>& classes, std::size_t num_classes) {
    if (classes.empty()) throw InputError("one_hot needs at least one label");
    Tensor<T> out(Shape{classes.size(), num_classes});
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] >= num_classes)
            throw InputError("class index " + std::to_string(classes[i]) + " out of range");
        out[i * num_classes + classes[i]] = T{1};
    }
    return out;
}

#define MRFUSION_INSTANTIATE(T)                                                                  \
    template Var conv2d(GradientTape<T>&, Var, const std::string&, const std::string&,           \
                        std::size_t, Padding, Mode);                                             \
    template Var relu(GradientTape<T>&, Var);                                                    \
    template Var batchnorm(GradientTape<T>&, Var, const std::string&, Mode, ParamSet<T>*,        \
                           BatchNormSettings);                                                   \
    template Var maxpool2d(GradientTape<T>&, Var, std::size_t, std::size_t);                     \
    template Var global_maxpool(GradientTape<T>&, Var);                                          \
    template Var dropout(GradientTape<T>&, Var, double, Mode, std::mt19937_64&);                 \
    template Var dense(GradientTape<T>&, Var, const std::string&, const std::string&);           \
    template Var concat(GradientTape<T>&, const std::vector<Var>&);                              \
    template Var softmax(GradientTape<T>&, Var);                                                 \
    template LossOutput<T> softmax_crossentropy(GradientTape<T>&, Var, const Tensor<T>&);        \
    template Tensor<T> one_hot(const std::vector<std::size_t>&, std::size_t);

MRFUSION_INSTANTIATE(float)
MRFUSION_INSTANTIATE(double)

#undef MRFUSION_INSTANTIATE

}  // namespace mrfusion::nn

#include "mrfusion/nn/adam.hpp"

#include <cmath>

namespace mrfusion::nn {

template <typename T>
void adam_step(ParamSet<T>& params, const Gradients<T>& grads, const AdamConfig& config) {
    for (const auto& [name, g] : grads) {
        const auto& e = params.entry(name);
        if (!e.trainable) throw StateError("gradient supplied for non-trainable parameter " + name);
        if (g.shape() != e.value.shape())
            throw DimensionError("gradient for " + name + " has shape " + shape_string(g.shape()) +
                                 ", parameter is " + shape_string(e.value.shape()));
    }
    const std::int64_t step = params.adam_step_count() + 1;
    params.set_adam_step_count(step);
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    const double b1 = config.beta1, b2 = config.beta2;

    for (auto& e : params.entries()) {
        if (!e.trainable) continue;
        auto it = grads.find(e.name);
        const T* g = it == grads.end() ? nullptr : it->second.raw();
        T* p = e.value.raw();
        T* m = e.first_moment.raw();
        T* v = e.second_moment.raw();
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double gi = g ? static_cast<double>(g[i]) : 0.0;
            const double mi = b1 * m[i] + (1.0 - b1) * gi;
            const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            p[i] = static_cast<T>(p[i] - config.lr * (mi / c1) / (std::sqrt(vi / c2) + config.eps));
        }
    }
}

template void adam_step(ParamSet<float>&, const Gradients<float>&, const AdamConfig&);
template void adam_step(ParamSet<double>&, const Gradients<double>&, const AdamConfig&);

}  // namespace mrfusion::nn

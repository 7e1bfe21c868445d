#include "mrfusion/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "mrfusion/nn/adam.hpp"
#include "mrfusion/nn/kernels.hpp"
#include "mrfusion/util/keyvalue.hpp"
#include "mrfusion/util/parallel.hpp"

namespace mrfusion::training {

using data::PatchPair;
using model::FusionModel;
using nn::Tensor;

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
    if (batch_size < 2) throw ConfigError("batch size must be >= 2 for batch normalization");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ (b * 0xD6E8FEB86659FD93ULL));
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order.size(); i += batch)
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch)));
    if (out.size() > 1 && out.back().size() == 1) {
        out[out.size() - 2].push_back(out.back().front());
        out.pop_back();
    }
    return out;
}

void check_training_set(const std::vector<PatchPair>& set, const FusionModel& m) {
    if (set.size() < 2) throw InputError("training needs at least 2 samples");
    for (const auto& s : set) {
        if (s.pan.shape() != set[0].pan.shape() || s.ms.shape() != set[0].ms.shape() ||
            s.fused.shape() != set[0].fused.shape())
            throw InputError("training samples disagree in patch shapes");
        if (s.label < 1 || static_cast<std::size_t>(s.label) > m.num_classes())
            throw LabelError("sample label " + std::to_string(s.label) + " outside 1.." +
                             std::to_string(m.num_classes()));
    }
}

template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch_size, Fn&& fn) {
    const std::size_t n_batches = (n + batch_size - 1) / batch_size;
    util::parallel_for(n_batches, [&](std::size_t b) {
        std::vector<std::size_t> idx;
        for (std::size_t i = b * batch_size; i < std::min(n, (b + 1) * batch_size); ++i) idx.push_back(i);
        fn(idx);
    });
}

}  // namespace

TrainResult train(FusionModel model, const std::vector<PatchPair>& training_set, const TrainConfig& config,
                  std::ostream* log) {
    config.validate();
    check_training_set(training_set, model);
    const std::size_t n = training_set.size(), L = model.num_classes();
    const nn::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};

    TrainHistory history;
    nn::ParamSet<float> best = model.params();
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(derive_seed(config.seed, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const auto batches = make_batches(order, config.batch_size);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& idx = batches[bi];
            const auto input = data::make_batch(training_set, idx);
            const auto targets = nn::one_hot<float>(data::class_indices(training_set, idx), L);

            const auto where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi);
            nn::GradientTape<float> tape(model.params());
            std::mt19937_64 dropout_rng(derive_seed(config.seed, epoch, bi + 1));
            double loss = 0.0;
            nn::Tensor<float> probs;
            try {
                const auto g =
                    model::forward_graph(model, tape, input, nn::Mode::train, &model.params(), &dropout_rng);
                auto out = nn::softmax_crossentropy(tape, g.logits, targets);
                loss = static_cast<double>(tape.value(out.loss)[0]);
                if (!std::isfinite(loss)) throw TrainingError("non-finite loss at " + where);
                const auto grads = tape.backward(out.loss);
                nn::adam_step(model.params(), grads, adam);
                probs = std::move(out.probs);
            } catch (const NumericError& e) {
                throw TrainingError(std::string("non-finite values at ") + where + ": " + e.what());
            }

            loss_sum += loss * static_cast<double>(idx.size());
            for (std::size_t r = 0; r < idx.size(); ++r) {
                const float* p = probs.raw() + r * L;
                const auto pred = static_cast<std::size_t>(std::max_element(p, p + L) - p);
                if (pred + 1 == static_cast<std::size_t>(training_set[idx[r]].label)) ++correct;
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(n);
        rec.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(rec);
        if (rec.loss < best_loss) {
            best_loss = rec.loss;
            history.best_epoch = epoch;
            best = model.params();
        }
        if (log) {
            *log << rec.epoch << '\t' << io::format_double(rec.loss) << '\t' << io::format_double(rec.accuracy) << '\t'
                 << rec.seconds << '\n';
            log->flush();
        }
    }

    model.params() = std::move(best);
    model.set_trained(true);
    return {std::move(model), std::move(history)};
}

void write_training_log(const std::string& path, const TrainHistory& history) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    for (const auto& r : history.epochs)
        os << r.epoch << '\t' << io::format_double(r.loss) << '\t' << io::format_double(r.accuracy) << '\t'
           << r.seconds << '\n';
    if (!os) throw IoError("failed writing " + path);
}

double infer_loss(const FusionModel& model, const std::vector<PatchPair>& samples, std::size_t batch_size) {
    if (samples.empty()) throw InputError("no samples to evaluate");
    const std::size_t L = model.num_classes();
    std::vector<double> per_sample(samples.size());
    for_each_batch(samples.size(), batch_size, [&](const std::vector<std::size_t>& idx) {
        const auto probs = model::predict_proba(model, data::make_batch(samples, idx));
        const auto cls = data::class_indices(samples, idx);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double p = std::max(static_cast<double>(probs[r * L + cls[r]]), 1e-300);
            per_sample[idx[r]] = -std::log(p);
        }
    });
    return std::accumulate(per_sample.begin(), per_sample.end(), 0.0) / static_cast<double>(samples.size());
}

std::vector<std::int32_t> predict_labels(const FusionModel& model, const std::vector<PatchPair>& samples,
                                         std::size_t batch_size) {
    const std::size_t L = model.num_classes();
    std::vector<std::int32_t> out(samples.size());
    if (samples.empty()) return out;
    for_each_batch(samples.size(), batch_size, [&](const std::vector<std::size_t>& idx) {
        const auto probs = model::predict_proba(model, data::make_batch(samples, idx));
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const float* p = probs.raw() + r * L;
            out[idx[r]] = static_cast<std::int32_t>(std::max_element(p, p + L) - p + 1);
        }
    });
    return out;
}

metrics::ConfusionMatrix evaluate(const FusionModel& model, const std::vector<PatchPair>& samples,
                                  std::size_t batch_size) {
    const auto pred = predict_labels(model, samples, batch_size);
    metrics::ConfusionMatrix cm(model.num_classes());
    for (std::size_t i = 0; i < samples.size(); ++i) cm.add(samples[i].label, pred[i]);
    return cm;
}

Tensor<float> extract_sample_features(const FusionModel& model, const std::vector<PatchPair>& samples,
                                      std::size_t batch_size) {
    if (samples.empty()) throw InputError("no samples to extract features from");
    const std::size_t F = model.feature_width();
    Tensor<float> out(nn::Shape{samples.size(), F});
    for_each_batch(samples.size(), batch_size, [&](const std::vector<std::size_t>& idx) {
        const auto fb = model::extract_features(model, data::make_batch(samples, idx));
        std::copy(fb.features.raw(), fb.features.raw() + fb.features.size(), out.raw() + idx.front() * F);
    });
    return out;
}

}  // namespace mrfusion::training

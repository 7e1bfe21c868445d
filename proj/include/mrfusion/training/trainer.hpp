#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mrfusion/data/patches.hpp"
#include "mrfusion/metrics/metrics.hpp"
#include "mrfusion/model/fusion_model.hpp"

namespace mrfusion::training {

struct TrainConfig {
    std::size_t epochs = 250;
    double lr = 2e-4;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double dropout = 0.4;  // used when the caller builds the model from this config

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;      // mean cross-entropy over the epoch's samples
    double accuracy = 0.0;  // train-mode argmax accuracy over the epoch
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // first argmin of the recorded losses
};

struct TrainResult {
    model::FusionModel model;  // parameters of the best epoch
    TrainHistory history;
};

/// Mini-batch Adam over `training_set` for config.epochs epochs. Each epoch
/// shuffles with a generator seeded by (seed, epoch); a trailing batch of
/// one sample joins the previous batch. Parameters are snapshotted whenever
/// the epoch loss strictly improves and the snapshot is returned.
/// Throws TrainingError on a non-finite loss, naming epoch and batch.
/// `log` receives one line per epoch: "epoch\tloss\tacc\tseconds".
TrainResult train(model::FusionModel model, const std::vector<data::PatchPair>& training_set,
                  const TrainConfig& config, std::ostream* log = nullptr);

/// Deterministic 64-bit mix of a seed with up to two stream indices.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Writes the history in the training-log format.
void write_training_log(const std::string& path, const TrainHistory& history);

/// Mean infer-mode cross-entropy of the model over `samples`.
double infer_loss(const model::FusionModel& model, const std::vector<data::PatchPair>& samples,
                  std::size_t batch_size = 64);

/// Infer-mode predicted 1-based labels.
std::vector<std::int32_t> predict_labels(const model::FusionModel& model,
                                         const std::vector<data::PatchPair>& samples,
                                         std::size_t batch_size = 64);

metrics::ConfusionMatrix evaluate(const model::FusionModel& model, const std::vector<data::PatchPair>& samples,
                                  std::size_t batch_size = 64);

/// Infer-mode concatenated features, samples x feature_width.
nn::Tensor<float> extract_sample_features(const model::FusionModel& model,
                                          const std::vector<data::PatchPair>& samples,
                                          std::size_t batch_size = 64);

}  // namespace mrfusion::training

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mrfusion/data/dataset.hpp"
#include "mrfusion/forest/random_forest.hpp"
#include "mrfusion/training/trainer.hpp"

namespace mrfusion::training {

struct RunSplitsConfig {
    std::size_t n_splits = 10;
    std::uint64_t seed = 0;  // split k uses seed + k for splitting, initialisation and training
    double ratio = 0.30;
    std::size_t patch = 32;
    std::size_t per_object_cap = 0;  // 0: every labeled aligned anchor
    bool augment = true;
    std::size_t width_divisor = 1;
    TrainConfig train;
    std::vector<model::ModelKind> models{model::ModelKind::mrfusion};
    bool rf_on_features = false;  // random forest on the MRFusion features of each split
    forest::ForestConfig forest;
    std::string output_dir;  // when set, per-split checkpoints, logs and metric tables go here

    void validate() const;
};

struct SplitRow {
    std::size_t split = 0;
    double accuracy = 0.0, fmeasure = 0.0, kappa = 0.0;
};

struct MetricSummary {
    double accuracy = 0.0, fmeasure = 0.0, kappa = 0.0;
};

struct MethodReport {
    std::string method;
    std::vector<SplitRow> rows;
    MetricSummary mean, std;  // population standard deviation
};

struct SplitsReport {
    std::vector<MethodReport> methods;

    const MethodReport& method(const std::string& name) const;
};

/// Mean and population standard deviation of each metric column.
std::pair<MetricSummary, MetricSummary> aggregate(const std::vector<SplitRow>& rows);

/// For k in [0, n_splits): object split with seed + k, optional 3x
/// augmentation, training of every requested model and evaluation on the
/// test objects. Methods are named after the model kinds, plus
/// "rf_features" when enabled.
SplitsReport run_splits(const data::RasterPair& rp, const RunSplitsConfig& config, std::ostream* log = nullptr);

/// CSV "split,accuracy,fmeasure,kappa" with one row per split.
void write_metric_table(const std::string& path, const MethodReport& report);

/// CSV "method,statistic,accuracy,fmeasure,kappa" with mean and std rows.
void write_summary_table(const std::string& path, const SplitsReport& report);

}  // namespace mrfusion::training

#include "mrfusion/training/run_splits.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mrfusion/data/augment.hpp"
#include "mrfusion/data/split.hpp"
#include "mrfusion/util/keyvalue.hpp"

namespace mrfusion::training {

namespace fs = std::filesystem;

void RunSplitsConfig::validate() const {
    if (n_splits < 1) throw ConfigError("n_splits must be >= 1");
    if (models.empty()) throw ConfigError("no models requested");
    if (width_divisor < 1) throw ConfigError("width divisor must be >= 1");
    if (rf_on_features && std::find(models.begin(), models.end(), model::ModelKind::mrfusion) == models.end())
        throw ConfigError("rf_on_features needs the mrfusion model in the model list");
    train.validate();
    forest.validate();
}

const MethodReport& SplitsReport::method(const std::string& name) const {
    for (const auto& m : methods)
        if (m.method == name) return m;
    throw InputError("no method named " + name + " in the report");
}

std::pair<MetricSummary, MetricSummary> aggregate(const std::vector<SplitRow>& rows) {
    if (rows.empty()) throw InputError("cannot aggregate zero splits");
    const double n = static_cast<double>(rows.size());
    MetricSummary mean, sd;
    for (const auto& r : rows) {
        mean.accuracy += r.accuracy;
        mean.fmeasure += r.fmeasure;
        mean.kappa += r.kappa;
    }
    mean.accuracy /= n;
    mean.fmeasure /= n;
    mean.kappa /= n;
    for (const auto& r : rows) {
        sd.accuracy += (r.accuracy - mean.accuracy) * (r.accuracy - mean.accuracy);
        sd.fmeasure += (r.fmeasure - mean.fmeasure) * (r.fmeasure - mean.fmeasure);
        sd.kappa += (r.kappa - mean.kappa) * (r.kappa - mean.kappa);
    }
    sd.accuracy = std::sqrt(sd.accuracy / n);
    sd.fmeasure = std::sqrt(sd.fmeasure / n);
    sd.kappa = std::sqrt(sd.kappa / n);
    return {mean, sd};
}

namespace {

SplitRow row_from(std::size_t split, const metrics::ConfusionMatrix& cm) {
    const auto s = metrics::score(cm);
    return {split, s.accuracy, s.fmeasure, s.kappa};
}

MethodReport& method_slot(SplitsReport& rep, const std::string& name) {
    for (auto& m : rep.methods)
        if (m.method == name) return m;
    rep.methods.push_back({name, {}, {}, {}});
    return rep.methods.back();
}

}  // namespace

SplitsReport run_splits(const data::RasterPair& rp, const RunSplitsConfig& config, std::ostream* log) {
    config.validate();
    const auto samples = data::enumerate_samples(rp, config.patch, config.per_object_cap);
    if (samples.empty()) throw InputError("the dataset has no labeled aligned anchors");
    if (!config.output_dir.empty()) fs::create_directories(config.output_dir);

    SplitsReport report;
    for (std::size_t k = 0; k < config.n_splits; ++k) {
        const std::uint64_t seed = config.seed + k;
        const auto plan = data::object_split(samples, config.ratio, seed);
        auto sides = data::apply_split(samples, plan);
        const auto train_set = config.augment ? data::build_training_set(sides.train, seed) : sides.train;
        if (log)
            *log << "split " << k << ": " << sides.train.size() << " train samples (" << train_set.size()
                 << " after augmentation), " << sides.test.size() << " test samples\n";

        fs::path split_dir;
        if (!config.output_dir.empty()) {
            split_dir = fs::path(config.output_dir) / ("split" + std::to_string(k));
            fs::create_directories(split_dir);
            data::write_split((split_dir / "split.txt").string(), plan);
        }

        TrainConfig tc = config.train;
        tc.seed = seed;
        for (auto kind : config.models) {
            const std::string name = model::to_string(kind);
            auto m = model::build_model(kind, rp.num_classes(), seed, config.width_divisor, tc.dropout, rp.bands());
            std::ofstream train_log;
            if (!split_dir.empty()) train_log.open(split_dir / (name + ".log"));
            auto res = train(std::move(m), train_set, tc, train_log.is_open() ? &train_log : nullptr);
            const auto cm = evaluate(res.model, sides.test);
            method_slot(report, name).rows.push_back(row_from(k, cm));
            if (!split_dir.empty()) {
                model::save_model((split_dir / (name + ".ckpt")).string(), res.model, true);
                metrics::write_confusion_csv((split_dir / (name + "_confusion.csv")).string(), cm);
            }
            if (log)
                *log << "split " << k << " " << name << ": accuracy " << metrics::accuracy(cm) << " (best epoch "
                     << res.history.best_epoch << ")\n";

            if (config.rf_on_features && kind == model::ModelKind::mrfusion) {
                const auto train_x = extract_sample_features(res.model, train_set);
                std::vector<std::int32_t> train_y;
                for (const auto& s : train_set) train_y.push_back(s.label);
                auto fc = config.forest;
                fc.seed = seed;
                const auto rf = forest::RandomForest::fit(train_x, train_y, rp.num_classes(), fc);
                const auto pred = rf.predict(extract_sample_features(res.model, sides.test));
                metrics::ConfusionMatrix rf_cm(rp.num_classes());
                for (std::size_t i = 0; i < sides.test.size(); ++i) rf_cm.add(sides.test[i].label, pred.labels[i]);
                method_slot(report, "rf_features").rows.push_back(row_from(k, rf_cm));
                if (!split_dir.empty()) {
                    rf.save((split_dir / "rf_features.forest").string());
                    metrics::write_confusion_csv((split_dir / "rf_features_confusion.csv").string(), rf_cm);
                }
                if (log) *log << "split " << k << " rf_features: accuracy " << metrics::accuracy(rf_cm) << "\n";
            }
        }
    }

    for (auto& m : report.methods) {
        std::tie(m.mean, m.std) = aggregate(m.rows);
        if (!config.output_dir.empty())
            write_metric_table((fs::path(config.output_dir) / (m.method + "_metrics.csv")).string(), m);
    }
    if (!config.output_dir.empty())
        write_summary_table((fs::path(config.output_dir) / "summary.csv").string(), report);
    return report;
}

void write_metric_table(const std::string& path, const MethodReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "split,accuracy,fmeasure,kappa\n";
    for (const auto& r : report.rows)
        os << r.split << ',' << io::format_double(r.accuracy) << ',' << io::format_double(r.fmeasure) << ','
           << io::format_double(r.kappa) << '\n';
    if (!os) throw IoError("failed writing " + path);
}

void write_summary_table(const std::string& path, const SplitsReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "method,statistic,accuracy,fmeasure,kappa\n";
    for (const auto& m : report.methods) {
        os << m.method << ",mean," << io::format_double(m.mean.accuracy) << ',' << io::format_double(m.mean.fmeasure)
           << ',' << io::format_double(m.mean.kappa) << '\n';
        os << m.method << ",std," << io::format_double(m.std.accuracy) << ',' << io::format_double(m.std.fmeasure)
           << ',' << io::format_double(m.std.kappa) << '\n';
    }
    if (!os) throw IoError("failed writing " + path);
}

}  // namespace mrfusion::training

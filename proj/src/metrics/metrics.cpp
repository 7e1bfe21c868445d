#include "mrfusion/metrics/metrics.hpp"

#include <fstream>
#include <numeric>

#include "mrfusion/util/errors.hpp"
#include "mrfusion/util/keyvalue.hpp"

namespace mrfusion::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes < 1) throw InputError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts)
    : n_(num_classes), counts_(std::move(counts)) {
    if (num_classes < 1) throw InputError("confusion matrix needs at least one class");
    if (counts_.size() != n_ * n_)
        throw InputError("confusion matrix of " + std::to_string(n_) + " classes needs " + std::to_string(n_ * n_) +
                         " counts");
}

void ConfusionMatrix::add(std::int64_t truth, std::int64_t predicted) {
    const auto n = static_cast<std::int64_t>(n_);
    if (truth < 1 || truth > n || predicted < 1 || predicted > n)
        throw InputError("label pair (" + std::to_string(truth) + "," + std::to_string(predicted) +
                         ") outside 1.." + std::to_string(n_));
    ++counts_[static_cast<std::size_t>(truth - 1) * n_ + static_cast<std::size_t>(predicted - 1)];
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw InputError("cannot add confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t t) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += (*this)(t, p);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t p) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < n_; ++t) s += (*this)(t, p);
    return s;
}

ConfusionMatrix confusion(const std::vector<std::int64_t>& truth, const std::vector<std::int64_t>& predicted,
                          std::size_t num_classes) {
    if (truth.size() != predicted.size())
        throw InputError("label vectors differ in length: " + std::to_string(truth.size()) + " vs " +
                         std::to_string(predicted.size()));
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
}

namespace {

double require_total(const ConfusionMatrix& cm) {
    const auto n = cm.total();
    if (n == 0) throw InputError("confusion matrix is empty");
    return static_cast<double>(n);
}

}  // namespace

double accuracy(const ConfusionMatrix& cm) {
    const double n = require_total(cm);
    std::uint64_t trace = 0;
    for (std::size_t i = 0; i < cm.num_classes(); ++i) trace += cm(i, i);
    return static_cast<double>(trace) / n;
}

double kappa(const ConfusionMatrix& cm) {
    const double n = require_total(cm);
    const double po = accuracy(cm);
    double pe = 0.0;
    for (std::size_t i = 0; i < cm.num_classes(); ++i)
        pe += (static_cast<double>(cm.row_sum(i)) / n) * (static_cast<double>(cm.col_sum(i)) / n);
    if (pe >= 1.0) return 0.0;
    return (po - pe) / (1.0 - pe);
}

FMeasure f_measure(const ConfusionMatrix& cm) {
    const double n = require_total(cm);
    const std::size_t L = cm.num_classes();
    FMeasure f;
    f.per_class.resize(L, 0.0);
    for (std::size_t k = 0; k < L; ++k) {
        const double tp = static_cast<double>(cm(k, k));
        const double pred = static_cast<double>(cm.col_sum(k));
        const double support = static_cast<double>(cm.row_sum(k));
        // Harmonic mean of precision and recall, written as 2 tp / (predicted + support).
        f.per_class[k] = (pred + support) > 0.0 ? 2.0 * tp / (pred + support) : 0.0;
        f.weighted += support / n * f.per_class[k];
        f.macro += f.per_class[k];
    }
    f.macro /= static_cast<double>(L);
    return f;
}

Scores score(const ConfusionMatrix& cm) {
    Scores s;
    s.accuracy = accuracy(cm);
    s.kappa = kappa(cm);
    auto f = f_measure(cm);
    s.fmeasure = f.weighted;
    s.fmeasure_macro = f.macro;
    s.per_class_f = std::move(f.per_class);
    return s;
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "true\\pred";
    for (std::size_t p = 0; p < cm.num_classes(); ++p) os << ',' << p + 1;
    os << '\n';
    for (std::size_t t = 0; t < cm.num_classes(); ++t) {
        os << t + 1;
        for (std::size_t p = 0; p < cm.num_classes(); ++p) os << ',' << cm(t, p);
        os << '\n';
    }
    if (!os) throw IoError("failed writing " + path);
}

void write_scores_csv(const std::string& path, const Scores& s) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "metric,value\n";
    os << "accuracy," << io::format_double(s.accuracy) << '\n';
    os << "fmeasure," << io::format_double(s.fmeasure) << '\n';
    os << "fmeasure_macro," << io::format_double(s.fmeasure_macro) << '\n';
    os << "kappa," << io::format_double(s.kappa) << '\n';
    for (std::size_t k = 0; k < s.per_class_f.size(); ++k)
        os << "f_class" << k + 1 << ',' << io::format_double(s.per_class_f[k]) << '\n';
    if (!os) throw IoError("failed writing " + path);
}

}  // namespace mrfusion::metrics

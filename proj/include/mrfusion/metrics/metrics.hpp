#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mrfusion::metrics {

/// L x L counts, rows = true class, columns = predicted class. Classes are
/// 1-based at the interface and stored zero-based.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);
    ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts);

    std::size_t num_classes() const noexcept { return n_; }
    std::uint64_t operator()(std::size_t t, std::size_t p) const { return counts_[t * n_ + p]; }
    std::uint64_t& operator()(std::size_t t, std::size_t p) { return counts_[t * n_ + p]; }

    /// Records one (true, predicted) pair of 1-based labels.
    void add(std::int64_t truth, std::int64_t predicted);
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

    std::uint64_t total() const;
    std::uint64_t row_sum(std::size_t t) const;
    std::uint64_t col_sum(std::size_t p) const;
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

/// Throws InputError on unequal lengths or labels outside 1..L.
ConfusionMatrix confusion(const std::vector<std::int64_t>& truth, const std::vector<std::int64_t>& predicted,
                          std::size_t num_classes);

double accuracy(const ConfusionMatrix& cm);

/// Cohen's kappa; 0 when the chance agreement is 1.
double kappa(const ConfusionMatrix& cm);

struct FMeasure {
    std::vector<double> per_class;
    double weighted = 0.0;  // weighted by true-class support
    double macro = 0.0;
};

/// Per-class F1, 0 when precision and recall are both undefined.
FMeasure f_measure(const ConfusionMatrix& cm);

struct Scores {
    double accuracy = 0.0;
    double fmeasure = 0.0;  // support-weighted
    double fmeasure_macro = 0.0;
    double kappa = 0.0;
    std::vector<double> per_class_f;
};

Scores score(const ConfusionMatrix& cm);

/// Matrix as CSV with a `true\pred` header row.
void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm);

/// Scores as CSV: scalar rows followed by per-class F rows.
void write_scores_csv(const std::string& path, const Scores& s);

}  // namespace mrfusion::metrics

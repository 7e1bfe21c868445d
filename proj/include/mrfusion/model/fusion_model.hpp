#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mrfusion/model/branch.hpp"
#include "mrfusion/nn/layers.hpp"
#include "mrfusion/nn/param_set.hpp"

namespace mrfusion::model {

using nn::Mode;
using nn::Tensor;

enum class ModelKind { mrfusion, cnnps, pan_only, ms_only };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

/// Batched model inputs (N x H x W x C). Only the sources consumed by the
/// model's branches need to be filled.
struct ModelInput {
    Tensor<float> pan;
    Tensor<float> ms;
    Tensor<float> fused;

    const Tensor<float>& get(InputSource s) const;
    std::size_t batch_size() const;
};

/// Branches -> per-branch dropout -> concatenation (branch order) -> dense
/// head -> softmax. MRFusion is the PAN + MS instance; single-branch
/// instances cover CNN_PS and the source ablations.
class FusionModel {
public:
    FusionModel(ModelKind kind, std::vector<BranchConfig> branches, std::size_t num_classes,
                double dropout_rate, std::uint64_t init_seed);

    ModelKind kind() const noexcept { return kind_; }
    const std::vector<BranchConfig>& branches() const noexcept { return branches_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    double dropout_rate() const noexcept { return dropout_rate_; }
    std::uint64_t init_seed() const noexcept { return init_seed_; }

    /// Width of the concatenated branch features (1536 for MRFusion).
    std::size_t feature_width() const noexcept { return feature_width_; }

    nn::ParamSet<float>& params() noexcept { return params_; }
    const nn::ParamSet<float>& params() const noexcept { return params_; }

    bool trained() const noexcept { return trained_; }
    void set_trained(bool t) noexcept { trained_ = t; }

    static std::string conv_name(const std::string& branch, std::size_t i);
    static std::string bn_name(const std::string& branch, std::size_t i);

private:
    void init_params();

    ModelKind kind_;
    std::vector<BranchConfig> branches_;
    std::size_t num_classes_;
    double dropout_rate_;
    std::uint64_t init_seed_;
    std::size_t feature_width_ = 0;
    nn::ParamSet<float> params_;
    bool trained_ = false;
};

/// MRFusion: P-CNN on PAN (d x d x 1) and MS-CNN on MS (d/r x d/r x c).
FusionModel build_mrfusion(std::size_t num_classes, std::uint64_t seed = 0,
                           std::size_t width_divisor = 1, double dropout_rate = 0.4,
                           std::size_t ms_bands = 4);

/// CNN_PS: P-CNN topology with 256/512/1024 filters on a d x d x c raster.
FusionModel build_cnnps(std::size_t num_classes, std::uint64_t seed = 0,
                        std::size_t width_divisor = 1, double dropout_rate = 0.4,
                        std::size_t bands = 4);

/// MRFusion with one branch removed: `pan_only` or `ms_only`.
FusionModel build_ablation(ModelKind kind, std::size_t num_classes, std::uint64_t seed = 0,
                           std::size_t width_divisor = 1, double dropout_rate = 0.4,
                           std::size_t ms_bands = 4);

FusionModel build_model(ModelKind kind, std::size_t num_classes, std::uint64_t seed,
                        std::size_t width_divisor, double dropout_rate, std::size_t bands);

/// Tape vars produced by one forward pass.
struct ForwardGraph {
    std::vector<nn::Var> branch_features;
    nn::Var features;  // concatenation, post-dropout
    nn::Var logits;
};

/// Records the model on `tape` (which must be bound to model.params()).
/// In train mode batch-norm running statistics are folded into
/// `running_stats` when given, and `rng` drives dropout.
ForwardGraph forward_graph(const FusionModel& model, nn::GradientTape<float>& tape,
                           const ModelInput& input, Mode mode,
                           nn::ParamSet<float>* running_stats = nullptr,
                           std::mt19937_64* rng = nullptr);

/// Class probabilities, batch x L. Train mode uses batch statistics and
/// dropout and updates the running statistics of `model`.
Tensor<float> forward(FusionModel& model, const ModelInput& input, Mode mode,
                      std::uint64_t dropout_seed = 0);

/// Infer-mode class probabilities.
Tensor<float> predict_proba(const FusionModel& model, const ModelInput& input);

struct FeatureBatch {
    Tensor<float> features;  // batch x feature_width, branch order (PAN first for MRFusion)
    bool from_trained_model = false;
};

/// Concatenated infer-mode branch features (the head's input).
FeatureBatch extract_features(const FusionModel& model, const ModelInput& input);

/// softmax(dense(features)) with the model's head.
Tensor<float> head_proba(const FusionModel& model, const Tensor<float>& features);

/// Text manifest (`key=value`) describing architecture and checkpoint.
void write_model_manifest(const std::string& manifest_path, const FusionModel& model,
                          const std::string& checkpoint_path);

/// Rebuilds the architecture from a manifest and loads its checkpoint.
FusionModel load_model(const std::string& manifest_path);

/// Writes `<checkpoint_path>` and `<checkpoint_path>.manifest`.
void save_model(const std::string& checkpoint_path, const FusionModel& model,
                bool with_adam = true);

std::string manifest_path_for(const std::string& checkpoint_path);

}  // namespace mrfusion::model

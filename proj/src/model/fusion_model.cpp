#include "mrfusion/model/fusion_model.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "mrfusion/nn/checkpoint.hpp"
#include "mrfusion/util/keyvalue.hpp"

namespace mrfusion::model {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::mrfusion: return "mrfusion";
        case ModelKind::cnnps: return "cnnps";
        case ModelKind::pan_only: return "pan_only";
        case ModelKind::ms_only: return "ms_only";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& s) {
    if (s == "mrfusion") return ModelKind::mrfusion;
    if (s == "cnnps") return ModelKind::cnnps;
    if (s == "pan_only") return ModelKind::pan_only;
    if (s == "ms_only") return ModelKind::ms_only;
    throw ConfigError("unknown model kind: " + s);
}

const Tensor<float>& ModelInput::get(InputSource s) const {
    switch (s) {
        case InputSource::pan: return pan;
        case InputSource::ms: return ms;
        case InputSource::fused: return fused;
    }
    throw InputError("unknown input source");
}

std::size_t ModelInput::batch_size() const {
    for (const auto* t : {&pan, &ms, &fused})
        if (!t->empty()) return t->extent(0);
    return 0;
}

FusionModel::FusionModel(ModelKind kind, std::vector<BranchConfig> branches,
                         std::size_t num_classes, double dropout_rate, std::uint64_t init_seed)
    : kind_(kind),
      branches_(std::move(branches)),
      num_classes_(num_classes),
      dropout_rate_(dropout_rate),
      init_seed_(init_seed) {
    if (num_classes_ < 2) throw ConfigError("a classifier needs at least 2 classes");
    if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0))
        throw ConfigError("dropout rate must lie in [0, 1)");
    if (branches_.empty()) throw ConfigError("a model needs at least one branch");
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        branches_[i].validate();
        for (std::size_t j = 0; j < i; ++j)
            if (branches_[j].name == branches_[i].name)
                throw ConfigError("duplicate branch name " + branches_[i].name);
        feature_width_ += branches_[i].feature_width();
    }
    init_params();
}

std::string FusionModel::conv_name(const std::string& branch, std::size_t i) {
    return branch + ".conv" + std::to_string(i);
}

std::string FusionModel::bn_name(const std::string& branch, std::size_t i) {
    return branch + ".bn" + std::to_string(i);
}

void FusionModel::init_params() {
    std::mt19937_64 rng(init_seed_);
    auto he_uniform = [&rng](nn::Shape shape, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-limit, limit);
        Tensor<float> t(std::move(shape));
        for (auto& v : t.data()) v = static_cast<float>(u(rng));
        return t;
    };
    for (const auto& b : branches_) {
        std::size_t channels = b.input.c;
        std::size_t conv_i = 0, bn_i = 0;
        for (const auto& l : b.layers) {
            if (l.kind == LayerKind::conv2d) {
                const auto name = conv_name(b.name, ++conv_i);
                const std::size_t k = l.kernel_size;
                params_.add(name + ".weight", he_uniform({k, k, channels, l.filters}, k * k * channels));
                params_.add(name + ".bias", Tensor<float>(nn::Shape{l.filters}));
                channels = l.filters;
            } else if (l.kind == LayerKind::batchnorm) {
                const auto name = bn_name(b.name, ++bn_i);
                params_.add(name + ".gamma", Tensor<float>(nn::Shape{channels}, 1.0f));
                params_.add(name + ".beta", Tensor<float>(nn::Shape{channels}));
                params_.add(name + ".running_mean", Tensor<float>(nn::Shape{channels}), false);
                params_.add(name + ".running_var", Tensor<float>(nn::Shape{channels}, 1.0f), false);
            }
        }
    }
    params_.add("head.weight", he_uniform({feature_width_, num_classes_}, feature_width_));
    params_.add("head.bias", Tensor<float>(nn::Shape{num_classes_}));
}

FusionModel build_mrfusion(std::size_t num_classes, std::uint64_t seed, std::size_t width_divisor,
                           double dropout_rate, std::size_t ms_bands) {
    return FusionModel(ModelKind::mrfusion,
                       {build_pcnn(width_divisor), build_mscnn(width_divisor, ms_bands)},
                       num_classes, dropout_rate, seed);
}

FusionModel build_cnnps(std::size_t num_classes, std::uint64_t seed, std::size_t width_divisor,
                        double dropout_rate, std::size_t bands) {
    return FusionModel(ModelKind::cnnps, {build_cnnps_branch(width_divisor, bands)}, num_classes,
                       dropout_rate, seed);
}

FusionModel build_ablation(ModelKind kind, std::size_t num_classes, std::uint64_t seed,
                           std::size_t width_divisor, double dropout_rate, std::size_t ms_bands) {
    if (kind == ModelKind::pan_only)
        return FusionModel(kind, {build_pcnn(width_divisor)}, num_classes, dropout_rate, seed);
    if (kind == ModelKind::ms_only)
        return FusionModel(kind, {build_mscnn(width_divisor, ms_bands)}, num_classes, dropout_rate,
                           seed);
    throw ConfigError("build_ablation expects pan_only or ms_only");
}

FusionModel build_model(ModelKind kind, std::size_t num_classes, std::uint64_t seed,
                        std::size_t width_divisor, double dropout_rate, std::size_t bands) {
    switch (kind) {
        case ModelKind::mrfusion:
            return build_mrfusion(num_classes, seed, width_divisor, dropout_rate, bands);
        case ModelKind::cnnps:
            return build_cnnps(num_classes, seed, width_divisor, dropout_rate, bands);
        default:
            return build_ablation(kind, num_classes, seed, width_divisor, dropout_rate, bands);
    }
}

ForwardGraph forward_graph(const FusionModel& model, nn::GradientTape<float>& tape,
                           const ModelInput& input, Mode mode, nn::ParamSet<float>* running_stats,
                           std::mt19937_64* rng) {
    if (&tape.params() != &model.params())
        throw StateError("tape is not bound to the model's parameters");
    if (mode == Mode::train && model.dropout_rate() > 0.0 && rng == nullptr)
        throw StateError("train-mode forward needs a dropout generator");

    ForwardGraph g;
    std::size_t batch = 0;
    for (const auto& b : model.branches()) {
        const auto& x = input.get(b.source);
        const nn::Shape expected{x.empty() ? 0 : x.extent(0), b.input.h, b.input.w, b.input.c};
        if (x.rank() != 4 || x.shape() != expected)
            throw InputError("branch " + b.name + " expects " + to_string(b.source) +
                             " input N x " + to_string(b.input) + ", got " +
                             nn::shape_string(x.shape()));
        if (batch == 0) {
            batch = x.extent(0);
        } else if (x.extent(0) != batch) {
            throw InputError("input batch sizes differ between branches (" + std::to_string(batch) +
                             " vs " + std::to_string(x.extent(0)) + ")");
        }

        nn::Var v = tape.input(x, false);
        std::size_t conv_i = 0, bn_i = 0;
        for (const auto& l : b.layers) {
            switch (l.kind) {
                case LayerKind::conv2d: {
                    const auto name = FusionModel::conv_name(b.name, ++conv_i);
                    v = nn::conv2d(tape, v, name + ".weight", name + ".bias", l.stride, l.padding,
                                   mode);
                    break;
                }
                case LayerKind::relu: v = nn::relu(tape, v); break;
                case LayerKind::batchnorm:
                    v = nn::batchnorm(tape, v, FusionModel::bn_name(b.name, ++bn_i), mode,
                                      running_stats);
                    break;
                case LayerKind::maxpool2d: v = nn::maxpool2d(tape, v, l.kernel_size, l.stride); break;
                case LayerKind::global_maxpool: v = nn::global_maxpool(tape, v); break;
                default: throw ConfigError("unsupported branch layer " + to_string(l));
            }
        }
        g.branch_features.push_back(v);
    }

    std::vector<nn::Var> dropped;
    std::mt19937_64 unused(0);
    for (auto v : g.branch_features)
        dropped.push_back(nn::dropout(tape, v, model.dropout_rate(), mode, rng ? *rng : unused));
    g.features = dropped.size() == 1 ? dropped.front() : nn::concat(tape, dropped);
    g.logits = nn::dense(tape, g.features, "head.weight", "head.bias");
    return g;
}

Tensor<float> forward(FusionModel& model, const ModelInput& input, Mode mode,
                      std::uint64_t dropout_seed) {
    if (mode == Mode::infer) return predict_proba(model, input);
    nn::GradientTape<float> tape(model.params());
    std::mt19937_64 rng(dropout_seed);
    auto g = forward_graph(model, tape, input, mode, &model.params(), &rng);
    return nn::kernels::softmax(tape.value(g.logits));
}

Tensor<float> predict_proba(const FusionModel& model, const ModelInput& input) {
    nn::GradientTape<float> tape(model.params());
    auto g = forward_graph(model, tape, input, Mode::infer);
    return nn::kernels::softmax(tape.value(g.logits));
}

FeatureBatch extract_features(const FusionModel& model, const ModelInput& input) {
    nn::GradientTape<float> tape(model.params());
    auto g = forward_graph(model, tape, input, Mode::infer);
    return {tape.value(g.features), model.trained()};
}

Tensor<float> head_proba(const FusionModel& model, const Tensor<float>& features) {
    const auto& p = model.params();
    return nn::kernels::softmax(nn::kernels::dense(features, p.at("head.weight"), p.at("head.bias")));
}

std::string manifest_path_for(const std::string& checkpoint_path) {
    return checkpoint_path + ".manifest";
}

void write_model_manifest(const std::string& manifest_path, const FusionModel& model,
                          const std::string& checkpoint_path) {
    io::KeyValueFile kv;
    kv.set("format", "mrfusion-model-1");
    kv.set("kind", to_string(model.kind()));
    kv.set("num_classes", std::to_string(model.num_classes()));
    kv.set("dropout", io::format_double(model.dropout_rate()));
    kv.set("init_seed", std::to_string(model.init_seed()));
    kv.set("trained", model.trained() ? "1" : "0");
    std::vector<std::string> names;
    for (const auto& b : model.branches()) names.push_back(b.name);
    kv.set("branches", io::join(names, ','));
    for (const auto& b : model.branches()) {
        kv.set("branch." + b.name + ".source", to_string(b.source));
        kv.set("branch." + b.name + ".input", to_string(b.input));
        kv.set("branch." + b.name + ".layers", b.layers_string());
    }
    kv.set("feature_width", std::to_string(model.feature_width()));
    const auto rel = std::filesystem::path(checkpoint_path).filename().string();
    kv.set("checkpoint", rel);
    kv.write(manifest_path);
}

FusionModel load_model(const std::string& manifest_path) {
    auto kv = io::KeyValueFile::read(manifest_path);
    if (kv.get("format") != "mrfusion-model-1")
        throw FormatError(manifest_path + ": unsupported model manifest format");
    std::vector<BranchConfig> branches;
    for (const auto& name : io::split(kv.get("branches"), ',')) {
        BranchConfig b;
        b.name = name;
        b.source = parse_input_source(kv.get("branch." + name + ".source"));
        b.input = parse_input_shape(kv.get("branch." + name + ".input"));
        for (const auto& l : io::split(kv.get("branch." + name + ".layers"), ';'))
            b.layers.push_back(parse_layer_spec(l));
        branches.push_back(std::move(b));
    }
    FusionModel model(parse_model_kind(kv.get("kind")), std::move(branches),
                      static_cast<std::size_t>(kv.get_int("num_classes")), kv.get_double("dropout"),
                      static_cast<std::uint64_t>(kv.get_int("init_seed")));
    nn::load_checkpoint(io::resolve_relative(manifest_path, kv.get("checkpoint")), model.params());
    model.set_trained(kv.get("trained") == "1");
    return model;
}

void save_model(const std::string& checkpoint_path, const FusionModel& model, bool with_adam) {
    nn::write_checkpoint(checkpoint_path, model.params(), with_adam);
    write_model_manifest(manifest_path_for(checkpoint_path), model, checkpoint_path);
}

}  // namespace mrfusion::model

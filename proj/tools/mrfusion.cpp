// mrfusion command-line driver.
//
// Exit codes: 0 success, 1 domain error, 2 usage error. Failures print a
// single line "error: <kind>: <message>" on stderr.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "mrfusion/data/augment.hpp"
#include "mrfusion/data/split.hpp"
#include "mrfusion/data/synth.hpp"
#include "mrfusion/forest/random_forest.hpp"
#include "mrfusion/metrics/metrics.hpp"
#include "mrfusion/training/predict_map.hpp"
#include "mrfusion/training/run_splits.hpp"
#include "mrfusion/util/keyvalue.hpp"
#include "mrfusion/util/errors.hpp"
#include "mrfusion/util/parallel.hpp"

namespace fs = std::filesystem;
using namespace mrfusion;
using json = nlohmann::ordered_json;

namespace {

std::string sha256_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot hash " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("sha256 unavailable");
    }
    std::vector<char> buf(1 << 16);
    while (is) {
        is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

// Reproducibility record written beside every output.
struct Record {
    std::string verb;
    json flags = json::object();
    json seeds = json::object();
    std::vector<std::string> inputs, outputs;

    void write(const std::string& path) const {
        json j;
        j["tool"] = "mrfusion";
        j["verb"] = verb;
        j["flags"] = flags;
        j["seeds"] = seeds;
        auto hashes = [](const std::vector<std::string>& files) {
            json h = json::object();
            for (const auto& f : files)
                if (fs::is_regular_file(f)) h[f] = sha256_file(f);
            return h;
        };
        j["inputs"] = hashes(inputs);
        j["outputs"] = hashes(outputs);
        std::ofstream os(path);
        if (!os) throw IoError("cannot write " + path);
        os << j.dump(2) << '\n';
    }
};

json collect_flags(const CLI::App& app) {
    json flags = json::object();
    for (const auto* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            flags[name] = res.size() == 1 ? json(res.front()) : json(res);
        } else if (!opt->get_default_str().empty()) {
            flags[name] = opt->get_default_str();
        } else if (opt->get_expected_min() == 0) {
            flags[name] = false;
        }
    }
    return flags;
}

void ensure_parent(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::string repro_path(const std::string& out) { return out + ".repro.json"; }

std::vector<std::string> dataset_files(const std::string& manifest) {
    std::vector<std::string> files{manifest};
    const auto kv = io::KeyValueFile::read(manifest);
    for (const char* key : {"pan", "ms", "labels", "objects", "fused"})
        if (kv.has(key)) files.push_back(io::resolve_relative(manifest, kv.get(key)));
    return files;
}

data::RasterPair load_dataset(const std::string& manifest) {
    std::vector<std::string> warnings;
    auto rp = data::read_dataset(manifest, true, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    return rp;
}

// Feature table: label first, then the feature columns.
void write_feature_csv(const std::string& path, const nn::Tensor<float>& x, const std::vector<std::int32_t>& y) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    const std::size_t n = x.extent(0), f = x.extent(1);
    os << "label";
    for (std::size_t j = 0; j < f; ++j) os << ",f" << j;
    os << '\n';
    os << std::setprecision(9);
    for (std::size_t i = 0; i < n; ++i) {
        os << y[i];
        for (std::size_t j = 0; j < f; ++j) os << ',' << x[i * f + j];
        os << '\n';
    }
    if (!os) throw IoError("failed writing " + path);
}

std::pair<nn::Tensor<float>, std::vector<std::int32_t>> read_feature_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw FormatError(path + " is empty");
    const auto header = io::split(line, ',');
    if (header.size() < 2 || header[0] != "label") throw FormatError(path + ": header must start with 'label'");
    const std::size_t f = header.size() - 1;
    std::vector<float> values;
    std::vector<std::int32_t> labels;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = io::split(line, ',');
        if (cells.size() != f + 1)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(f + 1) + " columns");
        try {
            labels.push_back(static_cast<std::int32_t>(std::stol(cells[0])));
            for (std::size_t j = 1; j <= f; ++j) values.push_back(std::stof(cells[j]));
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": not a number");
        }
    }
    if (labels.empty()) throw FormatError(path + " has no rows");
    return {nn::Tensor<float>(nn::Shape{labels.size(), f}, std::move(values)), std::move(labels)};
}

std::vector<data::PatchPair> side_samples(const data::RasterPair& rp, const std::string& split_path,
                                          const std::string& side, std::size_t patch, std::size_t cap) {
    auto samples = data::enumerate_samples(rp, patch, cap);
    if (side == "all" && split_path.empty()) return samples;
    if (split_path.empty()) throw ConfigError("--split is required for side '" + side + "'");
    auto sides = data::apply_split(std::move(samples), data::read_split(split_path));
    if (side == "train") return sides.train;
    if (side == "test") return sides.test;
    sides.train.insert(sides.train.end(), sides.test.begin(), sides.test.end());
    return sides.train;
}

// Radiometric values at the anchor: PAN pixel plus its MS pixel.
nn::Tensor<float> pixel_features(const data::RasterPair& rp, const std::vector<data::PatchPair>& s) {
    const std::size_t c = rp.bands();
    nn::Tensor<float> x(nn::Shape{s.size(), 1 + c});
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto a = s[i].anchor;
        x[i * (1 + c)] = rp.pan.at(a.y, a.x, 0);
        for (std::size_t b = 0; b < c; ++b) x[i * (1 + c) + 1 + b] = rp.ms.at(a.y / rp.ratio, a.x / rp.ratio, b);
    }
    return x;
}

// Flattened full-resolution multi-band patch.
nn::Tensor<float> patch_features(const std::vector<data::PatchPair>& s) {
    if (s.empty() || s[0].fused.empty()) throw InputError("patch features need a dataset with a fused raster");
    const std::size_t f = s[0].fused.size();
    nn::Tensor<float> x(nn::Shape{s.size(), f});
    for (std::size_t i = 0; i < s.size(); ++i) std::copy(s[i].fused.raw(), s[i].fused.raw() + f, x.raw() + i * f);
    return x;
}

std::vector<std::int32_t> labels_of(const std::vector<data::PatchPair>& s) {
    std::vector<std::int32_t> y;
    y.reserve(s.size());
    for (const auto& p : s) y.push_back(p.label);
    return y;
}

// PAN-resolution patch side the model was built for.
std::size_t model_patch(const model::FusionModel& m, std::size_t ratio) {
    for (const auto& b : m.branches())
        if (b.source != model::InputSource::ms) return b.input.h;
    return m.branches().front().input.h * ratio;
}

void write_scores(const std::string& out, const metrics::ConfusionMatrix& cm) {
    metrics::write_scores_csv(out, metrics::score(cm));
    metrics::write_confusion_csv(out + ".confusion.csv", cm);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-resolution PAN/MS fusion classifier"};
    app.set_config("--config", "", "Read flag values from a config file");
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker cap (0 = all cores)")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic PAN/MS scene");
    data::SynthConfig sc;
    std::string synth_out;
    synth->add_option("--classes", sc.num_classes, "Number of classes")->capture_default_str();
    synth->add_option("--objects", sc.objects_per_class, "Objects per class")->capture_default_str();
    synth->add_option("--size", sc.scene_size, "PAN scene side in pixels")->capture_default_str();
    synth->add_option("--ratio", sc.ratio, "PAN/MS resolution ratio")->capture_default_str();
    synth->add_option("--bands", sc.bands, "MS bands")->capture_default_str();
    synth->add_option("--seed", sc.seed, "Generator seed")->capture_default_str();
    synth->add_option("--out", synth_out, "Dataset manifest to write")->required();

    // split
    auto* split = app.add_subcommand("split", "Object-disjoint train/test split");
    std::string split_manifest, split_out;
    double split_ratio = 0.30;
    std::uint64_t split_seed = 0;
    std::size_t split_patch = 32;
    split->add_option("--manifest", split_manifest, "Dataset manifest")->required();
    split->add_option("--ratio", split_ratio, "Fraction of objects used for training")->capture_default_str();
    split->add_option("--seed", split_seed, "Split seed")->capture_default_str();
    split->add_option("--patch", split_patch, "Patch size d")->capture_default_str();
    split->add_option("--out", split_out, "Split plan to write")->required();

    // train
    auto* trn = app.add_subcommand("train", "Train a model on the training side of a split");
    std::string train_manifest, train_split, train_model = "mrfusion", train_out;
    training::TrainConfig tc;
    std::size_t train_width = 1, train_patch = 32, train_cap = 0;
    bool train_no_augment = false;
    trn->add_option("--manifest", train_manifest, "Dataset manifest")->required();
    trn->add_option("--split", train_split, "Split plan")->required();
    trn->add_option("--model", train_model, "Model kind")
        ->check(CLI::IsMember({"mrfusion", "cnnps", "pan_only", "ms_only"}))
        ->capture_default_str();
    trn->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
    trn->add_option("--lr", tc.lr, "Adam learning rate")->capture_default_str();
    trn->add_option("--batch", tc.batch_size, "Mini-batch size")->capture_default_str();
    trn->add_option("--seed", tc.seed, "Initialisation, shuffle, dropout and augmentation seed")->capture_default_str();
    trn->add_option("--dropout", tc.dropout, "Dropout rate on branch features")->capture_default_str();
    trn->add_option("--width-divisor", train_width, "Divide every filter count by this")->capture_default_str();
    trn->add_option("--patch", train_patch, "Patch size d")->capture_default_str();
    trn->add_option("--cap", train_cap, "Per-object anchor cap (0 = unlimited)")->capture_default_str();
    trn->add_flag("--no-augment", train_no_augment, "Disable the 3x paired augmentation");
    trn->add_option("--out", train_out, "Checkpoint to write")->required();

    // predict
    auto* pred = app.add_subcommand("predict", "Classify every PAN pixel of a scene");
    std::string pred_ckpt, pred_manifest, pred_out;
    training::PredictOptions po;
    pred->add_option("--checkpoint", pred_ckpt, "Trained checkpoint")->required();
    pred->add_option("--manifest", pred_manifest, "Dataset manifest")->required();
    pred->add_option("--stride", po.stride, "Anchor stride in PAN pixels")->capture_default_str();
    pred->add_option("--batch", po.batch_size, "Inference batch size")->capture_default_str();
    pred->add_option("--out", pred_out, "Output prefix (<out>.labels.rast, <out>.proba.rast)")->required();

    // extract-features
    auto* feat = app.add_subcommand("extract-features", "Dump concatenated branch features as CSV");
    std::string feat_ckpt, feat_manifest, feat_split, feat_side = "train", feat_out;
    std::size_t feat_cap = 0;
    feat->add_option("--checkpoint", feat_ckpt, "Trained checkpoint")->required();
    feat->add_option("--manifest", feat_manifest, "Dataset manifest")->required();
    feat->add_option("--split", feat_split, "Split plan");
    feat->add_option("--split-side", feat_side, "Which side of the split")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    feat->add_option("--cap", feat_cap, "Per-object anchor cap (0 = unlimited)")->capture_default_str();
    feat->add_option("--out", feat_out, "Feature CSV to write")->required();

    // rf-fit
    auto* rff = app.add_subcommand("rf-fit", "Fit a random forest on features or raw values");
    std::string rf_features, rf_eval, rf_manifest, rf_split, rf_source = "pixel", rf_out;
    forest::ForestConfig fc;
    std::size_t rf_cap = 0, rf_depth = 0;
    auto* rf_feat_opt = rff->add_option("--features", rf_features, "Training feature CSV (label first)");
    auto* rf_man_opt = rff->add_option("--manifest", rf_manifest, "Dataset manifest (raw values)");
    rf_feat_opt->excludes(rf_man_opt);
    rff->add_option("--eval", rf_eval, "Held-out feature CSV to score (with --features)")->needs(rf_feat_opt);
    rff->add_option("--split", rf_split, "Split plan (with --manifest)")->needs(rf_man_opt);
    rff->add_option("--source", rf_source, "Raw input: pixel values or flattened fused patches")
        ->check(CLI::IsMember({"pixel", "patch"}))
        ->capture_default_str();
    rff->add_option("--cap", rf_cap, "Per-object anchor cap (0 = unlimited)")->capture_default_str();
    rff->add_option("--trees", fc.n_trees, "Number of trees")->capture_default_str();
    rff->add_option("--max-depth", rf_depth, "Depth limit (0 = unlimited)")->capture_default_str();
    rff->add_option("--min-leaf", fc.min_leaf, "Minimum samples per leaf")->capture_default_str();
    rff->add_option("--seed", fc.seed, "Forest seed")->capture_default_str();
    rff->add_option("--out", rf_out, "Forest file to write")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score a predicted label raster against ground truth");
    std::string ev_pred, ev_truth, ev_out;
    std::size_t ev_classes = 0;
    ev->add_option("--pred", ev_pred, "Predicted label raster")->required();
    ev->add_option("--truth", ev_truth, "Ground-truth label raster (0 = unlabeled)")->required();
    ev->add_option("--classes", ev_classes, "Number of classes")->required();
    ev->add_option("--out", ev_out, "Scores CSV to write")->required();

    // run-splits
    auto* rs = app.add_subcommand("run-splits", "Train and evaluate over repeated object splits");
    std::string rs_manifest, rs_models = "mrfusion", rs_out;
    training::RunSplitsConfig rc;
    std::size_t rs_depth = 0;
    bool rs_no_augment = false;
    rs->add_option("--manifest", rs_manifest, "Dataset manifest")->required();
    rs->add_option("--n", rc.n_splits, "Number of splits")->capture_default_str();
    rs->add_option("--seed", rc.seed, "Base seed; split k uses seed + k")->capture_default_str();
    rs->add_option("--ratio", rc.ratio, "Fraction of objects used for training")->capture_default_str();
    rs->add_option("--models", rs_models, "Comma-separated model kinds")->capture_default_str();
    rs->add_option("--epochs", rc.train.epochs, "Training epochs")->capture_default_str();
    rs->add_option("--lr", rc.train.lr, "Adam learning rate")->capture_default_str();
    rs->add_option("--batch", rc.train.batch_size, "Mini-batch size")->capture_default_str();
    rs->add_option("--dropout", rc.train.dropout, "Dropout rate on branch features")->capture_default_str();
    rs->add_option("--width-divisor", rc.width_divisor, "Divide every filter count by this")->capture_default_str();
    rs->add_option("--patch", rc.patch, "Patch size d")->capture_default_str();
    rs->add_option("--cap", rc.per_object_cap, "Per-object anchor cap (0 = unlimited)")->capture_default_str();
    rs->add_flag("--no-augment", rs_no_augment, "Disable the 3x paired augmentation");
    rs->add_flag("--rf-features", rc.rf_on_features, "Also fit a forest on MRFusion features");
    rs->add_option("--trees", rc.forest.n_trees, "Trees for --rf-features")->capture_default_str();
    rs->add_option("--max-depth", rs_depth, "Forest depth limit (0 = unlimited)")->capture_default_str();
    rs->add_option("--out", rs_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        util::set_max_threads(threads);
        Record rec;

        if (*synth) {
            rec.verb = "synth";
            rec.flags = collect_flags(*synth);
            rec.seeds["seed"] = sc.seed;
            auto rp = data::synth_generate(sc);
            ensure_parent(synth_out);
            data::write_dataset(synth_out, rp);
            rec.outputs = dataset_files(synth_out);
            rec.write(repro_path(synth_out));
        } else if (*split) {
            rec.verb = "split";
            rec.flags = collect_flags(*split);
            rec.seeds["seed"] = split_seed;
            const auto rp = load_dataset(split_manifest);
            std::vector<data::ObjectLabel> objs;
            for (const auto& a : data::enumerate_anchors(rp, split_patch))
                objs.push_back({rp.objects.at(a.y, a.x), rp.labels.at(a.y, a.x)});
            const auto plan = data::object_split(objs, split_ratio, split_seed);
            ensure_parent(split_out);
            data::write_split(split_out, plan);
            rec.inputs = dataset_files(split_manifest);
            rec.outputs = {split_out};
            rec.write(repro_path(split_out));
            std::cerr << plan.train_objects.size() << " train objects, " << plan.test_objects.size()
                      << " test objects\n";
        } else if (*trn) {
            rec.verb = "train";
            rec.flags = collect_flags(*trn);
            rec.seeds["seed"] = tc.seed;
            tc.validate();
            const auto rp = load_dataset(train_manifest);
            const auto train_side = side_samples(rp, train_split, "train", train_patch, train_cap);
            if (train_side.empty()) throw InputError("the split leaves no training samples");
            const auto set = train_no_augment ? train_side : data::build_training_set(train_side, tc.seed);
            auto m = model::build_model(model::parse_model_kind(train_model), rp.num_classes(), tc.seed, train_width,
                                        tc.dropout, rp.bands());
            ensure_parent(train_out);
            std::ofstream log(train_out + ".log");
            std::cerr << "training " << train_model << " on " << set.size() << " samples\n";
            auto res = training::train(std::move(m), set, tc, &log);
            model::save_model(train_out, res.model, true);
            std::cerr << "best epoch " << res.history.best_epoch << ", loss "
                      << res.history.epochs[res.history.best_epoch].loss << '\n';
            rec.inputs = dataset_files(train_manifest);
            rec.inputs.push_back(train_split);
            rec.outputs = {train_out, model::manifest_path_for(train_out), train_out + ".log"};
            rec.write(repro_path(train_out));
        } else if (*pred) {
            rec.verb = "predict";
            rec.flags = collect_flags(*pred);
            const auto m = model::load_model(model::manifest_path_for(pred_ckpt));
            const auto rp = load_dataset(pred_manifest);
            const auto map = training::predict_map(m, rp, po);
            ensure_parent(pred_out);
            data::write_raster(pred_out + ".labels.rast", map.labels);
            data::write_raster(pred_out + ".proba.rast", map.proba);
            rec.inputs = dataset_files(pred_manifest);
            rec.inputs.push_back(pred_ckpt);
            rec.outputs = {pred_out + ".labels.rast", pred_out + ".proba.rast"};
            rec.write(repro_path(pred_out));
        } else if (*feat) {
            rec.verb = "extract-features";
            rec.flags = collect_flags(*feat);
            const auto m = model::load_model(model::manifest_path_for(feat_ckpt));
            if (!m.trained()) std::cerr << "warning: features come from an untrained model\n";
            const auto rp = load_dataset(feat_manifest);
            const auto samples = side_samples(rp, feat_split, feat_side, model_patch(m, rp.ratio), feat_cap);
            if (samples.empty()) throw InputError("no samples on the requested side");
            const auto x = training::extract_sample_features(m, samples);
            ensure_parent(feat_out);
            write_feature_csv(feat_out, x, labels_of(samples));
            rec.inputs = dataset_files(feat_manifest);
            rec.inputs.push_back(feat_ckpt);
            if (!feat_split.empty()) rec.inputs.push_back(feat_split);
            rec.outputs = {feat_out};
            rec.write(repro_path(feat_out));
        } else if (*rff) {
            rec.verb = "rf-fit";
            rec.flags = collect_flags(*rff);
            rec.seeds["seed"] = fc.seed;
            if (rf_depth > 0) fc.max_depth = rf_depth;
            nn::Tensor<float> x, x_eval;
            std::vector<std::int32_t> y, y_eval;
            std::size_t classes = 0;
            if (!rf_features.empty()) {
                std::tie(x, y) = read_feature_csv(rf_features);
                rec.inputs.push_back(rf_features);
                if (!rf_eval.empty()) {
                    std::tie(x_eval, y_eval) = read_feature_csv(rf_eval);
                    rec.inputs.push_back(rf_eval);
                }
                for (auto v : y) classes = std::max<std::size_t>(classes, static_cast<std::size_t>(std::max(v, 1)));
                for (auto v : y_eval) classes = std::max<std::size_t>(classes, static_cast<std::size_t>(std::max(v, 1)));
            } else if (!rf_manifest.empty()) {
                const auto rp = load_dataset(rf_manifest);
                classes = rp.num_classes();
                const auto tr = side_samples(rp, rf_split, rf_split.empty() ? "all" : "train", 32, rf_cap);
                if (tr.empty()) throw InputError("no training samples");
                x = rf_source == "pixel" ? pixel_features(rp, tr) : patch_features(tr);
                y = labels_of(tr);
                rec.inputs = dataset_files(rf_manifest);
                if (!rf_split.empty()) {
                    rec.inputs.push_back(rf_split);
                    const auto te = side_samples(rp, rf_split, "test", 32, rf_cap);
                    if (!te.empty()) {
                        x_eval = rf_source == "pixel" ? pixel_features(rp, te) : patch_features(te);
                        y_eval = labels_of(te);
                    }
                }
            } else {
                throw ConfigError("rf-fit needs --features or --manifest");
            }
            const auto rf = forest::RandomForest::fit(x, y, classes, fc);
            if (rf.degenerate()) std::cerr << "warning: single-class training labels; the forest is constant\n";
            ensure_parent(rf_out);
            rf.save(rf_out);
            rec.outputs = {rf_out};
            if (!y_eval.empty()) {
                const auto p = rf.predict(x_eval);
                metrics::ConfusionMatrix cm(classes);
                for (std::size_t i = 0; i < y_eval.size(); ++i) cm.add(y_eval[i], p.labels[i]);
                write_scores(rf_out + ".scores.csv", cm);
                rec.outputs.push_back(rf_out + ".scores.csv");
                std::cerr << "held-out accuracy " << metrics::accuracy(cm) << '\n';
            }
            rec.write(repro_path(rf_out));
        } else if (*ev) {
            rec.verb = "evaluate";
            rec.flags = collect_flags(*ev);
            const auto p = data::read_int_raster(ev_pred);
            const auto t = data::read_int_raster(ev_truth);
            if (p.h != t.h || p.w != t.w) throw DimensionError("prediction and truth rasters differ in extent");
            metrics::ConfusionMatrix cm(ev_classes);
            for (std::size_t i = 0; i < t.values.size(); ++i)
                if (t.values[i] > 0) cm.add(t.values[i], p.values[i]);
            ensure_parent(ev_out);
            write_scores(ev_out, cm);
            rec.inputs = {ev_pred, ev_truth};
            rec.outputs = {ev_out, ev_out + ".confusion.csv"};
            rec.write(repro_path(ev_out));
        } else if (*rs) {
            rec.verb = "run-splits";
            rec.flags = collect_flags(*rs);
            rec.seeds["seed"] = rc.seed;
            rc.augment = !rs_no_augment;
            if (rs_depth > 0) rc.forest.max_depth = rs_depth;
            rc.models.clear();
            for (const auto& k : io::split(rs_models, ',')) rc.models.push_back(model::parse_model_kind(k));
            rc.output_dir = rs_out;
            const auto rp = load_dataset(rs_manifest);
            const auto report = training::run_splits(rp, rc, &std::cerr);
            for (const auto& m : report.methods)
                std::cerr << m.method << ": accuracy " << m.mean.accuracy << " +- " << m.std.accuracy << '\n';
            rec.inputs = dataset_files(rs_manifest);
            for (const auto& entry : fs::recursive_directory_iterator(rs_out))
                if (entry.is_regular_file() && entry.path().extension() != ".log")
                    rec.outputs.push_back(entry.path().string());
            std::sort(rec.outputs.begin(), rec.outputs.end());
            rec.write((fs::path(rs_out) / "run.repro.json").string());
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

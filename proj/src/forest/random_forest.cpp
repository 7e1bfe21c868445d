#include "mrfusion/forest/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "mrfusion/util/binary_io.hpp"
#include "mrfusion/util/parallel.hpp"

namespace mrfusion::forest {

void ForestConfig::validate() const {
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
    if (max_depth && *max_depth < 1) throw ConfigError("max_depth must be >= 1 when set");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct Builder {
    const Tensor<float>& X;
    const std::vector<std::int32_t>& y;  // zero-based here
    std::size_t L, F, mtry;
    const ForestConfig& cfg;
    std::mt19937_64 rng;
    DecisionTree tree;

    std::vector<std::size_t> feature_order;
    std::vector<std::pair<float, std::int32_t>> column;

    float x(std::size_t i, std::size_t f) const { return X[i * F + f]; }

    std::uint32_t make_leaf(const std::vector<std::size_t>& idx) {
        TreeNode n;
        n.leaf = static_cast<std::uint32_t>(tree.hists.size() / L);
        tree.hists.resize(tree.hists.size() + L, 0);
        for (auto i : idx) ++tree.hists[n.leaf * L + static_cast<std::size_t>(y[i])];
        tree.nodes.push_back(n);
        return static_cast<std::uint32_t>(tree.nodes.size() - 1);
    }

    struct Split {
        bool found = false;
        std::size_t feature = 0;
        float threshold = 0.0f;
        double score = -1.0;
    };

    // Maximizes sum_k cl_k^2 / n_l + sum_k cr_k^2 / n_r, which minimizes the
    // size-weighted Gini impurity of the children.
    Split best_split(const std::vector<std::size_t>& idx) {
        Split best;
        const std::size_t n = idx.size();
        std::vector<double> total(L, 0.0), left(L);
        for (auto i : idx) total[static_cast<std::size_t>(y[i])] += 1.0;

        std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
        std::size_t evaluated = 0;
        for (std::size_t k = 0; k < F && evaluated < mtry; ++k) {
            const auto j = std::uniform_int_distribution<std::size_t>(k, F - 1)(rng);
            std::swap(feature_order[k], feature_order[j]);
            const std::size_t f = feature_order[k];

            column.clear();
            for (auto i : idx) column.emplace_back(x(i, f), y[i]);
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;  // constant here
            ++evaluated;

            std::fill(left.begin(), left.end(), 0.0);
            double sl = 0.0, sr = 0.0;
            for (std::size_t c = 0; c < L; ++c) sr += total[c] * total[c];
            for (std::size_t p = 0; p + 1 < n; ++p) {
                const auto c = static_cast<std::size_t>(column[p].second);
                const double rc = total[c] - left[c];
                sl += 2.0 * left[c] + 1.0;
                sr -= 2.0 * rc - 1.0;
                left[c] += 1.0;
                const std::size_t nl = p + 1, nr = n - nl;
                if (column[p].first == column[p + 1].first) continue;
                if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
                const double score = sl / static_cast<double>(nl) + sr / static_cast<double>(nr);
                if (score > best.score) {
                    const float a = column[p].first, b = column[p + 1].first;
                    float thr = a + (b - a) / 2.0f;
                    if (!(thr >= a && thr < b)) thr = a;
                    best = {true, f, thr, score};
                }
            }
        }
        return best;
    }

    std::uint32_t build(std::vector<std::size_t>& idx, std::size_t depth) {
        bool pure = true;
        for (auto i : idx)
            if (y[i] != y[idx[0]]) {
                pure = false;
                break;
            }
        const bool depth_cap = cfg.max_depth && depth >= *cfg.max_depth;
        if (pure || depth_cap || idx.size() < 2 * cfg.min_leaf) return make_leaf(idx);
        const Split s = best_split(idx);
        if (!s.found) return make_leaf(idx);

        std::vector<std::size_t> li, ri;
        for (auto i : idx) (x(i, s.feature) <= s.threshold ? li : ri).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const auto me = static_cast<std::uint32_t>(tree.nodes.size());
        TreeNode node;
        node.feature = static_cast<std::int32_t>(s.feature);
        node.threshold = s.threshold;
        tree.nodes.push_back(node);
        const auto l = build(li, depth + 1);
        const auto r = build(ri, depth + 1);
        tree.nodes[me].left = l;
        tree.nodes[me].right = r;
        return me;
    }
};

}  // namespace

RandomForest RandomForest::fit(const Tensor<float>& X, const std::vector<std::int32_t>& y, std::size_t num_classes,
                               const ForestConfig& config) {
    config.validate();
    if (X.rank() != 2) throw DimensionError("forest input must be samples x features");
    const std::size_t n = X.extent(0), F = X.extent(1);
    if (n < 2) throw InputError("a forest needs at least 2 samples");
    if (y.size() != n) throw InputError("label count does not match sample count");
    if (num_classes < 1) throw InputError("num_classes must be >= 1");
    if (!X.all_finite()) throw InputError("forest input contains non-finite values");
    std::vector<std::int32_t> y0(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] < 1 || static_cast<std::size_t>(y[i]) > num_classes)
            throw InputError("label " + std::to_string(y[i]) + " outside 1.." + std::to_string(num_classes));
        y0[i] = y[i] - 1;
    }

    RandomForest rf;
    rf.num_classes_ = num_classes;
    rf.num_features_ = F;
    rf.degenerate_ = std::all_of(y0.begin(), y0.end(), [&](std::int32_t v) { return v == y0[0]; });
    std::size_t mtry = config.features_per_split;
    if (mtry == 0) mtry = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(F))));
    mtry = std::clamp<std::size_t>(mtry, 1, F);

    rf.trees_.resize(config.n_trees);
    util::parallel_for(config.n_trees, [&](std::size_t t) {
        Builder b{X, y0, num_classes, F, mtry, config, std::mt19937_64(splitmix64(config.seed ^ splitmix64(t))), {},
                  std::vector<std::size_t>(F), {}};
        std::vector<std::size_t> idx(n);
        if (config.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (auto& i : idx) i = pick(b.rng);
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
        }
        b.build(idx, 0);
        rf.trees_[t] = std::move(b.tree);
    });
    return rf;
}

ForestPrediction RandomForest::predict(const Tensor<float>& X) const {
    if (trees_.empty()) throw StateError("forest has no trees");
    if (X.rank() != 2 || X.extent(1) != num_features_)
        throw InputError("feature width " + (X.rank() == 2 ? std::to_string(X.extent(1)) : nn::shape_string(X.shape())) +
                         " does not match the trained width " + std::to_string(num_features_));
    const std::size_t n = X.extent(0), L = num_classes_;
    ForestPrediction out{std::vector<std::int32_t>(n), Tensor<double>(nn::Shape{n, L})};
    util::parallel_for(n, [&](std::size_t i) {
        const float* row = X.raw() + i * num_features_;
        double* p = out.proba.raw() + i * L;
        for (const auto& tree : trees_) {
            std::size_t k = 0;
            while (tree.nodes[k].feature >= 0) {
                const auto& nd = tree.nodes[k];
                k = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
            }
            const std::uint32_t* h = tree.hists.data() + tree.nodes[k].leaf * L;
            double s = 0.0;
            for (std::size_t c = 0; c < L; ++c) s += h[c];
            for (std::size_t c = 0; c < L; ++c) p[c] += h[c] / s;
        }
        std::size_t best = 0;
        for (std::size_t c = 0; c < L; ++c) {
            p[c] /= static_cast<double>(trees_.size());
            if (p[c] > p[best]) best = c;
        }
        out.labels[i] = static_cast<std::int32_t>(best + 1);
    });
    return out;
}

namespace {
constexpr const char* kMagic = "MRRF1";
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;
}  // namespace

void RandomForest::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(kMagic, 5);
    io::write_u64(os, num_classes_);
    io::write_u64(os, num_features_);
    io::write_u8(os, degenerate_ ? 1 : 0);
    io::write_u64(os, trees_.size());
    for (const auto& t : trees_) {
        io::write_u64(os, t.nodes.size());
        for (const auto& nd : t.nodes) {
            io::write_array32(os, &nd.feature, 1);
            io::write_array32(os, &nd.threshold, 1);
            io::write_array32(os, &nd.left, 1);
            io::write_array32(os, &nd.right, 1);
            io::write_array32(os, &nd.leaf, 1);
        }
        io::write_u64(os, t.hists.size());
        io::write_array32(os, t.hists.data(), t.hists.size());
    }
    if (!os) throw IoError("failed writing " + path);
}

RandomForest RandomForest::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    io::expect_magic(is, kMagic, path);
    RandomForest rf;
    rf.num_classes_ = io::read_u64(is, "forest header");
    rf.num_features_ = io::read_u64(is, "forest header");
    rf.degenerate_ = io::read_u8(is, "forest header") != 0;
    const auto n_trees = io::read_u64(is, "forest header");
    if (rf.num_classes_ == 0 || rf.num_classes_ > kMaxCount || rf.num_features_ == 0 ||
        rf.num_features_ > kMaxCount || n_trees == 0 || n_trees > kMaxCount)
        throw FormatError("implausible forest header in " + path);
    rf.trees_.resize(n_trees);
    for (auto& t : rf.trees_) {
        const auto n_nodes = io::read_u64(is, "tree");
        if (n_nodes == 0 || n_nodes > kMaxCount) throw FormatError("implausible node count in " + path);
        t.nodes.resize(n_nodes);
        for (auto& nd : t.nodes) {
            io::read_array32(is, &nd.feature, 1, "tree node");
            io::read_array32(is, &nd.threshold, 1, "tree node");
            io::read_array32(is, &nd.left, 1, "tree node");
            io::read_array32(is, &nd.right, 1, "tree node");
            io::read_array32(is, &nd.leaf, 1, "tree node");
        }
        const auto n_hist = io::read_u64(is, "leaf histograms");
        if (n_hist % rf.num_classes_ != 0 || n_hist > kMaxCount) throw FormatError("bad histogram size in " + path);
        t.hists.resize(n_hist);
        io::read_array32(is, t.hists.data(), n_hist, "leaf histograms");
        const auto leaves = n_hist / rf.num_classes_;
        for (std::size_t k = 0; k < t.nodes.size(); ++k) {
            const auto& nd = t.nodes[k];
            if (nd.feature >= 0) {
                // Children follow their parent in the node array.
                if (static_cast<std::uint64_t>(nd.feature) >= rf.num_features_ || nd.left <= k ||
                    nd.right <= k || nd.left >= n_nodes || nd.right >= n_nodes)
                    throw FormatError("corrupt tree node in " + path);
            } else {
                if (nd.leaf >= leaves) throw FormatError("corrupt leaf index in " + path);
                const auto* h = t.hists.data() + nd.leaf * rf.num_classes_;
                if (std::accumulate(h, h + rf.num_classes_, std::uint64_t{0}) == 0)
                    throw FormatError("empty leaf in " + path);
            }
        }
    }
    return rf;
}

}  // namespace mrfusion::forest

#include "mrfusion/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "mrfusion/util/keyvalue.hpp"

namespace mrfusion::data {

SplitPlan object_split(const std::vector<ObjectLabel>& objects, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    std::map<std::int32_t, std::set<std::int32_t>> per_class;
    std::map<std::int32_t, std::int32_t> seen;
    for (const auto& o : objects) {
        if (o.object_id <= 0) throw LabelError("sample without an object id");
        auto [it, inserted] = seen.emplace(o.object_id, o.label);
        if (!inserted && it->second != o.label)
            throw LabelError("object " + std::to_string(o.object_id) + " carries two labels");
        per_class[o.label].insert(o.object_id);
    }

    SplitPlan plan;
    plan.seed = seed;
    plan.ratio = ratio;
    std::mt19937_64 rng(seed);
    for (const auto& [label, ids] : per_class) {
        const std::size_t n = ids.size();
        if (n < 2)
            throw SplitError("class " + std::to_string(label) + " has " + std::to_string(n) +
                             " object; at least 2 are needed");
        auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        std::vector<std::int32_t> order(ids.begin(), ids.end());
        std::shuffle(order.begin(), order.end(), rng);
        plan.train_objects.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        plan.test_objects.insert(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    }
    return plan;
}

SplitPlan object_split(const std::vector<PatchPair>& samples, double ratio, std::uint64_t seed) {
    std::vector<ObjectLabel> objs;
    objs.reserve(samples.size());
    for (const auto& s : samples) objs.push_back({s.object_id, s.label});
    return object_split(objs, ratio, seed);
}

std::vector<ObjectLabel> scene_objects(const RasterPair& rp) {
    std::map<std::int32_t, std::int32_t> m;
    for (std::size_t i = 0; i < rp.labels.values.size(); ++i)
        if (rp.labels.values[i] > 0) m.emplace(rp.objects.values[i], rp.labels.values[i]);
    std::vector<ObjectLabel> out;
    for (const auto& [o, l] : m) out.push_back({o, l});
    return out;
}

SplitSamples apply_split(std::vector<PatchPair> samples, const SplitPlan& plan) {
    SplitSamples out;
    for (auto& s : samples) {
        if (plan.train_objects.count(s.object_id)) out.train.push_back(std::move(s));
        else if (plan.test_objects.count(s.object_id)) out.test.push_back(std::move(s));
    }
    return out;
}

namespace {

std::string ids_string(const std::set<std::int32_t>& ids) {
    std::vector<std::string> parts;
    for (auto i : ids) parts.push_back(std::to_string(i));
    return io::join(parts, ',');
}

std::set<std::int32_t> parse_ids(const std::string& s, const std::string& path) {
    std::set<std::int32_t> out;
    for (const auto& p : io::split(s, ',')) {
        try {
            std::size_t pos = 0;
            const long v = std::stol(p, &pos);
            if (pos != p.size() || v <= 0) throw std::invalid_argument(p);
            out.insert(static_cast<std::int32_t>(v));
        } catch (const std::exception&) {
            throw FormatError(path + ": bad object id '" + p + "'");
        }
    }
    return out;
}

}  // namespace

void write_split(const std::string& path, const SplitPlan& plan) {
    io::KeyValueFile kv;
    kv.set("format", "mrfusion-split-1");
    kv.set("seed", std::to_string(plan.seed));
    kv.set("ratio", io::format_double(plan.ratio));
    kv.set("train_objects", ids_string(plan.train_objects));
    kv.set("test_objects", ids_string(plan.test_objects));
    kv.write(path);
}

SplitPlan read_split(const std::string& path) {
    const auto kv = io::KeyValueFile::read(path);
    if (kv.get_or("format", "") != "mrfusion-split-1") throw FormatError(path + " is not a split plan");
    SplitPlan plan;
    try {
        plan.seed = std::stoull(kv.get("seed"));
    } catch (const std::exception&) {
        throw FormatError(path + ": bad seed");
    }
    plan.ratio = kv.get_double("ratio");
    plan.train_objects = parse_ids(kv.get("train_objects"), path);
    plan.test_objects = parse_ids(kv.get("test_objects"), path);
    for (auto id : plan.train_objects)
        if (plan.test_objects.count(id))
            throw FormatError(path + ": object " + std::to_string(id) + " is on both sides");
    return plan;
}

}  // namespace mrfusion::data

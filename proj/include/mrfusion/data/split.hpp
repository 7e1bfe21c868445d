#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mrfusion/data/patches.hpp"

namespace mrfusion::data {

struct SplitPlan {
    std::uint64_t seed = 0;
    double ratio = 0.30;
    std::set<std::int32_t> train_objects, test_objects;

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct ObjectLabel {
    std::int32_t object_id;
    std::int32_t label;
};

/// Per class, round(ratio * n) objects (clamped to [1, n-1]) go to training,
/// chosen by a seeded shuffle. Throws SplitError for a class with < 2
/// objects and LabelError for samples without an object.
SplitPlan object_split(const std::vector<ObjectLabel>& objects, double ratio, std::uint64_t seed);
SplitPlan object_split(const std::vector<PatchPair>& samples, double ratio, std::uint64_t seed);

/// Distinct (object, label) pairs covering every labeled pixel of the scene.
std::vector<ObjectLabel> scene_objects(const RasterPair& rp);

struct SplitSamples {
    std::vector<PatchPair> train, test;
};

/// Partitions samples by object; samples of objects absent from the plan
/// are dropped.
SplitSamples apply_split(std::vector<PatchPair> samples, const SplitPlan& plan);

// Text format: key=value with seed, ratio and comma-separated object ids.
void write_split(const std::string& path, const SplitPlan& plan);
SplitPlan read_split(const std::string& path);

}  // namespace mrfusion::data

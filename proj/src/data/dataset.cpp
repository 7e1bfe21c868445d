#include "mrfusion/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "mrfusion/util/keyvalue.hpp"

namespace mrfusion::data {

namespace {

void require_band_shape(const Tensor<float>& t, const char* what) {
    if (t.rank() != 3) throw DimensionError(std::string(what) + " must be H x W x C");
}

std::string stats_string(const BandStats& s) {
    std::vector<std::string> parts;
    for (std::size_t b = 0; b < s.bands(); ++b)
        parts.push_back(io::format_double(s.min[b]) + ":" + io::format_double(s.max[b]));
    return io::join(parts, ',');
}

BandStats parse_stats(const std::string& text) {
    BandStats s;
    for (const auto& part : io::split(text, ',')) {
        auto mm = io::split(part, ':');
        if (mm.size() != 2) throw FormatError("malformed band stats: " + text);
        try {
            s.min.push_back(std::stof(mm[0]));
            s.max.push_back(std::stof(mm[1]));
        } catch (const std::exception&) {
            throw FormatError("malformed band stats: " + text);
        }
    }
    return s;
}

}  // namespace

void validate(const RasterPair& rp) {
    require_band_shape(rp.pan, "PAN");
    require_band_shape(rp.ms, "MS");
    if (rp.pan.extent(2) != 1) throw DimensionError("PAN must have a single band");
    const std::size_t h = rp.height(), w = rp.width(), r = rp.ratio;
    if (r == 0) throw DimensionError("ratio must be positive");
    if (h % r || w % r)
        throw DimensionError("PAN extent " + std::to_string(h) + "x" + std::to_string(w) +
                             " is not divisible by ratio " + std::to_string(r));
    if (rp.ms.extent(0) != h / r || rp.ms.extent(1) != w / r)
        throw DimensionError("MS extent does not equal PAN extent / ratio");
    if (rp.has_fused()) {
        require_band_shape(rp.fused, "fused raster");
        if (rp.fused.extent(0) != h || rp.fused.extent(1) != w || rp.fused.extent(2) != rp.bands())
            throw DimensionError("fused raster must be Hp x Wp x c");
    }
    for (const auto* g : {&rp.labels, &rp.objects}) {
        if (g->h != h || g->w != w || g->values.size() != h * w)
            throw DimensionError("label/object rasters must match the PAN extent");
    }
    if (rp.num_classes() < 1) throw LabelError("dataset declares no classes");

    std::map<std::int32_t, std::int32_t> object_label;
    for (std::size_t i = 0; i < h * w; ++i) {
        const auto lab = rp.labels.values[i];
        const auto obj = rp.objects.values[i];
        if (lab < 0 || static_cast<std::size_t>(lab) > rp.num_classes())
            throw LabelError("label " + std::to_string(lab) + " outside 0.." +
                             std::to_string(rp.num_classes()));
        if (obj < 0) throw LabelError("negative object id " + std::to_string(obj));
        if (lab > 0 && obj == 0)
            throw LabelError("labeled pixel " + std::to_string(i) + " has no object id");
        if (obj == 0) continue;
        auto [it, inserted] = object_label.emplace(obj, lab);
        if (!inserted && it->second != lab)
            throw LabelError("object " + std::to_string(obj) + " carries labels " +
                             std::to_string(it->second) + " and " + std::to_string(lab));
    }
}

BandStats compute_band_stats(const Tensor<float>& raster) {
    require_band_shape(raster, "raster");
    const std::size_t c = raster.extent(2), n = raster.size() / c;
    BandStats s;
    s.min.resize(c);
    s.max.resize(c);
    for (std::size_t b = 0; b < c; ++b) {
        s.min[b] = s.max[b] = raster[b];
        for (std::size_t i = 0; i < n; ++i) {
            const float v = raster[i * c + b];
            s.min[b] = std::min(s.min[b], v);
            s.max[b] = std::max(s.max[b], v);
        }
    }
    return s;
}

bool NormalizeResult::warning() const {
    return std::find(constant_band.begin(), constant_band.end(), true) != constant_band.end();
}

NormalizeResult normalize(const Tensor<float>& raster, const BandStats& stats) {
    require_band_shape(raster, "raster");
    const std::size_t c = raster.extent(2), n = raster.size() / c;
    if (stats.bands() != c || stats.max.size() != c)
        throw DimensionError("band stats cover " + std::to_string(stats.bands()) + " bands, raster has " +
                             std::to_string(c));
    NormalizeResult res{Tensor<float>(raster.shape()), std::vector<bool>(c, false)};
    for (std::size_t b = 0; b < c; ++b) {
        const double lo = stats.min[b], hi = stats.max[b];
        if (!(hi > lo)) {
            res.constant_band[b] = true;
            continue;  // output already zero
        }
        const double span = hi - lo;
        for (std::size_t i = 0; i < n; ++i)
            res.values[i * c + b] = static_cast<float>((raster[i * c + b] - lo) / span);
    }
    return res;
}

std::vector<std::string> normalize_scene(RasterPair& rp) {
    std::vector<std::string> warnings;
    auto run = [&](Tensor<float>& t, BandStats& stats, const char* name) {
        stats = compute_band_stats(t);
        auto res = normalize(t, stats);
        for (std::size_t b = 0; b < res.constant_band.size(); ++b)
            if (res.constant_band[b])
                warnings.push_back(std::string(name) + " band " + std::to_string(b) +
                                   " is constant; mapped to zeros");
        t = std::move(res.values);
    };
    run(rp.pan, rp.pan_stats, "PAN");
    run(rp.ms, rp.ms_stats, "MS");
    if (rp.has_fused()) run(rp.fused, rp.fused_stats, "fused");
    rp.normalized = true;
    return warnings;
}

void write_dataset(const std::string& manifest_path, const RasterPair& rp) {
    validate(rp);
    const std::filesystem::path mp(manifest_path);
    const std::string stem = mp.stem().string();
    const auto dir = mp.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    auto place = [&](const std::string& suffix) {
        const std::string name = stem + "." + suffix + ".rast";
        return std::make_pair(name, (dir / name).string());
    };

    io::KeyValueFile kv;
    kv.set("format", "mrfusion-dataset-1");
    auto put = [&](const std::string& key, auto const& raster) {
        auto [name, path] = place(key);
        write_raster(path, raster);
        kv.set(key, name);
    };
    put("pan", rp.pan);
    put("ms", rp.ms);
    put("labels", rp.labels);
    put("objects", rp.objects);
    if (rp.has_fused()) put("fused", rp.fused);
    kv.set("ratio", std::to_string(rp.ratio));
    kv.set("bands", std::to_string(rp.bands()));
    kv.set("classes", io::join(rp.class_names, ','));
    kv.set("normalized", rp.normalized ? "1" : "0");
    if (rp.normalized) {
        kv.set("pan_stats", stats_string(rp.pan_stats));
        kv.set("ms_stats", stats_string(rp.ms_stats));
        if (rp.has_fused()) kv.set("fused_stats", stats_string(rp.fused_stats));
    }
    kv.write(manifest_path);
}

RasterPair read_dataset(const std::string& manifest_path, bool normalize,
                        std::vector<std::string>* warnings) {
    const auto kv = io::KeyValueFile::read(manifest_path);
    if (kv.get_or("format", "") != "mrfusion-dataset-1")
        throw FormatError(manifest_path + " is not a dataset manifest");
    auto path_of = [&](const std::string& key) { return io::resolve_relative(manifest_path, kv.get(key)); };

    RasterPair rp;
    rp.pan = read_raster(path_of("pan"));
    rp.ms = read_raster(path_of("ms"));
    rp.labels = read_int_raster(path_of("labels"));
    rp.objects = read_int_raster(path_of("objects"));
    if (kv.has("fused")) rp.fused = read_raster(path_of("fused"));
    const long long ratio = kv.get_int("ratio");
    if (ratio <= 0) throw FormatError(manifest_path + ": ratio must be positive");
    rp.ratio = static_cast<std::size_t>(ratio);
    rp.class_names = io::split(kv.get("classes"), ',');
    if (static_cast<long long>(rp.ms.extent(2)) != kv.get_int("bands"))
        throw FormatError(manifest_path + ": band count disagrees with the MS raster");
    rp.normalized = kv.get_or("normalized", "0") == "1";
    if (rp.normalized) {
        rp.pan_stats = parse_stats(kv.get("pan_stats"));
        rp.ms_stats = parse_stats(kv.get("ms_stats"));
        if (rp.has_fused()) rp.fused_stats = parse_stats(kv.get("fused_stats"));
    }
    validate(rp);
    if (normalize && !rp.normalized) {
        auto w = normalize_scene(rp);
        if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
    }
    return rp;
}

}  // namespace mrfusion::data

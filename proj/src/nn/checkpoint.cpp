#include "mrfusion/nn/checkpoint.hpp"

#include <fstream>
#include <limits>
#include <unordered_map>

#include "mrfusion/util/binary_io.hpp"

namespace mrfusion::nn {

namespace {

constexpr const char* kMagic = "MRFW1";
constexpr std::uint64_t kMaxName = 4096;
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

}  // namespace

void write_checkpoint(const std::string& path, const ParamSet<float>& params, bool with_adam) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(kMagic, 5);
    io::write_u64(os, params.size());
    for (const auto& e : params.entries()) {
        io::write_string(os, e.name);
        io::write_u64(os, e.value.rank());
        for (auto ext : e.value.shape()) io::write_u64(os, ext);
        io::write_array32(os, e.value.raw(), e.value.size());
    }
    io::write_u8(os, with_adam ? 1 : 0);
    if (with_adam) {
        io::write_u64(os, static_cast<std::uint64_t>(params.adam_step_count()));
        std::uint64_t n = 0;
        for (const auto& e : params.entries()) n += e.trainable ? 1 : 0;
        io::write_u64(os, n);
        for (const auto& e : params.entries()) {
            if (!e.trainable) continue;
            io::write_string(os, e.name);
            io::write_array32(os, e.first_moment.raw(), e.first_moment.size());
            io::write_array32(os, e.second_moment.raw(), e.second_moment.size());
        }
    }
    if (!os) throw IoError("failed writing " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    io::expect_magic(is, kMagic, path);
    CheckpointData data;
    const auto count = io::read_u64(is, "checkpoint header");
    if (count > (1u << 20)) throw FormatError("implausible parameter count in " + path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::uint64_t i = 0; i < count; ++i) {
        CheckpointData::Entry e;
        e.name = io::read_string(is, kMaxName, "parameter name");
        const auto rank = io::read_u64(is, "parameter rank");
        if (rank == 0 || rank > kMaxRank) throw FormatError("bad rank for " + e.name);
        Shape shape;
        std::uint64_t total = 1;
        for (std::uint64_t r = 0; r < rank; ++r) {
            const auto ext = io::read_u64(is, "parameter extent");
            if (ext == 0 || ext > kMaxElements || total > kMaxElements / ext)
                throw FormatError("extent overflow for " + e.name);
            total *= ext;
            shape.push_back(static_cast<std::size_t>(ext));
        }
        std::vector<float> values(total);
        io::read_array32(is, values.data(), total, "parameter values");
        e.value = Tensor<float>(shape, std::move(values));
        index.emplace(e.name, data.entries.size());
        data.entries.push_back(std::move(e));
    }
    data.has_adam = io::read_u8(is, "adam flag") != 0;
    if (data.has_adam) {
        data.adam_step = static_cast<std::int64_t>(io::read_u64(is, "adam step"));
        const auto n = io::read_u64(is, "adam count");
        if (n > count) throw FormatError("adam section larger than parameter section");
        for (std::uint64_t i = 0; i < n; ++i) {
            CheckpointData::Moments m;
            m.name = io::read_string(is, kMaxName, "adam name");
            auto it = index.find(m.name);
            if (it == index.end()) throw FormatError("adam state for unknown parameter " + m.name);
            const auto& shape = data.entries[it->second].value.shape();
            m.first = Tensor<float>(shape);
            m.second = Tensor<float>(shape);
            io::read_array32(is, m.first.raw(), m.first.size(), "adam first moment");
            io::read_array32(is, m.second.raw(), m.second.size(), "adam second moment");
            data.moments.push_back(std::move(m));
        }
    }
    return data;
}

void load_checkpoint(const std::string& path, ParamSet<float>& params) {
    auto data = read_checkpoint(path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data.entries.size(); ++i) index.emplace(data.entries[i].name, i);
    for (auto& e : params.entries()) {
        auto it = index.find(e.name);
        if (it == index.end()) throw FormatError(path + " lacks parameter " + e.name);
        auto& src = data.entries[it->second].value;
        if (src.shape() != e.value.shape())
            throw FormatError(path + ": parameter " + e.name + " has shape " +
                              shape_string(src.shape()) + ", expected " +
                              shape_string(e.value.shape()));
        e.value = std::move(src);
    }
    if (data.has_adam) {
        params.set_adam_step_count(data.adam_step);
        for (auto& m : data.moments) {
            auto& e = params.entry(m.name);
            if (!e.trainable) continue;
            e.first_moment = std::move(m.first);
            e.second_moment = std::move(m.second);
        }
    }
}

}  // namespace mrfusion::nn

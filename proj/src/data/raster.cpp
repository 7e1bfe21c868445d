#include "mrfusion/data/raster.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "mrfusion/util/binary_io.hpp"

namespace mrfusion::data {

namespace {

constexpr const char* kMagic = "MRRAST1\n";
constexpr std::size_t kMaxElements = std::size_t{1} << 34;

std::ofstream open_for_write(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    return os;
}

void write_header(std::ostream& os, std::size_t h, std::size_t w, std::size_t c, const char* dtype) {
    os << kMagic << h << ' ' << w << ' ' << c << ' ' << dtype << '\n';
}

RasterHeader parse_header(std::istream& is, const std::string& path) {
    io::expect_magic(is, kMagic, path);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("truncated header in " + path);
    std::istringstream hs(line);
    long long h = -1, w = -1, c = -1;
    std::string dtype, extra;
    if (!(hs >> h >> w >> c >> dtype) || (hs >> extra))
        throw FormatError("malformed header line in " + path + ": '" + line + "'");
    if (h <= 0 || w <= 0 || c <= 0) throw FormatError("non-positive extent in " + path);
    const auto uh = static_cast<std::size_t>(h), uw = static_cast<std::size_t>(w),
               uc = static_cast<std::size_t>(c);
    if (uh > kMaxElements || uw > kMaxElements / uh || uc > kMaxElements / (uh * uw))
        throw FormatError("extent overflow in " + path);
    RasterHeader hd{uh, uw, uc, RasterType::f32};
    if (dtype == "f32") hd.dtype = RasterType::f32;
    else if (dtype == "i32") hd.dtype = RasterType::i32;
    else throw FormatError("unknown dtype '" + dtype + "' in " + path);
    return hd;
}

std::ifstream open_for_read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return is;
}

void expect_eof(std::istream& is, const std::string& path) {
    if (is.peek() != std::char_traits<char>::eof())
        throw FormatError("trailing bytes after payload in " + path);
}

}  // namespace

void write_raster(const std::string& path, const Tensor<float>& raster) {
    std::size_t h, w, c;
    if (raster.rank() == 3) {
        h = raster.extent(0), w = raster.extent(1), c = raster.extent(2);
    } else if (raster.rank() == 2) {
        h = raster.extent(0), w = raster.extent(1), c = 1;
    } else {
        throw DimensionError("raster must be H x W x C, got " + nn::shape_string(raster.shape()));
    }
    auto os = open_for_write(path);
    write_header(os, h, w, c, "f32");
    io::write_array32(os, raster.raw(), raster.size());
    if (!os) throw IoError("failed writing " + path);
}

void write_raster(const std::string& path, const IntRaster& raster) {
    if (raster.values.size() != raster.h * raster.w || raster.values.empty())
        throw DimensionError("integer raster payload does not match its extents");
    auto os = open_for_write(path);
    write_header(os, raster.h, raster.w, 1, "i32");
    io::write_array32(os, raster.values.data(), raster.values.size());
    if (!os) throw IoError("failed writing " + path);
}

RasterHeader read_raster_header(const std::string& path) {
    auto is = open_for_read(path);
    return parse_header(is, path);
}

Tensor<float> read_raster(const std::string& path) {
    auto is = open_for_read(path);
    const auto hd = parse_header(is, path);
    if (hd.dtype != RasterType::f32) throw FormatError(path + " is not an f32 raster");
    Tensor<float> t(Shape{hd.h, hd.w, hd.c});
    io::read_array32(is, t.raw(), t.size(), "raster payload");
    expect_eof(is, path);
    return t;
}

IntRaster read_int_raster(const std::string& path) {
    auto is = open_for_read(path);
    const auto hd = parse_header(is, path);
    if (hd.dtype != RasterType::i32) throw FormatError(path + " is not an i32 raster");
    if (hd.c != 1) throw FormatError(path + ": integer rasters must have one band");
    IntRaster r(hd.h, hd.w);
    io::read_array32(is, r.values.data(), r.values.size(), "raster payload");
    expect_eof(is, path);
    return r;
}

}  // namespace mrfusion::data

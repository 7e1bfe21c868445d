#include "mrfusion/model/branch.hpp"

#include <algorithm>
#include <sstream>

#include "mrfusion/util/keyvalue.hpp"

namespace mrfusion::model {

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::conv2d:
            if (kernel_size == 0 || kernel_size % 2 == 0)
                throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(kernel_size));
            if (filters < 1) throw ConfigError("conv2d needs at least one filter");
            if (stride < 1) throw ConfigError("conv2d stride must be >= 1");
            break;
        case LayerKind::maxpool2d:
            if (kernel_size < 1 || stride < 1) throw ConfigError("maxpool2d window and stride must be >= 1");
            break;
        case LayerKind::dense:
            if (filters < 1) throw ConfigError("dense needs at least one unit");
            break;
        case LayerKind::dropout:
            if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
            break;
        default:
            break;
    }
}

std::string to_string(const LayerSpec& spec) {
    std::ostringstream os;
    switch (spec.kind) {
        case LayerKind::conv2d:
            os << "conv2d(" << spec.kernel_size << ',' << spec.filters << ',' << spec.stride << ','
               << (spec.padding == Padding::same ? "same" : "valid") << ')';
            break;
        case LayerKind::maxpool2d:
            os << "maxpool2d(" << spec.kernel_size << ',' << spec.stride << ')';
            break;
        case LayerKind::global_maxpool: os << "global_maxpool"; break;
        case LayerKind::batchnorm: os << "batchnorm"; break;
        case LayerKind::relu: os << "relu"; break;
        case LayerKind::dropout: os << "dropout(" << spec.rate << ')'; break;
        case LayerKind::dense: os << "dense(" << spec.filters << ')'; break;
        case LayerKind::softmax: os << "softmax"; break;
    }
    return os.str();
}

LayerSpec parse_layer_spec(const std::string& text) {
    const auto open = text.find('(');
    const std::string name = text.substr(0, open);
    std::vector<std::string> args;
    if (open != std::string::npos) {
        if (text.back() != ')') throw FormatError("malformed layer spec: " + text);
        args = io::split(text.substr(open + 1, text.size() - open - 2), ',');
    }
    auto num = [&](std::size_t i) -> std::size_t {
        if (i >= args.size()) throw FormatError("missing argument in layer spec: " + text);
        try {
            return static_cast<std::size_t>(std::stoul(args[i]));
        } catch (const std::exception&) {
            throw FormatError("bad number in layer spec: " + text);
        }
    };
    LayerSpec s;
    if (name == "conv2d") {
        s = LayerSpec::conv(num(0), num(1));
        if (args.size() > 2) s.stride = num(2);
        if (args.size() > 3) {
            if (args[3] == "same") s.padding = Padding::same;
            else if (args[3] == "valid") s.padding = Padding::valid;
            else throw FormatError("unknown padding in layer spec: " + text);
        }
    } else if (name == "maxpool2d") {
        s = LayerSpec::maxpool(num(0));
        if (args.size() > 1) s.stride = num(1);
    } else if (name == "global_maxpool") {
        s = LayerSpec::global_maxpool();
    } else if (name == "batchnorm") {
        s = LayerSpec::batchnorm();
    } else if (name == "relu") {
        s = LayerSpec::relu();
    } else if (name == "dropout") {
        s.kind = LayerKind::dropout;
        if (args.empty()) throw FormatError("dropout needs a rate: " + text);
        s.rate = std::stod(args[0]);
    } else if (name == "dense") {
        s.kind = LayerKind::dense;
        s.filters = num(0);
    } else if (name == "softmax") {
        s.kind = LayerKind::softmax;
    } else {
        throw FormatError("unknown layer kind: " + text);
    }
    s.validate();
    return s;
}

std::string to_string(InputSource s) {
    switch (s) {
        case InputSource::pan: return "pan";
        case InputSource::ms: return "ms";
        case InputSource::fused: return "fused";
    }
    return "?";
}

InputSource parse_input_source(const std::string& s) {
    if (s == "pan") return InputSource::pan;
    if (s == "ms") return InputSource::ms;
    if (s == "fused") return InputSource::fused;
    throw FormatError("unknown input source: " + s);
}

std::string to_string(const InputShape& s) {
    return std::to_string(s.h) + 'x' + std::to_string(s.w) + 'x' + std::to_string(s.c);
}

InputShape parse_input_shape(const std::string& s) {
    auto parts = io::split(s, 'x');
    if (parts.size() != 3) throw FormatError("input shape must be HxWxC: " + s);
    try {
        return {std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2])};
    } catch (const std::exception&) {
        throw FormatError("input shape must be HxWxC: " + s);
    }
}

std::vector<Shape> BranchConfig::layer_shapes() const {
    if (input.h == 0 || input.w == 0 || input.c == 0)
        throw ConfigError("branch " + name + " has an empty input shape");
    std::vector<Shape> shapes;
    std::size_t h = input.h, w = input.w, c = input.c;
    bool flat = false;
    for (const auto& l : layers) {
        l.validate();
        if (flat) throw ConfigError("branch " + name + ": layers after global_maxpool");
        switch (l.kind) {
            case LayerKind::conv2d: {
                auto g = nn::kernels::conv_geometry(Shape{h, w, c},
                                                    Shape{l.kernel_size, l.kernel_size, c, l.filters},
                                                    l.stride, l.padding);
                h = g.out_h;
                w = g.out_w;
                c = l.filters;
                break;
            }
            case LayerKind::maxpool2d:
                if (l.kernel_size > h || l.kernel_size > w)
                    throw ConfigError("branch " + name + ": pool window larger than feature map");
                if (l.kernel_size == l.stride && (h % l.stride || w % l.stride))
                    throw ConfigError("branch " + name + ": feature map not divisible by pool stride");
                h = (h - l.kernel_size) / l.stride + 1;
                w = (w - l.kernel_size) / l.stride + 1;
                break;
            case LayerKind::global_maxpool: flat = true; break;
            case LayerKind::relu:
            case LayerKind::batchnorm: break;
            default:
                throw ConfigError("branch " + name + ": layer " + to_string(l) +
                                  " is not allowed inside a branch");
        }
        shapes.push_back(flat ? Shape{c} : Shape{h, w, c});
    }
    return shapes;
}

void BranchConfig::validate() const {
    if (layers.empty() || layers.back().kind != LayerKind::global_maxpool)
        throw ConfigError("branch " + name + " must end with global_maxpool");
    std::size_t last_filters = 0;
    for (const auto& l : layers) {
        if (l.kind != LayerKind::conv2d) continue;
        if (l.filters < last_filters)
            throw ConfigError("branch " + name + ": conv filter counts must not decrease");
        last_filters = l.filters;
    }
    if (last_filters == 0) throw ConfigError("branch " + name + " has no convolution");
    (void)layer_shapes();
}

std::size_t BranchConfig::feature_width() const { return layer_shapes().back().back(); }

std::string BranchConfig::layers_string() const {
    std::vector<std::string> parts;
    for (const auto& l : layers) parts.push_back(to_string(l));
    return io::join(parts, ';');
}

namespace {

std::size_t scaled(std::size_t filters, std::size_t divisor) {
    if (divisor < 1) throw ConfigError("width divisor must be >= 1");
    return std::max<std::size_t>(1, filters / divisor);
}

void add_stage(BranchConfig& b, std::size_t kernel, std::size_t filters, bool pool) {
    b.layers.push_back(LayerSpec::conv(kernel, filters));
    b.layers.push_back(LayerSpec::relu());
    b.layers.push_back(LayerSpec::batchnorm());
    if (pool) b.layers.push_back(LayerSpec::maxpool(2));
}

}  // namespace

BranchConfig build_pcnn(std::size_t width_divisor, std::size_t patch) {
    BranchConfig b{"pan", InputSource::pan, {patch, patch, 1}, {}};
    add_stage(b, 7, scaled(128, width_divisor), true);
    add_stage(b, 3, scaled(256, width_divisor), true);
    add_stage(b, 3, scaled(512, width_divisor), true);
    b.layers.push_back(LayerSpec::global_maxpool());
    b.validate();
    return b;
}

BranchConfig build_mscnn(std::size_t width_divisor, std::size_t ms_bands, std::size_t ms_patch) {
    BranchConfig b{"ms", InputSource::ms, {ms_patch, ms_patch, ms_bands}, {}};
    add_stage(b, 3, scaled(256, width_divisor), false);
    add_stage(b, 3, scaled(512, width_divisor), false);
    add_stage(b, 3, scaled(1024, width_divisor), false);
    b.layers.push_back(LayerSpec::global_maxpool());
    b.validate();
    return b;
}

BranchConfig build_cnnps_branch(std::size_t width_divisor, std::size_t bands, std::size_t patch) {
    BranchConfig b{"ps", InputSource::fused, {patch, patch, bands}, {}};
    add_stage(b, 7, scaled(256, width_divisor), true);
    add_stage(b, 3, scaled(512, width_divisor), true);
    add_stage(b, 3, scaled(1024, width_divisor), true);
    b.layers.push_back(LayerSpec::global_maxpool());
    b.validate();
    return b;
}

}  // namespace mrfusion::model

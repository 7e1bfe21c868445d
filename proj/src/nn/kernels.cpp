#include "mrfusion/nn/kernels.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace mrfusion::nn::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ImageDims {
    std::size_t batch, h, w, c;
    bool batched;
};

ImageDims image_dims(const Shape& s, const char* op) {
    if (s.size() == 3) return {1, s[0], s[1], s[2], false};
    if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
    throw DimensionError(std::string(op) + " expects an H x W x C or N x H x W x C tensor, got " +
                         shape_string(s));
}

Shape image_shape(const ImageDims& d, std::size_t h, std::size_t w, std::size_t c) {
    return d.batched ? Shape{d.batch, h, w, c} : Shape{h, w, c};
}

struct MatrixDims {
    std::size_t rows, cols;
    bool batched;
};

MatrixDims matrix_dims(const Shape& s, const char* op) {
    if (s.size() == 1) return {1, s[0], false};
    if (s.size() == 2) return {s[0], s[1], true};
    throw DimensionError(std::string(op) + " expects a vector or a B x N matrix, got " +
                         shape_string(s));
}

// Rows of `col` are output positions, columns are (k, l, c) taps.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
    const std::size_t taps = g.kernel * g.kernel * g.in_c;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            T* row = col + (oy * g.out_w + ox) * taps;
            for (std::size_t k = 0; k < g.kernel; ++k) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + k) -
                                static_cast<std::ptrdiff_t>(g.pad);
                for (std::size_t l = 0; l < g.kernel; ++l) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + l) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    T* dst = row + (k * g.kernel + l) * g.in_c;
                    if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                        ix >= static_cast<std::ptrdiff_t>(g.in_w)) {
                        std::fill(dst, dst + g.in_c, T{0});
                    } else {
                        const T* src = image + (static_cast<std::size_t>(iy) * g.in_w +
                                                static_cast<std::size_t>(ix)) * g.in_c;
                        std::copy(src, src + g.in_c, dst);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* image) {
    const std::size_t taps = g.kernel * g.kernel * g.in_c;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const T* row = col + (oy * g.out_w + ox) * taps;
            for (std::size_t k = 0; k < g.kernel; ++k) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + k) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                for (std::size_t l = 0; l < g.kernel; ++l) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + l) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    const T* src = row + (k * g.kernel + l) * g.in_c;
                    T* dst = image + (static_cast<std::size_t>(iy) * g.in_w +
                                      static_cast<std::size_t>(ix)) * g.in_c;
                    for (std::size_t c = 0; c < g.in_c; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

}  // namespace

ConvGeometry conv_geometry(const Shape& input, const Shape& weights, std::size_t stride,
                           Padding padding) {
    const auto d = image_dims(input, "conv2d");
    if (weights.size() != 4)
        throw DimensionError("conv2d weights must be K x K x C x F, got " + shape_string(weights));
    if (weights[0] != weights[1]) throw DimensionError("conv2d kernel must be square");
    if (weights[0] % 2 == 0) throw DimensionError("conv2d kernel size must be odd");
    if (weights[2] != d.c)
        throw DimensionError("conv2d weights expect " + std::to_string(weights[2]) +
                             " input channels, input has " + std::to_string(d.c));
    if (stride < 1) throw DimensionError("conv2d stride must be >= 1");
    ConvGeometry g{d.batch, d.h, d.w, d.c, weights[0], weights[3], stride, 0, 0, 0};
    if (padding == Padding::same) {
        g.pad = g.kernel / 2;
        g.out_h = (d.h + stride - 1) / stride;
        g.out_w = (d.w + stride - 1) / stride;
    } else {
        if (g.kernel > d.h || g.kernel > d.w)
            throw DimensionError("conv2d kernel larger than input with valid padding");
        g.out_h = (d.h - g.kernel) / stride + 1;
        g.out_w = (d.w - g.kernel) / stride + 1;
    }
    return g;
}

// Per-thread im2col buffer, grown on demand and reused across calls.
template <typename T>
T* scratch(std::size_t n) {
    thread_local Buffer<T> buf;
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 std::size_t stride, Padding padding, bool per_sample_gemm) {
    const auto g = conv_geometry(input.shape(), weights.shape(), stride, padding);
    const auto d = image_dims(input.shape(), "conv2d");
    if (bias.rank() != 1 || bias.size() != g.filters)
        throw DimensionError("conv2d bias must have " + std::to_string(g.filters) + " entries");

    const std::size_t taps = g.kernel * g.kernel * g.in_c;
    const std::size_t positions = g.out_h * g.out_w;
    const std::size_t in_stride = g.in_h * g.in_w * g.in_c;
    Tensor<T> out(image_shape(d, g.out_h, g.out_w, g.filters));
    ConstMatMap<T> w(weights.raw(), taps, g.filters);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.raw(), g.filters);

    if (per_sample_gemm) {
        T* col = scratch<T>(positions * taps);
        for (std::size_t n = 0; n < g.batch; ++n) {
            im2col(input.raw() + n * in_stride, g, col);
            MatMap<T> y(out.raw() + n * positions * g.filters, positions, g.filters);
            y.noalias() = ConstMatMap<T>(col, positions, taps) * w;
            y.rowwise() += b;
        }
    } else {
        T* col = scratch<T>(g.batch * positions * taps);
        for (std::size_t n = 0; n < g.batch; ++n)
            im2col(input.raw() + n * in_stride, g, col + n * positions * taps);
        MatMap<T> y(out.raw(), g.batch * positions, g.filters);
        y.noalias() = ConstMatMap<T>(col, g.batch * positions, taps) * w;
        y.rowwise() += b;
    }
    require_finite(out, "conv2d");
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                               const Tensor<T>& out_grad, std::size_t stride, Padding padding,
                               bool need_input_grad) {
    const auto g = conv_geometry(input.shape(), weights.shape(), stride, padding);
    const std::size_t taps = g.kernel * g.kernel * g.in_c;
    const std::size_t positions = g.out_h * g.out_w;
    const std::size_t rows = g.batch * positions;
    const std::size_t in_stride = g.in_h * g.in_w * g.in_c;
    if (out_grad.size() != rows * g.filters)
        throw DimensionError("conv2d output gradient has wrong size");

    T* col = scratch<T>(rows * taps);
    for (std::size_t n = 0; n < g.batch; ++n)
        im2col(input.raw() + n * in_stride, g, col + n * positions * taps);

    ConstMatMap<T> dy(out_grad.raw(), rows, g.filters);
    ConstMatMap<T> cols(col, rows, taps);
    Conv2dGrads<T> grads;
    grads.weights = Tensor<T>(weights.shape());
    MatMap<T>(grads.weights.raw(), taps, g.filters).noalias() = cols.transpose() * dy;
    grads.bias = Tensor<T>(Shape{g.filters});
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grads.bias.raw(), g.filters) =
        dy.colwise().sum();

    if (need_input_grad) {
        MatMap<T> dcol(col, rows, taps);
        dcol.noalias() = dy * ConstMatMap<T>(weights.raw(), taps, g.filters).transpose();
        grads.input = Tensor<T>(input.shape());
        for (std::size_t n = 0; n < g.batch; ++n)
            col2im(col + n * positions * taps, g, grads.input.raw() + n * in_stride);
    }
    return grads;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out = input;
    for (auto& v : out.data()) v = v > T{0} ? v : T{0};
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& out_grad) {
    Tensor<T> g = out_grad;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(input[i] > T{0})) g[i] = T{0};
    return g;
}

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input, std::size_t window, std::size_t stride) {
    const auto d = image_dims(input.shape(), "maxpool2d");
    if (window < 1 || stride < 1) throw DimensionError("maxpool2d window and stride must be >= 1");
    if (window > d.h || window > d.w)
        throw DimensionError("maxpool2d window " + std::to_string(window) +
                             " larger than input " + shape_string(input.shape()));
    if (window == stride && (d.h % stride != 0 || d.w % stride != 0))
        throw DimensionError("maxpool2d input " + shape_string(input.shape()) +
                             " not divisible by stride " + std::to_string(stride));
    const std::size_t oh = (d.h - window) / stride + 1;
    const std::size_t ow = (d.w - window) / stride + 1;
    PoolResult<T> r;
    r.output = Tensor<T>(image_shape(d, oh, ow, d.c));
    r.argmax.resize(r.output.size());
    std::size_t o = 0;
    for (std::size_t n = 0; n < d.batch; ++n) {
        const std::size_t base = n * d.h * d.w * d.c;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                for (std::size_t c = 0; c < d.c; ++c, ++o) {
                    std::size_t best = base + ((y * stride) * d.w + x * stride) * d.c + c;
                    for (std::size_t ky = 0; ky < window; ++ky) {
                        for (std::size_t kx = 0; kx < window; ++kx) {
                            const std::size_t idx =
                                base + ((y * stride + ky) * d.w + x * stride + kx) * d.c + c;
                            if (input[idx] > input[best]) best = idx;
                        }
                    }
                    r.output[o] = input[best];
                    r.argmax[o] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
    return r;
}

template <typename T>
PoolResult<T> global_maxpool(const Tensor<T>& input) {
    const auto d = image_dims(input.shape(), "global_maxpool");
    PoolResult<T> r;
    r.output = Tensor<T>(d.batched ? Shape{d.batch, d.c} : Shape{d.c});
    r.argmax.resize(r.output.size());
    const std::size_t plane = d.h * d.w;
    for (std::size_t n = 0; n < d.batch; ++n) {
        const std::size_t base = n * plane * d.c;
        for (std::size_t c = 0; c < d.c; ++c) {
            std::size_t best = base + c;
            for (std::size_t p = 1; p < plane; ++p) {
                const std::size_t idx = base + p * d.c + c;
                if (input[idx] > input[best]) best = idx;
            }
            r.output[n * d.c + c] = input[best];
            r.argmax[n * d.c + c] = static_cast<std::uint32_t>(best);
        }
    }
    return r;
}

template <typename T>
Tensor<T> pool_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                        const Tensor<T>& out_grad) {
    if (argmax.size() != out_grad.size()) throw DimensionError("pool gradient size mismatch");
    Tensor<T> g(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += out_grad[i];
    return g;
}

namespace {

struct ChannelDims {
    std::size_t rows, channels;
};

ChannelDims channel_dims(const Shape& s) {
    if (s.size() < 2) throw DimensionError("batchnorm expects a batch axis and a channel axis");
    return {shape_size(s) / s.back(), s.back()};
}

void check_channel_param(const Shape& p, std::size_t channels, const char* name) {
    if (p.size() != 1 || p[0] != channels)
        throw DimensionError(std::string("batchnorm ") + name + " must have " +
                             std::to_string(channels) + " entries");
}

}  // namespace

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                          double eps, BatchNormCache<T>& cache) {
    if (input.rank() < 2 || input.extent(0) < 2)
        throw ConfigError("batchnorm in train mode needs a batch of at least 2, got shape " +
                          shape_string(input.shape()));
    const auto [rows, ch] = channel_dims(input.shape());
    check_channel_param(gamma.shape(), ch, "gamma");
    check_channel_param(beta.shape(), ch, "beta");

    std::vector<double> mean(ch, 0.0), var(ch, 0.0);
    const T* x = input.raw();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) mean[c] += x[r * ch + c];
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const double dv = x[r * ch + c] - mean[c];
            var[c] += dv * dv;
        }
    for (auto& v : var) v /= static_cast<double>(rows);

    cache.count = rows;
    cache.batch_mean = mean;
    cache.batch_var = var;
    cache.inv_std.resize(ch);
    std::vector<T> mean_t(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        cache.inv_std[c] = static_cast<T>(1.0 / std::sqrt(var[c] + eps));
        mean_t[c] = static_cast<T>(mean[c]);
    }
    cache.normalized = Tensor<T>(input.shape());
    Tensor<T> out(input.shape());
    T* xn = cache.normalized.raw();
    T* y = out.raw();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t i = r * ch + c;
            xn[i] = (x[i] - mean_t[c]) * cache.inv_std[c];
            y[i] = gamma[c] * xn[i] + beta[c];
        }
    require_finite(out, "batchnorm");
    return out;
}

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var,
                          double eps) {
    const auto [rows, ch] = channel_dims(input.shape());
    check_channel_param(gamma.shape(), ch, "gamma");
    check_channel_param(beta.shape(), ch, "beta");
    check_channel_param(running_mean.shape(), ch, "running_mean");
    check_channel_param(running_var.shape(), ch, "running_var");
    std::vector<T> scale(ch), shift(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        scale[c] = static_cast<T>(gamma[c] / std::sqrt(static_cast<double>(running_var[c]) + eps));
        shift[c] = beta[c] - running_mean[c] * scale[c];
    }
    Tensor<T> out(input.shape());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t i = r * ch + c;
            out[i] = input[i] * scale[c] + shift[c];
        }
    require_finite(out, "batchnorm");
    return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_train_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                           const Tensor<T>& out_grad) {
    const auto [rows, ch] = channel_dims(out_grad.shape());
    BatchNormGrads<T> g;
    g.gamma = Tensor<T>(Shape{ch});
    g.beta = Tensor<T>(Shape{ch});
    std::vector<double> sum_dy(ch, 0.0), sum_dy_xn(ch, 0.0);
    const T* dy = out_grad.raw();
    const T* xn = cache.normalized.raw();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t i = r * ch + c;
            sum_dy[c] += dy[i];
            sum_dy_xn[c] += static_cast<double>(dy[i]) * xn[i];
        }
    for (std::size_t c = 0; c < ch; ++c) {
        g.beta[c] = static_cast<T>(sum_dy[c]);
        g.gamma[c] = static_cast<T>(sum_dy_xn[c]);
    }
    g.input = Tensor<T>(out_grad.shape());
    const double m = static_cast<double>(rows);
    std::vector<T> k(ch), a(ch), b(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        k[c] = static_cast<T>(gamma[c] * cache.inv_std[c]);
        a[c] = static_cast<T>(sum_dy[c] / m);
        b[c] = static_cast<T>(sum_dy_xn[c] / m);
    }
    T* dx = g.input.raw();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t i = r * ch + c;
            dx[i] = k[c] * (dy[i] - a[c] - xn[i] * b[c]);
        }
    return g;
}

template <typename T>
BatchNormGrads<T> batchnorm_infer_backward(const Tensor<T>& input, const Tensor<T>& gamma,
                                           const Tensor<T>& running_mean,
                                           const Tensor<T>& running_var, double eps,
                                           const Tensor<T>& out_grad) {
    const auto [rows, ch] = channel_dims(input.shape());
    BatchNormGrads<T> g;
    g.gamma = Tensor<T>(Shape{ch});
    g.beta = Tensor<T>(Shape{ch});
    g.input = Tensor<T>(input.shape());
    std::vector<double> inv(ch), sg(ch, 0.0), sb(ch, 0.0);
    for (std::size_t c = 0; c < ch; ++c)
        inv[c] = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t i = r * ch + c;
            const double xn = (input[i] - running_mean[c]) * inv[c];
            sb[c] += out_grad[i];
            sg[c] += out_grad[i] * xn;
            g.input[i] = static_cast<T>(out_grad[i] * gamma[c] * inv[c]);
        }
    for (std::size_t c = 0; c < ch; ++c) {
        g.gamma[c] = static_cast<T>(sg[c]);
        g.beta[c] = static_cast<T>(sb[c]);
    }
    return g;
}

template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double rate, std::mt19937_64& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    Tensor<T> mask(shape, T{1});
    if (rate == 0.0) return mask;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : mask.data()) m = u(rng) < rate ? T{0} : keep_scale;
    return mask;
}

template <typename T>
Tensor<T> multiply(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw DimensionError("elementwise multiply shape mismatch");
    Tensor<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
    const auto d = matrix_dims(input.shape(), "dense");
    if (weights.rank() != 2 || weights.extent(0) != d.cols)
        throw DimensionError("dense weights " + shape_string(weights.shape()) +
                             " do not match input " + shape_string(input.shape()));
    const std::size_t m = weights.extent(1);
    if (bias.rank() != 1 || bias.size() != m)
        throw DimensionError("dense bias must have " + std::to_string(m) + " entries");
    Tensor<T> out(d.batched ? Shape{d.rows, m} : Shape{m});
    for (std::size_t r = 0; r < d.rows; ++r) {
        T* o = out.raw() + r * m;
        const T* x = input.raw() + r * d.cols;
        std::copy(bias.raw(), bias.raw() + m, o);
        for (std::size_t n = 0; n < d.cols; ++n) {
            const T xv = x[n];
            const T* w = weights.raw() + n * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += xv * w[j];
        }
    }
    require_finite(out, "dense");
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& out_grad, bool need_input_grad) {
    const auto d = matrix_dims(input.shape(), "dense");
    const std::size_t m = weights.extent(1);
    DenseGrads<T> g;
    g.weights = Tensor<T>(weights.shape());
    g.bias = Tensor<T>(Shape{m});
    for (std::size_t r = 0; r < d.rows; ++r) {
        const T* dy = out_grad.raw() + r * m;
        const T* x = input.raw() + r * d.cols;
        for (std::size_t j = 0; j < m; ++j) g.bias[j] += dy[j];
        for (std::size_t n = 0; n < d.cols; ++n) {
            T* gw = g.weights.raw() + n * m;
            for (std::size_t j = 0; j < m; ++j) gw[j] += x[n] * dy[j];
        }
    }
    if (need_input_grad) {
        g.input = Tensor<T>(input.shape());
        for (std::size_t r = 0; r < d.rows; ++r) {
            const T* dy = out_grad.raw() + r * m;
            T* dx = g.input.raw() + r * d.cols;
            for (std::size_t n = 0; n < d.cols; ++n) {
                const T* w = weights.raw() + n * m;
                T acc{0};
                for (std::size_t j = 0; j < m; ++j) acc += dy[j] * w[j];
                dx[n] = acc;
            }
        }
    }
    return g;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    const auto d = matrix_dims(logits.shape(), "softmax");
    Tensor<T> out(logits.shape());
    for (std::size_t r = 0; r < d.rows; ++r) {
        const T* z = logits.raw() + r * d.cols;
        T* p = out.raw() + r * d.cols;
        const T zmax = *std::max_element(z, z + d.cols);
        double sum = 0.0;
        for (std::size_t j = 0; j < d.cols; ++j) sum += std::exp(static_cast<double>(z[j] - zmax));
        for (std::size_t j = 0; j < d.cols; ++j)
            p[j] = static_cast<T>(std::exp(static_cast<double>(z[j] - zmax)) / sum);
    }
    require_finite(out, "softmax");
    return out;
}

template <typename T>
SoftmaxCrossEntropy<T> softmax_crossentropy(const Tensor<T>& logits, const Tensor<T>& labels) {
    const auto d = matrix_dims(logits.shape(), "softmax_crossentropy");
    if (labels.shape() != logits.shape())
        throw InputError("labels shape " + shape_string(labels.shape()) +
                         " does not match logits " + shape_string(logits.shape()));
    if (d.cols < 2) throw InputError("softmax_crossentropy needs at least 2 classes");
    SoftmaxCrossEntropy<T> r;
    r.probs = Tensor<T>(logits.shape());
    double total = 0.0;
    for (std::size_t row = 0; row < d.rows; ++row) {
        const T* z = logits.raw() + row * d.cols;
        const T* y = labels.raw() + row * d.cols;
        std::size_t hot = d.cols;
        for (std::size_t j = 0; j < d.cols; ++j) {
            if (y[j] == T{1} && hot == d.cols) {
                hot = j;
            } else if (y[j] != T{0}) {
                throw InputError("label row " + std::to_string(row) + " is not one-hot");
            }
        }
        if (hot == d.cols) throw InputError("label row " + std::to_string(row) + " is not one-hot");
        const double zmax = *std::max_element(z, z + d.cols);
        double sum = 0.0;
        for (std::size_t j = 0; j < d.cols; ++j) sum += std::exp(z[j] - zmax);
        const double log_sum = std::log(sum);
        for (std::size_t j = 0; j < d.cols; ++j)
            r.probs[row * d.cols + j] = static_cast<T>(std::exp(z[j] - zmax - log_sum));
        total += -(z[hot] - zmax - log_sum);
    }
    r.loss = total / static_cast<double>(d.rows);
    if (!std::isfinite(r.loss)) throw NumericError("non-finite cross-entropy loss");
    return r;
}

template <typename T>
Tensor<T> softmax_crossentropy_backward(const Tensor<T>& probs, const Tensor<T>& labels) {
    const auto d = matrix_dims(probs.shape(), "softmax_crossentropy");
    Tensor<T> g(probs.shape());
    const T inv = static_cast<T>(1.0 / static_cast<double>(d.rows));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (probs[i] - labels[i]) * inv;
    return g;
}

template <typename T>
Tensor<T> concat_features(const std::vector<const Tensor<T>*>& parts) {
    if (parts.empty()) throw DimensionError("concat_features needs at least one input");
    const std::size_t rows = parts.front()->extent(0);
    std::size_t width = 0;
    for (const auto* p : parts) {
        if (p->rank() != 2 || p->extent(0) != rows)
            throw DimensionError("concat_features inputs must be B x N with equal B");
        width += p->extent(1);
    }
    Tensor<T> out(Shape{rows, width});
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t offset = 0;
        for (const auto* p : parts) {
            const std::size_t w = p->extent(1);
            std::copy(p->raw() + r * w, p->raw() + (r + 1) * w, out.raw() + r * width + offset);
            offset += w;
        }
    }
    return out;
}

#define MRFUSION_INSTANTIATE(T)                                                                   \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,  \
                              Padding, bool);                                                     \
    template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                            std::size_t, Padding, bool);                          \
    template Tensor<T> relu(const Tensor<T>&);                                                    \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                         \
    template PoolResult<T> maxpool2d(const Tensor<T>&, std::size_t, std::size_t);                 \
    template PoolResult<T> global_maxpool(const Tensor<T>&);                                      \
    template Tensor<T> pool_backward(const Shape&, const std::vector<std::uint32_t>&,             \
                                     const Tensor<T>&);                                           \
    template Tensor<T> batchnorm_train(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                       double, BatchNormCache<T>&);                               \
    template Tensor<T> batchnorm_infer(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                       const Tensor<T>&, const Tensor<T>&, double);               \
    template BatchNormGrads<T> batchnorm_train_backward(const BatchNormCache<T>&,                 \
                                                        const Tensor<T>&, const Tensor<T>&);      \
    template BatchNormGrads<T> batchnorm_infer_backward(const Tensor<T>&, const Tensor<T>&,       \
                                                        const Tensor<T>&, const Tensor<T>&,       \
                                                        double, const Tensor<T>&);                \
    template Tensor<T> dropout_mask(const Shape&, double, std::mt19937_64&);                      \
    template Tensor<T> multiply(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
    template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                          bool);                                                  \
    template Tensor<T> softmax(const Tensor<T>&);                                                 \
    template SoftmaxCrossEntropy<T> softmax_crossentropy(const Tensor<T>&, const Tensor<T>&);     \
    template Tensor<T> softmax_crossentropy_backward(const Tensor<T>&, const Tensor<T>&);         \
    template Tensor<T> concat_features(const std::vector<const Tensor<T>*>&);

MRFUSION_INSTANTIATE(float)
MRFUSION_INSTANTIATE(double)

#undef MRFUSION_INSTANTIATE

}  // namespace mrfusion::nn::kernels

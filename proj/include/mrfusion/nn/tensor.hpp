#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "mrfusion/util/errors.hpp"

namespace mrfusion::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

inline std::string shape_string(const Shape& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s.empty() ? "scalar" : s;
}

/// 64-byte aligned allocation.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array with shape metadata. Image tensors are laid out
/// H x W x C, or N x H x W x C when batched.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
        check_extents();
    }

    Tensor(Shape shape, const std::vector<T>& data) : Tensor(std::move(shape), Buffer<T>(data.begin(), data.end())) {}

    Tensor(Shape shape, Buffer<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != shape_size(shape_)) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
        }
    }

    Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<T> values)
        : Tensor(Shape(shape), std::vector<T>(values)) {}

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }
    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    Buffer<T>& storage() noexcept { return data_; }
    const Buffer<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Element access for rank-3 H x W x C tensors.
    T& at(std::size_t y, std::size_t x, std::size_t c) {
        return data_[(y * shape_[1] + x) * shape_[2] + c];
    }
    const T& at(std::size_t y, std::size_t x, std::size_t c) const {
        return data_[(y * shape_[1] + x) * shape_[2] + c];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != data_.size()) {
            throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                                 shape_string(shape));
        }
        return Tensor(std::move(shape), data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        Buffer<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    /// Bitwise equality of shape and payload.
    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ &&
               (a.data_.empty() ||
                std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(T)) == 0);
    }

private:
    void check_extents() const {
        for (auto e : shape_) {
            if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_string(shape_));
        }
    }

    Shape shape_;
    Buffer<T> data_;
};

/// Throws NumericError naming `where` if any value is NaN or infinite.
template <typename T>
void require_finite(const Tensor<T>& t, const char* where) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite values produced by ") + where);
}

}  // namespace mrfusion::nn

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mrfusion/nn/tensor.hpp"

namespace mrfusion::nn {

/// Gradient map keyed by parameter name. Ordered so reductions and
/// serialization iterate deterministically.
template <typename T>
using Gradients = std::map<std::string, Tensor<T>>;

/// Named parameter store with Adam moments for every trainable entry.
/// Non-trainable entries (batch-norm running statistics) carry no moments.
template <typename T>
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor<T> value;
        bool trainable = true;
        Tensor<T> first_moment;
        Tensor<T> second_moment;
    };

    void add(const std::string& name, Tensor<T> value, bool trainable = true) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        Entry e;
        e.name = name;
        e.trainable = trainable;
        if (trainable) {
            e.first_moment = Tensor<T>(value.shape());
            e.second_moment = Tensor<T>(value.shape());
        }
        e.value = std::move(value);
        index_.emplace(name, entries_.size());
        entries_.push_back(std::move(e));
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t size() const noexcept { return entries_.size(); }

    Tensor<T>& at(const std::string& name) { return entry(name).value; }
    const Tensor<T>& at(const std::string& name) const { return entry(name).value; }

    Entry& entry(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw StateError("unknown parameter: " + name);
        return entries_[it->second];
    }
    const Entry& entry(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw StateError("unknown parameter: " + name);
        return entries_[it->second];
    }

    std::vector<Entry>& entries() noexcept { return entries_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    std::int64_t adam_step_count() const noexcept { return step_; }
    void set_adam_step_count(std::int64_t s) noexcept { step_ = s; }

    std::size_t trainable_scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.trainable) n += e.value.size();
        return n;
    }

    /// Zero-filled gradient map covering every trainable parameter.
    Gradients<T> zero_gradients() const {
        Gradients<T> g;
        for (const auto& e : entries_)
            if (e.trainable) g.emplace(e.name, Tensor<T>(e.value.shape()));
        return g;
    }

    friend bool operator==(const ParamSet& a, const ParamSet& b) {
        if (a.entries_.size() != b.entries_.size() || a.step_ != b.step_) return false;
        for (std::size_t i = 0; i < a.entries_.size(); ++i) {
            const auto& x = a.entries_[i];
            const auto& y = b.entries_[i];
            if (x.name != y.name || x.trainable != y.trainable || !(x.value == y.value) ||
                !(x.first_moment == y.first_moment) || !(x.second_moment == y.second_moment))
                return false;
        }
        return true;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::int64_t step_ = 0;
};

}  // namespace mrfusion::nn

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrfusion/nn/param_set.hpp"
#include "mrfusion/nn/tensor.hpp"

namespace mrfusion::nn {

enum class Mode { train, infer };

/// Handle to a value recorded on a GradientTape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

/// Records executed operations so that `backward` can replay them in exact
/// reverse order. Parameters are read from the bound ParamSet, which must
/// outlive the tape; their gradients accumulate into a Gradients map.
template <typename T>
class GradientTape {
public:
    /// Called once per recorded op during backward with the gradient of the
    /// loss w.r.t. that op's output.
    using BackwardFn = std::function<void(GradientTape&, const Tensor<T>& out_grad)>;

    explicit GradientTape(const ParamSet<T>& params) : params_(&params) {}

    GradientTape(const GradientTape&) = delete;
    GradientTape& operator=(const GradientTape&) = delete;

    const ParamSet<T>& params() const noexcept { return *params_; }

    /// Leaf value. Gradients w.r.t. leaves are retrievable after backward
    /// when `requires_grad` is set.
    Var input(Tensor<T> value, bool requires_grad = false) {
        return push_node(std::move(value), requires_grad, nullptr);
    }

    /// Record an op output. `requires_grad` should be true when any input
    /// requires gradient or the op consumes trainable parameters.
    Var record(Tensor<T> value, bool requires_grad, BackwardFn backward) {
        return push_node(std::move(value), requires_grad, std::move(backward));
    }

    const Tensor<T>& value(Var v) const { return node(v).value; }
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Adds `g` into the gradient buffer of `v` (no-op if `v` needs none).
    void accumulate(Var v, const Tensor<T>& g) {
        auto& n = node(v);
        if (!n.requires_grad) return;
        if (n.grad.empty()) {
            n.grad = g;
            return;
        }
        if (n.grad.shape() != g.shape())
            throw DimensionError("gradient shape " + shape_string(g.shape()) + " does not match " +
                                 shape_string(n.grad.shape()));
        auto dst = n.grad.data();
        auto src = g.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    /// Gradient buffer for a trainable parameter, zero-initialised on first use.
    Tensor<T>& param_grad(const std::string& name) {
        auto it = param_grads_.find(name);
        if (it == param_grads_.end())
            it = param_grads_.emplace(name, Tensor<T>(params_->at(name).shape())).first;
        return it->second;
    }

    /// Reverse-mode pass from a single-element loss. Returns the gradient of
    /// every trainable parameter (zeros where the loss does not depend on it).
    Gradients<T> backward(Var loss) {
        if (nodes_.empty() || !loss.valid() || loss.id >= nodes_.size())
            throw StateError("backward called without a recorded forward pass");
        if (done_) throw StateError("backward already executed on this tape");
        if (nodes_[loss.id].value.size() != 1)
            throw StateError("backward requires a scalar loss, got shape " +
                             shape_string(nodes_[loss.id].value.shape()));
        done_ = true;
        nodes_[loss.id].grad = Tensor<T>(nodes_[loss.id].value.shape(), T{1});
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.backward || !n.requires_grad || n.grad.empty()) continue;
            visit_order_.push_back(i);
            n.backward(*this, n.grad);
        }
        Gradients<T> out = params_->zero_gradients();
        for (auto& [name, g] : param_grads_) {
            auto it = out.find(name);
            if (it != out.end()) it->second = std::move(g);
        }
        param_grads_.clear();
        return out;
    }

    /// Gradient w.r.t. a recorded value; empty if nothing flowed into it.
    const Tensor<T>& grad(Var v) const { return node(v).grad; }

    /// Node ids in the order backward visited them.
    const std::vector<std::size_t>& visit_order() const noexcept { return visit_order_; }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push_node(Tensor<T> value, bool requires_grad, BackwardFn backward) {
        if (done_) throw StateError("cannot record on a tape after backward");
        nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(backward)});
        return Var{nodes_.size() - 1};
    }

    Node& node(Var v) {
        if (!v.valid() || v.id >= nodes_.size()) throw StateError("invalid tape variable");
        return nodes_[v.id];
    }
    const Node& node(Var v) const {
        if (!v.valid() || v.id >= nodes_.size()) throw StateError("invalid tape variable");
        return nodes_[v.id];
    }

    const ParamSet<T>* params_;
    std::vector<Node> nodes_;
    std::map<std::string, Tensor<T>> param_grads_;
    std::vector<std::size_t> visit_order_;
    bool done_ = false;
};

}  // namespace mrfusion::nn

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epg/autodiff/tensor.hpp"

namespace epg::ad {

enum class OpKind {
    leaf,
    conv1d,
    dense,
    batchnorm,
    relu,
    elu,
    maxpool1d,
    avgpool1d,
    gap,
    dropout,
    add,
    softmax_xent,
    l2_penalty,
    reshape,
    pad_channels,
    sum,
    weighted_sum,
};

std::string_view to_string(OpKind k);

enum class Mode { train, eval };

// A trainable tensor together with its accumulated gradient.
template <class Scalar>
struct Parameter {
    std::string name;
    Tensor<Scalar> value;
    Tensor<Scalar> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<Scalar> v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor<Scalar>::zeros(value.shape()))
    {
    }
    void zero_grad() { grad.set_zero(); }
};

// Handle to a node recorded on a tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// creation order is a valid topological order for the backward sweep.
template <class Scalar>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int)>;

    struct Node {
        OpKind kind = OpKind::leaf;
        Tensor<Scalar> value;
        Tensor<Scalar> grad;
        bool requires_grad = false;
        std::vector<Var> inputs;
        BackwardFn backward;
        Parameter<Scalar>* param = nullptr;
    };

    Var constant(Tensor<Scalar> value) { return push(OpKind::leaf, std::move(value), {}, false, nullptr); }

    Var variable(Tensor<Scalar> value) { return push(OpKind::leaf, std::move(value), {}, true, nullptr); }

    // Leaf bound to a parameter; backward() accumulates into `p.grad`.
    Var parameter(Parameter<Scalar>& p)
    {
        for (auto pid : param_nodes_)
            if (nodes_[static_cast<std::size_t>(pid)].param == &p)
                throw ContractError("parameter '" + p.name + "' recorded twice on one tape");
        Var v = push(OpKind::leaf, p.value, {}, true, &p);
        param_nodes_.push_back(v.id);
        return v;
    }

    Var record(OpKind kind, Tensor<Scalar> value, std::vector<Var> inputs, BackwardFn fn)
    {
        bool rg = false;
        for (auto in : inputs) rg = rg || node(in).requires_grad;
        Var v = push(kind, std::move(value), std::move(inputs), rg, nullptr);
        if (rg) nodes_.back().backward = std::move(fn);
        return v;
    }

    const Tensor<Scalar>& value(Var v) const { return node(v).value; }
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    OpKind kind(Var v) const { return node(v).kind; }
    const std::vector<Var>& inputs(Var v) const { return node(v).inputs; }

    // Gradient buffer of `v`, allocated as zeros on first access.
    Tensor<Scalar>& grad(Var v)
    {
        auto& n = node(v);
        if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<Scalar>::zeros(n.value.shape());
        return n.grad;
    }
    bool has_grad(Var v) const { return !node(v).grad.empty(); }

    void backward(Var loss)
    {
        auto& l = node(loss);
        if (l.value.size() != 1)
            throw ContractError("backward() needs a scalar loss, got shape " + shape_str(l.value.shape()));
        if (!l.requires_grad) return;
        grad(loss)[0] = Scalar(1);
        for (int i = loss.id; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.requires_grad || n.grad.empty()) continue;
            if (n.backward) n.backward(*this, i);
            if (n.param) n.param->grad.data() += n.grad.data();
        }
    }

    std::size_t size() const { return nodes_.size(); }
    void clear()
    {
        nodes_.clear();
        param_nodes_.clear();
    }

    Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
    const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

private:
    Var push(OpKind kind, Tensor<Scalar> value, std::vector<Var> inputs, bool rg, Parameter<Scalar>* p)
    {
        Node n;
        n.kind = kind;
        n.value = std::move(value);
        n.inputs = std::move(inputs);
        n.requires_grad = rg;
        n.param = p;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
    std::vector<int> param_nodes_;
};

}  // namespace epg::ad

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "epg/autodiff/ops.hpp"
#include "epg/rng.hpp"
#include "epg/zoo.hpp"

namespace epg::zoo {

// An instantiated architecture: trainable parameters in forward order plus
// batch-norm running statistics.
template <class Scalar>
struct Model {
    ModelSpec spec;
    std::vector<ad::Parameter<Scalar>> params;
    std::vector<double> l2;  // per-parameter L2 factor
    std::vector<std::string> bn_names;
    std::vector<ad::BatchNormStats<Scalar>> bn;
    ad::BatchNormOptions bn_options;

    long trainables() const
    {
        long n = 0;
        for (const auto& p : params) n += static_cast<long>(p.value.size());
        return n;
    }

    void zero_grad()
    {
        for (auto& p : params) p.zero_grad();
    }

    template <class Other>
    Model<Other> cast() const
    {
        Model<Other> m;
        m.spec = spec;
        m.l2 = l2;
        m.bn_names = bn_names;
        m.bn_options = bn_options;
        for (const auto& p : params) m.params.emplace_back(p.name, p.value.template cast<Other>());
        for (const auto& s : bn) {
            ad::BatchNormStats<Other> o;
            o.running_mean = s.running_mean.template cast<Other>();
            o.running_var = s.running_var.template cast<Other>();
            m.bn.push_back(std::move(o));
        }
        return m;
    }

    const ad::Parameter<Scalar>& param(std::string_view name) const
    {
        for (const auto& p : params)
            if (p.name == name) return p;
        throw ValidationError("model has no parameter '" + std::string(name) + "'");
    }
    ad::Parameter<Scalar>& param(std::string_view name)
    {
        return const_cast<ad::Parameter<Scalar>&>(static_cast<const Model&>(*this).param(name));
    }
};

// Instantiates `spec` with fan-in scaled uniform weights, zero biases and
// unit/zero batch-norm affine parameters.
template <class Scalar>
Model<Scalar> build(const ModelSpec& spec, std::uint64_t seed)
{
    const Blueprint bp = blueprint(spec);
    Model<Scalar> m;
    m.spec = spec;
    Rng rng(hash_combine(seed, 0x5eedull));
    for (const auto& d : bp.params) {
        ad::Tensor<Scalar> t(d.shape);
        switch (d.init) {
        case Init::zeros:
            break;
        case Init::ones:
            t.data().setOnes();
            break;
        case Init::he_uniform: {
            const double limit = std::sqrt(6.0 / static_cast<double>(d.fan_in));
            for (ad::Index i = 0; i < t.size(); ++i) t[i] = Scalar(rng.uniform(-limit, limit));
            break;
        }
        }
        m.params.emplace_back(d.name, std::move(t));
        m.l2.push_back(d.l2);
    }
    for (const auto& b : bp.batchnorms) {
        m.bn_names.push_back(b.name);
        m.bn.emplace_back(b.channels);
    }
    return m;
}

template <class Scalar>
struct ForwardResult {
    ad::Var logits;
    ad::Var features;  // last conv-layer activations, invalid for conv-free models
    ad::Var l2;        // L2 penalty term, invalid when the model has none
};

struct ForwardOptions {
    ad::Mode mode = ad::Mode::eval;
    std::uint64_t dropout_seed = 0;
    std::uint64_t step = 0;
};

namespace detail {

template <class Scalar>
class ForwardRunner {
public:
    ForwardRunner(ad::Tape<Scalar>& tape, Model<Scalar>& model, ForwardOptions opt)
        : tape_(tape), model_(model), opt_(opt)
    {
    }

    ForwardResult<Scalar> run(ad::Var x)
    {
        ForwardResult<Scalar> out;
        bool seen_conv = false;
        for (const auto& l : model_.spec.layers) {
            const bool head = std::holds_alternative<layer::Gap>(l) || std::holds_alternative<layer::Flatten>(l);
            if (head && seen_conv && !out.features.valid()) out.features = x;
            if (std::holds_alternative<layer::Conv>(l) || std::holds_alternative<layer::ResBlock>(l)) seen_conv = true;
            x = std::visit([&](const auto& spec) { return apply(spec, x); }, l);
        }
        out.logits = x;
        if (param_cursor_ != model_.params.size() || bn_cursor_ != model_.bn.size())
            throw ArchitectureError("model parameters do not match its layer list");
        if (!l2_terms_.empty()) {
            // Terms are grouped by factor; in practice all share one.
            ad::Var total{};
            for (auto& [factor, vars] : l2_terms_) {
                ad::Var v = ad::l2_penalty<Scalar>(tape_, vars, Scalar(factor));
                total = total.valid() ? ad::add(tape_, total, v) : v;
            }
            out.l2 = total;
        }
        return out;
    }

private:
    ad::Var next_param(double* l2 = nullptr)
    {
        const std::size_t i = param_cursor_++;
        if (l2) *l2 = model_.l2.at(i);
        return tape_.parameter(model_.params.at(i));
    }
    ad::BatchNormStats<Scalar>& next_bn() { return model_.bn.at(bn_cursor_++); }

    ad::Var apply(const layer::Conv& c, ad::Var x)
    {
        ad::Var w = next_param();
        std::optional<ad::Var> b;
        if (c.bias) b = next_param();
        return ad::conv1d(tape_, x, w, b, c.stride, c.padding);
    }
    ad::Var apply(const layer::BatchNorm&, ad::Var x)
    {
        ad::Var g = next_param();
        ad::Var b = next_param();
        return ad::batchnorm(tape_, x, g, b, next_bn(), opt_.mode, model_.bn_options);
    }
    ad::Var apply(const layer::Relu&, ad::Var x) { return ad::relu(tape_, x); }
    ad::Var apply(const layer::Elu& e, ad::Var x) { return ad::elu(tape_, x, Scalar(e.alpha)); }
    ad::Var apply(const layer::MaxPool& p, ad::Var x) { return ad::maxpool1d(tape_, x, p.size, p.stride); }
    ad::Var apply(const layer::AvgPool& p, ad::Var x) { return ad::avgpool1d(tape_, x, p.size, p.stride); }
    ad::Var apply(const layer::Dropout& d, ad::Var x) { return drop(x, d.rate); }
    ad::Var apply(const layer::Flatten&, ad::Var x) { return ad::flatten(tape_, x); }
    ad::Var apply(const layer::Gap&, ad::Var x) { return ad::gap(tape_, x); }
    ad::Var apply(const layer::Dense& d, ad::Var x)
    {
        if (tape_.value(x).rank() != 2) x = ad::flatten(tape_, x);
        double l2 = 0.0;
        ad::Var w = next_param(&l2);
        if (l2 > 0.0) l2_terms_[l2].push_back(w);
        std::optional<ad::Var> b;
        if (d.bias) b = next_param();
        return ad::dense(tape_, x, w, b);
    }
    ad::Var apply(const layer::ResBlock& r, ad::Var x)
    {
        ad::Var h = apply(layer::Conv{r.channels, r.kernel, 1}, x);
        h = apply(layer::BatchNorm{}, h);
        h = ad::relu(tape_, h);
        h = drop(h, r.dropout);
        h = apply(layer::Conv{r.channels, r.kernel, r.stride}, h);
        ad::Var skip = r.stride > 1 ? ad::maxpool1d(tape_, x, r.stride, r.stride) : x;
        skip = ad::pad_channels(tape_, skip, r.channels);
        ad::Var y = ad::add(tape_, h, skip);
        y = apply(layer::BatchNorm{}, y);
        y = ad::relu(tape_, y);
        return drop(y, r.dropout);
    }

    ad::Var drop(ad::Var x, double rate)
    {
        return ad::dropout(tape_, x, rate, opt_.mode, ad::DropoutKey{opt_.dropout_seed, dropout_layer_++, opt_.step});
    }

    ad::Tape<Scalar>& tape_;
    Model<Scalar>& model_;
    ForwardOptions opt_;
    std::size_t param_cursor_ = 0;
    std::size_t bn_cursor_ = 0;
    std::uint64_t dropout_layer_ = 0;
    std::map<double, std::vector<ad::Var>> l2_terms_;
};

}  // namespace detail

// Records the forward pass of `model` on input [b, 1, L].
template <class Scalar>
ForwardResult<Scalar> forward(ad::Tape<Scalar>& tape, Model<Scalar>& model, ad::Var input, ForwardOptions opt = {})
{
    const auto& s = tape.value(input).shape();
    if (s.size() != 3 || s[1] != 1 || s[2] != model.spec.input_length)
        throw DimensionError("model input must be [b,1," + std::to_string(model.spec.input_length) + "], got " +
                             ad::shape_str(s));
    return detail::ForwardRunner<Scalar>(tape, model, opt).run(input);
}

}  // namespace epg::zoo

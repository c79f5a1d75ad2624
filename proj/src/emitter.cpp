#include "emitter.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "osd/layer_formulas.hpp"

namespace osd::detail {

double gelu(double x) {
    const double c = std::sqrt(2.0 / std::numbers::pi);
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

Emitter::Scope::Scope(Emitter& e, std::string_view name) : e_(e), saved_(e.prefix_.size()) {
    if (!e_.prefix_.empty()) e_.prefix_ += '.';
    e_.prefix_ += name;
}

Emitter::Scope::~Scope() { e_.prefix_.resize(saved_); }

std::string Emitter::label(std::string_view leaf) const {
    if (prefix_.empty()) return std::string(leaf);
    return prefix_ + "." + std::string(leaf);
}

std::string Emitter::label(std::string_view leaf, std::initializer_list<std::uint64_t> index) const {
    std::string s = label(leaf);
    if (!scalar() || index.size() == 0) return s;
    s += '[';
    bool first = true;
    for (auto i : index) {
        if (!first) s += ',';
        s += std::to_string(i);
        first = false;
    }
    s += ']';
    return s;
}

GateId Emitter::gate(GateKind kind, std::vector<Operand> ops, std::string label) {
    return graph_.add_gate(std::move(kind), std::move(ops), false, std::move(label));
}

Tensor Emitter::inputs(std::uint64_t size, std::string_view leaf) {
    Tensor t{size, {}};
    for (std::uint64_t i = 0; i < rep_count(size); ++i) t.elems.push_back(graph_.add_input(label(leaf, {i})));
    return t;
}

Tensor Emitter::weights(std::uint64_t size, std::string_view leaf) {
    Tensor t{size, {}};
    for (std::uint64_t i = 0; i < rep_count(size); ++i) t.elems.push_back(graph_.add_constant(label(leaf, {i})));
    return t;
}

Tensor Emitter::fixed(std::uint64_t size, const std::function<double(std::uint64_t)>& value, std::string_view leaf) {
    Tensor t{size, {}};
    for (std::uint64_t i = 0; i < rep_count(size); ++i) {
        t.elems.push_back(graph_.add_constant(label(leaf, {i}), value(i)));
    }
    return t;
}

Tensor Emitter::fixed_scalar(double value, std::string_view leaf) {
    return Tensor{1, {graph_.add_constant(label(leaf), value)}};
}

Tensor Emitter::unary(const std::string& fn, const Tensor& x, std::string_view leaf) {
    Tensor t{x.size, {}};
    for (std::uint64_t i = 0; i < x.reps(); ++i) {
        t.elems.push_back(gate(PiecewiseAnalytic{fn, 1}, {{x.at(i), 1}}, label(leaf, {i})));
    }
    return t;
}

Tensor Emitter::binary(const std::string& fn, const Tensor& a, const Tensor& b, std::string_view leaf) {
    if (a.size != b.size && a.size != 1 && b.size != 1) {
        throw std::logic_error("binary op size mismatch at " + label(leaf));
    }
    const std::uint64_t size = std::max(a.size, b.size);
    Tensor t{size, {}};
    const std::uint64_t n = std::max(a.reps(), b.reps());
    for (std::uint64_t i = 0; i < n; ++i) {
        t.elems.push_back(gate(PiecewiseAnalytic{fn, 2}, {{a.at(i), 1}, {b.at(i), 1}}, label(leaf, {i})));
    }
    return t;
}

GateId Emitter::analytic(const std::string& fn, std::vector<Operand> operands, std::string label) {
    const auto arity = static_cast<std::uint32_t>(operands.size());
    return gate(PiecewiseAnalytic{fn, arity}, std::move(operands), std::move(label));
}

GateId Emitter::reduce(ReduceOp op, std::vector<Operand> operands, const std::string& label) {
    std::uint64_t arity = 0;
    for (const auto& o : operands) arity += o.count;
    if (arity == 1) return gate(Wiring{}, std::move(operands), label);
    return gate(AssociativeReduce{op, static_cast<std::uint32_t>(arity)}, std::move(operands), label);
}

Tensor Emitter::reduce_all(ReduceOp op, const Tensor& x, std::string_view leaf) {
    std::vector<Operand> ops;
    if (scalar()) {
        for (std::uint64_t i = 0; i < x.size; ++i) ops.push_back({x.at(i), 1});
    } else {
        ops.push_back({x.at(0), static_cast<std::uint32_t>(x.size)});
    }
    return Tensor{1, {reduce(op, std::move(ops), label(leaf))}};
}

LinearWeights Emitter::linear_weights(std::uint64_t in, std::uint64_t out, bool bias, std::string_view leaf) {
    LinearWeights lw;
    lw.in = in;
    lw.out = out;
    if (scalar()) {
        lw.w.size = in * out;
        for (std::uint64_t o = 0; o < out; ++o) {
            for (std::uint64_t i = 0; i < in; ++i) {
                lw.w.elems.push_back(graph_.add_constant(label(std::string(leaf) + ".w", {o, i})));
            }
        }
    } else {
        lw.w = weights(in * out, std::string(leaf) + ".w");
    }
    if (bias) lw.b = weights(out, std::string(leaf) + ".b");
    return lw;
}

LinearWeights Emitter::linear_weights_from(const Tensor& w, std::uint64_t in, std::uint64_t out, bool bias,
                                           std::string_view leaf) {
    LinearWeights lw;
    lw.in = in;
    lw.out = out;
    lw.w = w;
    if (bias) lw.b = weights(out, std::string(leaf) + ".b");
    return lw;
}

Tensor Emitter::linear(const Tensor& x, const LinearWeights& lw, std::string_view leaf) {
    if (x.size != lw.in) throw std::logic_error("linear input width mismatch at " + label(leaf));
    const std::string base(leaf);
    Tensor y{lw.out, {}};
    for (std::uint64_t o = 0; o < rep_count(lw.out); ++o) {
        std::vector<Operand> products;
        for (std::uint64_t i = 0; i < rep_count(lw.in); ++i) {
            const GateId w = lw.w.at(scalar() ? o * lw.in + i : 0);
            const GateId p = gate(PiecewiseAnalytic{"mul", 2}, {{w, 1}, {x.at(i), 1}}, label(base + ".mul", {o, i}));
            products.push_back({p, scalar() ? 1u : static_cast<std::uint32_t>(lw.in)});
        }
        GateId r = reduce(ReduceOp::add, std::move(products), label(base + ".sum", {o}));
        if (lw.b) {
            r = gate(PiecewiseAnalytic{"add", 2}, {{r, 1}, {lw.b->at(o), 1}}, label(base + ".bias_add", {o}));
        }
        y.elems.push_back(r);
    }
    return y;
}

Tensor Emitter::rmsnorm(const Tensor& x, const Tensor& gain, std::string_view leaf) {
    const std::string base(leaf);
    const Tensor sq = unary("square", x, base + ".square");
    const Tensor sum = reduce_all(ReduceOp::add, sq, base + ".sum");
    const Tensor dim = fixed_scalar(static_cast<double>(x.size), base + ".dim");
    const Tensor mean = binary("div", sum, dim, base + ".mean");
    const Tensor eps = fixed_scalar(rms_eps, base + ".eps");
    const Tensor var = binary("add", mean, eps, base + ".add_eps");
    const Tensor inv = unary("rsqrt", var, base + ".rsqrt");
    const Tensor normed = binary("mul", x, inv, base + ".scale");
    return binary("mul", normed, gain, base + ".gain");
}

Tensor Emitter::slice(const Tensor& x, std::uint64_t offset, std::uint64_t len) const {
    if (offset + len > x.size) throw std::logic_error("slice out of range");
    if (!scalar()) return Tensor{len, {x.at(0)}};
    Tensor t{len, {}};
    for (std::uint64_t i = 0; i < len; ++i) t.elems.push_back(x.at(offset + i));
    return t;
}

Tensor Emitter::concat(const std::vector<Tensor>& parts, std::uint64_t logical_size) const {
    if (!scalar()) return Tensor{logical_size, {parts.front().at(0)}};
    Tensor t{0, {}};
    for (const auto& p : parts) {
        for (std::uint64_t i = 0; i < p.size; ++i) t.elems.push_back(p.at(i));
        t.size += p.size;
    }
    if (t.size != logical_size) throw DomainError("concatenated width does not match the modelled width");
    return t;
}

void Emitter::mark_outputs(const Tensor& t) {
    for (GateId id : t.elems) graph_.mark_output(id);
}

void Emitter::set_interpretable(const Tensor& t, bool value) {
    for (GateId id : t.elems) graph_.set_interpretable(id, value);
}

}  // namespace osd::detail

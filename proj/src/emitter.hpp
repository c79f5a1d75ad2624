#pragma once

// Tensor-level gate emission shared by the architecture builders.
//
// A Tensor is a logical vector of `size` reals. Under Granularity::scalar it
// owns one gate per element; under Granularity::collapsed a single
// representative gate stands for every element and reductions over it carry
// the full logical arity as operand multiplicity.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "osd/arch_builders.hpp"
#include "osd/graph_ir.hpp"

namespace osd::detail {

struct Tensor {
    std::uint64_t size = 0;
    std::vector<GateId> elems;

    GateId at(std::uint64_t i) const { return elems.size() == 1 ? elems[0] : elems.at(i); }
    std::uint64_t reps() const { return elems.size(); }
};

struct LinearWeights {
    std::uint64_t in = 0;
    std::uint64_t out = 0;
    Tensor w;  // row-major [out][in]
    std::optional<Tensor> b;
};

class Emitter {
public:
    Emitter(CircuitGraph& graph, Granularity granularity) : graph_(graph), granularity_(granularity) {}

    CircuitGraph& graph() { return graph_; }
    bool scalar() const { return granularity_ == Granularity::scalar; }
    Granularity granularity() const { return granularity_; }
    std::uint64_t rep_count(std::uint64_t size) const { return scalar() ? size : 1; }

    class Scope {
    public:
        Scope(Emitter& e, std::string_view name);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Emitter& e_;
        std::size_t saved_;
    };

    std::string label(std::string_view leaf) const;
    /// Scalar mode appends "[i]" or "[i,j]"; collapsed mode uses the bare leaf.
    std::string label(std::string_view leaf, std::initializer_list<std::uint64_t> index) const;

    Tensor inputs(std::uint64_t size, std::string_view leaf);
    Tensor weights(std::uint64_t size, std::string_view leaf);
    Tensor fixed(std::uint64_t size, const std::function<double(std::uint64_t)>& value, std::string_view leaf);
    Tensor fixed_scalar(double value, std::string_view leaf);

    Tensor unary(const std::string& fn, const Tensor& x, std::string_view leaf);
    /// Elementwise; either side may be a logical scalar (size 1) that broadcasts.
    Tensor binary(const std::string& fn, const Tensor& a, const Tensor& b, std::string_view leaf);

    /// Single analytic gate with a fully qualified label.
    GateId analytic(const std::string& fn, std::vector<Operand> operands, std::string label);

    /// Arity-1 reductions are emitted as wiring.
    GateId reduce(ReduceOp op, std::vector<Operand> operands, const std::string& label);
    /// Reduce all elements of a tensor to a logical scalar.
    Tensor reduce_all(ReduceOp op, const Tensor& x, std::string_view leaf);

    LinearWeights linear_weights(std::uint64_t in, std::uint64_t out, bool bias, std::string_view leaf);
    /// Reuses an existing [out][in] tensor (tied embeddings).
    LinearWeights linear_weights_from(const Tensor& w, std::uint64_t in, std::uint64_t out, bool bias,
                                      std::string_view leaf);
    Tensor linear(const Tensor& x, const LinearWeights& weights, std::string_view leaf);

    Tensor norm_gain(std::uint64_t dim, std::string_view leaf) { return weights(dim, leaf); }
    /// x * rsqrt(mean(x^2) + eps) * gain
    Tensor rmsnorm(const Tensor& x, const Tensor& gain, std::string_view leaf);

    Tensor slice(const Tensor& x, std::uint64_t offset, std::uint64_t len) const;
    /// Concatenate with an explicit logical size (collapsed mode keeps the
    /// first representative).
    Tensor concat(const std::vector<Tensor>& parts, std::uint64_t logical_size) const;

    void mark_outputs(const Tensor& t);
    void set_interpretable(const Tensor& t, bool value);

private:
    GateId gate(GateKind kind, std::vector<Operand> ops, std::string label);

    CircuitGraph& graph_;
    Granularity granularity_;
    std::string prefix_;
};

constexpr double rms_eps = 1e-6;
constexpr double rope_base = 10000.0;

double gelu(double x);

}  // namespace osd::detail

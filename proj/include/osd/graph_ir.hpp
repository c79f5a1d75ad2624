#pragma once

// Real-valued circuit IR: a DAG of gates drawn from a small permissible set
// (associative reductions, piecewise-analytic functions of <= 2 reals,
// multiplexer lookups) plus zero-depth wiring, inputs and constants.

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace osd {

struct GateId {
    std::uint32_t value = 0;
    friend constexpr auto operator<=>(GateId, GateId) = default;
};

std::string to_string(GateId id);

enum class ReduceOp { add, mul, max, min };

std::string_view to_string(ReduceOp op);

/// n-ary application of an associative binary operation.
struct AssociativeReduce {
    ReduceOp op = ReduceOp::add;
    std::uint32_t arity = 2;
};

/// Piecewise-analytic function of one or two reals (relu, exp, divide, ...).
struct PiecewiseAnalytic {
    std::string name;
    std::uint32_t arity = 1;
};

/// Multiplexer over `table_size` stored values. Operand 0 is the index wire,
/// operands 1..table_size are the table entries.
struct Lookup {
    std::uint32_t table_size = 1;
};

/// Reshape / slice / concat / broadcast. Evaluates to its first operand.
struct Wiring {};

struct Input {};

/// Trained weight (value left symbolic) or a fixed scalar such as eps or 1/d.
struct Constant {
    std::optional<double> value;
};

using GateKind = std::variant<AssociativeReduce, PiecewiseAnalytic, Lookup, Wiring, Input, Constant>;

std::string kind_name(const GateKind& kind);

/// Operand count the kind requires; nullopt for Wiring (any count >= 1).
std::optional<std::uint64_t> required_operand_count(const GateKind& kind);

/// Empty when the kind itself is well-formed, otherwise a short reason.
std::string kind_violation(const GateKind& kind);

/// One input edge, possibly repeated. A reduction over n copies of the same
/// tensor representative is stored as a single operand with count n.
struct Operand {
    GateId id;
    std::uint32_t count = 1;
};

struct Gate {
    GateKind kind;
    std::vector<Operand> operands;
    bool interpretable = false;
    std::string label;

    std::uint64_t arity() const;
    bool is_leaf_kind() const {
        return std::holds_alternative<Input>(kind) || std::holds_alternative<Constant>(kind);
    }
};

class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense bitset over gate ids.
class GateSet {
public:
    GateSet() = default;
    explicit GateSet(std::size_t universe) : bits_(universe, false) {}
    bool contains(GateId id) const { return id.value < bits_.size() && bits_[id.value]; }
    void insert(GateId id);
    void erase(GateId id);
    std::size_t universe() const { return bits_.size(); }
    std::size_t count() const;

private:
    std::vector<bool> bits_;
};

class CircuitGraph {
public:
    /// Checked construction: operands must already exist (which keeps the
    /// graph acyclic and id order topological) and match the kind's arity.
    GateId add_gate(GateKind kind, std::vector<Operand> operands, bool interpretable = false,
                    std::string label = {});
    GateId add_gate(GateKind kind, std::span<const GateId> inputs, bool interpretable = false,
                    std::string label = {});
    GateId add_gate(GateKind kind, std::initializer_list<GateId> inputs, bool interpretable = false,
                    std::string label = {});

    /// Registers an overall input wire (always interpretable).
    GateId add_input(std::string label = {});
    GateId add_constant(std::string label = {}, std::optional<double> value = std::nullopt);

    /// Designates an output gate and marks it interpretable.
    void mark_output(GateId id);
    void set_interpretable(GateId id, bool interpretable);

    /// Unchecked assembly, used for rewrites and for exercising validate()
    /// on malformed graphs.
    static CircuitGraph from_parts(std::vector<Gate> gates, std::vector<GateId> input_ids,
                                   std::vector<GateId> output_ids);

    bool contains(GateId id) const { return id.value < gates_.size(); }
    const Gate& gate(GateId id) const;
    std::size_t size() const { return gates_.size(); }
    std::span<const Gate> gates() const { return gates_; }
    std::span<const GateId> input_ids() const { return input_ids_; }
    std::span<const GateId> output_ids() const { return output_ids_; }

    /// Interpretable flags as a set.
    GateSet interpretable_set() const;
    bool is_output(GateId id) const;

    /// True when every operand id precedes its consumer (always the case for
    /// graphs assembled through add_gate).
    bool id_order_is_topological() const;

    /// Total number of operand edges, counting multiplicity once per operand.
    std::size_t edge_count() const;

private:
    std::vector<Gate> gates_;
    std::vector<GateId> input_ids_;
    std::vector<GateId> output_ids_;
};

/// Every gate after all of its operands; ties broken by smallest id.
/// Throws StructuralError on cycles or dangling operands.
std::vector<GateId> topological_order(const CircuitGraph& graph);

struct Violation {
    GateId gate;
    std::string rule;
    std::string detail;
};

/// Empty iff every structural invariant holds.
std::vector<Violation> validate(const CircuitGraph& graph);

}  // namespace osd

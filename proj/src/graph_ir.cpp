#include "osd/graph_ir.hpp"

#include <algorithm>
#include <functional>
#include <queue>

namespace osd {

std::string to_string(GateId id) { return "g" + std::to_string(id.value); }

std::string_view to_string(ReduceOp op) {
    switch (op) {
        case ReduceOp::add: return "add";
        case ReduceOp::mul: return "mul";
        case ReduceOp::max: return "max";
        case ReduceOp::min: return "min";
    }
    return "?";
}

namespace {

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

std::string kind_name(const GateKind& kind) {
    return std::visit(
        Overloaded{
            [](const AssociativeReduce& r) {
                return "reduce_" + std::string(to_string(r.op)) + "(" + std::to_string(r.arity) + ")";
            },
            [](const PiecewiseAnalytic& p) { return p.name; },
            [](const Lookup& l) { return "lookup(" + std::to_string(l.table_size) + ")"; },
            [](const Wiring&) { return std::string("wiring"); },
            [](const Input&) { return std::string("input"); },
            [](const Constant&) { return std::string("constant"); },
        },
        kind);
}

std::optional<std::uint64_t> required_operand_count(const GateKind& kind) {
    return std::visit(
        Overloaded{
            [](const AssociativeReduce& r) -> std::optional<std::uint64_t> { return r.arity; },
            [](const PiecewiseAnalytic& p) -> std::optional<std::uint64_t> { return p.arity; },
            [](const Lookup& l) -> std::optional<std::uint64_t> {
                return std::uint64_t{l.table_size} + 1;
            },
            [](const Wiring&) -> std::optional<std::uint64_t> { return std::nullopt; },
            [](const Input&) -> std::optional<std::uint64_t> { return 0; },
            [](const Constant&) -> std::optional<std::uint64_t> { return 0; },
        },
        kind);
}

std::string kind_violation(const GateKind& kind) {
    if (const auto* r = std::get_if<AssociativeReduce>(&kind); r && r->arity < 2) {
        return "associative reduction needs arity >= 2";
    }
    if (const auto* p = std::get_if<PiecewiseAnalytic>(&kind)) {
        if (p->arity < 1 || p->arity > 2) return "piecewise-analytic gates take one or two inputs";
        if (p->name.empty()) return "piecewise-analytic gate needs a function name";
    }
    if (const auto* l = std::get_if<Lookup>(&kind); l && l->table_size < 1) {
        return "lookup table must hold at least one entry";
    }
    return {};
}

std::uint64_t Gate::arity() const {
    std::uint64_t n = 0;
    for (const auto& op : operands) n += op.count;
    return n;
}

void GateSet::insert(GateId id) {
    if (id.value >= bits_.size()) bits_.resize(id.value + 1, false);
    bits_[id.value] = true;
}

void GateSet::erase(GateId id) {
    if (id.value < bits_.size()) bits_[id.value] = false;
}

std::size_t GateSet::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }

GateId CircuitGraph::add_gate(GateKind kind, std::vector<Operand> operands, bool interpretable,
                              std::string label) {
    if (auto why = kind_violation(kind); !why.empty()) {
        throw StructuralError("invalid gate kind " + kind_name(kind) + ": " + why);
    }
    std::uint64_t arity = 0;
    for (const auto& op : operands) {
        if (!contains(op.id)) {
            throw StructuralError("unknown input id " + to_string(op.id) + " for gate '" + label + "'");
        }
        if (op.count == 0) throw StructuralError("operand with zero multiplicity");
        arity += op.count;
    }
    const auto required = required_operand_count(kind);
    if (required ? arity != *required : arity < 1) {
        throw StructuralError("arity mismatch: " + kind_name(kind) + " given " + std::to_string(arity) +
                              " inputs");
    }
    const GateId id{static_cast<std::uint32_t>(gates_.size())};
    gates_.push_back(Gate{std::move(kind), std::move(operands), interpretable, std::move(label)});
    return id;
}

GateId CircuitGraph::add_gate(GateKind kind, std::span<const GateId> inputs, bool interpretable,
                              std::string label) {
    std::vector<Operand> ops;
    ops.reserve(inputs.size());
    for (GateId id : inputs) ops.push_back({id, 1});
    return add_gate(std::move(kind), std::move(ops), interpretable, std::move(label));
}

GateId CircuitGraph::add_gate(GateKind kind, std::initializer_list<GateId> inputs, bool interpretable,
                              std::string label) {
    return add_gate(std::move(kind), std::span<const GateId>(inputs.begin(), inputs.size()), interpretable,
                    std::move(label));
}

GateId CircuitGraph::add_input(std::string label) {
    const GateId id = add_gate(Input{}, std::vector<Operand>{}, true, std::move(label));
    input_ids_.push_back(id);
    return id;
}

GateId CircuitGraph::add_constant(std::string label, std::optional<double> value) {
    return add_gate(Constant{value}, std::vector<Operand>{}, false, std::move(label));
}

void CircuitGraph::mark_output(GateId id) {
    if (!contains(id)) throw StructuralError("unknown output id " + to_string(id));
    gates_[id.value].interpretable = true;
    if (!is_output(id)) output_ids_.push_back(id);
}

void CircuitGraph::set_interpretable(GateId id, bool interpretable) {
    if (!contains(id)) throw StructuralError("unknown gate id " + to_string(id));
    gates_[id.value].interpretable = interpretable;
}

CircuitGraph CircuitGraph::from_parts(std::vector<Gate> gates, std::vector<GateId> input_ids,
                                      std::vector<GateId> output_ids) {
    CircuitGraph g;
    g.gates_ = std::move(gates);
    g.input_ids_ = std::move(input_ids);
    g.output_ids_ = std::move(output_ids);
    return g;
}

const Gate& CircuitGraph::gate(GateId id) const {
    if (!contains(id)) throw StructuralError("unknown gate id " + to_string(id));
    return gates_[id.value];
}

GateSet CircuitGraph::interpretable_set() const {
    GateSet set(gates_.size());
    for (std::uint32_t i = 0; i < gates_.size(); ++i) {
        if (gates_[i].interpretable) set.insert(GateId{i});
    }
    return set;
}

bool CircuitGraph::is_output(GateId id) const {
    return std::find(output_ids_.begin(), output_ids_.end(), id) != output_ids_.end();
}

bool CircuitGraph::id_order_is_topological() const {
    for (std::uint32_t i = 0; i < gates_.size(); ++i) {
        for (const auto& op : gates_[i].operands) {
            if (op.id.value >= i) return false;
        }
    }
    return true;
}

std::size_t CircuitGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& g : gates_) n += g.operands.size();
    return n;
}

namespace {

// Kahn's algorithm with a min-heap so ties resolve by insertion order.
// Dangling operands are skipped; unprocessed gates are returned via `stuck`.
std::vector<GateId> kahn_order(const CircuitGraph& graph, std::vector<GateId>* stuck) {
    const std::size_t n = graph.size();
    std::vector<std::uint32_t> pending(n, 0);
    std::vector<std::vector<std::uint32_t>> consumers(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (const auto& op : graph.gates()[i].operands) {
            if (!graph.contains(op.id)) continue;
            consumers[op.id.value].push_back(i);
            ++pending[i];
        }
    }
    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (pending[i] == 0) ready.push(i);
    }
    std::vector<GateId> order;
    order.reserve(n);
    while (!ready.empty()) {
        const std::uint32_t i = ready.top();
        ready.pop();
        order.push_back(GateId{i});
        for (std::uint32_t c : consumers[i]) {
            if (--pending[c] == 0) ready.push(c);
        }
    }
    if (stuck) {
        for (std::uint32_t i = 0; i < n; ++i) {
            if (pending[i] != 0) stuck->push_back(GateId{i});
        }
    }
    return order;
}

}  // namespace

std::vector<GateId> topological_order(const CircuitGraph& graph) {
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        for (const auto& op : graph.gates()[i].operands) {
            if (!graph.contains(op.id)) {
                throw StructuralError("gate " + to_string(GateId{i}) + " references missing " + to_string(op.id));
            }
        }
    }
    if (graph.id_order_is_topological()) {
        std::vector<GateId> order(graph.size());
        for (std::uint32_t i = 0; i < graph.size(); ++i) order[i] = GateId{i};
        return order;
    }
    std::vector<GateId> stuck;
    auto order = kahn_order(graph, &stuck);
    if (!stuck.empty()) {
        throw StructuralError("cycle detected through " + to_string(stuck.front()));
    }
    return order;
}

std::vector<Violation> validate(const CircuitGraph& graph) {
    std::vector<Violation> out;
    const auto gates = graph.gates();

    for (std::uint32_t i = 0; i < gates.size(); ++i) {
        const GateId id{i};
        const Gate& g = gates[i];
        if (auto why = kind_violation(g.kind); !why.empty()) {
            out.push_back({id, "invalid-kind", why});
        }
        bool dangling = false;
        for (const auto& op : g.operands) {
            if (!graph.contains(op.id)) {
                out.push_back({id, "dangling-input", "references missing " + to_string(op.id)});
                dangling = true;
            }
            if (op.count == 0) out.push_back({id, "zero-multiplicity", "operand " + to_string(op.id)});
        }
        const auto required = required_operand_count(g.kind);
        const auto arity = g.arity();
        if (!dangling && (required ? arity != *required : arity < 1)) {
            out.push_back({id, "arity-mismatch",
                           kind_name(g.kind) + " has " + std::to_string(arity) + " inputs"});
        }
        if (std::holds_alternative<Input>(g.kind)) {
            const auto ins = graph.input_ids();
            if (std::find(ins.begin(), ins.end(), id) == ins.end()) {
                out.push_back({id, "input-not-registered", "Input gate missing from input-ids"});
            }
        }
    }

    for (GateId id : graph.input_ids()) {
        if (!graph.contains(id) || !std::holds_alternative<Input>(graph.gate(id).kind)) {
            out.push_back({id, "not-an-input", "input-ids entry is not an Input gate"});
        } else if (!graph.gate(id).interpretable) {
            out.push_back({id, "inputs-must-be-interpretable", "overall input not marked interpretable"});
        }
    }
    for (GateId id : graph.output_ids()) {
        if (!graph.contains(id)) {
            out.push_back({id, "unknown-output", "output-ids entry does not exist"});
        } else if (!graph.gate(id).interpretable) {
            out.push_back({id, "outputs-must-be-interpretable", "overall output not marked interpretable"});
        }
    }

    std::vector<GateId> stuck;
    const auto order = kahn_order(graph, &stuck);
    for (GateId id : stuck) out.push_back({id, "cycle", "gate lies on or behind a cycle"});

    // Reachability from some Input or Constant over the acyclic part.
    std::vector<bool> reached(gates.size(), false);
    for (GateId id : order) {
        const Gate& g = gates[id.value];
        if (g.is_leaf_kind()) {
            reached[id.value] = true;
            continue;
        }
        for (const auto& op : g.operands) {
            if (graph.contains(op.id) && reached[op.id.value]) {
                reached[id.value] = true;
                break;
            }
        }
    }
    for (GateId id : order) {
        if (!reached[id.value]) out.push_back({id, "unreachable", "not reachable from any input or constant"});
    }
    return out;
}

}  // namespace osd

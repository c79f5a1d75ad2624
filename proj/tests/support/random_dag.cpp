#include "random_dag.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "osd/circuit_oracle.hpp"

namespace osd::testkit {

CircuitGraph random_dag(std::mt19937_64& rng, const DagParams& p) {
    std::uniform_int_distribution<std::size_t> size_dist(3, std::max<std::size_t>(3, p.max_gates));
    const std::size_t target = size_dist(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    CircuitGraph g;
    const std::size_t n_inputs = 1 + rng() % 3;
    for (std::size_t i = 0; i < n_inputs; ++i) g.add_input("in" + std::to_string(i));
    if (p.with_constants && unit(rng) < 0.7) g.add_constant("c0", p.evaluable ? 0.5 : std::optional<double>{});

    static const char* unary[] = {"relu", "tanh", "exp", "square", "sigmoid", "neg"};
    static const char* binary[] = {"add", "mul", "sub"};
    static const ReduceOp ops[] = {ReduceOp::add, ReduceOp::max, ReduceOp::min, ReduceOp::mul};

    auto pick = [&] { return GateId{static_cast<std::uint32_t>(rng() % g.size())}; };
    const std::size_t leaves = g.size();
    while (g.size() < std::max(target, leaves + 1)) {
        const auto roll = rng() % 10;
        const std::string label = "g" + std::to_string(g.size());
        if (roll < 3) {
            std::vector<Operand> operands;
            const std::size_t k = 1 + rng() % 4;
            std::uint32_t arity = 0;
            for (std::size_t i = 0; i < k; ++i) {
                const auto count = static_cast<std::uint32_t>(1 + rng() % (p.evaluable ? 3 : 9));
                operands.push_back({pick(), count});
                arity += count;
            }
            if (arity < 2) operands.front().count = 2, arity += 1;
            g.add_gate(AssociativeReduce{ops[rng() % (p.evaluable ? 3 : 4)], arity}, std::move(operands), false, label);
        } else if (roll < 5) {
            g.add_gate(PiecewiseAnalytic{unary[rng() % (p.evaluable ? 2 : 6)], 1}, {{pick(), 1}}, false, label);
        } else if (roll < 8) {
            g.add_gate(PiecewiseAnalytic{binary[rng() % 3], 2}, {{pick(), 1}, {pick(), 1}}, false, label);
        } else if (roll < 9) {
            const auto table = static_cast<std::uint32_t>(1 + rng() % 6);
            g.add_gate(Lookup{table}, {{pick(), 1}, {pick(), table}}, false, label);
        } else {
            g.add_gate(Wiring{}, {{pick(), 1}}, false, label);
        }
    }

    std::vector<bool> used(g.size(), false);
    for (const auto& gate : g.gates()) {
        for (const auto& op : gate.operands) used[op.id.value] = true;
    }
    bool any_output = false;
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        const auto& gate = g.gate(GateId{i});
        if (gate.is_leaf_kind()) continue;
        if (!used[i]) {
            g.mark_output(GateId{i});
            any_output = true;
        } else if (unit(rng) < p.interpretable_prob) {
            g.set_interpretable(GateId{i}, true);
        }
    }
    if (!any_output) g.mark_output(GateId{static_cast<std::uint32_t>(g.size() - 1)});
    return g;
}

CircuitGraph insert_wiring(const CircuitGraph& g, std::mt19937_64& rng) {
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        if (!g.gate(GateId{i}).operands.empty()) candidates.push_back(i);
    }
    if (candidates.empty()) return g;
    const auto target = candidates[rng() % candidates.size()];
    const auto slot = rng() % g.gate(GateId{target}).operands.size();

    // the wire goes in right before its consumer; later ids shift by one
    std::vector<Gate> gates;
    auto shift = [&](GateId id) { return GateId{id.value >= target ? id.value + 1 : id.value}; };
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        Gate gate = g.gate(GateId{i});
        if (i == target) {
            Gate wire{Wiring{}, {{gate.operands[slot].id, 1}}, false, "wire"};
            gates.push_back(wire);
        }
        for (std::size_t k = 0; k < gate.operands.size(); ++k) {
            if (i == target && k == slot) {
                gate.operands[k].id = GateId{target};
            } else {
                gate.operands[k].id = shift(gate.operands[k].id);
            }
        }
        gates.push_back(std::move(gate));
    }
    std::vector<GateId> inputs, outputs;
    for (GateId id : g.input_ids()) inputs.push_back(shift(id));
    for (GateId id : g.output_ids()) outputs.push_back(shift(id));
    return CircuitGraph::from_parts(std::move(gates), std::move(inputs), std::move(outputs));
}

namespace {

std::uint64_t clog2(std::uint64_t n) {
    std::uint64_t k = 0;
    while ((1ull << k) < n) ++k;
    return k;
}

std::uint64_t weight_of(const Gate& g) {
    return std::visit(
        [](const auto& k) -> std::uint64_t {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, AssociativeReduce>) return clog2(k.arity);
            if constexpr (std::is_same_v<K, PiecewiseAnalytic>) return 1;
            if constexpr (std::is_same_v<K, Lookup>) return clog2(k.table_size);
            return 0;
        },
        g.kind);
}

}  // namespace

std::uint64_t enumerate_longest_path(const CircuitGraph& g) {
    // every path walked explicitly, no memoization
    std::function<std::uint64_t(GateId)> longest_into = [&](GateId id) -> std::uint64_t {
        const Gate& gate = g.gate(id);
        std::uint64_t best = 0;
        for (const auto& op : gate.operands) {
            if (g.gate(op.id).interpretable) continue;
            best = std::max(best, longest_into(op.id));
        }
        return best + weight_of(gate);
    };
    std::uint64_t best = 0;
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        const GateId id{i};
        if (g.gate(id).interpretable || g.is_output(id)) best = std::max(best, longest_into(id));
    }
    return best;
}

std::vector<double> naive_evaluate(const CircuitGraph& g, const std::vector<double>& inputs) {
    std::function<double(GateId)> value = [&](GateId id) -> double {
        const Gate& gate = g.gate(id);
        std::vector<double> args;
        for (const auto& op : gate.operands) {
            const double v = value(op.id);
            for (std::uint32_t c = 0; c < op.count; ++c) args.push_back(v);
        }
        if (std::holds_alternative<Input>(gate.kind)) {
            const auto ids = g.input_ids();
            return inputs[static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin())];
        }
        if (const auto* c = std::get_if<Constant>(&gate.kind)) return c->value ? *c->value : default_constant_value(gate.label);
        if (std::holds_alternative<Wiring>(gate.kind)) return args.front();
        if (const auto* r = std::get_if<AssociativeReduce>(&gate.kind)) {
            double acc = args[0];
            for (std::size_t i = 1; i < args.size(); ++i) {
                if (r->op == ReduceOp::add) acc = acc + args[i];
                if (r->op == ReduceOp::mul) acc = acc * args[i];
                if (r->op == ReduceOp::max) acc = args[i] > acc ? args[i] : acc;
                if (r->op == ReduceOp::min) acc = args[i] < acc ? args[i] : acc;
            }
            return acc;
        }
        if (const auto* l = std::get_if<Lookup>(&gate.kind)) {
            long idx = std::lround(args[0]);
            idx = std::clamp<long>(idx, 0, static_cast<long>(l->table_size) - 1);
            return args[1 + static_cast<std::size_t>(idx)];
        }
        const auto& name = std::get<PiecewiseAnalytic>(gate.kind).name;
        const double x = args[0];
        if (name == "relu") return std::max(0.0, x);
        if (name == "tanh") return std::tanh(x);
        if (name == "exp") return std::exp(x);
        if (name == "square") return x * x;
        if (name == "sigmoid") return 1.0 / (1.0 + std::exp(-x));
        if (name == "neg") return -x;
        if (name == "add") return x + args[1];
        if (name == "mul") return x * args[1];
        if (name == "sub") return x - args[1];
        throw std::runtime_error("naive_evaluate: unsupported " + name);
    };
    std::vector<double> out;
    for (GateId id : g.output_ids()) out.push_back(value(id));
    return out;
}

}  // namespace osd::testkit

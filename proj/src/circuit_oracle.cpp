#include "osd/circuit_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stack>

namespace osd {

namespace {

std::uint64_t log2_ceil(std::uint64_t n) {
    std::uint64_t k = 0;
    while ((std::uint64_t{1} << k) < n) ++k;
    return k;
}

// immediate weights, restated rather than shared with the engine
std::uint64_t weight(const Gate& g) {
    if (const auto* r = std::get_if<AssociativeReduce>(&g.kind)) return log2_ceil(r->arity);
    if (std::holds_alternative<PiecewiseAnalytic>(g.kind)) return 1;
    if (const auto* l = std::get_if<Lookup>(&g.kind)) return log2_ceil(l->table_size);
    return 0;
}

double reduce_values(ReduceOp op, const std::vector<double>& xs) {
    double acc = xs.front();
    for (std::size_t i = 1; i < xs.size(); ++i) {
        switch (op) {
            case ReduceOp::add: acc += xs[i]; break;
            case ReduceOp::mul: acc *= xs[i]; break;
            case ReduceOp::max: acc = std::max(acc, xs[i]); break;
            case ReduceOp::min: acc = std::min(acc, xs[i]); break;
        }
    }
    return acc;
}

}  // namespace

double default_constant_value(std::string_view label) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ull;
    }
    // FNV alone leaves neighbouring labels correlated; finish with a mixer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    // Irwin-Hall(4) from the hash bytes, rescaled to unit variance
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += static_cast<double>((h >> (16 * i)) & 0xffff) / 65535.0;
    return (s - 2.0) * std::sqrt(3.0);
}

double apply_analytic(std::string_view name, std::span<const double> a) {
    auto need = [&](std::size_t n) {
        if (a.size() != n) throw OracleError("analytic gate '" + std::string(name) + "' expects " + std::to_string(n) + " operands");
    };
    if (name == "identity") { need(1); return a[0]; }
    if (name == "relu") { need(1); return a[0] > 0 ? a[0] : 0.0; }
    if (name == "gelu") {
        need(1);
        const double c = std::sqrt(2.0 / std::numbers::pi);
        return 0.5 * a[0] * (1.0 + std::tanh(c * (a[0] + 0.044715 * a[0] * a[0] * a[0])));
    }
    if (name == "exp") { need(1); return std::exp(a[0]); }
    if (name == "rsqrt") { need(1); return 1.0 / std::sqrt(a[0]); }
    if (name == "square") { need(1); return a[0] * a[0]; }
    if (name == "tanh") { need(1); return std::tanh(a[0]); }
    if (name == "sigmoid") { need(1); return 1.0 / (1.0 + std::exp(-a[0])); }
    if (name == "neg") { need(1); return -a[0]; }
    if (name == "mul") { need(2); return a[0] * a[1]; }
    if (name == "add") { need(2); return a[0] + a[1]; }
    if (name == "sub") { need(2); return a[0] - a[1]; }
    if (name == "div") { need(2); return a[0] / a[1]; }
    // drops entries already selected by a max-reduction
    if (name == "mask_ge") { need(2); return a[0] < a[1] ? a[0] : -1e300; }
    throw OracleError("unsupported analytic gate '" + std::string(name) + "'");
}

std::vector<double> evaluate_all(const CircuitGraph& graph, std::span<const double> inputs,
                                 const ConstantAssignment& constants) {
    const auto input_ids = graph.input_ids();
    if (inputs.size() != input_ids.size()) {
        throw OracleError("expected " + std::to_string(input_ids.size()) + " inputs, got " + std::to_string(inputs.size()));
    }
    if (!graph.id_order_is_topological()) throw OracleError("evaluation requires operands to precede their consumers");
    std::vector<double> value(graph.size(), 0.0);
    for (std::size_t i = 0; i < input_ids.size(); ++i) value[input_ids[i].value] = inputs[i];

    std::vector<double> args;
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        const Gate& g = graph.gate(GateId{i});
        args.clear();
        for (const auto& op : g.operands) args.insert(args.end(), op.count, value[op.id.value]);
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Input>) {
                } else if constexpr (std::is_same_v<K, Constant>) {
                    if (auto it = constants.find(i); it != constants.end()) {
                        value[i] = it->second;
                    } else {
                        value[i] = k.value ? *k.value : default_constant_value(g.label);
                    }
                } else if constexpr (std::is_same_v<K, Wiring>) {
                    if (args.empty()) throw OracleError("wiring gate without operands");
                    value[i] = args[0];
                } else if constexpr (std::is_same_v<K, AssociativeReduce>) {
                    if (args.size() != k.arity) throw OracleError("reduction arity mismatch at gate " + std::to_string(i));
                    value[i] = reduce_values(k.op, args);
                } else if constexpr (std::is_same_v<K, PiecewiseAnalytic>) {
                    value[i] = apply_analytic(k.name, args);
                } else if constexpr (std::is_same_v<K, Lookup>) {
                    if (args.size() != k.table_size + 1) throw OracleError("lookup arity mismatch at gate " + std::to_string(i));
                    const double idx = std::clamp(std::round(args[0]), 0.0, static_cast<double>(k.table_size - 1));
                    value[i] = args[1 + static_cast<std::size_t>(idx)];
                }
            },
            g.kind);
    }
    return value;
}

std::vector<double> evaluate(const CircuitGraph& graph, std::span<const double> inputs,
                             const ConstantAssignment& constants) {
    const auto all = evaluate_all(graph, inputs, constants);
    std::vector<double> out;
    for (GateId id : graph.output_ids()) out.push_back(all[id.value]);
    return out;
}

std::vector<std::vector<double>> evaluate_batch(const CircuitGraph& graph, const std::vector<std::vector<double>>& rows,
                                                const ConstantAssignment& constants) {
    std::vector<std::vector<double>> out(rows.size());
    const auto n = static_cast<std::int64_t>(rows.size());
    bool failed = false;
    std::string message;
#pragma omp parallel for schedule(dynamic) if (n > 1)
    for (std::int64_t r = 0; r < n; ++r) {
        try {
            out[r] = evaluate(graph, rows[r], constants);
        } catch (const std::exception& ex) {
#pragma omp critical
            {
                failed = true;
                message = ex.what();
            }
        }
    }
    if (failed) throw OracleError(message);
    return out;
}

std::vector<std::vector<double>> random_inputs(std::size_t width, std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> rows(trials, std::vector<double>(width));
    for (auto& row : rows) {
        for (auto& x : row) x = normal(rng);
    }
    return rows;
}

std::uint64_t longest_path_oracle(const CircuitGraph& graph) {
    const auto n = graph.size();
    if (n > oracle_gate_limit) {
        throw OracleError("graph has " + std::to_string(n) + " gates; oracle limit is " + std::to_string(oracle_gate_limit));
    }
    // reach[g]: longest weighted path ending at g's output, starting from a
    // leaf or just above an interpretable gate
    constexpr auto unknown = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::uint64_t> reach(n, unknown);
    std::vector<std::uint8_t> state(n, 0);  // 0 new, 1 open, 2 done

    auto solve = [&](GateId root) {
        std::stack<GateId> todo;
        todo.push(root);
        while (!todo.empty()) {
            const GateId id = todo.top();
            const Gate& g = graph.gate(id);
            if (state[id.value] == 2) {
                todo.pop();
                continue;
            }
            if (state[id.value] == 0) {
                state[id.value] = 1;
                for (const auto& op : g.operands) {
                    if (!graph.contains(op.id)) throw OracleError("dangling operand");
                    if (state[op.id.value] == 1) throw OracleError("cycle detected");
                    if (state[op.id.value] == 0) todo.push(op.id);
                }
                continue;
            }
            std::uint64_t best = 0;
            for (const auto& op : g.operands) {
                const Gate& src = graph.gate(op.id);
                if (!src.interpretable) best = std::max(best, reach[op.id.value]);
            }
            reach[id.value] = best + weight(g);
            state[id.value] = 2;
            todo.pop();
        }
    };

    std::uint64_t answer = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        const Gate& g = graph.gate(GateId{i});
        if (!g.interpretable && !graph.is_output(GateId{i})) continue;
        solve(GateId{i});
        answer = std::max(answer, reach[i]);
    }
    return answer;
}

EquivalenceResult equivalence_check(const CircuitGraph& a, const CircuitGraph& b, std::size_t trials, double tolerance,
                                    std::uint64_t seed) {
    if (a.input_ids().size() != b.input_ids().size()) throw OracleError("input counts differ");
    if (a.output_ids().size() != b.output_ids().size()) throw OracleError("output counts differ");
    const auto rows = random_inputs(a.input_ids().size(), trials, seed);
    const auto ya = evaluate_batch(a, rows);
    const auto yb = evaluate_batch(b, rows);
    EquivalenceResult r;
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t j = 0; j < ya[t].size(); ++j) {
            const double d = std::abs(ya[t][j] - yb[t][j]);
            if (std::isnan(d)) {
                r.max_deviation = std::numeric_limits<double>::infinity();
            } else {
                r.max_deviation = std::max(r.max_deviation, d);
            }
        }
    }
    r.pass = r.max_deviation <= tolerance;
    return r;
}

}  // namespace osd

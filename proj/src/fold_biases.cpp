#include "osd/arch_builders.hpp"

namespace osd {

namespace {

bool is_constant(const CircuitGraph& g, GateId id) { return std::holds_alternative<Constant>(g.gate(id).kind); }

bool is_sum(const Gate& gate) {
    const auto* r = std::get_if<AssociativeReduce>(&gate.kind);
    return r && r->op == ReduceOp::add;
}

bool is_binary_add(const Gate& gate) {
    const auto* a = std::get_if<PiecewiseAnalytic>(&gate.kind);
    return a && a->name == "add" && a->arity == 2 && gate.operands.size() == 2 && gate.operands[0].count == 1 &&
           gate.operands[1].count == 1;
}

}  // namespace

CircuitGraph fold_biases(const CircuitGraph& graph) {
    const auto n = graph.size();
    std::vector<std::uint32_t> uses(n, 0);
    for (const auto& gate : graph.gates()) {
        for (const auto& op : gate.operands) uses[op.id.value] += op.count;
    }

    // sum_of[add] = the reduction folded into it
    std::vector<std::optional<GateId>> sum_of(n);
    std::vector<bool> absorbed(n, false);
    for (std::uint32_t i = 0; i < n; ++i) {
        const Gate& gate = graph.gate(GateId{i});
        if (!is_binary_add(gate)) continue;
        for (int side = 0; side < 2; ++side) {
            const GateId s = gate.operands[side].id;
            const GateId b = gate.operands[1 - side].id;
            const Gate& sum = graph.gate(s);
            if (!is_sum(sum) || !is_constant(graph, b) || uses[s.value] != 1) continue;
            if (sum.interpretable || graph.is_output(s)) continue;
            sum_of[i] = s;
            absorbed[s.value] = true;
            break;
        }
    }

    std::vector<GateId> remap(n);
    std::vector<Gate> gates;
    gates.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (absorbed[i]) continue;
        const Gate& old = graph.gate(GateId{i});
        Gate g = old;
        if (sum_of[i]) {
            const Gate& sum = graph.gate(*sum_of[i]);
            const GateId bias = old.operands[0].id == *sum_of[i] ? old.operands[1].id : old.operands[0].id;
            g.kind = AssociativeReduce{ReduceOp::add, std::get<AssociativeReduce>(sum.kind).arity + 1};
            g.operands = sum.operands;
            g.operands.push_back({bias, 1});
            g.label = sum.label + "+bias";
        }
        for (auto& op : g.operands) op.id = remap[op.id.value];
        remap[i] = GateId{static_cast<std::uint32_t>(gates.size())};
        gates.push_back(std::move(g));
    }

    std::vector<GateId> inputs, outputs;
    for (GateId id : graph.input_ids()) inputs.push_back(remap[id.value]);
    for (GateId id : graph.output_ids()) outputs.push_back(remap[id.value]);
    return CircuitGraph::from_parts(std::move(gates), std::move(inputs), std::move(outputs));
}

namespace {

std::uint64_t attention_params(std::uint64_t D, std::uint64_t heads, std::uint64_t kv, std::uint64_t H, bool bias) {
    std::uint64_t p = D * heads * H + 2 * D * kv * H + heads * H * D;
    if (bias) p += heads * H + 2 * kv * H + D;
    return p;
}

std::uint64_t ffw_params(std::uint64_t D, std::uint64_t hidden, bool bias) {
    std::uint64_t p = 3 * D * hidden;
    if (bias) p += 2 * hidden + D;
    return p;
}

}  // namespace

ParameterCount parameter_count(const DenseTransformerSpec& spec) {
    spec.validate();
    const auto D = spec.embed_dim;
    std::uint64_t per_layer = attention_params(D, spec.num_heads, spec.num_kv_heads, spec.head_dim, spec.linear_bias);
    if (spec.use_qk_norm) per_layer += 2 * spec.head_dim;
    per_layer += 2 * D;
    if (spec.use_post_attn_norm) per_layer += D;
    if (spec.use_post_ffw_norm) per_layer += D;
    per_layer += ffw_params(D, spec.hidden_dim, spec.linear_bias);

    std::uint64_t total = spec.vocab_size * D + spec.num_layers * per_layer + D;
    if (!spec.tie_embeddings) total += spec.vocab_size * D;
    if (spec.linear_bias) total += spec.vocab_size;
    return {total, total};
}

ParameterCount parameter_count(const MoeSpec& spec) {
    spec.validate();
    const auto D = spec.embed_dim;
    const auto expert = ffw_params(D, spec.resolved_expert_hidden_dim(), false);
    const std::uint64_t shared = attention_params(D, spec.num_heads, spec.num_heads, spec.head_dim(), false) + 2 * D +
                                 D * spec.num_experts;
    std::uint64_t embed = spec.vocab_size * D + D;
    if (!spec.tie_embeddings) embed += spec.vocab_size * D;
    return {embed + spec.num_layers * (shared + spec.num_experts * expert),
            embed + spec.num_layers * (shared + spec.experts_per_token * expert)};
}

}  // namespace osd

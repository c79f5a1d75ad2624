#include <cmath>

#include "emitter.hpp"
#include "osd/arch_builders.hpp"
#include "osd/depth_engine.hpp"
#include "transformer_emit.hpp"

namespace osd {

using detail::Emitter;
using detail::Tensor;

void MlpSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) throw DomainError("MLP input and output dims must be >= 1");
    for (auto h : hidden_dims) {
        if (h < 1) throw DomainError("MLP hidden dims must be >= 1");
    }
    if (activation.empty()) throw DomainError("MLP activation must be named");
}

void MoeSpec::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw DomainError(what);
    };
    need(vocab_size >= 1 && embed_dim >= 1 && num_heads >= 1 && num_layers >= 1 && seq_len >= 1,
         "MoE dimensions must be >= 1");
    need(num_experts >= 1 && experts_per_token >= 1, "MoE expert counts must be >= 1");
    need(experts_per_token <= num_experts, "experts_per_token must not exceed num_experts");
    need(embed_dim % num_heads == 0, "num_heads must divide embed_dim");
    need(!expert_hidden_dim || *expert_hidden_dim >= 1, "expert_hidden_dim must be >= 1");
}

std::uint64_t MoeSpec::resolved_expert_hidden_dim() const {
    if (!expert_hidden_dim) throw DomainError("MoE expert_hidden_dim (d_ff) is unresolved");
    return *expert_hidden_dim;
}

DenseTransformerSpec dense_equivalent(const MoeSpec& spec) {
    spec.validate();
    DenseTransformerSpec d;
    d.name = spec.name;
    d.vocab_size = spec.vocab_size;
    d.embed_dim = spec.embed_dim;
    d.hidden_dim = spec.resolved_expert_hidden_dim();
    d.head_dim = spec.head_dim();
    d.num_layers = spec.num_layers;
    d.num_heads = spec.num_heads;
    d.num_kv_heads = spec.num_heads;
    d.sliding_window = spec.seq_len;
    d.attention_pattern = {AttentionKind::global};
    d.max_seq_len = spec.seq_len;
    d.use_post_attn_norm = false;
    d.use_post_ffw_norm = false;
    d.use_qk_norm = false;
    d.linear_bias = false;
    d.tie_embeddings = spec.tie_embeddings;
    d.inferred = spec.inferred;
    return d;
}

std::uint64_t moe_router_depth(const MoeSpec& spec) {
    const auto k = spec.experts_per_token;
    return linear_depth(spec.embed_dim) + k * ceil_log2(spec.num_experts) + (k - 1) + softmax_depth(k);
}

std::uint64_t moe_block_depth(const MoeSpec& spec) {
    const auto d = dense_equivalent(spec);
    const auto norm = rmsnorm_depth(d.embed_dim);
    const auto ffw = ffw_depth(d.embed_dim, d.hidden_dim);
    std::uint64_t mix = ffw;
    if (spec.experts_per_token > 1) {
        mix = std::max(moe_router_depth(spec), ffw) + 1 + ceil_log2(spec.experts_per_token);
    }
    return norm + attention_depth(d.embed_dim, d.head_dim, spec.seq_len, false) + 1 + norm + mix + 1;
}

std::uint64_t moe_depth(const MoeSpec& spec) {
    return embed_depth(spec.vocab_size) + spec.num_layers * moe_block_depth(spec) + rmsnorm_depth(spec.embed_dim) +
           linear_depth(spec.embed_dim);
}

std::string to_string(UnrollMode mode) {
    switch (mode) {
        case UnrollMode::autoregressive: return "autoregressive";
        case UnrollMode::diffusion: return "diffusion";
        case UnrollMode::continuous_cot: return "continuous-cot";
        case UnrollMode::blackbox_memory: return "blackbox-memory";
    }
    return "?";
}

void UnrollSpec::validate() const {
    base.validate();
    switch (mode) {
        case UnrollMode::autoregressive:
            if (prompt_len < 1) throw DomainError("autoregressive unroll requires prompt_len >= 1");
            if (output_len < 1) throw DomainError("autoregressive unroll requires output_len >= 1");
            break;
        case UnrollMode::diffusion:
            if (diffusion_steps < 1) throw DomainError("diffusion unroll requires diffusion_steps >= 1");
            break;
        case UnrollMode::continuous_cot:
            if (cot_steps < 1) throw DomainError("continuous-cot unroll requires cot_steps >= 1");
            break;
        case UnrollMode::blackbox_memory:
            if (invocation_bound && *invocation_bound < 1) throw DomainError("invocation_bound must be >= 1");
            break;
    }
    if (mode != UnrollMode::autoregressive && seq_len < 1) throw DomainError("seq_len must be >= 1");
    if (final_seq_len() > base.max_seq_len) {
        throw DomainError("sequence length " + std::to_string(final_seq_len()) + " exceeds max_seq_len " +
                          std::to_string(base.max_seq_len));
    }
}

bool UnrollSpec::intermediates_interpretable() const {
    if (intermediate_interpretable) return *intermediate_interpretable;
    return mode == UnrollMode::autoregressive || mode == UnrollMode::diffusion;
}

std::uint64_t UnrollSpec::final_seq_len() const {
    return mode == UnrollMode::autoregressive ? prompt_len + output_len - 1 : seq_len;
}

CircuitGraph build_mlp(const MlpSpec& spec, const BuildOptions& options) {
    spec.validate();
    CircuitGraph g;
    Emitter e(g, options.granularity.value_or(Granularity::scalar));
    Tensor x;
    {
        Emitter::Scope s(e, "input");
        x = e.inputs(spec.input_dim, "x");
    }
    const bool has_activation = spec.activation != "linear" && spec.activation != "identity";
    for (std::size_t i = 0; i <= spec.hidden_dims.size(); ++i) {
        const bool last = i == spec.hidden_dims.size();
        const auto width = last ? spec.output_dim : spec.hidden_dims[i];
        Emitter::Scope s(e, last ? "output" : "layer" + std::to_string(i + 1));
        const auto w = e.linear_weights(x.size, width, spec.bias, "linear");
        x = e.linear(x, w, "linear");
        if (!last && has_activation) x = e.unary(spec.activation, x, spec.activation);
    }
    e.mark_outputs(x);
    return options.fold_biases ? fold_biases(g) : g;
}

CircuitGraph build_dense_transformer(const DenseTransformerSpec& spec, std::uint64_t seq_len, const BuildOptions& options) {
    spec.validate();
    if (seq_len < 1) throw DomainError("sequence length must be >= 1");
    if (seq_len > spec.max_seq_len) {
        throw DomainError("sequence length " + std::to_string(seq_len) + " exceeds max_seq_len " +
                          std::to_string(spec.max_seq_len));
    }
    CircuitGraph g;
    Emitter e(g, options.granularity.value_or(Granularity::collapsed));
    detail::TransformerEmitter tx(e, spec);
    const auto pass = tx.forward(tx.token_inputs(seq_len), seq_len);
    e.mark_outputs(pass.logits);
    return options.fold_biases ? fold_biases(g) : g;
}

CircuitGraph build_moe_transformer(const MoeSpec& spec, const BuildOptions& options) {
    const auto dense = dense_equivalent(spec);
    CircuitGraph g;
    Emitter e(g, options.granularity.value_or(Granularity::collapsed));
    detail::TransformerEmitter tx(e, dense, detail::MoeRouting{spec.num_experts, spec.experts_per_token});
    const auto pass = tx.forward(tx.token_inputs(spec.seq_len), spec.seq_len);
    e.mark_outputs(pass.logits);
    return options.fold_biases ? fold_biases(g) : g;
}

CircuitGraph build_rnn_stack(std::uint64_t num_layers, std::uint64_t dim, std::uint64_t seq_len,
                             const BuildOptions& options) {
    if (num_layers < 1 || dim < 1 || seq_len < 1) throw DomainError("RNN stack dimensions must be >= 1");
    CircuitGraph g;
    Emitter e(g, options.granularity.value_or(Granularity::collapsed));
    const auto D = dim;

    std::vector<Tensor> w_in(num_layers), w_rec(num_layers);
    for (std::uint64_t l = 0; l < num_layers; ++l) {
        Emitter::Scope s(e, "layer" + std::to_string(l));
        w_in[l] = e.weights(D * D, "w_in");
        w_rec[l] = e.weights(D * D, "w_rec");
    }
    const Tensor h0{D, {g.add_constant("h0", 0.0)}};

    std::vector<Tensor> below(seq_len);
    {
        Emitter::Scope s(e, "input");
        for (std::uint64_t t = 0; t < seq_len; ++t) below[t] = e.inputs(D, "x" + std::to_string(t));
    }
    for (std::uint64_t l = 0; l < num_layers; ++l) {
        Tensor prev = h0;
        for (std::uint64_t t = 0; t < seq_len; ++t) {
            Emitter::Scope s(e, "cell" + std::to_string(l) + "_" + std::to_string(t));
            Tensor h{D, {}};
            for (std::uint64_t o = 0; o < e.rep_count(D); ++o) {
                std::vector<Operand> terms;
                for (std::uint64_t i = 0; i < e.rep_count(D); ++i) {
                    const GateId wi = w_in[l].at(e.scalar() ? o * D + i : 0);
                    const GateId wr = w_rec[l].at(e.scalar() ? o * D + i : 0);
                    const auto count = static_cast<std::uint32_t>(e.scalar() ? 1 : D);
                    terms.push_back({e.analytic("mul", {{wi, 1}, {below[t].at(i), 1}}, e.label("in_mul", {o, i})), count});
                    terms.push_back({e.analytic("mul", {{wr, 1}, {prev.at(i), 1}}, e.label("rec_mul", {o, i})), count});
                }
                const GateId sum = e.reduce(ReduceOp::add, std::move(terms), e.label("sum", {o}));
                h.elems.push_back(sum);
            }
            h = e.unary("tanh", h, "h");
            below[t] = h;
            prev = h;
        }
    }
    for (const auto& top : below) e.mark_outputs(top);
    return g;
}

UnrollResult unroll(const UnrollSpec& spec, const BuildOptions& options) {
    if (spec.mode == UnrollMode::blackbox_memory && !spec.invocation_bound) {
        return UnboundedDepth{"blackbox-memory without an invocation bound has no finite circuit"};
    }
    spec.validate();
    if (options.granularity.value_or(Granularity::collapsed) != Granularity::collapsed) {
        throw DomainError("unroll supports collapsed granularity only");
    }
    CircuitGraph g;
    Emitter e(g, Granularity::collapsed);
    detail::TransformerEmitter tx(e, spec.base);
    const bool visible = spec.intermediates_interpretable();

    auto pass_scope = [](std::uint64_t i) { return "pass" + std::to_string(i); };

    switch (spec.mode) {
        case UnrollMode::autoregressive:
        case UnrollMode::diffusion: {
            const bool ar = spec.mode == UnrollMode::autoregressive;
            const std::uint64_t passes = ar ? spec.output_len : spec.diffusion_steps;
            std::vector<GateId> tokens;
            for (std::uint64_t i = 0; i < passes; ++i) {
                Emitter::Scope s(e, pass_scope(i));
                const std::uint64_t T = ar ? spec.prompt_len + i : spec.seq_len;
                if (i == 0) tokens = tx.token_inputs(T);
                const auto pass = tx.forward(tokens, T);
                if (i + 1 == passes) {
                    e.mark_outputs(pass.logits);
                } else {
                    const GateId tok = g.add_gate(Wiring{}, {{pass.logits.at(0), 1}}, visible, e.label("sampled_token"));
                    tokens = {tok};
                }
            }
            break;
        }
        case UnrollMode::continuous_cot: {
            detail::TransformerEmitter::Positions x;
            for (std::uint64_t i = 0; i < spec.cot_steps; ++i) {
                Emitter::Scope s(e, pass_scope(i));
                if (i == 0) x = tx.embed(tx.token_inputs(spec.seq_len));
                const auto h = tx.final_norm(tx.blocks(x, spec.seq_len).back());
                if (i + 1 == spec.cot_steps) {
                    e.mark_outputs(tx.decode(h));
                } else {
                    const GateId latent = g.add_gate(Wiring{}, {{h.at(0), 1}}, visible, e.label("latent"));
                    x = {Tensor{spec.base.embed_dim, {latent}}};
                }
            }
            break;
        }
        case UnrollMode::blackbox_memory: {
            std::optional<Tensor> memory;
            for (std::uint64_t i = 0; i < *spec.invocation_bound; ++i) {
                Emitter::Scope s(e, pass_scope(i));
                auto x = tx.embed(tx.token_inputs(spec.seq_len));
                if (memory) x.back() = e.binary("add", x.back(), *memory, "memory_read");
                const auto h = tx.final_norm(tx.blocks(x, spec.seq_len).back());
                e.mark_outputs(tx.decode(h));
                if (i + 1 < *spec.invocation_bound) {
                    const GateId m = g.add_gate(Wiring{}, {{h.at(0), 1}}, visible, e.label("memory_write"));
                    memory = Tensor{spec.base.embed_dim, {m}};
                }
            }
            break;
        }
    }
    return options.fold_biases ? fold_biases(g) : g;
}

}  // namespace osd

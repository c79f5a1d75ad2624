#include "transformer_emit.hpp"

#include <cmath>
#include <cstdio>

namespace osd::detail {

std::string block_name(std::uint64_t layer) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "block%02llu", static_cast<unsigned long long>(layer));
    return buf;
}

namespace {

std::string pos_name(std::uint64_t t) { return "p" + std::to_string(t); }

// One operand per element, or the representative with full multiplicity.
std::vector<Operand> sum_operands(const Tensor& x) {
    if (x.reps() == 1 && x.size > 1) return {{x.at(0), static_cast<std::uint32_t>(x.size)}};
    std::vector<Operand> ops;
    for (GateId id : x.elems) ops.push_back({id, 1});
    return ops;
}

}  // namespace

TransformerEmitter::TransformerEmitter(Emitter& e, DenseTransformerSpec spec, std::optional<MoeRouting> moe)
    : e_(e), spec_(std::move(spec)), moe_(moe), bias_(spec_.linear_bias) {
    spec_.validate();
    if (e_.scalar()) {
        if (spec_.num_heads * spec_.head_dim != spec_.embed_dim) {
            throw DomainError("scalar granularity requires num_heads * head_dim == embed_dim");
        }
        if (spec_.head_dim % 2 != 0) throw DomainError("scalar granularity requires an even head_dim for RoPE");
    }
    create_weights();
}

void TransformerEmitter::create_weights() {
    const auto D = spec_.embed_dim;
    const auto H = spec_.head_dim;
    {
        Emitter::Scope s(e_, "embed");
        if (e_.scalar()) {
            table_.size = spec_.vocab_size * D;
            for (std::uint64_t v = 0; v < spec_.vocab_size; ++v) {
                for (std::uint64_t d = 0; d < D; ++d) {
                    table_.elems.push_back(e_.graph().add_constant(e_.label("table", {v, d})));
                }
            }
        } else {
            table_ = e_.weights(spec_.vocab_size * D, "table");
        }
    }
    layers_.resize(spec_.num_layers);
    for (std::uint64_t l = 0; l < spec_.num_layers; ++l) {
        Emitter::Scope s(e_, block_name(l));
        auto& w = layers_[l];
        w.pre_attn_gain = e_.norm_gain(D, "pre_attn_norm.g");
        if (spec_.use_post_attn_norm) w.post_attn_gain = e_.norm_gain(D, "post_attn_norm.g");
        w.pre_ffw_gain = e_.norm_gain(D, "pre_ffw_norm.g");
        if (spec_.use_post_ffw_norm) w.post_ffw_gain = e_.norm_gain(D, "post_ffw_norm.g");
        {
            Emitter::Scope a(e_, "attn");
            if (spec_.use_qk_norm) {
                w.q_norm_gain = e_.norm_gain(H, "q_norm.g");
                w.k_norm_gain = e_.norm_gain(H, "k_norm.g");
            }
            w.q = e_.linear_weights(D, spec_.num_heads * H, bias_, "q_proj");
            w.k = e_.linear_weights(D, spec_.num_kv_heads * H, bias_, "k_proj");
            w.v = e_.linear_weights(D, spec_.num_kv_heads * H, bias_, "v_proj");
            // the output projection reduces over D in the depth model
            w.o = e_.linear_weights(D, D, bias_, "o_proj");
        }
        auto expert = [&](std::string_view name) {
            Emitter::Scope f(e_, name);
            ExpertWeights x;
            x.gate = e_.linear_weights(D, spec_.hidden_dim, bias_, "gate_proj");
            x.up = e_.linear_weights(D, spec_.hidden_dim, bias_, "up_proj");
            x.down = e_.linear_weights(spec_.hidden_dim, D, bias_, "down_proj");
            return x;
        };
        if (!moe_) {
            w.ffw = expert("ffw");
        } else {
            Emitter::Scope m(e_, "moe");
            if (moe_->experts_per_token > 1) w.router = e_.linear_weights(D, moe_->num_experts, false, "router");
            for (std::uint64_t i = 0; i < moe_->experts_per_token; ++i) w.experts.push_back(expert("expert" + std::to_string(i)));
        }
    }
    {
        Emitter::Scope s(e_, "final_norm");
        final_gain_ = e_.norm_gain(D, "g");
    }
    {
        Emitter::Scope s(e_, "decode");
        if (spec_.tie_embeddings) {
            decode_ = e_.linear_weights_from(table_, D, spec_.vocab_size, bias_, "logits");
        } else {
            decode_ = e_.linear_weights(D, spec_.vocab_size, bias_, "logits");
        }
    }
}

std::vector<GateId> TransformerEmitter::token_inputs(std::uint64_t seq_len) {
    std::vector<GateId> tokens;
    for (std::uint64_t t = 0; t < e_.rep_count(seq_len); ++t) tokens.push_back(e_.graph().add_input(e_.label("token", {t})));
    return tokens;
}

TransformerEmitter::Positions TransformerEmitter::embed(const std::vector<GateId>& tokens) {
    const auto D = spec_.embed_dim;
    const auto V = spec_.vocab_size;
    Emitter::Scope s(e_, "embed");
    const Tensor scale = e_.fixed_scalar(std::sqrt(static_cast<double>(D)), "scale_const");
    Positions out;
    for (std::uint64_t t = 0; t < tokens.size(); ++t) {
        Tensor row{D, {}};
        for (std::uint64_t d = 0; d < e_.rep_count(D); ++d) {
            std::vector<Operand> ops{{tokens[t], 1}};
            if (e_.scalar()) {
                for (std::uint64_t v = 0; v < V; ++v) ops.push_back({table_.at(v * D + d), 1});
            } else {
                ops.push_back({table_.at(0), static_cast<std::uint32_t>(V)});
            }
            row.elems.push_back(e_.graph().add_gate(Lookup{static_cast<std::uint32_t>(V)}, std::move(ops), false,
                                                    e_.label("lookup", {t, d})));
        }
        out.push_back(e_.binary("mul", row, scale, e_.scalar() ? "scale." + pos_name(t) : "scale"));
    }
    return out;
}

Tensor TransformerEmitter::rope(const Tensor& x, std::uint64_t position, std::string_view leaf) {
    const std::string base(leaf);
    const auto H = x.size;
    Emitter::Scope s(e_, base);
    auto angle = [&](std::uint64_t i) {
        return static_cast<double>(position) / std::pow(rope_base, 2.0 * static_cast<double>(i) / static_cast<double>(H));
    };
    if (!e_.scalar()) {
        const Tensor c = e_.fixed_scalar(std::cos(angle(0)), "cos");
        const Tensor sn = e_.fixed_scalar(std::sin(angle(0)), "sin");
        const Tensor a = e_.binary("mul", x, c, "x_cos");
        const Tensor b = e_.binary("mul", x, sn, "x_sin");
        return e_.binary("sub", a, b, "rot");
    }
    const auto half = H / 2;
    const Tensor c = e_.fixed(half, [&](std::uint64_t i) { return std::cos(angle(i)); }, "cos");
    const Tensor sn = e_.fixed(half, [&](std::uint64_t i) { return std::sin(angle(i)); }, "sin");
    const Tensor x1 = e_.slice(x, 0, half);
    const Tensor x2 = e_.slice(x, half, half);
    const Tensor r1 = e_.binary("sub", e_.binary("mul", x1, c, "x1_cos"), e_.binary("mul", x2, sn, "x2_sin"), "rot1");
    const Tensor r2 = e_.binary("add", e_.binary("mul", x2, c, "x2_cos"), e_.binary("mul", x1, sn, "x1_sin"), "rot2");
    return e_.concat({r1, r2}, H);
}

Tensor TransformerEmitter::attention(const Positions& xn, std::uint64_t layer, std::uint64_t t, std::uint64_t seq_len,
                                     const std::vector<std::vector<Tensor>>& keys,
                                     const std::vector<std::vector<Tensor>>& values) {
    const auto& w = layers_[layer];
    const auto H = spec_.head_dim;
    const auto kind = spec_.layer_kind(layer);
    const std::uint64_t position = e_.scalar() ? t : seq_len - 1;
    const Tensor q = e_.linear(xn[t], w.q, "q_proj");
    const Tensor scale = e_.fixed_scalar(1.0 / std::sqrt(static_cast<double>(H)), "q_scale_const");

    std::uint64_t lo = 0;
    if (e_.scalar() && kind == AttentionKind::local && t + 1 > spec_.sliding_window) lo = t + 1 - spec_.sliding_window;
    const std::uint64_t n_keys = e_.scalar() ? t + 1 - lo : spec_.effective_seq_len(kind, seq_len);

    std::vector<Tensor> heads;
    for (std::uint64_t h = 0; h < e_.rep_count(spec_.num_heads); ++h) {
        Emitter::Scope hs(e_, "h" + std::to_string(h));
        const std::uint64_t g = h / heads_per_group();
        Tensor qh = e_.slice(q, h * H, H);
        if (spec_.use_qk_norm) qh = e_.rmsnorm(qh, w.q_norm_gain, "q_norm");
        qh = rope(qh, position, "q_rope");
        qh = e_.binary("mul", qh, scale, "q_scale");

        Tensor scores{n_keys, {}};
        for (std::uint64_t j = 0; j < e_.rep_count(n_keys); ++j) {
            const Tensor& kj = keys[lo + j][g];
            const Tensor prod = e_.binary("mul", qh, kj, "qk.k" + std::to_string(lo + j));
            scores.elems.push_back(e_.reduce(ReduceOp::add, sum_operands(prod), e_.label("score", {lo + j})));
        }
        const Tensor ex = e_.unary("exp", scores, "softmax.exp");
        const Tensor denom = e_.reduce_all(ReduceOp::add, ex, "softmax.sum");
        const Tensor probs = e_.binary("div", ex, denom, "softmax.div");

        Tensor out{H, {}};
        for (std::uint64_t i = 0; i < e_.rep_count(H); ++i) {
            Tensor terms{n_keys, {}};
            for (std::uint64_t j = 0; j < e_.rep_count(n_keys); ++j) {
                terms.elems.push_back(e_.analytic("mul", {{probs.at(j), 1}, {values[lo + j][g].at(i), 1}},
                                                  e_.label("pv.mul", {i, lo + j})));
            }
            out.elems.push_back(e_.reduce(ReduceOp::add, sum_operands(terms), e_.label("pv.sum", {i})));
        }
        heads.push_back(out);
    }
    const Tensor merged = e_.concat(heads, spec_.embed_dim);
    return e_.linear(merged, w.o, "o_proj");
}

Tensor TransformerEmitter::ffw(const Tensor& xn, const ExpertWeights& w, std::string_view leaf) {
    Emitter::Scope s(e_, leaf);
    const Tensor gate = e_.linear(xn, w.gate, "gate_proj");
    const Tensor up = e_.linear(xn, w.up, "up_proj");
    const Tensor act = e_.unary("gelu", gate, "gelu");
    const Tensor gated = e_.binary("mul", act, up, "gated");
    return e_.linear(gated, w.down, "down_proj");
}

Tensor TransformerEmitter::moe_ffw(const Tensor& xn, const LayerWeights& w) {
    Emitter::Scope s(e_, "moe");
    const auto k = moe_->experts_per_token;
    std::vector<Tensor> outs;
    for (std::uint64_t i = 0; i < (e_.scalar() ? k : 1); ++i) outs.push_back(ffw(xn, w.experts[i], "expert" + std::to_string(i)));
    if (k == 1) return outs[0];

    // top-k as k max-reductions; each selected score is masked out before the next
    Tensor scores = e_.linear(xn, *w.router, "router");
    Tensor selected{k, {}};
    for (std::uint64_t i = 0; i < k; ++i) {
        const Tensor m = e_.reduce_all(ReduceOp::max, scores, "top" + std::to_string(i));
        selected.elems.push_back(m.at(0));
        if (i + 1 < k) scores = e_.binary("mask_ge", scores, m, "mask" + std::to_string(i));
    }
    if (!e_.scalar()) selected.elems = {selected.elems.back()};
    const Tensor ex = e_.unary("exp", selected, "gate.exp");
    const Tensor denom = e_.reduce_all(ReduceOp::add, ex, "gate.sum");
    const Tensor weights = e_.binary("div", ex, denom, "gate.div");

    Tensor mixed{spec_.embed_dim, {}};
    for (std::uint64_t d = 0; d < e_.rep_count(spec_.embed_dim); ++d) {
        Tensor terms{k, {}};
        for (std::uint64_t i = 0; i < e_.rep_count(k); ++i) {
            terms.elems.push_back(
                e_.analytic("mul", {{weights.at(i), 1}, {outs[i].at(d), 1}}, e_.label("combine.mul", {d, i})));
        }
        mixed.elems.push_back(e_.reduce(ReduceOp::add, sum_operands(terms), e_.label("combine.sum", {d})));
    }
    return mixed;
}

TransformerEmitter::Positions TransformerEmitter::blocks(Positions x, std::uint64_t seq_len) {
    const auto H = spec_.head_dim;
    auto pos_scope = [&](std::uint64_t t) { return e_.scalar() ? pos_name(t) : std::string("p"); };
    for (std::uint64_t l = 0; l < spec_.num_layers; ++l) {
        Emitter::Scope bs(e_, block_name(l));
        const auto& w = layers_[l];
        Positions xn;
        for (std::uint64_t t = 0; t < x.size(); ++t) {
            Emitter::Scope ps(e_, pos_scope(t));
            xn.push_back(e_.rmsnorm(x[t], w.pre_attn_gain, "pre_attn_norm"));
        }
        std::vector<std::vector<Tensor>> keys(x.size()), values(x.size());
        for (std::uint64_t j = 0; j < x.size(); ++j) {
            Emitter::Scope ps(e_, pos_scope(j));
            Emitter::Scope as(e_, "attn");
            const std::uint64_t position = e_.scalar() ? j : seq_len - 1;
            const Tensor k = e_.linear(xn[j], w.k, "k_proj");
            const Tensor v = e_.linear(xn[j], w.v, "v_proj");
            for (std::uint64_t g = 0; g < e_.rep_count(spec_.num_kv_heads); ++g) {
                Emitter::Scope gs(e_, "g" + std::to_string(g));
                Tensor kg = e_.slice(k, g * H, H);
                if (spec_.use_qk_norm) kg = e_.rmsnorm(kg, w.k_norm_gain, "k_norm");
                keys[j].push_back(rope(kg, position, "k_rope"));
                values[j].push_back(e_.slice(v, g * H, H));
            }
        }
        for (std::uint64_t t = 0; t < x.size(); ++t) {
            Emitter::Scope ps(e_, pos_scope(t));
            Tensor a;
            {
                Emitter::Scope as(e_, "attn");
                a = attention(xn, l, t, seq_len, keys, values);
            }
            if (spec_.use_post_attn_norm) a = e_.rmsnorm(a, w.post_attn_gain, "post_attn_norm");
            x[t] = e_.binary("add", x[t], a, "attn_residual");
            const Tensor fn = e_.rmsnorm(x[t], w.pre_ffw_gain, "pre_ffw_norm");
            Tensor f = moe_ ? moe_ffw(fn, w) : ffw(fn, w.ffw, "ffw");
            if (spec_.use_post_ffw_norm) f = e_.rmsnorm(f, w.post_ffw_gain, "post_ffw_norm");
            x[t] = e_.binary("add", x[t], f, "ffw_residual");
        }
    }
    return x;
}

Tensor TransformerEmitter::final_norm(const Tensor& h) {
    Emitter::Scope s(e_, "final_norm");
    return e_.rmsnorm(h, final_gain_, "norm");
}

Tensor TransformerEmitter::decode(const Tensor& h) {
    Emitter::Scope s(e_, "decode");
    return e_.linear(h, decode_, "logits");
}

TransformerEmitter::Pass TransformerEmitter::forward(const std::vector<GateId>& tokens, std::uint64_t seq_len) {
    Positions x = blocks(embed(tokens), seq_len);
    Pass p;
    p.hidden = final_norm(x.back());
    p.logits = decode(p.hidden);
    return p;
}

}  // namespace osd::detail

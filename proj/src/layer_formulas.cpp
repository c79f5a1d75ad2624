#include "osd/layer_formulas.hpp"

#include <algorithm>

#include "osd/depth_engine.hpp"

namespace osd {

SymbolicDepth SymbolicDepth::unbounded() {
    SymbolicDepth d;
    d.unbounded_ = true;
    return d;
}

std::uint64_t SymbolicDepth::constant() const {
    if (unbounded_) throw DomainError("unbounded depth has no constant term");
    return constant_;
}

std::uint64_t SymbolicDepth::log_t_coefficient() const {
    if (unbounded_) throw DomainError("unbounded depth has no log T coefficient");
    return log_t_coefficient_;
}

std::uint64_t SymbolicDepth::evaluate(std::uint64_t seq_len) const {
    if (unbounded_) throw DomainError("unbounded depth has no finite evaluation");
    if (seq_len == 0) throw DomainError("sequence length must be >= 1");
    return constant_ + log_t_coefficient_ * ceil_log2(seq_len);
}

std::string SymbolicDepth::to_string() const {
    if (unbounded_) return "unbounded";
    if (log_t_coefficient_ == 0) return std::to_string(constant_);
    return std::to_string(constant_) + " + " + std::to_string(log_t_coefficient_) + "·log2 T";
}

SymbolicDepth operator+(const SymbolicDepth& a, const SymbolicDepth& b) {
    if (a.unbounded_ || b.unbounded_) return SymbolicDepth::unbounded();
    return {a.constant_ + b.constant_, a.log_t_coefficient_ + b.log_t_coefficient_};
}

SymbolicDepth operator*(std::uint64_t k, const SymbolicDepth& d) {
    if (d.unbounded_) return SymbolicDepth::unbounded();
    return {k * d.constant_, k * d.log_t_coefficient_};
}

void DenseTransformerSpec::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw DomainError(what);
    };
    need(vocab_size >= 1, "vocab_size must be >= 1");
    need(embed_dim >= 1, "embed_dim must be >= 1");
    need(hidden_dim >= 1, "hidden_dim must be >= 1");
    need(head_dim >= 1, "head_dim must be >= 1");
    need(num_layers >= 1, "num_layers must be >= 1");
    need(num_heads >= 1, "num_heads must be >= 1");
    need(num_kv_heads >= 1 && num_heads % num_kv_heads == 0, "num_kv_heads must divide num_heads");
    need(sliding_window >= 1, "sliding_window must be >= 1");
    need(max_seq_len >= 1, "max_seq_len must be >= 1");
    need(!attention_pattern.empty(), "attention_pattern must not be empty");
    need(sliding_window <= max_seq_len, "sliding_window must not exceed max_seq_len");
}

AttentionKind DenseTransformerSpec::layer_kind(std::uint64_t layer) const {
    return attention_pattern[layer % attention_pattern.size()];
}

std::uint64_t DenseTransformerSpec::local_layer_count() const { return num_layers - global_layer_count(); }

std::uint64_t DenseTransformerSpec::global_layer_count() const {
    std::uint64_t n = 0;
    for (std::uint64_t l = 0; l < num_layers; ++l) n += layer_kind(l) == AttentionKind::global;
    return n;
}

std::uint64_t DenseTransformerSpec::effective_seq_len(AttentionKind kind, std::uint64_t seq_len) const {
    return kind == AttentionKind::local ? std::min(sliding_window, seq_len) : seq_len;
}

Bias bias_mode(bool has_bias, bool folding) {
    if (!has_bias) return Bias::none;
    return folding ? Bias::folded : Bias::unfolded;
}

std::uint64_t linear_depth(std::uint64_t d_in, Bias bias) {
    switch (bias) {
        case Bias::none: return 1 + ceil_log2(d_in);
        case Bias::folded: return 1 + ceil_log2(d_in + 1);
        case Bias::unfolded: return 2 + ceil_log2(d_in);
    }
    return 0;
}

// square, sum over d, divide by d, add eps, rsqrt, multiply by x, multiply by gain
std::uint64_t rmsnorm_depth(std::uint64_t dim) { return 6 + ceil_log2(dim); }

// multiplexer over the table, then the sqrt(D) scaling
std::uint64_t embed_depth(std::uint64_t vocab_size) { return ceil_log2(vocab_size) + 1; }

// exp, sum over T, divide
std::uint64_t softmax_depth(std::uint64_t seq_len) { return 2 + ceil_log2(seq_len); }

std::uint64_t AttentionTerms::total() const {
    return q_proj + qk_norm + rope + query_scale + scores + softmax + weighted_values + out_proj;
}

AttentionTerms attention_terms(std::uint64_t embed_dim, std::uint64_t head_dim, std::uint64_t seq_len,
                               bool use_qk_norm, Bias bias) {
    AttentionTerms t;
    t.q_proj = linear_depth(embed_dim, bias);
    t.qk_norm = use_qk_norm ? rmsnorm_depth(head_dim) : 0;
    t.rope = rope_depth;
    t.query_scale = 1;
    t.scores = 1 + ceil_log2(head_dim);
    t.softmax = softmax_depth(seq_len);
    t.weighted_values = 1 + ceil_log2(seq_len);
    t.out_proj = linear_depth(embed_dim, bias);
    return t;
}

std::uint64_t attention_depth(std::uint64_t embed_dim, std::uint64_t head_dim, std::uint64_t seq_len,
                              bool use_qk_norm, Bias bias) {
    return attention_terms(embed_dim, head_dim, seq_len, use_qk_norm, bias).total();
}

// gate projection, gelu, gating multiply, down projection
std::uint64_t ffw_depth(std::uint64_t embed_dim, std::uint64_t hidden_dim, Bias bias) {
    return linear_depth(embed_dim, bias) + 2 + linear_depth(hidden_dim, bias);
}

std::uint64_t block_depth(const DenseTransformerSpec& spec, std::uint64_t effective_seq_len, bool folding) {
    const Bias bias = bias_mode(spec.linear_bias, folding);
    const auto norm = rmsnorm_depth(spec.embed_dim);
    std::uint64_t d = norm + attention_depth(spec.embed_dim, spec.head_dim, effective_seq_len, spec.use_qk_norm, bias);
    if (spec.use_post_attn_norm) d += norm;
    d += 1;  // residual add
    d += norm + ffw_depth(spec.embed_dim, spec.hidden_dim, bias);
    if (spec.use_post_ffw_norm) d += norm;
    d += 1;
    return d;
}

SymbolicDepth global_block_formula(const DenseTransformerSpec& spec, bool folding) {
    return {block_depth(spec, 1, folding), 2};
}

StageDepths stage_depths(const DenseTransformerSpec& spec, std::uint64_t seq_len, bool folding) {
    if (seq_len == 0) throw DomainError("sequence length must be >= 1");
    StageDepths s;
    s.embed = embed_depth(spec.vocab_size);
    for (std::uint64_t l = 0; l < spec.num_layers; ++l) {
        s.blocks += block_depth(spec, spec.effective_seq_len(spec.layer_kind(l), seq_len), folding);
    }
    s.final_norm = rmsnorm_depth(spec.embed_dim);
    s.decode = linear_depth(spec.embed_dim, bias_mode(spec.linear_bias, folding));
    return s;
}

std::uint64_t model_depth(const DenseTransformerSpec& spec, std::uint64_t seq_len, bool folding) {
    return stage_depths(spec, seq_len, folding).total();
}

SymbolicDepth blocks_formula(const DenseTransformerSpec& spec, bool folding) {
    const SymbolicDepth local{block_depth(spec, spec.sliding_window, folding), 0};
    return spec.local_layer_count() * local + spec.global_layer_count() * global_block_formula(spec, folding);
}

SymbolicDepth model_depth_formula(const DenseTransformerSpec& spec, bool folding) {
    const SymbolicDepth fixed{embed_depth(spec.vocab_size) + rmsnorm_depth(spec.embed_dim) +
                                  linear_depth(spec.embed_dim, bias_mode(spec.linear_bias, folding)),
                              0};
    return fixed + blocks_formula(spec, folding);
}

std::string to_string(ArchitectureFamily family) {
    switch (family) {
        case ArchitectureFamily::autoregressive_transformer: return "autoregressive-transformer";
        case ArchitectureFamily::rnn_stack: return "rnn-stack";
        case ArchitectureFamily::continuous_cot: return "continuous-cot";
        case ArchitectureFamily::text_diffusion: return "text-diffusion";
        case ArchitectureFamily::blackbox_memory: return "blackbox-memory";
    }
    return "?";
}

std::uint64_t rnn_cell_depth(std::uint64_t dim) { return 1 + ceil_log2(2 * dim) + 1; }

std::uint64_t rnn_stack_depth(std::uint64_t num_layers, std::uint64_t dim, std::uint64_t seq_len) {
    if (num_layers == 0 || dim == 0 || seq_len == 0) throw DomainError("RNN stack dimensions must be >= 1");
    return (num_layers + seq_len - 1) * rnn_cell_depth(dim);
}

std::uint64_t continuous_cot_depth(const DenseTransformerSpec& spec, std::uint64_t seq_len, std::uint64_t cot_steps,
                                   bool folding) {
    if (cot_steps == 0) throw DomainError("cot_steps must be >= 1");
    const auto s = stage_depths(spec, seq_len, folding);
    return s.embed + cot_steps * (s.blocks + s.final_norm) + s.decode;
}

std::uint64_t blackbox_memory_depth(const DenseTransformerSpec& spec, std::uint64_t seq_len,
                                    std::uint64_t invocations, bool folding) {
    if (invocations == 0) throw DomainError("invocation_bound must be >= 1");
    const auto s = stage_depths(spec, seq_len, folding);
    // each later invocation pays one add to merge the memory read
    return s.embed + invocations * (s.blocks + s.final_norm) + (invocations - 1) + s.decode;
}

namespace {

template <class T>
const T& require(const std::optional<T>& v, const char* name, ArchitectureFamily family) {
    if (!v) throw DomainError(to_string(family) + " requires parameter '" + name + "'");
    return *v;
}

}  // namespace

AsymptoticResult asymptotic_depth(ArchitectureFamily family, const AsymptoticParams& params) {
    AsymptoticResult r;
    if (family == ArchitectureFamily::rnn_stack) {
        const auto L = require(params.num_layers, "L", family);
        const auto D = require(params.dim, "D", family);
        const auto T = require(params.seq_len, "T", family);
        r.big_o = "O((L + T) log D)";
        r.depth = SymbolicDepth{rnn_stack_depth(L, D, T), 0};
        r.at_seq_len = r.depth.evaluate(T);
        return r;
    }

    const auto& model = require(params.model, "model", family);
    model.validate();
    const SymbolicDepth embed{embed_depth(model.vocab_size), 0};
    const SymbolicDepth decode{linear_depth(model.embed_dim, bias_mode(model.linear_bias, true)), 0};
    const SymbolicDepth final_norm{rmsnorm_depth(model.embed_dim), 0};
    const SymbolicDepth pass = blocks_formula(model) + final_norm;

    switch (family) {
        case ArchitectureFamily::autoregressive_transformer:
            r.big_o = "O(L(log T + log D))";
            r.depth = model_depth_formula(model);
            if (params.seq_len) r.at_seq_len = model_depth(model, *params.seq_len);
            break;
        case ArchitectureFamily::text_diffusion:
            r.big_o = "O(Depth(f)) = O(L(log T + log D)), independent of the number of diffusion steps";
            r.depth = model_depth_formula(model);
            if (params.seq_len) r.at_seq_len = model_depth(model, *params.seq_len);
            break;
        case ArchitectureFamily::continuous_cot: {
            const auto steps = require(params.cot_steps, "T_cot", family);
            if (steps == 0) throw DomainError("T_cot must be >= 1");
            r.big_o = "O(L·T_cot(log T + log D))";
            r.depth = embed + steps * pass + decode;
            if (params.seq_len) r.at_seq_len = continuous_cot_depth(model, *params.seq_len, steps);
            break;
        }
        case ArchitectureFamily::blackbox_memory:
            if (!params.invocation_bound) {
                r.big_o = "unbounded in L, T and D";
                r.depth = SymbolicDepth::unbounded();
                break;
            }
            if (*params.invocation_bound == 0) throw DomainError("invocation bound must be >= 1");
            r.big_o = "O(N_invocations·L(log T + log D))";
            r.depth = embed + *params.invocation_bound * pass + SymbolicDepth{*params.invocation_bound - 1, 0} + decode;
            if (params.seq_len) {
                r.at_seq_len = blackbox_memory_depth(model, *params.seq_len, *params.invocation_bound);
            }
            break;
        case ArchitectureFamily::rnn_stack: break;
    }
    return r;
}

}  // namespace osd

#pragma once

// Closed-form depth calculus for standard layers and transformer blocks.
// Every log is ceil(log2 .), the depth of a balanced binary reduction tree.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace osd {

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// constant + log_t_coefficient * ceil(log2 T), or Unbounded.
class SymbolicDepth {
public:
    SymbolicDepth() = default;
    SymbolicDepth(std::uint64_t constant, std::uint64_t log_t_coefficient)
        : constant_(constant), log_t_coefficient_(log_t_coefficient) {}

    static SymbolicDepth unbounded();

    bool is_unbounded() const { return unbounded_; }
    std::uint64_t constant() const;
    std::uint64_t log_t_coefficient() const;

    /// Throws DomainError when unbounded or T == 0.
    std::uint64_t evaluate(std::uint64_t seq_len) const;

    /// "4370 + 8·log2 T", "12", or "unbounded".
    std::string to_string() const;

    friend SymbolicDepth operator+(const SymbolicDepth& a, const SymbolicDepth& b);
    friend SymbolicDepth operator*(std::uint64_t k, const SymbolicDepth& d);
    friend bool operator==(const SymbolicDepth&, const SymbolicDepth&) = default;

private:
    std::uint64_t constant_ = 0;
    std::uint64_t log_t_coefficient_ = 0;
    bool unbounded_ = false;
};

enum class AttentionKind { local, global };

struct DenseTransformerSpec {
    std::string name;
    std::uint64_t vocab_size = 1;
    std::uint64_t embed_dim = 1;    // D
    std::uint64_t hidden_dim = 1;   // feed-forward width
    std::uint64_t head_dim = 1;     // H
    std::uint64_t num_layers = 1;   // L
    std::uint64_t num_heads = 1;
    std::uint64_t num_kv_heads = 1;
    std::uint64_t sliding_window = 1;  // W
    std::vector<AttentionKind> attention_pattern{AttentionKind::global};
    std::uint64_t max_seq_len = 1;
    bool use_post_attn_norm = true;
    bool use_post_ffw_norm = true;
    bool use_qk_norm = true;
    /// Linear layers carry an additive bias (folded into the reduction unless
    /// folding is disabled).
    bool linear_bias = false;
    bool tie_embeddings = true;
    /// Parameters that were inferred rather than published; shown as footnotes.
    std::vector<std::string> inferred;

    /// Throws DomainError describing the first violated invariant.
    void validate() const;
    AttentionKind layer_kind(std::uint64_t layer) const;
    std::uint64_t local_layer_count() const;
    std::uint64_t global_layer_count() const;
    /// Reduction length seen by a layer of the given kind at sequence length T.
    std::uint64_t effective_seq_len(AttentionKind kind, std::uint64_t seq_len) const;
};

enum class Bias { none, folded, unfolded };

/// Bias treatment for a spec under the given folding switch.
Bias bias_mode(bool has_bias, bool folding);

std::uint64_t linear_depth(std::uint64_t d_in, Bias bias = Bias::none);
std::uint64_t rmsnorm_depth(std::uint64_t dim);
std::uint64_t embed_depth(std::uint64_t vocab_size);
std::uint64_t softmax_depth(std::uint64_t seq_len);
constexpr std::uint64_t rope_depth = 2;

/// Critical-path terms of one attention layer, itemized.
struct AttentionTerms {
    std::uint64_t q_proj = 0;
    std::uint64_t qk_norm = 0;
    std::uint64_t rope = 0;
    std::uint64_t query_scale = 0;
    std::uint64_t scores = 0;
    std::uint64_t softmax = 0;
    std::uint64_t weighted_values = 0;
    std::uint64_t out_proj = 0;
    std::uint64_t total() const;
};

AttentionTerms attention_terms(std::uint64_t embed_dim, std::uint64_t head_dim, std::uint64_t seq_len,
                               bool use_qk_norm, Bias bias = Bias::none);
std::uint64_t attention_depth(std::uint64_t embed_dim, std::uint64_t head_dim, std::uint64_t seq_len,
                              bool use_qk_norm, Bias bias = Bias::none);
std::uint64_t ffw_depth(std::uint64_t embed_dim, std::uint64_t hidden_dim, Bias bias = Bias::none);

std::uint64_t block_depth(const DenseTransformerSpec& spec, std::uint64_t effective_seq_len, bool folding = true);

/// The global-block form c + 2·log2 T (T symbolic).
SymbolicDepth global_block_formula(const DenseTransformerSpec& spec, bool folding = true);

/// Stage depths of one forward pass at a concrete T (handles T < W exactly).
struct StageDepths {
    std::uint64_t embed = 0;
    std::uint64_t blocks = 0;
    std::uint64_t final_norm = 0;
    std::uint64_t decode = 0;
    std::uint64_t total() const { return embed + blocks + final_norm + decode; }
};

StageDepths stage_depths(const DenseTransformerSpec& spec, std::uint64_t seq_len, bool folding = true);
std::uint64_t model_depth(const DenseTransformerSpec& spec, std::uint64_t seq_len, bool folding = true);

/// Symbolic total, valid for T >= W (local blocks saturated at their window).
SymbolicDepth model_depth_formula(const DenseTransformerSpec& spec, bool folding = true);
/// Symbolic blocks-only term.
SymbolicDepth blocks_formula(const DenseTransformerSpec& spec, bool folding = true);

// --- Asymptotic families -------------------------------------------------

enum class ArchitectureFamily { autoregressive_transformer, rnn_stack, continuous_cot, text_diffusion, blackbox_memory };

std::string to_string(ArchitectureFamily family);

struct AsymptoticParams {
    std::optional<DenseTransformerSpec> model;  // transformer-backed families
    std::optional<std::uint64_t> num_layers;    // rnn-stack L
    std::optional<std::uint64_t> dim;           // rnn-stack D
    std::optional<std::uint64_t> seq_len;       // T
    std::optional<std::uint64_t> cot_steps;     // T_cot
    std::optional<std::uint64_t> invocation_bound;
};

struct AsymptoticResult {
    std::string big_o;
    /// In terms of log2 T for transformer families (valid for T >= W);
    /// a plain constant for the RNN stack (T is fixed there).
    SymbolicDepth depth;
    /// Exact value at params.seq_len when given and finite.
    std::optional<std::uint64_t> at_seq_len;
};

/// Throws DomainError on a missing required parameter.
AsymptoticResult asymptotic_depth(ArchitectureFamily family, const AsymptoticParams& params);

/// Depth of one Elman cell over D-dimensional state: products, one reduction
/// over the 2D input and recurrent terms, activation.
std::uint64_t rnn_cell_depth(std::uint64_t dim);
std::uint64_t rnn_stack_depth(std::uint64_t num_layers, std::uint64_t dim, std::uint64_t seq_len);

/// Continuous latent chain of thought: T_cot passes, later passes consume the
/// previous final hidden state directly (no lookup), only the last decodes.
std::uint64_t continuous_cot_depth(const DenseTransformerSpec& spec, std::uint64_t seq_len, std::uint64_t cot_steps,
                                   bool folding = true);
/// Bounded black-box memory: the previous invocation's final hidden state is
/// added to the next invocation's input embedding.
std::uint64_t blackbox_memory_depth(const DenseTransformerSpec& spec, std::uint64_t seq_len,
                                    std::uint64_t invocations, bool folding = true);

}  // namespace osd

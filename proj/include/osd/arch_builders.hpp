#pragma once

// Builders that lower architecture descriptions into CircuitGraphs, the
// bias-folding rewrite, and parameter counting.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "osd/graph_ir.hpp"
#include "osd/layer_formulas.hpp"

namespace osd {

/// collapsed: one gate per tensor operation, reductions keep their full
/// arity through operand multiplicity. scalar: one gate per real number,
/// evaluable by the oracle. Depth is identical under both.
enum class Granularity { collapsed, scalar };

struct BuildOptions {
    /// Each builder has its own default (scalar for MLPs, collapsed otherwise).
    std::optional<Granularity> granularity;
    bool fold_biases = true;
};

struct MlpSpec {
    std::uint64_t input_dim = 1;
    std::uint64_t output_dim = 1;
    std::vector<std::uint64_t> hidden_dims;
    std::string activation = "relu";  // "linear" / "identity" emit no gate
    bool bias = false;

    void validate() const;
};

struct MoeSpec {
    std::string name;
    std::uint64_t vocab_size = 1;
    std::uint64_t embed_dim = 1;  // D
    std::uint64_t num_heads = 1;
    std::uint64_t num_layers = 1;
    std::uint64_t num_experts = 1;        // E
    std::uint64_t experts_per_token = 1;  // k
    std::optional<std::uint64_t> expert_hidden_dim;  // d_ff
    std::uint64_t seq_len = 1;
    bool tie_embeddings = true;
    std::vector<std::string> inferred;

    void validate() const;
    std::uint64_t head_dim() const { return embed_dim / num_heads; }
    std::uint64_t resolved_expert_hidden_dim() const;
};

/// Dense transformer whose feed-forward matches one MoE expert: pre-norm only,
/// global attention over seq_len, no QK norm.
DenseTransformerSpec dense_equivalent(const MoeSpec& spec);

/// Router path: linear over D, k sequential max-reductions over E separated
/// by masking gates, softmax over the k selected scores.
std::uint64_t moe_router_depth(const MoeSpec& spec);
std::uint64_t moe_block_depth(const MoeSpec& spec);
std::uint64_t moe_depth(const MoeSpec& spec);

enum class UnrollMode { autoregressive, diffusion, continuous_cot, blackbox_memory };

std::string to_string(UnrollMode mode);

struct UnrollSpec {
    DenseTransformerSpec base;
    UnrollMode mode = UnrollMode::autoregressive;
    std::uint64_t prompt_len = 1;       // T_in
    std::uint64_t output_len = 1;       // T_out
    std::uint64_t cot_steps = 1;        // T_cot
    std::uint64_t diffusion_steps = 1;
    std::uint64_t seq_len = 1;          // context length of each pass (non-autoregressive modes)
    std::optional<std::uint64_t> invocation_bound;
    std::optional<bool> intermediate_interpretable;

    void validate() const;
    /// Per-mode default: true for autoregressive and diffusion, false otherwise.
    bool intermediates_interpretable() const;
    /// Sequence length of the deepest pass.
    std::uint64_t final_seq_len() const;
};

struct UnboundedDepth {
    std::string reason;
};

using UnrollResult = std::variant<CircuitGraph, UnboundedDepth>;

CircuitGraph build_mlp(const MlpSpec& spec, const BuildOptions& options = {});
CircuitGraph build_dense_transformer(const DenseTransformerSpec& spec, std::uint64_t seq_len,
                                     const BuildOptions& options = {});
CircuitGraph build_moe_transformer(const MoeSpec& spec, const BuildOptions& options = {});
CircuitGraph build_rnn_stack(std::uint64_t num_layers, std::uint64_t dim, std::uint64_t seq_len,
                             const BuildOptions& options = {});
UnrollResult unroll(const UnrollSpec& spec, const BuildOptions& options = {});

/// Rewrites every reduce_add(n) whose only consumer is `add(sum, bias)` with a
/// Constant bias into a single reduce_add(n + 1). Labels and flags are kept.
CircuitGraph fold_biases(const CircuitGraph& graph);

struct ParameterCount {
    std::uint64_t total = 0;
    std::uint64_t active = 0;
};

ParameterCount parameter_count(const DenseTransformerSpec& spec);
ParameterCount parameter_count(const MoeSpec& spec);

}  // namespace osd

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emitter.hpp"
#include "osd/arch_builders.hpp"
#include "osd/layer_formulas.hpp"

namespace osd::detail {

struct ExpertWeights {
    LinearWeights gate, up, down;
};

struct LayerWeights {
    Tensor pre_attn_gain, post_attn_gain, pre_ffw_gain, post_ffw_gain;
    Tensor q_norm_gain, k_norm_gain;
    LinearWeights q, k, v, o;
    ExpertWeights ffw;
    // MoE only: router and the k selected experts
    std::optional<LinearWeights> router;
    std::vector<ExpertWeights> experts;
};

struct MoeRouting {
    std::uint64_t num_experts = 1;
    std::uint64_t experts_per_token = 1;
};

/// Emits transformer forward passes. Weights are created once and shared by
/// every pass (unrolled copies reuse the same Constant gates).
class TransformerEmitter {
public:
    TransformerEmitter(Emitter& e, DenseTransformerSpec spec, std::optional<MoeRouting> moe = std::nullopt);

    /// Positions are one Tensor each; collapsed mode uses a single position
    /// that stands for the newest one.
    using Positions = std::vector<Tensor>;

    /// Token input gates for a pass of length T.
    std::vector<GateId> token_inputs(std::uint64_t seq_len);
    Positions embed(const std::vector<GateId>& tokens);
    Positions blocks(Positions x, std::uint64_t seq_len);
    Tensor final_norm(const Tensor& h);
    Tensor decode(const Tensor& h);

    /// Full pass: embed, blocks, final norm, decode at the last position.
    struct Pass {
        Tensor hidden;  // after the final norm, last position
        Tensor logits;
    };
    Pass forward(const std::vector<GateId>& tokens, std::uint64_t seq_len);

    const DenseTransformerSpec& spec() const { return spec_; }

private:
    void create_weights();
    Tensor attention(const Positions& xn, std::uint64_t layer, std::uint64_t t, std::uint64_t seq_len,
                     const std::vector<std::vector<Tensor>>& keys, const std::vector<std::vector<Tensor>>& values);
    Tensor rope(const Tensor& x, std::uint64_t position, std::string_view leaf);
    Tensor ffw(const Tensor& xn, const ExpertWeights& w, std::string_view leaf);
    Tensor moe_ffw(const Tensor& xn, const LayerWeights& w);
    std::uint64_t heads_per_group() const { return spec_.num_heads / spec_.num_kv_heads; }

    Emitter& e_;
    DenseTransformerSpec spec_;
    std::optional<MoeRouting> moe_;
    bool bias_;
    Tensor table_;  // [V][D]
    std::vector<LayerWeights> layers_;
    Tensor final_gain_;
    LinearWeights decode_;
};

std::string block_name(std::uint64_t layer);

}  // namespace osd::detail

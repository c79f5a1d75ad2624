#pragma once

#include <cstdint>
#include <vector>

#include "osd/graph_ir.hpp"
#include "osd/layer_formulas.hpp"

namespace osd::testkit {

/// Plain dense forward pass (matrices and loops, no circuit) returning the
/// last position's logits. Weights are read by name from the Constant gates
/// of `graph`, so both sides see the same parameters.
std::vector<double> reference_forward(const DenseTransformerSpec& spec, const CircuitGraph& graph,
                                      const std::vector<std::uint64_t>& tokens);

/// Small spec that exercises grouped queries, local and global layers,
/// QK norm, post norms and biases.
DenseTransformerSpec tiny_spec();

}  // namespace osd::testkit

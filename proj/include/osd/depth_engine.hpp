#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "osd/graph_ir.hpp"

namespace osd {

/// ceil(log2 n) for n >= 1; 0 for n <= 1.
std::uint64_t ceil_log2(std::uint64_t n);

/// Depth a gate adds on top of its deepest operand:
/// reduce(n) -> ceil(log2 n), analytic -> 1, lookup(V) -> ceil(log2 V),
/// wiring / input / constant -> 0.
std::uint64_t immediate_depth(const GateKind& kind);

enum class Execution {
    serial,    // worklist over a topological order; the reference path
    parallel,  // level-synchronous wavefront, OpenMP over each level
};

struct DepthOptions {
    /// Replaces the graph's own interpretable flags when set.
    std::optional<GateSet> interpretable;
    Execution execution = Execution::serial;
};

struct DepthReport {
    std::uint64_t opaque_serial_depth = 0;
    /// Depth of the function computed at each gate, with paths cut at
    /// interpretable operands.
    std::vector<std::uint64_t> per_node_depth;
    /// From the terminating leaf (interpretable node, input or constant)
    /// up to source_node.
    std::vector<GateId> critical_path;
    GateId source_node;
};

/// Per-gate depth of every gate. Interpretable gates still report the
/// depth of their own function; they only read as 0 to their consumers.
std::vector<std::uint64_t> compute_node_depths(const CircuitGraph& graph, const DepthOptions& options = {});

std::uint64_t node_depth(const CircuitGraph& graph, GateId node,
                         const std::optional<GateSet>& interpretable_override = std::nullopt);

/// Maximum node depth over output gates and interpretable gates, plus one
/// critical path (ties resolved towards the smallest operand id).
DepthReport opaque_serial_depth(const CircuitGraph& graph, const DepthOptions& options = {});

/// Longest path from any gate in `sources` (depth-0 leaves) to `sink`,
/// ignoring the graph's own interpretable flags. 0 if `sink` is unreachable.
std::uint64_t depth_between(const CircuitGraph& graph, std::span<const GateId> sources, GateId sink);

struct WeightedPath {
    std::uint64_t depth = 0;
    std::vector<GateId> gates;  // leaf first
};

/// Up to `count` longest distinct leaf-to-root paths, deepest first. Roots are
/// outputs and interpretable gates; paths stop at interpretable operands.
std::vector<WeightedPath> near_critical_paths(const CircuitGraph& graph, std::size_t count);

}  // namespace osd

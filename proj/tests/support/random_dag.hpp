#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "osd/graph_ir.hpp"

namespace osd::testkit {

struct DagParams {
    std::size_t max_gates = 50;
    double interpretable_prob = 0.2;
    bool with_constants = true;
    /// Only gate kinds the oracle can evaluate (no lookups over long tables).
    bool evaluable = false;
};

/// Random well-formed graph. Every sink is an output so that no gate is
/// dead; inputs come first.
CircuitGraph random_dag(std::mt19937_64& rng, const DagParams& params = {});

/// Same graph with a Wiring gate spliced onto a random edge.
CircuitGraph insert_wiring(const CircuitGraph& g, std::mt19937_64& rng);

/// Longest weighted root path by enumerating every path (exponential; keep
/// graphs small).
std::uint64_t enumerate_longest_path(const CircuitGraph& g);

/// Recursive evaluation with no memoization, straight from the gate kinds.
std::vector<double> naive_evaluate(const CircuitGraph& g, const std::vector<double>& inputs);

}  // namespace osd::testkit

#pragma once

// Second-opinion checks: numeric evaluation of circuits, functional
// equivalence, and an independent longest-path computation.

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "osd/graph_ir.hpp"

namespace osd {

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Value used for a Constant without an explicit value and without an entry
/// in the caller's assignment. Deterministic in the label, roughly N(0, 1).
double default_constant_value(std::string_view label);

/// Value of one analytic gate; throws OracleError on an unknown name.
double apply_analytic(std::string_view name, std::span<const double> args);

using ConstantAssignment = std::map<std::uint32_t, double>;  // gate id -> value

/// Output values in output-id order. `inputs` follows input-id order.
std::vector<double> evaluate(const CircuitGraph& graph, std::span<const double> inputs,
                             const ConstantAssignment& constants = {});

/// Values of every gate.
std::vector<double> evaluate_all(const CircuitGraph& graph, std::span<const double> inputs,
                                 const ConstantAssignment& constants = {});

/// One evaluate per row, rows spread across threads.
std::vector<std::vector<double>> evaluate_batch(const CircuitGraph& graph, const std::vector<std::vector<double>>& rows,
                                                const ConstantAssignment& constants = {});

/// Standard-normal rows from a fixed seed.
std::vector<std::vector<double>> random_inputs(std::size_t width, std::size_t trials, std::uint64_t seed);

constexpr std::size_t oracle_gate_limit = 1'000'000;
constexpr std::uint64_t oracle_seed = 20250101;

/// Longest weighted path with interpretable cuts, by memoized recursion over
/// operands. Throws OracleError above oracle_gate_limit.
std::uint64_t longest_path_oracle(const CircuitGraph& graph);

struct EquivalenceResult {
    bool pass = false;
    double max_deviation = 0.0;
};

/// Throws OracleError when input or output counts differ.
EquivalenceResult equivalence_check(const CircuitGraph& a, const CircuitGraph& b, std::size_t trials,
                                    double tolerance, std::uint64_t seed = oracle_seed);

}  // namespace osd

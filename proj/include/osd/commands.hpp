#pragma once

// The analyses behind the command-line tool, as plain functions returning
// data; rendering is separate so tests can check the numbers directly.

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "osd/config.hpp"
#include "osd/depth_engine.hpp"

namespace osd {

/// Graph and closed form disagree, or an emitted graph fails validation.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageDepth {
    std::string stage;
    std::uint64_t depth = 0;
};

/// Stage of a gate label: its first component, with blockNN folded into
/// "blocks".
std::string stage_of(std::string_view label);

struct BuiltGraph {
    CircuitGraph graph;
    std::optional<std::uint64_t> seq_len;
    std::optional<std::string> unbounded;  // set instead of a graph
};

/// Builds the config's graph (applying overrides). seq_len overrides the
/// config's own sequence length where the kind has one.
BuiltGraph build_config(const ArchConfig& config, std::optional<std::uint64_t> seq_len, bool folding);

struct AnalyzeOptions {
    std::optional<std::uint64_t> seq_len;
    bool no_folding = false;
};

struct AnalyzeReport {
    std::string name;
    std::string kind;
    std::optional<std::uint64_t> seq_len;
    bool folding = true;
    std::size_t gate_count = 0;
    std::optional<std::uint64_t> depth;  // empty when unbounded
    std::optional<SymbolicDepth> formula;
    std::optional<std::uint64_t> formula_depth;
    std::vector<StageDepth> stages;
    std::optional<std::string> unbounded;
};

AnalyzeReport cmd_analyze(const ArchConfig& config, const AnalyzeOptions& options);
void render_analyze(std::ostream& out, const AnalyzeReport& report);
std::string analyze_json(const AnalyzeReport& report);

enum class StepMode { powers_of_two, linear };

struct SweepOptions {
    std::uint64_t t_min = 1;
    std::uint64_t t_max = 1;
    StepMode steps = StepMode::powers_of_two;
    std::uint64_t stride = 1;
    bool no_folding = false;
};

struct SweepRow {
    std::uint64_t seq_len = 0;
    std::uint64_t depth = 0;
    std::optional<std::uint64_t> formula_depth;
    bool match() const { return !formula_depth || *formula_depth == depth; }
};

struct SweepResult {
    std::vector<SweepRow> rows;
    /// Depth increase between consecutive rows whose T doubles.
    std::vector<std::int64_t> doubling_deltas;
    /// 2 x global-block count for dense transformers.
    std::optional<std::uint64_t> expected_delta;
};

/// Throws ConfigError on an empty or invalid range.
std::vector<std::uint64_t> sweep_points(const SweepOptions& options);
SweepResult cmd_sweep(const ArchConfig& config, const SweepOptions& options);
/// `T,depth,formula_depth,match`, LF endings.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
void render_sweep_summary(std::ostream& out, const SweepResult& result);

struct FamilyRow {
    DenseTransformerSpec spec;
    SymbolicDepth formula;
    std::uint64_t total_at_max = 0;
    std::uint64_t log_t_max = 0;
    std::uint64_t sliding_block = 0;
    SymbolicDepth global_block;
    std::uint64_t unfolded_at_max = 0;
};

/// Throws DomainError for an unknown family.
std::vector<FamilyRow> family_rows(std::string_view family);
void cmd_report(std::ostream& out, std::string_view family);

struct PathStep {
    GateId gate;
    std::string label;
    std::string kind;
    std::string stage;
    std::uint64_t immediate = 0;
    std::uint64_t cumulative = 0;
};

struct AlternativePath {
    std::uint64_t depth = 0;
    std::size_t gate_count = 0;
    std::vector<StageDepth> stages;
};

struct PathListing {
    std::uint64_t depth = 0;
    std::vector<PathStep> steps;  // leaf first
    std::vector<StageDepth> stages;
    /// Deepest distinct paths, the critical one first.
    std::vector<AlternativePath> alternatives;
    std::optional<std::string> unbounded;
};

PathListing cmd_path(const ArchConfig& config, std::optional<std::uint64_t> seq_len, std::size_t top,
                     bool no_folding = false);
void render_path(std::ostream& out, const PathListing& listing);

/// Sum of immediate depths along `path`, grouped by stage in path order.
std::vector<StageDepth> stage_breakdown(const CircuitGraph& graph, const std::vector<GateId>& path);

}  // namespace osd

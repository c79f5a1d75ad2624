#pragma once

// Architecture config files (JSON) and the compiled-in presets they mirror.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "osd/arch_builders.hpp"
#include "osd/layer_formulas.hpp"

namespace osd {

constexpr int schema_version = 1;

struct RnnSpec {
    std::uint64_t num_layers = 1;
    std::uint64_t dim = 1;
    std::uint64_t seq_len = 1;
};

struct UnrollConfig {
    /// Set when the base model was given by preset name.
    std::optional<std::string> base_preset;
    UnrollSpec spec;
};

using ArchParameters = std::variant<MlpSpec, DenseTransformerSpec, MoeSpec, RnnSpec, UnrollConfig>;

struct ArchConfig {
    std::string name;
    ArchParameters parameters;
    /// Glob patterns over gate labels; matching gates become interpretable.
    std::vector<std::string> interpretable_overrides;
    bool folding = true;
};

/// "mlp", "dense-transformer", "moe-transformer", "rnn", "unroll"
std::string kind_name(const ArchParameters& p);

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::optional<std::size_t> line = std::nullopt);
    std::optional<std::size_t> line() const { return line_; }

private:
    std::optional<std::size_t> line_;
};

/// Throws ConfigError with a 1-based line number when one can be located.
ArchConfig parse_config(std::string_view text);
ArchConfig load_config(const std::filesystem::path& path);

/// Canonical JSON text (2-space indent, trailing newline).
std::string serialize_config(const ArchConfig& config);

DenseTransformerSpec gemma3_preset(std::string_view size);  // "1b", "4b", "12b", "27b"
MoeSpec moe_table5_preset();
std::optional<DenseTransformerSpec> dense_preset(std::string_view name);  // "gemma3-1b", ...

/// Compiled-in equivalents of the files under configs/, by file stem.
std::vector<ArchConfig> bundled_configs();
std::optional<ArchConfig> bundled_config(std::string_view name);

/// Explanation for a parameter listed in a spec's `inferred` field.
std::string inferred_note(std::string_view key);

/// POSIX-style glob match ('*', '?', '[...]').
bool label_matches(std::string_view pattern, std::string_view label);

}  // namespace osd

#include "osd/config.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace osd {

using nlohmann::ordered_json;

ConfigError::ConfigError(const std::string& what, std::optional<std::size_t> line)
    : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + what : what), line_(line) {}

std::string kind_name(const ArchParameters& p) {
    static constexpr const char* names[] = {"mlp", "dense-transformer", "moe-transformer", "rnn", "unroll"};
    return names[p.index()];
}

namespace {

std::size_t line_at(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be rejected. Errors point at the line where the key first appears.
class Reader {
public:
    Reader(const ordered_json& obj, std::string_view text, std::string where)
        : obj_(obj), text_(text), where_(std::move(where)) {
        if (!obj_.is_object()) fail(where_ + " must be an object", std::nullopt);
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const ordered_json& raw(const std::string& key) {
        if (!obj_.contains(key)) fail(where_ + ": missing required key '" + key + "'", std::nullopt);
        used_.insert(key);
        return obj_.at(key);
    }

    std::uint64_t uint(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() < 1) {
            fail(where_ + "." + key + " must be a positive integer", key);
        }
        return v.get<std::uint64_t>();
    }
    std::uint64_t uint(const std::string& key, std::uint64_t fallback) { return has(key) ? uint(key) : fallback; }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) fail(where_ + "." + key + " must be true or false", key);
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) fail(where_ + "." + key + " must be a string", key);
        return v.get<std::string>();
    }
    std::string string(const std::string& key, std::string fallback) { return has(key) ? string(key) : fallback; }

    std::vector<std::string> strings(const std::string& key) {
        if (!has(key)) return {};
        const auto& v = raw(key);
        if (!v.is_array()) fail(where_ + "." + key + " must be an array of strings", key);
        std::vector<std::string> out;
        for (const auto& s : v) {
            if (!s.is_string()) fail(where_ + "." + key + " must be an array of strings", key);
            out.push_back(s.get<std::string>());
        }
        return out;
    }

    std::vector<std::uint64_t> uints(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) fail(where_ + "." + key + " must be an array of positive integers", key);
        std::vector<std::uint64_t> out;
        for (const auto& x : v) {
            if (!x.is_number_unsigned() || x.get<std::uint64_t>() < 1) {
                fail(where_ + "." + key + " must be an array of positive integers", key);
            }
            out.push_back(x.get<std::uint64_t>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!used_.count(key)) fail(where_ + ": unknown key '" + key + "'", key);
        }
    }

    [[noreturn]] void fail(const std::string& what, std::optional<std::string> key) const {
        std::optional<std::size_t> line;
        if (key) {
            if (auto pos = text_.find("\"" + *key + "\""); pos != std::string_view::npos) line = line_at(text_, pos);
        }
        throw ConfigError(what, line);
    }

    std::string_view text() const { return text_; }

private:
    const ordered_json& obj_;
    std::string_view text_;
    std::string where_;
    std::set<std::string> used_;
};

AttentionKind parse_attention(const std::string& s, const Reader& r) {
    if (s == "local") return AttentionKind::local;
    if (s == "global") return AttentionKind::global;
    r.fail("attention_pattern entries must be \"local\" or \"global\"", std::string("attention_pattern"));
}

DenseTransformerSpec parse_dense(const ordered_json& obj, std::string_view text, const std::string& where) {
    Reader r(obj, text, where);
    DenseTransformerSpec s;
    s.name = r.string("name", "");
    s.vocab_size = r.uint("vocab_size");
    s.embed_dim = r.uint("embed_dim");
    s.hidden_dim = r.uint("hidden_dim");
    s.head_dim = r.uint("head_dim");
    s.num_layers = r.uint("num_layers");
    s.num_heads = r.uint("num_heads");
    s.num_kv_heads = r.uint("num_kv_heads", s.num_heads);
    s.max_seq_len = r.uint("max_seq_len");
    s.sliding_window = r.uint("sliding_window", s.max_seq_len);
    if (r.has("attention_pattern")) {
        s.attention_pattern.clear();
        for (const auto& k : r.strings("attention_pattern")) s.attention_pattern.push_back(parse_attention(k, r));
    }
    s.use_post_attn_norm = r.boolean("use_post_attn_norm", true);
    s.use_post_ffw_norm = r.boolean("use_post_ffw_norm", true);
    s.use_qk_norm = r.boolean("use_qk_norm", true);
    s.linear_bias = r.boolean("linear_bias", false);
    s.tie_embeddings = r.boolean("tie_embeddings", true);
    s.inferred = r.strings("inferred");
    r.finish();
    try {
        s.validate();
    } catch (const DomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return s;
}

ordered_json dense_json(const DenseTransformerSpec& s) {
    ordered_json j;
    if (!s.name.empty()) j["name"] = s.name;
    j["vocab_size"] = s.vocab_size;
    j["embed_dim"] = s.embed_dim;
    j["hidden_dim"] = s.hidden_dim;
    j["head_dim"] = s.head_dim;
    j["num_layers"] = s.num_layers;
    j["num_heads"] = s.num_heads;
    j["num_kv_heads"] = s.num_kv_heads;
    j["sliding_window"] = s.sliding_window;
    auto pattern = ordered_json::array();
    for (auto k : s.attention_pattern) pattern.push_back(k == AttentionKind::local ? "local" : "global");
    j["attention_pattern"] = pattern;
    j["max_seq_len"] = s.max_seq_len;
    j["use_post_attn_norm"] = s.use_post_attn_norm;
    j["use_post_ffw_norm"] = s.use_post_ffw_norm;
    j["use_qk_norm"] = s.use_qk_norm;
    j["linear_bias"] = s.linear_bias;
    j["tie_embeddings"] = s.tie_embeddings;
    if (!s.inferred.empty()) j["inferred"] = s.inferred;
    return j;
}

MlpSpec parse_mlp(Reader& r) {
    MlpSpec s;
    s.input_dim = r.uint("input_dim");
    s.output_dim = r.uint("output_dim");
    s.hidden_dims = r.has("hidden_dims") ? r.uints("hidden_dims") : std::vector<std::uint64_t>{};
    s.activation = r.string("activation", "relu");
    s.bias = r.boolean("bias", false);
    return s;
}

MoeSpec parse_moe(Reader& r) {
    MoeSpec s;
    s.vocab_size = r.uint("vocab_size");
    s.embed_dim = r.uint("embed_dim");
    s.num_heads = r.uint("num_heads");
    s.num_layers = r.uint("num_layers");
    s.num_experts = r.uint("num_experts");
    s.experts_per_token = r.uint("experts_per_token");
    if (r.has("expert_hidden_dim")) s.expert_hidden_dim = r.uint("expert_hidden_dim");
    s.seq_len = r.uint("seq_len");
    s.tie_embeddings = r.boolean("tie_embeddings", true);
    s.inferred = r.strings("inferred");
    return s;
}

RnnSpec parse_rnn(Reader& r) {
    RnnSpec s;
    s.num_layers = r.uint("num_layers");
    s.dim = r.uint("dim");
    s.seq_len = r.uint("seq_len");
    return s;
}

UnrollMode parse_mode(const std::string& s, const Reader& r) {
    if (s == "autoregressive") return UnrollMode::autoregressive;
    if (s == "diffusion") return UnrollMode::diffusion;
    if (s == "continuous-cot") return UnrollMode::continuous_cot;
    if (s == "blackbox-memory") return UnrollMode::blackbox_memory;
    r.fail("mode must be one of autoregressive, diffusion, continuous-cot, blackbox-memory", std::string("mode"));
}

// keys each mode reads besides base, mode and intermediate_interpretable
std::vector<std::string> mode_keys(UnrollMode m) {
    switch (m) {
        case UnrollMode::autoregressive: return {"prompt_len", "output_len"};
        case UnrollMode::diffusion: return {"seq_len", "diffusion_steps"};
        case UnrollMode::continuous_cot: return {"seq_len", "cot_steps"};
        case UnrollMode::blackbox_memory: return {"seq_len", "invocation_bound"};
    }
    return {};
}

UnrollConfig parse_unroll(Reader& r) {
    UnrollConfig c;
    const auto& base = r.raw("base");
    if (base.is_string()) {
        c.base_preset = base.get<std::string>();
        auto spec = dense_preset(*c.base_preset);
        if (!spec) r.fail("unknown base preset '" + *c.base_preset + "'", std::string("base"));
        c.spec.base = *spec;
    } else {
        c.spec.base = parse_dense(base, r.text(), "parameters.base");
    }
    c.spec.mode = parse_mode(r.string("mode"), r);
    for (const auto& key : mode_keys(c.spec.mode)) {
        if (key == "invocation_bound") {
            if (r.has(key)) c.spec.invocation_bound = r.uint(key);
            continue;
        }
        const auto v = r.uint(key);
        if (key == "prompt_len") c.spec.prompt_len = v;
        if (key == "output_len") c.spec.output_len = v;
        if (key == "seq_len") c.spec.seq_len = v;
        if (key == "diffusion_steps") c.spec.diffusion_steps = v;
        if (key == "cot_steps") c.spec.cot_steps = v;
    }
    if (r.has("intermediate_interpretable")) c.spec.intermediate_interpretable = r.boolean("intermediate_interpretable", false);
    return c;
}

ordered_json parameters_json(const ArchParameters& p) {
    ordered_json j;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MlpSpec>) {
                j["input_dim"] = s.input_dim;
                j["output_dim"] = s.output_dim;
                j["hidden_dims"] = s.hidden_dims;
                j["activation"] = s.activation;
                j["bias"] = s.bias;
            } else if constexpr (std::is_same_v<T, DenseTransformerSpec>) {
                j = dense_json(s);
            } else if constexpr (std::is_same_v<T, MoeSpec>) {
                j["vocab_size"] = s.vocab_size;
                j["embed_dim"] = s.embed_dim;
                j["num_heads"] = s.num_heads;
                j["num_layers"] = s.num_layers;
                j["num_experts"] = s.num_experts;
                j["experts_per_token"] = s.experts_per_token;
                if (s.expert_hidden_dim) j["expert_hidden_dim"] = *s.expert_hidden_dim;
                j["seq_len"] = s.seq_len;
                j["tie_embeddings"] = s.tie_embeddings;
                if (!s.inferred.empty()) j["inferred"] = s.inferred;
            } else if constexpr (std::is_same_v<T, RnnSpec>) {
                j["num_layers"] = s.num_layers;
                j["dim"] = s.dim;
                j["seq_len"] = s.seq_len;
            } else {
                if (s.base_preset) {
                    j["base"] = *s.base_preset;
                } else {
                    j["base"] = dense_json(s.spec.base);
                }
                j["mode"] = to_string(s.spec.mode);
                for (const auto& key : mode_keys(s.spec.mode)) {
                    if (key == "prompt_len") j[key] = s.spec.prompt_len;
                    if (key == "output_len") j[key] = s.spec.output_len;
                    if (key == "seq_len") j[key] = s.spec.seq_len;
                    if (key == "diffusion_steps") j[key] = s.spec.diffusion_steps;
                    if (key == "cot_steps") j[key] = s.spec.cot_steps;
                    if (key == "invocation_bound" && s.spec.invocation_bound) j[key] = *s.spec.invocation_bound;
                }
                if (s.spec.intermediate_interpretable) j["intermediate_interpretable"] = *s.spec.intermediate_interpretable;
            }
        },
        p);
    return j;
}

void validate_parameters(const ArchParameters& p) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, RnnSpec>) {
            } else if constexpr (std::is_same_v<T, UnrollConfig>) {
                if (s.spec.mode == UnrollMode::blackbox_memory && !s.spec.invocation_bound) {
                    s.spec.base.validate();
                } else {
                    s.spec.validate();
                }
            } else {
                s.validate();
            }
        },
        p);
}

}  // namespace

ArchConfig parse_config(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what(), line_at(text, e.byte == 0 ? 0 : e.byte - 1));
    }
    Reader top(doc, text, "config");
    const auto& version = top.raw("schema_version");
    if (!version.is_number_integer() || version.get<int>() != schema_version) {
        top.fail("unsupported schema_version (expected " + std::to_string(schema_version) + ")", std::string("schema_version"));
    }
    ArchConfig c;
    const auto kind = top.string("kind");
    c.name = top.string("name", "");
    c.interpretable_overrides = top.strings("interpretable_overrides");
    c.folding = top.boolean("folding", true);

    const auto& params = top.raw("parameters");
    if (kind == "dense-transformer") {
        c.parameters = parse_dense(params, text, "parameters");
    } else {
        Reader r(params, text, "parameters");
        if (kind == "mlp") {
            c.parameters = parse_mlp(r);
        } else if (kind == "moe-transformer") {
            c.parameters = parse_moe(r);
        } else if (kind == "rnn") {
            c.parameters = parse_rnn(r);
        } else if (kind == "unroll") {
            c.parameters = parse_unroll(r);
        } else {
            top.fail("kind must be one of mlp, dense-transformer, moe-transformer, rnn, unroll", std::string("kind"));
        }
        r.finish();
    }
    top.finish();
    try {
        validate_parameters(c.parameters);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid parameters: ") + e.what());
    }
    return c;
}

ArchConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ArchConfig& config) {
    ordered_json j;
    j["schema_version"] = schema_version;
    j["kind"] = kind_name(config.parameters);
    if (!config.name.empty()) j["name"] = config.name;
    j["parameters"] = parameters_json(config.parameters);
    if (!config.interpretable_overrides.empty()) j["interpretable_overrides"] = config.interpretable_overrides;
    j["folding"] = config.folding;
    return j.dump(2) + "\n";
}

DenseTransformerSpec gemma3_preset(std::string_view size) {
    using enum AttentionKind;
    DenseTransformerSpec s;
    s.vocab_size = 262144;
    s.attention_pattern = {local, local, local, local, local, global};
    s.use_post_attn_norm = true;
    s.use_post_ffw_norm = true;
    s.use_qk_norm = true;
    s.linear_bias = true;
    s.tie_embeddings = true;
    s.head_dim = 256;
    s.sliding_window = 1024;
    s.max_seq_len = 131072;
    s.inferred = {"num_heads", "num_kv_heads", "sliding_window", "max_seq_len", "linear_bias"};
    if (size == "1b") {
        s.embed_dim = 1152, s.hidden_dim = 6912, s.num_layers = 26, s.num_heads = 4, s.num_kv_heads = 1;
        s.sliding_window = 512;
        s.max_seq_len = 32768;
        s.inferred = {"num_kv_heads", "max_seq_len", "linear_bias"};
    } else if (size == "4b") {
        s.embed_dim = 2560, s.hidden_dim = 10240, s.num_layers = 34, s.num_heads = 8, s.num_kv_heads = 4;
    } else if (size == "12b") {
        s.embed_dim = 3840, s.hidden_dim = 15360, s.num_layers = 48, s.num_heads = 16, s.num_kv_heads = 8;
    } else if (size == "27b") {
        s.embed_dim = 5376, s.hidden_dim = 21504, s.num_layers = 62, s.num_heads = 32, s.num_kv_heads = 16;
        s.head_dim = 128;
    } else {
        throw DomainError("unknown Gemma 3 size '" + std::string(size) + "'");
    }
    s.name = "gemma3-" + std::string(size);
    return s;
}

MoeSpec moe_table5_preset() {
    MoeSpec s;
    s.name = "moe-table5";
    s.vocab_size = 151936;
    s.embed_dim = 2048;
    s.num_heads = 16;
    s.num_layers = 28;
    s.num_experts = 64;
    s.experts_per_token = 8;
    s.expert_hidden_dim = 8192;
    s.seq_len = 512;
    s.tie_embeddings = true;
    s.inferred = {"expert_hidden_dim", "tie_embeddings"};
    return s;
}

std::optional<DenseTransformerSpec> dense_preset(std::string_view name) {
    for (std::string_view size : {"1b", "4b", "12b", "27b"}) {
        if (name == "gemma3-" + std::string(size)) return gemma3_preset(size);
    }
    return std::nullopt;
}

std::vector<ArchConfig> bundled_configs() {
    std::vector<ArchConfig> out;
    for (std::string_view size : {"1b", "4b", "12b", "27b"}) {
        auto spec = gemma3_preset(size);
        out.push_back({spec.name, spec, {}, true});
    }
    out.push_back({"moe-table5", moe_table5_preset(), {}, true});

    MlpSpec mlp;
    mlp.input_dim = 1;
    mlp.output_dim = 1;
    mlp.hidden_dims = {4, 4};
    out.push_back({"mlp-example", mlp, {}, true});

    out.push_back({"rnn-demo", RnnSpec{4, 64, 16}, {}, true});

    UnrollConfig cot;
    cot.base_preset = "gemma3-1b";
    cot.spec.base = gemma3_preset("1b");
    cot.spec.mode = UnrollMode::continuous_cot;
    cot.spec.seq_len = 512;
    cot.spec.cot_steps = 3;
    out.push_back({"continuous-cot-demo", cot, {}, true});

    UnrollConfig diff;
    diff.base_preset = "gemma3-1b";
    diff.spec.base = gemma3_preset("1b");
    diff.spec.mode = UnrollMode::diffusion;
    diff.spec.seq_len = 1024;
    diff.spec.diffusion_steps = 3;
    out.push_back({"diffusion-demo", diff, {}, true});
    return out;
}

std::optional<ArchConfig> bundled_config(std::string_view name) {
    for (auto& c : bundled_configs()) {
        if (c.name == name) return c;
    }
    return std::nullopt;
}

std::string inferred_note(std::string_view key) {
    static const std::map<std::string, std::string, std::less<>> notes = {
        {"num_heads", "head count taken from the public model code; it only affects parameter counts"},
        {"num_kv_heads", "key/value head count taken from the public model code; it only affects parameter counts"},
        {"sliding_window", "window of 1024 inferred; it reproduces the published sliding-block depth"},
        {"max_seq_len", "context limit set to a power of two (32768 / 131072) with the same ceil(log2) as 32000 / 128000"},
        {"linear_bias", "linear layers modelled with an additive bias; folded biases leave the depth unchanged at these widths"},
        {"expert_hidden_dim", "expert width d_ff = 8192 inferred from the 91.32B total parameter count"},
        {"tie_embeddings", "input and output embeddings assumed tied"},
    };
    if (auto it = notes.find(key); it != notes.end()) return it->second;
    return "value not published";
}

bool label_matches(std::string_view pattern, std::string_view label) {
    return ::fnmatch(std::string(pattern).c_str(), std::string(label).c_str(), 0) == 0;
}

}  // namespace osd

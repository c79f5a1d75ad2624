#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "osd/config.hpp"

using namespace osd;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<std::size_t> error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    ADD_FAILURE() << "expected ConfigError";
    return std::nullopt;
}

}  // namespace

TEST(Config, BundledFilesMatchPresets) {
    for (const auto& cfg : bundled_configs()) {
        const auto path = std::filesystem::path(OSD_CONFIG_DIR) / (cfg.name + ".json");
        ASSERT_TRUE(std::filesystem::exists(path)) << path;
        EXPECT_EQ(read_file(path), serialize_config(cfg)) << cfg.name;
    }
}

TEST(Config, RoundTripIsIdentity) {
    for (const auto& entry : std::filesystem::directory_iterator(OSD_CONFIG_DIR)) {
        const auto text = read_file(entry.path());
        EXPECT_EQ(serialize_config(parse_config(text)), text) << entry.path();
    }
}

TEST(Config, OverridesRoundTrip) {
    auto cfg = *bundled_config("mlp-example");
    cfg.interpretable_overrides = {"layer1.relu*"};
    cfg.folding = false;
    const auto back = parse_config(serialize_config(cfg));
    EXPECT_EQ(back.interpretable_overrides, cfg.interpretable_overrides);
    EXPECT_FALSE(back.folding);
}

TEST(Config, UnknownKeyRejectedWithLine) {
    const std::string text = R"({
  "schema_version": 1,
  "kind": "rnn",
  "parameters": {
    "num_layers": 2,
    "dim": 8,
    "seq_len": 4,
    "colour": "blue"
  }
})";
    EXPECT_EQ(error_line(text), 8u);
}

TEST(Config, MissingKeyAndBadValue) {
    EXPECT_THROW(parse_config(R"({"schema_version": 1, "kind": "rnn", "parameters": {"dim": 8, "seq_len": 4}})"),
                 ConfigError);
    const std::string bad = R"({
  "schema_version": 1,
  "kind": "mlp",
  "parameters": {
    "input_dim": -3,
    "output_dim": 1,
    "hidden_dims": []
  }
})";
    EXPECT_EQ(error_line(bad), 5u);
}

TEST(Config, MalformedJsonHasLine) {
    const std::string text = "{\n  \"schema_version\": 1,\n  \"kind\": \"rnn\",,\n}";
    EXPECT_EQ(error_line(text), 3u);
}

TEST(Config, SchemaVersionAndKind) {
    EXPECT_THROW(parse_config(R"({"schema_version": 2, "kind": "rnn", "parameters": {}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"schema_version": 1, "kind": "cnn", "parameters": {}})"), ConfigError);
}

TEST(Config, InvalidSpecIsConfigError) {
    auto text = serialize_config(*bundled_config("gemma3-4b"));
    text.replace(text.find("\"num_kv_heads\": 4"), 17, "\"num_kv_heads\": 3");
    EXPECT_THROW(parse_config(text), ConfigError);
}

TEST(Config, UnrollByPresetName) {
    const auto cfg = *bundled_config("continuous-cot-demo");
    const auto& u = std::get<UnrollConfig>(cfg.parameters);
    EXPECT_EQ(u.base_preset, "gemma3-1b");
    EXPECT_EQ(u.spec.mode, UnrollMode::continuous_cot);
    EXPECT_EQ(u.spec.cot_steps, 3u);
    EXPECT_EQ(u.spec.base.embed_dim, 1152u);
}

TEST(Config, PresetsAndNotes) {
    EXPECT_EQ(gemma3_preset("27b").head_dim, 128u);
    EXPECT_THROW(gemma3_preset("2b"), DomainError);
    EXPECT_TRUE(dense_preset("gemma3-12b"));
    EXPECT_FALSE(dense_preset("llama"));
    EXPECT_FALSE(bundled_config("nope"));
    EXPECT_FALSE(inferred_note("sliding_window").empty());
    EXPECT_EQ(kind_name(bundled_config("moe-table5")->parameters), "moe-transformer");
}

TEST(Config, LabelGlob) {
    EXPECT_TRUE(label_matches("block*.attn.*", "block03.attn.q_proj.sum"));
    EXPECT_TRUE(label_matches("cell?_1.h", "cell0_1.h"));
    EXPECT_TRUE(label_matches("p[0-2].x", "p1.x"));
    EXPECT_FALSE(label_matches("p[0-2].x", "p5.x"));
    EXPECT_FALSE(label_matches("block*", "embed.lookup"));
}

#include <gtest/gtest.h>

#include <json.hpp>
#include <set>
#include <sstream>

#include "osd/commands.hpp"

using namespace osd;

namespace {

ArchConfig cfg(std::string_view name) { return *bundled_config(name); }

std::string render(const AnalyzeReport& r) {
    std::ostringstream out;
    render_analyze(out, r);
    return out.str();
}

}  // namespace

TEST(Commands, StageOf) {
    EXPECT_EQ(stage_of("block07.p.attn.q_proj.sum"), "blocks");
    EXPECT_EQ(stage_of("embed.lookup"), "embed");
    EXPECT_EQ(stage_of("layer1.relu[2]"), "layer1");
    EXPECT_EQ(stage_of("output[0]"), "output");
    EXPECT_EQ(stage_of("pass2.block00.x"), "pass2");
}

TEST(Commands, AnalyzeGemma1b) {
    const auto r = cmd_analyze(cfg("gemma3-1b"), {32768, false});
    EXPECT_EQ(*r.depth, 4490u);
    EXPECT_NE(render(r).find("depth: 4490 (= 4370 + 8·log2 T)"), std::string::npos) << render(r);
    std::uint64_t sum = 0;
    for (const auto& s : r.stages) sum += s.depth;
    EXPECT_EQ(sum, 4490u);
    ASSERT_EQ(r.stages.size(), 4u);
    EXPECT_EQ(r.stages[0].stage, "embed");
    EXPECT_EQ(r.stages[0].depth, 19u);
    EXPECT_EQ(r.stages[1].depth, 4322u + 8 * 15);
    EXPECT_EQ(r.stages[2].depth, 17u);
    EXPECT_EQ(r.stages[3].depth, 12u);

    const auto unfolded = cmd_analyze(cfg("gemma3-1b"), {32768, true});
    EXPECT_GT(*unfolded.depth, 4490u);
}

TEST(Commands, AnalyzeMlpAndJson) {
    const auto r = cmd_analyze(cfg("mlp-example"), {});
    EXPECT_EQ(*r.depth, 9u);
    EXPECT_NE(render(r).find("depth: 9"), std::string::npos);
    const auto j = nlohmann::json::parse(analyze_json(cmd_analyze(cfg("gemma3-4b"), {})));
    EXPECT_EQ(j["depth"], 6206);
    EXPECT_EQ(j["formula"]["constant"], 6036);
    EXPECT_EQ(j["formula"]["logT_coefficient"], 10);
    EXPECT_TRUE(j["stages"].is_array());
}

TEST(Commands, AnalyzeTooLongIsDomainError) {
    EXPECT_THROW(cmd_analyze(cfg("gemma3-1b"), {65536, false}), DomainError);
}

TEST(Commands, AnalyzeOverrides) {
    auto c = cfg("mlp-example");
    c.interpretable_overrides = {"layer2.relu*"};
    const auto r = cmd_analyze(c, {});
    EXPECT_LT(*r.depth, 9u);
}

TEST(Commands, AnalyzeUnbounded) {
    auto c = cfg("continuous-cot-demo");
    auto& u = std::get<UnrollConfig>(c.parameters);
    u.spec.mode = UnrollMode::blackbox_memory;
    u.spec.invocation_bound.reset();
    const auto r = cmd_analyze(c, {});
    EXPECT_FALSE(r.depth);
    EXPECT_TRUE(r.unbounded);
    EXPECT_NE(render(r).find("nbounded"), std::string::npos);
}

TEST(Commands, SweepDeltas) {
    SweepOptions o;
    o.t_min = 1024;
    o.t_max = 32768;
    const auto r = cmd_sweep(cfg("gemma3-1b"), o);
    ASSERT_EQ(r.rows.size(), 6u);
    for (const auto& row : r.rows) EXPECT_TRUE(row.match());
    ASSERT_EQ(r.doubling_deltas.size(), 5u);
    for (auto d : r.doubling_deltas) EXPECT_EQ(d, 8);
    EXPECT_EQ(r.expected_delta, 8u);
    EXPECT_EQ(r.rows.back().depth, 4490u);

    o.t_max = 131072;
    const auto big = cmd_sweep(cfg("gemma3-27b"), o);
    for (auto d : big.doubling_deltas) EXPECT_EQ(d, 20);
}

TEST(Commands, SweepRangesAndCsv) {
    SweepOptions o;
    o.t_min = 512;
    o.t_max = 512;
    EXPECT_EQ(cmd_sweep(cfg("gemma3-1b"), o).rows.size(), 1u);
    o.t_min = 100;
    o.t_max = 10;
    EXPECT_THROW(sweep_points(o), ConfigError);
    o.t_min = 0;
    EXPECT_THROW(sweep_points(o), ConfigError);
    o.t_min = 10;
    o.t_max = 40;
    o.steps = StepMode::linear;
    o.stride = 10;
    EXPECT_EQ(sweep_points(o), (std::vector<std::uint64_t>{10, 20, 30, 40}));
    o.stride = 0;
    EXPECT_THROW(sweep_points(o), ConfigError);

    o = {};
    o.t_min = 1024;
    o.t_max = 4096;
    std::ostringstream a, b;
    write_sweep_csv(a, cmd_sweep(cfg("gemma3-1b"), o));
    write_sweep_csv(b, cmd_sweep(cfg("gemma3-1b"), o));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().rfind("T,depth,formula_depth,match\n", 0), 0u);
    EXPECT_EQ(a.str().find('\r'), std::string::npos);
    EXPECT_NE(a.str().find("4096,4466,4466,true\n"), std::string::npos);
}

TEST(Commands, ReportFamily) {
    std::ostringstream out;
    cmd_report(out, "gemma3");
    const auto s = out.str();
    for (const char* needle : {"4370 + 8·log2 T", "4,490", "6,206", "8,754", "11,662", "179", "159 + 2·log(T)", "185",
                               "165 + 2·log(T)", "22", "151 + 2·log(T)"}) {
        EXPECT_NE(s.find(needle), std::string::npos) << needle;
    }
    EXPECT_THROW(cmd_report(out, "gemma2"), DomainError);
    const auto rows = family_rows("gemma3");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].spec.local_layer_count(), 22u);
    EXPECT_EQ(rows[0].spec.global_layer_count(), 4u);
    for (const auto& r : rows) EXPECT_GT(r.unfolded_at_max, r.total_at_max);
}

TEST(Commands, PathMlp) {
    const auto p = cmd_path(cfg("mlp-example"), std::nullopt, 3);
    EXPECT_EQ(p.depth, 9u);
    std::uint64_t sum = 0;
    for (const auto& s : p.steps) sum += s.immediate;
    EXPECT_EQ(sum, 9u);
    ASSERT_EQ(p.stages.size(), 3u);
    EXPECT_EQ(p.stages[0].depth, 2u);
    EXPECT_EQ(p.stages[1].depth, 4u);
    EXPECT_EQ(p.stages[2].depth, 3u);
    EXPECT_FALSE(p.alternatives.empty());
    EXPECT_EQ(p.alternatives.front().depth, 9u);
    std::ostringstream out;
    render_path(out, p);
    EXPECT_NE(out.str().find("layer1 2 + layer2 4 + output 3 = 9"), std::string::npos) << out.str();
}

TEST(Commands, PathAllInterpretable) {
    auto c = cfg("mlp-example");
    c.interpretable_overrides = {"*"};
    const auto p = cmd_path(c, std::nullopt, 0);
    // every gate interpretable: depth is the largest single-gate immediate depth
    EXPECT_EQ(p.depth, 2u);
    EXPECT_LE(p.steps.size(), 2u);
}

TEST(Commands, PathGemma1bTraversesAllBlocks) {
    const auto p = cmd_path(cfg("gemma3-1b"), 32768, 0);
    EXPECT_EQ(p.depth, 4490u);
    std::set<std::string> blocks;
    bool lookup = false;
    for (const auto& s : p.steps) {
        if (s.label.rfind("block", 0) == 0) blocks.insert(s.label.substr(0, 7));
        lookup |= s.label == "embed.lookup";
    }
    EXPECT_EQ(blocks.size(), 26u);
    EXPECT_TRUE(lookup);
    ASSERT_EQ(p.stages.size(), 4u);
    EXPECT_EQ(p.stages[1].depth, 4322u + 8 * 15);
}

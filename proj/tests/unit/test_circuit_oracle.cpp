#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "osd/arch_builders.hpp"
#include "osd/circuit_oracle.hpp"
#include "osd/depth_engine.hpp"
#include "random_dag.hpp"
#include "reference_transformer.hpp"

using namespace osd;

TEST(Oracle, WiringChain) {
    CircuitGraph g;
    auto x = g.add_input();
    for (int i = 0; i < 5; ++i) x = g.add_gate(Wiring{}, {x});
    g.mark_output(x);
    const std::vector<double> in{3.5};
    EXPECT_EQ(evaluate(g, in), std::vector<double>{3.5});
}

TEST(Oracle, MlpMatchesDenseReference) {
    const MlpSpec spec{1, 1, {4, 4}, "relu", false};
    const auto g = build_mlp(spec);
    ConstantAssignment ones;
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        if (std::holds_alternative<Constant>(g.gate(GateId{i}).kind)) ones[i] = 1.0;
    }
    // dense: h1 = relu(W1 x), h2 = relu(W2 h1), y = W3 h2 with all-ones weights
    const double x = 1.0;
    double h1 = std::max(0.0, x);
    double h2 = std::max(0.0, 4 * h1);
    const double y = 4 * h2;
    const std::vector<double> in{x};
    EXPECT_DOUBLE_EQ(evaluate(g, in, ones)[0], y);
    EXPECT_DOUBLE_EQ(y, 16.0);
}

TEST(Oracle, RandomGraphsMatchNaiveEvaluator) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto g = testkit::random_dag(rng, {.max_gates = 20, .evaluable = true});
        const auto rows = random_inputs(g.input_ids().size(), 1, rng());
        const auto a = evaluate(g, rows[0]);
        const auto b = testkit::naive_evaluate(g, rows[0]);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!std::isfinite(b[i])) continue;
            EXPECT_NEAR(a[i], b[i], 1e-9 * std::max(1.0, std::abs(b[i])));
        }
    }
}

TEST(Oracle, Deterministic) {
    const auto g = build_mlp({3, 2, {4}, "relu", true});
    const std::vector<double> in{0.1, -0.3, 2.0};
    EXPECT_EQ(evaluate(g, in), evaluate(g, in));
    EXPECT_EQ(default_constant_value("x.w[0,1]"), default_constant_value("x.w[0,1]"));
    EXPECT_NE(default_constant_value("x.w[0,1]"), default_constant_value("x.w[1,0]"));
}

TEST(Oracle, ConstantValuesRoughlyStandard) {
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = default_constant_value("c" + std::to_string(i));
        sum += v;
        sq += v * v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.05);
    EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Oracle, Errors) {
    const auto g = build_mlp({2, 1, {}, "linear", false});
    const std::vector<double> one{1.0};
    EXPECT_THROW(evaluate(g, one), OracleError);
    CircuitGraph h;
    const auto x = h.add_input();
    h.mark_output(h.add_gate(PiecewiseAnalytic{"frobnicate", 1}, {x}));
    EXPECT_THROW(evaluate(h, one), OracleError);
    EXPECT_THROW(equivalence_check(g, h, 3, 1e-9), OracleError);
}

TEST(Oracle, EquivalenceSelfAndPerturbed) {
    const auto g = build_mlp({3, 2, {4}, "relu", true}, {std::nullopt, false});
    const auto self = equivalence_check(g, g, 50, 1e-12);
    EXPECT_TRUE(self.pass);
    EXPECT_EQ(self.max_deviation, 0.0);

    std::vector<Gate> gates(g.gates().begin(), g.gates().end());
    for (auto& gate : gates) {
        if (std::holds_alternative<Constant>(gate.kind)) {
            gate.kind = Constant{default_constant_value(gate.label) + 0.5};
            break;
        }
    }
    const auto perturbed = CircuitGraph::from_parts(gates, {g.input_ids().begin(), g.input_ids().end()},
                                                    {g.output_ids().begin(), g.output_ids().end()});
    EXPECT_FALSE(equivalence_check(g, perturbed, 50, 1e-9).pass);
}

TEST(Oracle, BatchMatchesSingle) {
    const auto g = build_dense_transformer(testkit::tiny_spec(), 3, {Granularity::scalar, true});
    std::vector<std::vector<double>> rows{{0, 1, 2}, {3, 4, 5}, {7, 7, 0}, {1, 6, 2}};
    const auto batch = evaluate_batch(g, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(batch[i], evaluate(g, rows[i]));
}

TEST(Oracle, LongestPathMatchesEngine) {
    EXPECT_EQ(longest_path_oracle(build_mlp({1, 1, {4, 4}, "relu", false})), 9u);
    std::mt19937_64 rng(oracle_seed);
    for (int i = 0; i < 500; ++i) {
        const auto g = testkit::random_dag(rng);
        EXPECT_EQ(longest_path_oracle(g), opaque_serial_depth(g).opaque_serial_depth);
    }
}

TEST(Oracle, LongestPathMatchesEnumeration) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto g = testkit::random_dag(rng, {.max_gates = 30});
        EXPECT_EQ(longest_path_oracle(g), testkit::enumerate_longest_path(g));
    }
}

class TinyTransformer : public ::testing::TestWithParam<std::tuple<std::uint64_t, bool>> {};

TEST_P(TinyTransformer, EvaluateMatchesDenseReference) {
    auto spec = testkit::tiny_spec();
    const auto [layers, fold] = GetParam();
    spec.num_layers = layers;
    const auto g = build_dense_transformer(spec, 3, {Granularity::scalar, fold});
    std::mt19937_64 rng(oracle_seed);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::uint64_t> tokens(3);
        for (auto& t : tokens) t = rng() % spec.vocab_size;
        const std::vector<double> in(tokens.begin(), tokens.end());
        const auto got = evaluate(g, in);
        const auto want = testkit::reference_forward(spec, g, tokens);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
    }
}

INSTANTIATE_TEST_SUITE_P(Layers, TinyTransformer,
                         ::testing::Combine(::testing::Values<std::uint64_t>(1, 2), ::testing::Bool()));

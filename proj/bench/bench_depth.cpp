#include <benchmark/benchmark.h>

#include <map>

#include "osd/arch_builders.hpp"
#include "osd/circuit_oracle.hpp"
#include "osd/config.hpp"
#include "osd/depth_engine.hpp"

using namespace osd;

namespace {

DenseTransformerSpec bench_spec() {
    DenseTransformerSpec s;
    s.vocab_size = 32;
    s.embed_dim = 16;
    s.hidden_dim = 32;
    s.head_dim = 8;
    s.num_layers = 2;
    s.num_heads = 2;
    s.num_kv_heads = 1;
    s.sliding_window = 8;
    s.attention_pattern = {AttentionKind::local, AttentionKind::global};
    s.max_seq_len = 64;
    return s;
}

const CircuitGraph& scalar_graph(std::int64_t T) {
    static std::map<std::int64_t, CircuitGraph> cache;
    auto it = cache.find(T);
    if (it == cache.end()) {
        it = cache.emplace(T, build_dense_transformer(bench_spec(), T, {Granularity::scalar, true})).first;
    }
    return it->second;
}

void BM_DepthSerial(benchmark::State& state) {
    const auto& g = scalar_graph(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(compute_node_depths(g));
    state.counters["gates"] = static_cast<double>(g.size());
}

void BM_DepthParallel(benchmark::State& state) {
    const auto& g = scalar_graph(state.range(0));
    DepthOptions o;
    o.execution = Execution::parallel;
    for (auto _ : state) benchmark::DoNotOptimize(compute_node_depths(g, o));
    state.counters["gates"] = static_cast<double>(g.size());
}

void BM_EvaluateLoop(benchmark::State& state) {
    const auto& g = scalar_graph(8);
    const auto rows = random_inputs(g.input_ids().size(), static_cast<std::size_t>(state.range(0)), oracle_seed);
    for (auto _ : state) {
        for (const auto& r : rows) benchmark::DoNotOptimize(evaluate(g, r));
    }
}

void BM_EvaluateBatch(benchmark::State& state) {
    const auto& g = scalar_graph(8);
    const auto rows = random_inputs(g.input_ids().size(), static_cast<std::size_t>(state.range(0)), oracle_seed);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_batch(g, rows));
}

void BM_Gemma27bCollapsed(benchmark::State& state) {
    const auto spec = gemma3_preset("27b");
    for (auto _ : state) {
        const auto g = build_dense_transformer(spec, 131072);
        benchmark::DoNotOptimize(opaque_serial_depth(g).opaque_serial_depth);
    }
}

}  // namespace

BENCHMARK(BM_DepthSerial)->Arg(8)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DepthParallel)->Arg(8)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateLoop)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateBatch)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemma27bCollapsed)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

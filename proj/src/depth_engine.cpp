#include "osd/depth_engine.hpp"

#include <algorithm>
#include <bit>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace osd {

std::uint64_t ceil_log2(std::uint64_t n) {
    if (n <= 1) return 0;
    return static_cast<std::uint64_t>(std::bit_width(n - 1));
}

std::uint64_t immediate_depth(const GateKind& kind) {
    if (const auto* r = std::get_if<AssociativeReduce>(&kind)) return ceil_log2(r->arity);
    if (std::holds_alternative<PiecewiseAnalytic>(kind)) return 1;
    if (const auto* l = std::get_if<Lookup>(&kind)) return ceil_log2(l->table_size);
    return 0;
}

namespace {

struct Cut {
    const GateSet& interpretable;
    bool operator()(GateId id) const { return interpretable.contains(id); }
};

std::uint64_t operand_depth(const std::vector<std::uint64_t>& depth, const Cut& cut, GateId id) {
    return cut(id) ? 0 : depth[id.value];
}

std::uint64_t gate_depth(const Gate& g, const std::vector<std::uint64_t>& depth, const Cut& cut) {
    std::uint64_t deepest = 0;
    for (const auto& op : g.operands) deepest = std::max(deepest, operand_depth(depth, cut, op.id));
    return immediate_depth(g.kind) + deepest;
}

std::vector<std::uint64_t> serial_depths(const CircuitGraph& graph, const Cut& cut) {
    std::vector<std::uint64_t> depth(graph.size(), 0);
    for (GateId id : topological_order(graph)) {
        depth[id.value] = gate_depth(graph.gate(id), depth, cut);
    }
    return depth;
}

// Gates are bucketed by longest unweighted distance from a leaf, so every
// gate in a level only reads gates from strictly lower levels.
std::vector<std::uint64_t> wavefront_depths(const CircuitGraph& graph, const Cut& cut) {
    const auto order = topological_order(graph);
    std::vector<std::uint32_t> level(graph.size(), 0);
    std::uint32_t max_level = 0;
    for (GateId id : order) {
        std::uint32_t lv = 0;
        for (const auto& op : graph.gate(id).operands) lv = std::max(lv, level[op.id.value] + 1);
        level[id.value] = lv;
        max_level = std::max(max_level, lv);
    }
    std::vector<std::vector<std::uint32_t>> buckets(max_level + 1);
    for (GateId id : order) buckets[level[id.value]].push_back(id.value);

    std::vector<std::uint64_t> depth(graph.size(), 0);
    const auto gates = graph.gates();
    for (const auto& bucket : buckets) {
        const auto n = static_cast<std::int64_t>(bucket.size());
#pragma omp parallel for schedule(static) if (n > 256)
        for (std::int64_t i = 0; i < n; ++i) {
            const std::uint32_t g = bucket[static_cast<std::size_t>(i)];
            depth[g] = gate_depth(gates[g], depth, cut);
        }
    }
    return depth;
}

GateSet resolve_interpretable(const CircuitGraph& graph, const DepthOptions& options) {
    return options.interpretable ? *options.interpretable : graph.interpretable_set();
}

}  // namespace

std::vector<std::uint64_t> compute_node_depths(const CircuitGraph& graph, const DepthOptions& options) {
    const GateSet interp = resolve_interpretable(graph, options);
    const Cut cut{interp};
    return options.execution == Execution::parallel ? wavefront_depths(graph, cut) : serial_depths(graph, cut);
}

std::uint64_t node_depth(const CircuitGraph& graph, GateId node, const std::optional<GateSet>& interpretable_override) {
    if (!graph.contains(node)) throw StructuralError("unknown node id " + to_string(node));
    DepthOptions opts;
    opts.interpretable = interpretable_override;
    return compute_node_depths(graph, opts)[node.value];
}

DepthReport opaque_serial_depth(const CircuitGraph& graph, const DepthOptions& options) {
    const GateSet interp = resolve_interpretable(graph, options);
    const Cut cut{interp};
    DepthReport report;
    report.per_node_depth =
        options.execution == Execution::parallel ? wavefront_depths(graph, cut) : serial_depths(graph, cut);

    bool have_root = false;
    auto consider = [&](GateId id) {
        const auto d = report.per_node_depth[id.value];
        if (!have_root || d > report.opaque_serial_depth ||
            (d == report.opaque_serial_depth && id < report.source_node)) {
            report.opaque_serial_depth = d;
            report.source_node = id;
            have_root = true;
        }
    };
    for (GateId id : graph.output_ids()) consider(id);
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        if (interp.contains(GateId{i})) consider(GateId{i});
    }
    if (!have_root) return report;

    // Walk down through the deepest operand until a leaf or a cut.
    std::vector<GateId> path{report.source_node};
    GateId cur = report.source_node;
    for (;;) {
        const Gate& g = graph.gate(cur);
        if (g.operands.empty()) break;
        GateId best = g.operands.front().id;
        std::uint64_t best_depth = operand_depth(report.per_node_depth, cut, best);
        for (const auto& op : g.operands) {
            const auto d = operand_depth(report.per_node_depth, cut, op.id);
            if (d > best_depth || (d == best_depth && op.id < best)) {
                best = op.id;
                best_depth = d;
            }
        }
        path.push_back(best);
        if (cut(best)) break;
        cur = best;
    }
    std::reverse(path.begin(), path.end());
    report.critical_path = std::move(path);
    return report;
}

std::uint64_t depth_between(const CircuitGraph& graph, std::span<const GateId> sources, GateId sink) {
    if (!graph.contains(sink)) throw StructuralError("unknown sink id " + to_string(sink));
    GateSet is_source(graph.size());
    for (GateId s : sources) {
        if (!graph.contains(s)) throw StructuralError("unknown source id " + to_string(s));
        is_source.insert(s);
    }
    constexpr std::int64_t unreachable = -1;
    std::vector<std::int64_t> best(graph.size(), unreachable);
    for (GateId id : topological_order(graph)) {
        if (is_source.contains(id)) {
            best[id.value] = 0;
            continue;
        }
        const Gate& g = graph.gate(id);
        std::int64_t deepest = unreachable;
        for (const auto& op : g.operands) deepest = std::max(deepest, best[op.id.value]);
        if (deepest != unreachable) {
            best[id.value] = deepest + static_cast<std::int64_t>(immediate_depth(g.kind));
        }
    }
    return best[sink.value] == unreachable ? 0 : static_cast<std::uint64_t>(best[sink.value]);
}

std::vector<WeightedPath> near_critical_paths(const CircuitGraph& graph, std::size_t count) {
    if (count == 0) return {};
    const GateSet interp = graph.interpretable_set();

    // Per gate, the `count` deepest paths ending there. A choice either stops
    // at an operand leaf (rank == npos) or continues into that operand's
    // ranked path list.
    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    struct Entry {
        std::uint64_t depth;
        GateId via;
        std::size_t rank;
    };
    std::vector<std::vector<Entry>> best(graph.size());

    auto is_leaf = [&](GateId id) {
        return interp.contains(id) || graph.gate(id).operands.empty();
    };

    for (GateId id : topological_order(graph)) {
        const Gate& g = graph.gate(id);
        auto& list = best[id.value];
        if (g.operands.empty()) continue;
        const auto imm = immediate_depth(g.kind);
        std::vector<Entry> cand;
        for (const auto& op : g.operands) {
            if (is_leaf(op.id)) {
                cand.push_back({imm, op.id, npos});
            } else {
                const auto& sub = best[op.id.value];
                for (std::size_t r = 0; r < sub.size(); ++r) cand.push_back({imm + sub[r].depth, op.id, r});
            }
        }
        std::stable_sort(cand.begin(), cand.end(), [](const Entry& a, const Entry& b) {
            if (a.depth != b.depth) return a.depth > b.depth;
            if (a.via != b.via) return a.via < b.via;
            return a.rank < b.rank;
        });
        // Repeated operands would otherwise yield duplicate paths.
        cand.erase(std::unique(cand.begin(), cand.end(),
                               [](const Entry& a, const Entry& b) { return a.via == b.via && a.rank == b.rank; }),
                   cand.end());
        if (cand.size() > count) cand.resize(count);
        list = std::move(cand);
    }

    struct RootPath {
        std::uint64_t depth;
        GateId root;
        std::size_t rank;
    };
    std::vector<RootPath> roots;
    std::vector<bool> seen(graph.size(), false);
    auto add_root = [&](GateId id) {
        if (seen[id.value]) return;
        seen[id.value] = true;
        const auto& list = best[id.value];
        if (list.empty()) {
            roots.push_back({0, id, npos});
            return;
        }
        for (std::size_t r = 0; r < list.size(); ++r) roots.push_back({list[r].depth, id, r});
    };
    for (GateId id : graph.output_ids()) add_root(id);
    for (std::uint32_t i = 0; i < graph.size(); ++i) {
        if (interp.contains(GateId{i})) add_root(GateId{i});
    }
    std::stable_sort(roots.begin(), roots.end(), [](const RootPath& a, const RootPath& b) {
        if (a.depth != b.depth) return a.depth > b.depth;
        return a.root < b.root;
    });
    if (roots.size() > count) roots.resize(count);

    std::vector<WeightedPath> out;
    for (const auto& root : roots) {
        WeightedPath p;
        p.depth = root.depth;
        p.gates.push_back(root.root);
        GateId cur = root.root;
        std::size_t rank = root.rank;
        while (rank != npos) {
            const Entry& e = best[cur.value][rank];
            p.gates.push_back(e.via);
            cur = e.via;
            rank = e.rank;
        }
        std::reverse(p.gates.begin(), p.gates.end());
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace osd

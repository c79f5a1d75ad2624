#include "osd/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "osd/circuit_oracle.hpp"

namespace osd {

namespace {

bool is_block_name(std::string_view s) {
    return s.size() > 5 && s.substr(0, 5) == "block" &&
           std::all_of(s.begin() + 5, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// setw counts bytes; the middle dot in formulas is two
std::string pad(const std::string& s, std::size_t width) {
    const auto glyphs = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
    return glyphs >= width ? s + " " : s + std::string(width - glyphs, ' ');
}

std::string with_commas(std::uint64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

void apply_overrides(CircuitGraph& g, const std::vector<std::string>& patterns) {
    if (patterns.empty()) return;
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        const auto& label = g.gate(GateId{i}).label;
        for (const auto& p : patterns) {
            if (label_matches(p, label)) {
                g.set_interpretable(GateId{i}, true);
                break;
            }
        }
    }
}

struct Closed {
    std::optional<SymbolicDepth> formula;
    std::optional<std::uint64_t> depth;
};

// Closed-form counterpart of build_config for the same arguments.
Closed closed_form(const ArchConfig& config, std::optional<std::uint64_t> seq_len, bool folding) {
    Closed c;
    if (!config.interpretable_overrides.empty()) return c;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, DenseTransformerSpec>) {
                const auto t = seq_len.value_or(s.max_seq_len);
                c.formula = model_depth_formula(s, folding);
                c.depth = model_depth(s, t, folding);
            } else if constexpr (std::is_same_v<T, MoeSpec>) {
                MoeSpec m = s;
                if (seq_len) m.seq_len = *seq_len;
                MoeSpec one = m;
                one.seq_len = 1;
                c.formula = SymbolicDepth{moe_depth(one), 2 * m.num_layers};
                c.depth = moe_depth(m);
            } else if constexpr (std::is_same_v<T, RnnSpec>) {
                const auto t = seq_len.value_or(s.seq_len);
                c.depth = rnn_stack_depth(s.num_layers, s.dim, t);
                c.formula = SymbolicDepth{*c.depth, 0};
            } else if constexpr (std::is_same_v<T, UnrollConfig>) {
                const auto& u = s.spec;
                const bool visible = u.intermediates_interpretable();
                const auto t = seq_len.value_or(u.seq_len);
                switch (u.mode) {
                    case UnrollMode::autoregressive:
                        if (visible) c.depth = model_depth(u.base, u.final_seq_len(), folding);
                        break;
                    case UnrollMode::diffusion:
                        if (visible) c.depth = model_depth(u.base, t, folding);
                        break;
                    case UnrollMode::continuous_cot:
                        if (!visible) c.depth = continuous_cot_depth(u.base, t, u.cot_steps, folding);
                        break;
                    case UnrollMode::blackbox_memory:
                        if (!u.invocation_bound) {
                            c.formula = SymbolicDepth::unbounded();
                        } else if (!visible) {
                            c.depth = blackbox_memory_depth(u.base, t, *u.invocation_bound, folding);
                        }
                        break;
                }
            }
        },
        config.parameters);
    return c;
}

}  // namespace

std::string stage_of(std::string_view label) {
    const auto dot = label.find('.');
    const auto head = label.substr(0, dot);
    if (is_block_name(head)) return "blocks";
    auto bracket = head.find('[');
    return std::string(head.substr(0, bracket));
}

BuiltGraph build_config(const ArchConfig& config, std::optional<std::uint64_t> seq_len, bool folding) {
    BuiltGraph b;
    BuildOptions opts;
    opts.fold_biases = folding;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MlpSpec>) {
                b.graph = build_mlp(s, opts);
            } else if constexpr (std::is_same_v<T, DenseTransformerSpec>) {
                b.seq_len = seq_len.value_or(s.max_seq_len);
                b.graph = build_dense_transformer(s, *b.seq_len, opts);
            } else if constexpr (std::is_same_v<T, MoeSpec>) {
                MoeSpec m = s;
                if (seq_len) m.seq_len = *seq_len;
                b.seq_len = m.seq_len;
                b.graph = build_moe_transformer(m, opts);
            } else if constexpr (std::is_same_v<T, RnnSpec>) {
                b.seq_len = seq_len.value_or(s.seq_len);
                b.graph = build_rnn_stack(s.num_layers, s.dim, *b.seq_len, opts);
            } else {
                UnrollSpec u = s.spec;
                if (seq_len) {
                    if (u.mode == UnrollMode::autoregressive) {
                        throw DomainError("autoregressive unroll takes its length from prompt_len and output_len");
                    }
                    u.seq_len = *seq_len;
                }
                b.seq_len = u.final_seq_len();
                auto result = unroll(u, opts);
                if (auto* ub = std::get_if<UnboundedDepth>(&result)) {
                    b.unbounded = ub->reason;
                } else {
                    b.graph = std::move(std::get<CircuitGraph>(result));
                }
            }
        },
        config.parameters);
    apply_overrides(b.graph, config.interpretable_overrides);
    return b;
}

std::vector<StageDepth> stage_breakdown(const CircuitGraph& graph, const std::vector<GateId>& path) {
    std::vector<StageDepth> out;
    for (std::size_t i = path.size() > 1 ? 1 : 0; i < path.size(); ++i) {
        const Gate& g = graph.gate(path[i]);
        const auto w = immediate_depth(g.kind);
        if (w == 0) continue;
        const auto stage = stage_of(g.label);
        auto it = std::find_if(out.begin(), out.end(), [&](const StageDepth& s) { return s.stage == stage; });
        if (it == out.end()) {
            out.push_back({stage, w});
        } else {
            it->depth += w;
        }
    }
    return out;
}

AnalyzeReport cmd_analyze(const ArchConfig& config, const AnalyzeOptions& options) {
    const bool folding = config.folding && !options.no_folding;
    AnalyzeReport r;
    r.name = config.name;
    r.kind = kind_name(config.parameters);
    r.folding = folding;
    auto built = build_config(config, options.seq_len, folding);
    r.seq_len = built.seq_len;
    const auto closed = closed_form(config, options.seq_len, folding);
    r.formula = closed.formula;
    r.formula_depth = closed.depth;
    if (built.unbounded) {
        r.unbounded = built.unbounded;
        return r;
    }
    if (const auto v = validate(built.graph); !v.empty()) {
        throw InvariantError("emitted graph violates '" + v.front().rule + "' at gate " + to_string(v.front().gate));
    }
    const auto report = opaque_serial_depth(built.graph);
    r.gate_count = built.graph.size();
    r.depth = report.opaque_serial_depth;
    r.stages = stage_breakdown(built.graph, report.critical_path);
    if (r.formula_depth && *r.formula_depth != *r.depth) {
        throw InvariantError("graph depth " + std::to_string(*r.depth) + " differs from closed form " +
                             std::to_string(*r.formula_depth));
    }
    return r;
}

void render_analyze(std::ostream& out, const AnalyzeReport& r) {
    out << "model: " << (r.name.empty() ? "(unnamed)" : r.name) << " (" << r.kind << ")\n";
    if (r.seq_len) out << "sequence length: " << *r.seq_len << "\n";
    out << "folding: " << (r.folding ? "on" : "off") << "\n";
    if (r.unbounded) {
        out << "depth: unbounded (" << *r.unbounded << ")\n";
        return;
    }
    out << "gates: " << r.gate_count << "\n";
    out << "depth: " << *r.depth;
    const bool symbolic_fits = r.formula && r.seq_len && r.formula->evaluate(*r.seq_len) == *r.depth;
    if (symbolic_fits) {
        out << " (= " << r.formula->to_string() << ")";
    } else if (r.formula_depth) {
        out << " (closed form " << *r.formula_depth << ")";
    }
    out << "\n";
    if (r.formula && r.formula->log_t_coefficient() > 0 && r.seq_len) {
        out << "log2 T = " << std::fixed << std::setprecision(2) << std::log2(static_cast<double>(*r.seq_len))
            << " -> " << ceil_log2(*r.seq_len) << "\n";
        out.unsetf(std::ios::floatfield);
    }
    if (!r.stages.empty()) {
        out << "stages:\n";
        for (const auto& s : r.stages) out << "  " << std::left << std::setw(12) << s.stage << std::right << s.depth << "\n";
    }
}

std::string analyze_json(const AnalyzeReport& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["kind"] = r.kind;
    j["seq_len"] = r.seq_len ? nlohmann::ordered_json(*r.seq_len) : nlohmann::ordered_json(nullptr);
    j["folding"] = r.folding;
    if (r.unbounded) {
        j["depth"] = nullptr;
        j["unbounded"] = *r.unbounded;
    } else {
        j["depth"] = *r.depth;
        j["gates"] = r.gate_count;
    }
    if (r.formula && !r.formula->is_unbounded()) {
        j["formula"] = {{"constant", r.formula->constant()}, {"logT_coefficient", r.formula->log_t_coefficient()}};
    } else {
        j["formula"] = nullptr;
    }
    j["formula_depth"] = r.formula_depth ? nlohmann::ordered_json(*r.formula_depth) : nlohmann::ordered_json(nullptr);
    auto stages = nlohmann::ordered_json::array();
    for (const auto& s : r.stages) stages.push_back({{"stage", s.stage}, {"depth", s.depth}});
    j["stages"] = stages;
    return j.dump(2) + "\n";
}

std::vector<std::uint64_t> sweep_points(const SweepOptions& o) {
    if (o.t_min < 1) throw ConfigError("--t-min must be >= 1");
    if (o.t_max < o.t_min) throw ConfigError("--t-max must be >= --t-min");
    if (o.t_min == o.t_max) return {o.t_min};
    std::vector<std::uint64_t> pts;
    if (o.steps == StepMode::linear) {
        if (o.stride < 1) throw ConfigError("--t-stride must be >= 1");
        for (std::uint64_t t = o.t_min; t <= o.t_max; t += o.stride) pts.push_back(t);
    } else {
        for (std::uint64_t t = std::uint64_t{1} << ceil_log2(o.t_min); t <= o.t_max; t *= 2) pts.push_back(t);
        if (pts.empty()) throw ConfigError("range contains no power of two");
    }
    return pts;
}

SweepResult cmd_sweep(const ArchConfig& config, const SweepOptions& options) {
    if (std::holds_alternative<MlpSpec>(config.parameters)) throw ConfigError("an mlp config has no sequence length to sweep");
    if (const auto* u = std::get_if<UnrollConfig>(&config.parameters); u && u->spec.mode == UnrollMode::autoregressive) {
        throw ConfigError("an autoregressive unroll takes its length from prompt_len and output_len");
    }
    const bool folding = config.folding && !options.no_folding;
    const auto pts = sweep_points(options);
    SweepResult res;
    res.rows.resize(pts.size());
    const auto n = static_cast<std::int64_t>(pts.size());
    std::string error;
    bool domain = false;
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            auto built = build_config(config, pts[i], folding);
            if (built.unbounded) throw DomainError(*built.unbounded);
            SweepRow row;
            row.seq_len = pts[i];
            row.depth = opaque_serial_depth(built.graph).opaque_serial_depth;
            row.formula_depth = closed_form(config, pts[i], folding).depth;
            res.rows[i] = row;
        } catch (const std::exception& ex) {
#pragma omp critical
            {
                if (error.empty()) {
                    error = ex.what();
                    domain = dynamic_cast<const DomainError*>(&ex) != nullptr;
                }
            }
        }
    }
    if (!error.empty()) {
        if (domain) throw DomainError(error);
        throw std::runtime_error(error);
    }
    std::optional<std::uint64_t> window;
    if (const auto* d = std::get_if<DenseTransformerSpec>(&config.parameters)) {
        res.expected_delta = 2 * d->global_layer_count();
        window = d->sliding_window;
    }
    for (std::size_t i = 1; i < res.rows.size(); ++i) {
        const auto& a = res.rows[i - 1];
        const auto& b = res.rows[i];
        if (b.seq_len != 2 * a.seq_len) continue;
        if (window && a.seq_len < *window) continue;
        res.doubling_deltas.push_back(static_cast<std::int64_t>(b.depth) - static_cast<std::int64_t>(a.depth));
    }
    return res;
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
    out << "T,depth,formula_depth,match\n";
    for (const auto& row : r.rows) {
        out << row.seq_len << ',' << row.depth << ',';
        if (row.formula_depth) out << *row.formula_depth;
        out << ',' << (row.match() ? "true" : "false") << '\n';
    }
}

void render_sweep_summary(std::ostream& out, const SweepResult& r) {
    const auto mismatches = std::count_if(r.rows.begin(), r.rows.end(), [](const SweepRow& x) { return !x.match(); });
    out << "rows: " << r.rows.size() << ", formula mismatches: " << mismatches << "\n";
    if (r.doubling_deltas.empty()) return;
    out << "per-doubling deltas:";
    for (auto d : r.doubling_deltas) out << ' ' << d;
    out << "\n";
    if (r.expected_delta) {
        const bool ok = std::all_of(r.doubling_deltas.begin(), r.doubling_deltas.end(),
                                    [&](std::int64_t d) { return d == static_cast<std::int64_t>(*r.expected_delta); });
        out << "logarithmic scaling: expected " << *r.expected_delta << " per doubling (2 x global blocks): "
            << (ok ? "ok" : "VIOLATED") << "\n";
    }
}

std::vector<FamilyRow> family_rows(std::string_view family) {
    if (family != "gemma3") throw DomainError("unknown family '" + std::string(family) + "' (known: gemma3)");
    std::vector<FamilyRow> rows;
    for (std::string_view size : {"1b", "4b", "12b", "27b"}) {
        FamilyRow row;
        row.spec = gemma3_preset(size);
        row.formula = model_depth_formula(row.spec);
        row.log_t_max = ceil_log2(row.spec.max_seq_len);
        row.total_at_max = model_depth(row.spec, row.spec.max_seq_len);
        row.sliding_block = block_depth(row.spec, row.spec.sliding_window);
        row.global_block = global_block_formula(row.spec);
        row.unfolded_at_max = model_depth(row.spec, row.spec.max_seq_len, false);
        rows.push_back(row);
    }
    return rows;
}

void cmd_report(std::ostream& out, std::string_view family) {
    const auto rows = family_rows(family);
    std::vector<std::string> notes;
    auto mark = [&](const DenseTransformerSpec& s, const std::string& key) -> std::string {
        if (std::find(s.inferred.begin(), s.inferred.end(), key) == s.inferred.end()) return "";
        const auto note = inferred_note(key);
        auto it = std::find(notes.begin(), notes.end(), note);
        if (it == notes.end()) {
            notes.push_back(note);
            it = notes.end() - 1;
        }
        return "[" + std::to_string(it - notes.begin() + 1) + "]";
    };
    auto log_cell = [](std::uint64_t v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << std::log2(static_cast<double>(v)) << " -> " << ceil_log2(v);
        return s.str();
    };

    out << "Opaque serial depth upper bounds at maximum sequence length\n\n";
    out << std::left << std::setw(14) << "model" << std::setw(24) << "formula" << std::setw(10) << "T_max"
        << "depth at T_max\n";
    for (const auto& r : rows) {
        out << pad(r.spec.name, 14) << pad(r.formula.to_string(), 24)
            << pad(std::to_string(r.spec.max_seq_len) + mark(r.spec, "max_seq_len"), 10) << with_commas(r.total_at_max) << "\n";
    }

    out << "\nIntermediate values\n\n";
    auto line = [&](const std::string& name, auto cell) {
        out << pad(name, 22);
        for (const auto& r : rows) out << pad(cell(r), 22);
        out << "\n";
    };
    line("parameter", [](const FamilyRow& r) { return r.spec.name; });
    line("num_layers", [](const FamilyRow& r) { return std::to_string(r.spec.num_layers); });
    line("embed_dim (D)", [](const FamilyRow& r) { return with_commas(r.spec.embed_dim); });
    line("hidden_dim (Hidden)", [](const FamilyRow& r) { return with_commas(r.spec.hidden_dim); });
    line("num_heads", [&](const FamilyRow& r) { return std::to_string(r.spec.num_heads) + mark(r.spec, "num_heads"); });
    line("num_kv_heads", [&](const FamilyRow& r) { return std::to_string(r.spec.num_kv_heads) + mark(r.spec, "num_kv_heads"); });
    line("head_dim (H)", [](const FamilyRow& r) { return std::to_string(r.spec.head_dim); });
    line("sliding_window (W)", [&](const FamilyRow& r) { return std::to_string(r.spec.sliding_window) + mark(r.spec, "sliding_window"); });
    line("log(V)", [&](const FamilyRow& r) { return log_cell(r.spec.vocab_size); });
    line("log(D)", [&](const FamilyRow& r) { return log_cell(r.spec.embed_dim); });
    line("log(Hidden)", [&](const FamilyRow& r) { return log_cell(r.spec.hidden_dim); });
    line("log(H)", [&](const FamilyRow& r) { return log_cell(r.spec.head_dim); });
    line("log(W)", [&](const FamilyRow& r) { return log_cell(r.spec.sliding_window); });
    line("log(T_max)", [&](const FamilyRow& r) { return log_cell(r.spec.max_seq_len); });
    line("# sliding blocks", [](const FamilyRow& r) { return std::to_string(r.spec.local_layer_count()); });
    line("# global blocks", [](const FamilyRow& r) { return std::to_string(r.spec.global_layer_count()); });
    line("sliding block depth", [](const FamilyRow& r) { return std::to_string(r.sliding_block); });
    line("global block depth", [](const FamilyRow& r) {
        return std::to_string(r.global_block.constant()) + " + 2·log(T)";
    });
    line("D_embed", [](const FamilyRow& r) { return std::to_string(embed_depth(r.spec.vocab_size)); });
    line("D_final_norm", [](const FamilyRow& r) { return std::to_string(rmsnorm_depth(r.spec.embed_dim)); });
    line("D_decode", [](const FamilyRow& r) { return std::to_string(linear_depth(r.spec.embed_dim)); });
    line("total (T = T_max)", [](const FamilyRow& r) { return with_commas(r.total_at_max); });

    out << "\nBias folding (unfolded / folded at T_max)\n\n";
    for (const auto& r : rows) {
        std::ostringstream ratio;
        ratio << std::fixed << std::setprecision(3)
              << static_cast<double>(r.unfolded_at_max) / static_cast<double>(r.total_at_max);
        out << std::setw(14) << r.spec.name << with_commas(r.unfolded_at_max) << " / " << with_commas(r.total_at_max)
            << " = " << ratio.str() << mark(r.spec, "linear_bias") << "\n";
    }
    if (!notes.empty()) {
        out << "\nNotes\n";
        for (std::size_t i = 0; i < notes.size(); ++i) out << "  [" << i + 1 << "] " << notes[i] << "\n";
    }
    out << std::right;
}

PathListing cmd_path(const ArchConfig& config, std::optional<std::uint64_t> seq_len, std::size_t top, bool no_folding) {
    const bool folding = config.folding && !no_folding;
    PathListing listing;
    auto built = build_config(config, seq_len, folding);
    if (built.unbounded) {
        listing.unbounded = built.unbounded;
        return listing;
    }
    const auto& g = built.graph;
    const auto report = opaque_serial_depth(g);
    listing.depth = report.opaque_serial_depth;
    std::uint64_t acc = 0;
    const auto& path = report.critical_path;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const Gate& gate = g.gate(path[i]);
        PathStep s;
        s.gate = path[i];
        s.label = gate.label;
        s.kind = kind_name(gate.kind);
        s.stage = stage_of(gate.label);
        s.immediate = (i == 0 && path.size() > 1) ? 0 : immediate_depth(gate.kind);
        acc += s.immediate;
        s.cumulative = acc;
        listing.steps.push_back(std::move(s));
    }
    if (listing.depth == 0) listing.steps.clear();
    listing.stages = stage_breakdown(g, path);
    for (const auto& p : near_critical_paths(g, top)) {
        listing.alternatives.push_back({p.depth, p.gates.size(), stage_breakdown(g, p.gates)});
    }
    return listing;
}

void render_path(std::ostream& out, const PathListing& l) {
    if (l.unbounded) {
        out << "depth: unbounded (" << *l.unbounded << ")\n";
        return;
    }
    out << "depth: " << l.depth << "\n";
    if (l.steps.empty()) {
        out << "critical path: (empty)\n";
    } else {
        out << "critical path (" << l.steps.size() << " gates, leaf first):\n";
        for (const auto& s : l.steps) {
            out << "  " << std::right << std::setw(6) << s.cumulative << "  +" << std::left << std::setw(3) << s.immediate
                << std::setw(12) << s.stage << pad(s.kind, 18) << s.label << "\n";
        }
    }
    if (!l.stages.empty()) {
        out << std::right << "stages:";
        const char* sep = " ";
        for (const auto& s : l.stages) {
            out << sep << s.stage << ' ' << s.depth;
            sep = " + ";
        }
        out << " = " << l.depth << "\n";
    }
    if (!l.alternatives.empty()) {
        out << "deepest paths:\n";
        for (std::size_t i = 0; i < l.alternatives.size(); ++i) {
            const auto& a = l.alternatives[i];
            out << "  #" << i + 1 << " depth " << a.depth << " (" << a.gate_count << " gates):";
            for (const auto& s : a.stages) out << ' ' << s.stage << '=' << s.depth;
            out << "\n";
        }
    }
    out << std::right;
}

}  // namespace osd

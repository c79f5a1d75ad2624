#include "reference_transformer.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "osd/circuit_oracle.hpp"

namespace osd::testkit {

namespace {

using Vec = std::vector<double>;

class Weights {
public:
    explicit Weights(const CircuitGraph& g) {
        for (const auto& gate : g.gates()) {
            if (const auto* c = std::get_if<Constant>(&gate.kind)) {
                values_[gate.label] = c->value ? *c->value : default_constant_value(gate.label);
            }
        }
    }
    double at(const std::string& name) const {
        auto it = values_.find(name);
        if (it == values_.end()) throw std::runtime_error("reference: no weight " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return values_.count(name) != 0; }

    Vec vec(const std::string& base, std::uint64_t n) const {
        Vec v(n);
        for (std::uint64_t i = 0; i < n; ++i) v[i] = at(base + "[" + std::to_string(i) + "]");
        return v;
    }
    double mat(const std::string& base, std::uint64_t r, std::uint64_t c) const {
        return at(base + "[" + std::to_string(r) + "," + std::to_string(c) + "]");
    }

private:
    std::unordered_map<std::string, double> values_;
};

Vec rmsnorm(const Vec& x, const Vec& g) {
    double ss = 0;
    for (double v : x) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + 1e-6);
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv * g[i];
    return y;
}

Vec matvec(const Weights& w, const std::string& name, const Vec& x, std::uint64_t out, bool bias) {
    Vec y(out, 0.0);
    for (std::uint64_t o = 0; o < out; ++o) {
        for (std::uint64_t i = 0; i < x.size(); ++i) y[o] += w.mat(name + ".w", o, i) * x[i];
        if (bias) y[o] += w.at(name + ".b[" + std::to_string(o) + "]");
    }
    return y;
}

Vec rotate(const Vec& x, std::uint64_t pos) {
    const std::size_t half = x.size() / 2;
    Vec y(x.size());
    for (std::size_t i = 0; i < half; ++i) {
        const double theta = static_cast<double>(pos) / std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(x.size()));
        y[i] = x[i] * std::cos(theta) - x[i + half] * std::sin(theta);
        y[i + half] = x[i + half] * std::cos(theta) + x[i] * std::sin(theta);
    }
    return y;
}

double gelu_tanh(double x) {
    return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * (x + 0.044715 * x * x * x)));
}

std::string block(std::uint64_t l) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "block%02llu", static_cast<unsigned long long>(l));
    return buf;
}

}  // namespace

DenseTransformerSpec tiny_spec() {
    DenseTransformerSpec s;
    s.name = "tiny";
    s.vocab_size = 8;
    s.embed_dim = 4;
    s.hidden_dim = 6;
    s.head_dim = 2;
    s.num_layers = 2;
    s.num_heads = 2;
    s.num_kv_heads = 1;
    s.sliding_window = 2;
    s.attention_pattern = {AttentionKind::local, AttentionKind::global};
    s.max_seq_len = 8;
    s.linear_bias = true;
    return s;
}

std::vector<double> reference_forward(const DenseTransformerSpec& s, const CircuitGraph& graph,
                                      const std::vector<std::uint64_t>& tokens) {
    const Weights w(graph);
    const auto D = s.embed_dim, H = s.head_dim, T = tokens.size();
    const bool b = s.linear_bias;
    std::vector<Vec> x(T, Vec(D));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::uint64_t d = 0; d < D; ++d) x[t][d] = w.mat("embed.table", tokens[t], d) * std::sqrt(double(D));
    }
    const auto group = s.num_heads / s.num_kv_heads;
    for (std::uint64_t l = 0; l < s.num_layers; ++l) {
        const std::string p = block(l);
        std::vector<Vec> xn(T), k(T), v(T);
        for (std::size_t t = 0; t < T; ++t) {
            xn[t] = rmsnorm(x[t], w.vec(p + ".pre_attn_norm.g", D));
            k[t] = matvec(w, p + ".attn.k_proj", xn[t], s.num_kv_heads * H, b);
            v[t] = matvec(w, p + ".attn.v_proj", xn[t], s.num_kv_heads * H, b);
        }
        const bool local = s.layer_kind(l) == AttentionKind::local;
        for (std::size_t t = 0; t < T; ++t) {
            const Vec q = matvec(w, p + ".attn.q_proj", xn[t], s.num_heads * H, b);
            const std::size_t lo = (local && t + 1 > s.sliding_window) ? t + 1 - s.sliding_window : 0;
            Vec merged;
            for (std::uint64_t h = 0; h < s.num_heads; ++h) {
                const auto g = h / group;
                Vec qh(q.begin() + h * H, q.begin() + (h + 1) * H);
                if (s.use_qk_norm) qh = rmsnorm(qh, w.vec(p + ".attn.q_norm.g", H));
                qh = rotate(qh, t);
                for (double& e : qh) e /= std::sqrt(double(H));
                Vec scores;
                for (std::size_t j = lo; j <= t; ++j) {
                    Vec kh(k[j].begin() + g * H, k[j].begin() + (g + 1) * H);
                    if (s.use_qk_norm) kh = rmsnorm(kh, w.vec(p + ".attn.k_norm.g", H));
                    kh = rotate(kh, j);
                    double dot = 0;
                    for (std::uint64_t i = 0; i < H; ++i) dot += qh[i] * kh[i];
                    scores.push_back(std::exp(dot));
                }
                double z = 0;
                for (double e : scores) z += e;
                for (std::uint64_t i = 0; i < H; ++i) {
                    double acc = 0;
                    for (std::size_t j = lo; j <= t; ++j) acc += scores[j - lo] / z * v[j][g * H + i];
                    merged.push_back(acc);
                }
            }
            Vec a = matvec(w, p + ".attn.o_proj", merged, D, b);
            if (s.use_post_attn_norm) a = rmsnorm(a, w.vec(p + ".post_attn_norm.g", D));
            for (std::uint64_t d = 0; d < D; ++d) x[t][d] += a[d];
            const Vec fn = rmsnorm(x[t], w.vec(p + ".pre_ffw_norm.g", D));
            const Vec gate = matvec(w, p + ".ffw.gate_proj", fn, s.hidden_dim, b);
            const Vec up = matvec(w, p + ".ffw.up_proj", fn, s.hidden_dim, b);
            Vec hid(s.hidden_dim);
            for (std::uint64_t i = 0; i < s.hidden_dim; ++i) hid[i] = gelu_tanh(gate[i]) * up[i];
            Vec f = matvec(w, p + ".ffw.down_proj", hid, D, b);
            if (s.use_post_ffw_norm) f = rmsnorm(f, w.vec(p + ".post_ffw_norm.g", D));
            for (std::uint64_t d = 0; d < D; ++d) x[t][d] += f[d];
        }
    }
    const Vec h = rmsnorm(x.back(), w.vec("final_norm.g", D));
    Vec logits(s.vocab_size, 0.0);
    for (std::uint64_t vv = 0; vv < s.vocab_size; ++vv) {
        for (std::uint64_t d = 0; d < D; ++d) {
            const double wt = s.tie_embeddings ? w.mat("embed.table", vv, d) : w.mat("decode.logits.w", vv, d);
            logits[vv] += wt * h[d];
        }
        if (b) logits[vv] += w.at("decode.logits.b[" + std::to_string(vv) + "]");
    }
    return logits;
}

}  // namespace osd::testkit

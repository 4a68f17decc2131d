#pragma once
// Independent reference computations shared by unit tests and the acceptance suite.

#include <algorithm>
#include <array>
#include <cstdio>
#include <span>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "idte/hashtag_graph.hpp"
#include "idte/labels.hpp"
#include "idte/metrics.hpp"
#include "idte/model.hpp"
#include "idte/random.hpp"
#include "idte/records.hpp"
#include "idte/tensor.hpp"

namespace idte::oracle {

// ---- metrics by direct enumeration ---------------------------------------

struct Metrics {
    double subset_accuracy, hamming_loss;
    double micro_p, micro_r, micro_f1;
    double macro_p, macro_r, macro_f1;
};

inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline Metrics metrics(const std::vector<LabelVector>& y, const std::vector<LabelVector>& yhat) {
    const std::size_t n = y.size();
    const std::size_t w = y.front().width();
    double exact = 0.0, wrong = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t mism = 0;
        for (std::size_t c = 0; c < w; ++c) mism += (y[i][c] != yhat[i][c]);
        exact += (mism == 0);
        wrong += static_cast<double>(mism) / static_cast<double>(w);
    }
    double TP = 0, FP = 0, FN = 0, sp = 0, sr = 0, sf = 0;
    for (std::size_t c = 0; c < w; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (y[i][c] && yhat[i][c]) tp += 1;
            if (!y[i][c] && yhat[i][c]) fp += 1;
            if (y[i][c] && !yhat[i][c]) fn += 1;
        }
        TP += tp, FP += fp, FN += fn;
        sp += ratio(tp, tp + fp);
        sr += ratio(tp, tp + fn);
        sf += ratio(2 * tp, 2 * tp + fp + fn);
    }
    const double W = static_cast<double>(w);
    return {exact / n, wrong / n, ratio(TP, TP + FP), ratio(TP, TP + FN), ratio(2 * TP, 2 * TP + FP + FN),
            sp / W, sr / W, sf / W};
}

inline double max_metric_diff(const Metrics& a, const MetricsReport& b) {
    const double d[] = {a.subset_accuracy - b.subset_accuracy, a.hamming_loss - b.hamming_loss,
                        a.micro_p - b.micro_precision,         a.micro_r - b.micro_recall,
                        a.micro_f1 - b.micro_f1,               a.macro_p - b.macro_precision,
                        a.macro_r - b.macro_recall,            a.macro_f1 - b.macro_f1};
    double m = 0.0;
    for (double x : d) m = std::max(m, std::abs(x));
    return m;
}

inline LabelVector random_labels(std::size_t width, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution b(p);
    LabelVector v(width);
    for (std::size_t c = 0; c < width; ++c) v.set(c, b(rng));
    return v;
}

// ---- finite differences ---------------------------------------------------

struct GradCheck {
    std::size_t checked = 0;
    double worst = 0.0;
    std::string worst_at;
};

/// |a - n| / max(|a|, |n|, floor)
inline double rel_error(double a, double n, double floor) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Central differences over every element of every tensor in `params`.
/// `loss` evaluates the scalar for given parameters; `analytic` is the tape
/// gradient at the unperturbed point.
inline GradCheck check_gradients(ModelParams params, const GradientMap& analytic,
                                 const std::function<double(const ModelParams&)>& loss, double h = 1e-5,
                                 double floor = 1e-6, std::size_t stride = 1) {
    GradCheck out;
    for (auto& [name, t] : params.tensors) {
        const auto& g = analytic.at(name).data();
        for (std::size_t k = 0; k < t.size(); k += stride) {
            const double orig = t.data()[k];
            t.data()[k] = orig + h;
            const double fp = loss(params);
            t.data()[k] = orig - h;
            const double fm = loss(params);
            t.data()[k] = orig;
            const double num = (fp - fm) / (2 * h);
            const double e = rel_error(g[k], num, floor);
            ++out.checked;
            if (e > out.worst) {
                out.worst = e;
                out.worst_at = name + "[" + std::to_string(k) + "]";
            }
        }
    }
    return out;
}

/// Tiny model setup used by gradient checks.
struct TinyProblem {
    ModelConfig config;
    std::vector<MultimodalInput> inputs;
    std::vector<LabelVector> targets;
};

inline TinyProblem tiny_problem(std::uint64_t seed, std::size_t batch = 3) {
    TinyProblem p;
    p.config.d_model = 16;
    p.config.n_heads = 2;
    p.config.n_layers = 2;
    p.config.ff_dim = 32;
    p.config.vocab_size = 64;
    p.config.image_tokens = 2;
    p.config.d_img = 8;
    p.config.max_seq = 2 + 2 + 8;
    p.config.drug_count = 9;
    p.config.fbc_rank = 4;
    p.config.seed = seed;
    std::mt19937_64 rng(seed * 7919 + 13);
    std::uniform_int_distribution<int> tok(4, 63);
    std::uniform_int_distribution<std::size_t> len(1, 8);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t b = 0; b < batch; ++b) {
        TokenSequence ts;
        ts.ids.push_back(Vocabulary::kCls);
        ts.tokens.push_back("[CLS]");
        const std::size_t t = len(rng);
        for (std::size_t i = 0; i < t; ++i) {
            ts.ids.push_back(tok(rng));
            ts.tokens.push_back("w");
        }
        std::vector<double> img(p.config.d_img);
        for (auto& x : img) x = nd(rng);
        // the first example is padded so the mask path is exercised
        p.inputs.push_back(make_input(ts, img, p.config, b == 0 ? 8 : 0));
        std::vector<std::size_t> drugs;
        for (std::size_t c = 1; c <= 9; ++c)
            if (std::bernoulli_distribution(0.2)(rng)) drugs.push_back(c);
        p.targets.push_back(LabelVector::from_drugs(9, drugs));
    }
    return p;
}

/// Tape-based loss and gradient for a batch.
inline std::pair<double, GradientMap> loss_and_grad(ModelKind kind, const TinyProblem& p, const ModelParams& params) {
    Tape tape;
    graph::ParamBinder bind(tape, params);
    std::vector<Var> rows;
    for (const auto& in : p.inputs) rows.push_back(graph::logits(kind, bind, in, p.config));
    Var probs = ops::sigmoid(ops::concat_rows(rows));
    Var loss = graph::bce_loss(probs, p.targets);
    const double v = loss.value().item();
    return {v, tape.backward(loss, &params)};
}

inline double plain_loss(ModelKind kind, const TinyProblem& p, const ModelParams& params) {
    std::vector<ProbVector> probs;
    for (const auto& in : p.inputs) probs.push_back(sigmoid(forward(kind, in, params, p.config)));
    return bce_loss(probs, p.targets);
}

// ---- graphs -----------------------------------------------------------------

/// Betweenness via all-pairs distances and path counts:
/// B(v) = sum over s<t, v not in {s,t}, d(s,v)+d(v,t)=d(s,t) of sigma_sv*sigma_vt/sigma_st.
inline std::vector<double> betweenness(const CooccurrenceGraph& g) {
    const std::size_t n = g.node_count();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0;
        for (const auto& [j, w] : g.neighbors(i)) d[i][j] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    // sigma by increasing distance
    std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return d[s][a] < d[s][b]; });
        sigma[s][s] = 1;
        for (std::size_t t : order) {
            if (t == s || d[s][t] == inf) continue;
            for (const auto& [u, w] : g.neighbors(t))
                if (d[s][u] + 1 == d[s][t]) sigma[s][t] += sigma[s][u];
        }
    }
    std::vector<double> b(n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = s + 1; t < n; ++t) {
            if (d[s][t] == inf) continue;
            for (std::size_t v = 0; v < n; ++v) {
                if (v == s || v == t) continue;
                if (d[s][v] + d[v][t] == d[s][t]) b[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
            }
        }
    return b;
}

/// Two planted blocks of `size` nodes each, built from two-tag posts so the
/// graph goes through the regular construction path. Node names are random
/// with respect to blocks. Returns the graph and each node's true block.
inline std::pair<CooccurrenceGraph, std::vector<int>> planted_blocks(std::size_t size, double p_in, double p_out,
                                                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 2 * size;
    std::vector<int> named_block(n);
    for (std::size_t i = 0; i < n; ++i) named_block[i] = i < size ? 0 : 1;
    shuffle(std::span<int>(named_block), rng);
    auto name = [](std::size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "#n%02zu", i);
        return std::string(buf);
    };
    std::vector<SuspectIDTE> posts;
    std::uint64_t id = 1;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double p = named_block[a] == named_block[b] ? p_in : p_out;
            if (bernoulli(rng, p)) {
                SuspectIDTE r;
                r.id = id++;
                r.hashtags = {name(a), name(b)};
                posts.push_back(std::move(r));
            }
        }
    auto g = build_cooccurrence_graph(posts);
    std::vector<int> block(g.node_count());
    for (std::size_t v = 0; v < g.node_count(); ++v) block[v] = named_block[std::stoul(g.tag(v).substr(2))];
    return {std::move(g), block};
}

/// Node accuracy of a partition against two blocks, up to relabeling: the
/// best assignment of two distinct communities to the two blocks.
inline double block_accuracy(const CommunityPartition& part, const std::vector<int>& block) {
    const std::size_t k = part.count;
    std::vector<std::array<std::size_t, 2>> hits(k, {0, 0});
    for (std::size_t v = 0; v < block.size(); ++v) ++hits[part.community[v]][block[v]];
    std::size_t best = 0;
    for (std::size_t c0 = 0; c0 < k; ++c0) {
        best = std::max(best, hits[c0][0]);  // one community only
        for (std::size_t c1 = 0; c1 < k; ++c1)
            if (c0 != c1) best = std::max(best, hits[c0][0] + hits[c1][1]);
    }
    return static_cast<double>(best) / static_cast<double>(block.size());
}

}  // namespace idte::oracle

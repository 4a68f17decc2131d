#include "idte/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "idte/random.hpp"

namespace idte {

namespace {

constexpr double kMaskedScore = -1e30;

std::string layer_name(std::size_t layer, const char* part) { return "layer" + std::to_string(layer) + "." + part; }

bool uses_encoder(ModelKind kind) { return kind != ModelKind::image_only; }

}  // namespace

void ModelConfig::validate() const {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
        throw ContractError("d_model (" + std::to_string(d_model) + ") must be a positive multiple of n_heads (" +
                            std::to_string(n_heads) + ")");
    if (n_layers == 0 || ff_dim == 0) throw ContractError("n_layers and ff_dim must be positive");
    if (vocab_size < Vocabulary::kReserved) throw ContractError("vocab_size must include the reserved tokens");
    if (drug_count < 1) throw ContractError("drug_count must be at least 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("threshold must lie in (0, 1)");
    if (max_seq < image_tokens + 2)
        throw ContractError("max_seq (" + std::to_string(max_seq) + ") must be at least M + 2 (" +
                            std::to_string(image_tokens + 2) + ")");
    if (d_img == 0) throw ContractError("d_img must be positive");
    if (fbc_rank == 0) throw ContractError("fbc_rank must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"d_model", c.d_model},       {"n_heads", c.n_heads},   {"n_layers", c.n_layers},
                       {"ff_dim", c.ff_dim},         {"vocab_size", c.vocab_size}, {"max_seq", c.max_seq},
                       {"image_tokens", c.image_tokens}, {"d_img", c.d_img},   {"drug_count", c.drug_count},
                       {"fbc_rank", c.fbc_rank},     {"threshold", c.threshold}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.d_model = j.value("d_model", d.d_model);
    c.n_heads = j.value("n_heads", d.n_heads);
    c.n_layers = j.value("n_layers", d.n_layers);
    c.ff_dim = j.value("ff_dim", d.ff_dim);
    c.vocab_size = j.value("vocab_size", d.vocab_size);
    c.max_seq = j.value("max_seq", d.max_seq);
    c.image_tokens = j.value("image_tokens", d.image_tokens);
    c.d_img = j.value("d_img", d.d_img);
    c.drug_count = j.value("drug_count", d.drug_count);
    c.fbc_rank = j.value("fbc_rank", d.fbc_rank);
    c.threshold = j.value("threshold", d.threshold);
    c.seed = j.value("seed", d.seed);
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::mmbt: return "mmbt";
        case ModelKind::text_only: return "text_only";
        case ModelKind::image_only: return "image_only";
        case ModelKind::concat: return "concat";
        case ModelKind::fbc: return "fbc";
    }
    return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
    for (auto k : {ModelKind::mmbt, ModelKind::text_only, ModelKind::image_only, ModelKind::concat, ModelKind::fbc})
        if (to_string(k) == name) return k;
    throw ContractError("unknown model kind '" + std::string(name) + "'");
}

MultimodalInput make_input(const TokenSequence& tokens, std::span<const double> image, const ModelConfig& config,
                           std::size_t pad_text_to) {
    if (tokens.ids.empty() || tokens.ids[0] != Vocabulary::kCls)
        throw ContractError("token sequence must start with [CLS]");
    const std::size_t capacity = config.max_seq - config.image_tokens - 2;
    MultimodalInput in;
    in.text_ids.assign(tokens.ids.begin() + 1, tokens.ids.end());
    if (in.text_ids.size() > capacity) in.text_ids.resize(capacity);
    while (in.text_ids.size() < std::min(pad_text_to, capacity)) in.text_ids.push_back(Vocabulary::kPad);
    in.image.assign(image.begin(), image.end());

    in.segments.assign(1 + config.image_tokens, 0);
    in.segments.insert(in.segments.end(), 1 + in.text_ids.size(), 1);
    in.mask.assign(2 + config.image_tokens, 1);
    for (int id : in.text_ids) in.mask.push_back(id == Vocabulary::kPad ? 0 : 1);
    return in;
}

ModelParams init_params(const ModelConfig& config, ModelKind kind) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    ModelParams p;
    const std::size_t d = config.d_model;
    auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
        p.tensors.emplace(name, glorot_uniform(in, out, rng));
    };
    auto zeros = [&](const std::string& name, std::size_t n) { p.tensors.emplace(name, Tensor({1, n}, 0.0)); };
    auto ones = [&](const std::string& name, std::size_t n) { p.tensors.emplace(name, Tensor({1, n}, 1.0)); };

    if (uses_encoder(kind)) {
        weight("tok_emb", config.vocab_size, d);
        weight("pos_emb", config.max_seq, d);
        weight("seg_emb", 2, d);
        for (std::size_t l = 0; l < config.n_layers; ++l) {
            ones(layer_name(l, "ln1.g"), d);
            zeros(layer_name(l, "ln1.b"), d);
            for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) weight(layer_name(l, w), d, d);
            for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) zeros(layer_name(l, b), d);
            ones(layer_name(l, "ln2.g"), d);
            zeros(layer_name(l, "ln2.b"), d);
            weight(layer_name(l, "ff1.w"), d, config.ff_dim);
            zeros(layer_name(l, "ff1.b"), config.ff_dim);
            weight(layer_name(l, "ff2.w"), config.ff_dim, d);
            zeros(layer_name(l, "ff2.b"), d);
        }
        ones("ln_f.g", d);
        zeros("ln_f.b", d);
    }
    const std::size_t width = config.label_width();
    switch (kind) {
        case ModelKind::mmbt:
            if (config.image_tokens > 0) {
                weight("img_proj.w", config.d_img, config.image_tokens * d);
                zeros("img_proj.b", config.image_tokens * d);
            }
            weight("head.w", d, width);
            break;
        case ModelKind::text_only:
            weight("head.w", d, width);
            break;
        case ModelKind::image_only:
            weight("mlp.w1", config.d_img, d);
            zeros("mlp.b1", d);
            weight("head.w", d, width);
            break;
        case ModelKind::concat:
            weight("img_feat.w", config.d_img, d);
            zeros("img_feat.b", d);
            weight("head.w", 2 * d, width);
            break;
        case ModelKind::fbc:
            weight("img_feat.w", config.d_img, d);
            zeros("img_feat.b", d);
            weight("fbc.u", d, config.fbc_rank);
            weight("fbc.v", d, config.fbc_rank);
            weight("fbc.p", config.fbc_rank, d);
            weight("head.w", d, width);
            break;
    }
    zeros("head.b", width);
    return p;
}

// ---------------------------------------------------------------------------
// Graph construction

namespace graph {

namespace {

Var linear(ParamBinder& p, Var x, const std::string& w, const std::string& b) {
    return ops::add(ops::matmul(x, p(w)), p(b));
}

Var affine_norm(ParamBinder& p, Var x, const std::string& g, const std::string& b) {
    return ops::add(ops::mul(ops::layer_norm(x), p(g)), p(b));
}

Var image_row(ParamBinder& p, const MultimodalInput& input, const ModelConfig& config) {
    if (input.image.size() != config.d_img)
        throw ContractError("image feature length " + std::to_string(input.image.size()) + " != d_img " +
                            std::to_string(config.d_img));
    return p.tape().constant(Tensor({1, config.d_img}, input.image));
}

std::optional<Var> image_tokens(ParamBinder& p, const MultimodalInput& input, const ModelConfig& config) {
    if (config.image_tokens == 0) return std::nullopt;
    Var x = image_row(p, input, config);
    Var flat = linear(p, x, "img_proj.w", "img_proj.b");
    return ops::reshape(flat, {config.image_tokens, config.d_model});
}

Var attention(ParamBinder& p, std::size_t l, Var x, const std::optional<Var>& mask_row, const ModelConfig& config) {
    const std::size_t dh = config.d_model / config.n_heads;
    Var q = linear(p, x, layer_name(l, "attn.wq"), layer_name(l, "attn.bq"));
    Var k = linear(p, x, layer_name(l, "attn.wk"), layer_name(l, "attn.bk"));
    Var v = linear(p, x, layer_name(l, "attn.wv"), layer_name(l, "attn.bv"));
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> heads;
    heads.reserve(config.n_heads);
    for (std::size_t h = 0; h < config.n_heads; ++h) {
        Var qh = ops::slice_cols(q, h * dh, dh);
        Var kh = ops::slice_cols(k, h * dh, dh);
        Var vh = ops::slice_cols(v, h * dh, dh);
        Var scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv);
        if (mask_row) scores = ops::add(scores, *mask_row);
        heads.push_back(ops::matmul(ops::softmax_rows(scores), vh));
    }
    Var merged = heads.size() == 1 ? heads[0] : ops::concat_cols(heads);
    return linear(p, merged, layer_name(l, "attn.wo"), layer_name(l, "attn.bo"));
}

// Encodes [CLS] (+ image tokens) + [SEP] + text and returns the final hidden
// states after the closing layer norm.
Var encode(ParamBinder& p, const MultimodalInput& input, const ModelConfig& config, bool with_image) {
    const std::size_t m = with_image ? config.image_tokens : 0;
    const std::size_t expected = 1 + config.image_tokens + 1 + input.text_ids.size();
    if (input.segments.size() != expected || input.mask.size() != expected)
        throw ContractError("input layout inconsistent: expected " + std::to_string(expected) + " positions");
    const std::size_t length = 2 + m + input.text_ids.size();
    if (length > config.max_seq)
        throw ContractError("sequence length " + std::to_string(length) + " exceeds max_seq " +
                            std::to_string(config.max_seq));
    for (int id : input.text_ids)
        if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size)
            throw ContractError("token id " + std::to_string(id) + " outside vocabulary");

    Var tok = p("tok_emb");
    std::vector<Var> parts;
    const int cls = Vocabulary::kCls, sep = Vocabulary::kSep;
    parts.push_back(ops::embedding_lookup(tok, std::span<const int>(&cls, 1)));
    if (with_image)
        if (auto img = image_tokens(p, input, config)) parts.push_back(*img);
    parts.push_back(ops::embedding_lookup(tok, std::span<const int>(&sep, 1)));
    if (!input.text_ids.empty()) parts.push_back(ops::embedding_lookup(tok, input.text_ids));
    Var x = ops::concat_rows(parts);

    // Segment ids and mask for the positions actually present.
    std::vector<int> segments;
    std::vector<std::uint8_t> mask;
    for (std::size_t i = 0; i < expected; ++i) {
        if (!with_image && i >= 1 && i <= config.image_tokens) continue;
        segments.push_back(input.segments[i]);
        mask.push_back(input.mask[i]);
    }
    std::vector<int> positions(length);
    std::iota(positions.begin(), positions.end(), 0);
    x = ops::add(x, ops::embedding_lookup(p("pos_emb"), positions));
    x = ops::add(x, ops::embedding_lookup(p("seg_emb"), segments));

    std::optional<Var> mask_row;
    if (std::find(mask.begin(), mask.end(), 0) != mask.end()) {
        Tensor row({1, length}, 0.0);
        for (std::size_t i = 0; i < length; ++i) row.data()[i] = mask[i] ? 0.0 : kMaskedScore;
        mask_row = p.tape().constant(std::move(row));
    }

    for (std::size_t l = 0; l < config.n_layers; ++l) {
        Var a = affine_norm(p, x, layer_name(l, "ln1.g"), layer_name(l, "ln1.b"));
        x = ops::add(x, attention(p, l, a, mask_row, config));
        Var f = affine_norm(p, x, layer_name(l, "ln2.g"), layer_name(l, "ln2.b"));
        f = ops::gelu(linear(p, f, layer_name(l, "ff1.w"), layer_name(l, "ff1.b")));
        f = linear(p, f, layer_name(l, "ff2.w"), layer_name(l, "ff2.b"));
        x = ops::add(x, f);
    }
    return affine_norm(p, x, "ln_f.g", "ln_f.b");
}

}  // namespace

Var text_cls_state(ParamBinder& p, const MultimodalInput& input, const ModelConfig& config) {
    return ops::slice_rows(encode(p, input, config, false), 0, 1);
}

Var fbc_interaction(Var phi_x, Var phi_t, Var u, Var v, Var p) {
    return ops::matmul(ops::mul(ops::matmul(phi_x, u), ops::matmul(phi_t, v)), p);
}

Var logits(ModelKind kind, ParamBinder& p, const MultimodalInput& input, const ModelConfig& config) {
    switch (kind) {
        case ModelKind::mmbt: {
            Var cls = ops::slice_rows(encode(p, input, config, true), 0, 1);
            return linear(p, cls, "head.w", "head.b");
        }
        case ModelKind::text_only:
            return linear(p, text_cls_state(p, input, config), "head.w", "head.b");
        case ModelKind::image_only: {
            Var h = ops::gelu(linear(p, image_row(p, input, config), "mlp.w1", "mlp.b1"));
            return linear(p, h, "head.w", "head.b");
        }
        case ModelKind::concat: {
            Var phi_x = linear(p, image_row(p, input, config), "img_feat.w", "img_feat.b");
            Var phi_t = text_cls_state(p, input, config);
            const std::vector<Var> both{phi_x, phi_t};
            return linear(p, ops::concat_cols(both), "head.w", "head.b");
        }
        case ModelKind::fbc: {
            Var phi_x = linear(p, image_row(p, input, config), "img_feat.w", "img_feat.b");
            Var phi_t = text_cls_state(p, input, config);
            Var z = fbc_interaction(phi_x, phi_t, p("fbc.u"), p("fbc.v"), p("fbc.p"));
            return linear(p, z, "head.w", "head.b");
        }
    }
    throw ContractError("unknown model kind");
}

Var bce_loss(Var probs, const std::vector<LabelVector>& targets) {
    Tape& tape = probs.tape();
    const Tensor& P = probs.value();
    const std::size_t n = P.rows(), w = P.cols();
    if (targets.size() != n) throw ContractError("bce_loss: batch size mismatch");
    std::vector<double> y(n * w);
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i].width() != w)
            throw ContractError("bce_loss: label width " + std::to_string(targets[i].width()) + " != " + std::to_string(w));
        for (std::size_t c = 0; c < w; ++c) y[i * w + c] = targets[i][c] ? 1.0 : 0.0;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n * w; ++k) {
        const double pc = std::clamp(P.data()[k], kProbClamp, 1.0 - kProbClamp);
        total += y[k] * std::log(pc) + (1.0 - y[k]) * std::log(1.0 - pc);
    }
    const double loss = -total / static_cast<double>(n);
    const std::size_t ip = probs.id();
    return tape.record(Tensor::scalar(loss), {ip}, [&tape, ip, y = std::move(y), n](std::span<const double> go, Tape::GradBuffers& grads) {
        auto pd = tape.value(ip).data();
        auto& gp = tape.grad_of(grads, ip);
        const double s = go[0] / static_cast<double>(n);
        for (std::size_t k = 0; k < gp.size(); ++k) {
            const double raw = pd[k];
            if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;  // clamp is flat here
            gp[k] += -s * (y[k] / raw - (1.0 - y[k]) / (1.0 - raw));
        }
    });
}

}  // namespace graph

// ---------------------------------------------------------------------------
// Public forward API

std::vector<std::vector<double>> encode_image_tokens(std::span<const double> image_feature, const ModelParams& params,
                                                     const ModelConfig& config) {
    if (image_feature.size() != config.d_img)
        throw ContractError("image feature length " + std::to_string(image_feature.size()) + " != d_img " +
                            std::to_string(config.d_img));
    std::vector<std::vector<double>> rows;
    if (config.image_tokens == 0) return rows;
    const Tensor& w = params.at("img_proj.w");
    const Tensor& b = params.at("img_proj.b");
    const std::size_t d = config.d_model, m = config.image_tokens;
    if (w.rows() != config.d_img || w.cols() != m * d || b.size() != m * d)
        throw ContractError("img_proj shape does not match config");
    rows.assign(m, std::vector<double>(d, 0.0));
    for (std::size_t k = 0; k < m * d; ++k) {
        double s = b.data()[k];
        for (std::size_t i = 0; i < config.d_img; ++i) s += image_feature[i] * w(i, k);
        rows[k / d][k % d] = s;
    }
    return rows;
}

LogitVector forward(ModelKind kind, const MultimodalInput& input, const ModelParams& params, const ModelConfig& config) {
    Tape tape;
    graph::ParamBinder binder(tape, params);
    Var out = graph::logits(kind, binder, input, config);
    return out.value().vec();
}

LogitVector mmbt_forward(const MultimodalInput& input, const ModelParams& params, const ModelConfig& config) {
    return forward(ModelKind::mmbt, input, params, config);
}

LogitVector baseline_forward(ModelKind kind, const MultimodalInput& input, const ModelParams& params,
                             const ModelConfig& config) {
    if (kind == ModelKind::mmbt) throw ContractError("baseline_forward: mmbt is not a baseline kind");
    return forward(kind, input, params, config);
}

ProbVector sigmoid(const LogitVector& logits) {
    ProbVector p(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double v = logits[i];
        p[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return p;
}

LabelVector predict_labels(std::span<const double> probs, double tau) {
    LabelVector out(probs.size());
    for (std::size_t c = 0; c < probs.size(); ++c) out.set(c, probs[c] >= tau);
    return out;
}

double bce_loss(std::span<const ProbVector> probs, std::span<const LabelVector> targets) {
    if (probs.size() != targets.size()) throw ContractError("bce_loss: batch size mismatch");
    if (probs.empty()) throw ContractError("bce_loss: empty batch");
    const std::size_t w = probs[0].size();
    Tensor t({probs.size(), w}, 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i].size() != w) throw ContractError("bce_loss: ragged probability batch");
        std::copy(probs[i].begin(), probs[i].end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * w));
    }
    Tape tape;
    Var p = tape.constant(std::move(t));
    return graph::bce_loss(p, std::vector<LabelVector>(targets.begin(), targets.end())).value().item();
}

// ---------------------------------------------------------------------------
// Training

void to_json(nlohmann::json& j, const TrainHistory& h) {
    j = nlohmann::json::object();
    j["initial_train_loss"] = h.initial_train_loss;
    auto epochs = nlohmann::json::array();
    for (const auto& e : h.epochs) {
        nlohmann::json row{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
        row["metrics"] = e.metrics ? nlohmann::json(*e.metrics) : nlohmann::json(nullptr);
        epochs.push_back(std::move(row));
    }
    j["epochs"] = std::move(epochs);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ContractError("train_fraction must lie in (0, 1]");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    shuffle(std::span<std::size_t>(idx), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, n > 0 ? 1 : 0, n);
    std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    return {tr, te};
}

namespace {

double batch_loss_and_grads(ModelKind kind, const std::vector<const Example*>& batch, const ModelParams& params,
                            const ModelConfig& config, GradientMap* grads) {
    Tape tape;
    graph::ParamBinder binder(tape, params);
    std::vector<Var> rows;
    std::vector<LabelVector> targets;
    rows.reserve(batch.size());
    for (const Example* ex : batch) {
        rows.push_back(graph::logits(kind, binder, ex->input, config));
        targets.push_back(ex->labels);
    }
    Var probs = ops::sigmoid(ops::concat_rows(rows));
    Var loss = graph::bce_loss(probs, targets);
    if (grads) *grads = tape.backward(loss, &params);
    return loss.value().item();
}

}  // namespace

double mean_loss(ModelKind kind, const std::vector<Example>& examples, const ModelParams& params, const ModelConfig& config) {
    if (examples.empty()) throw ContractError("mean_loss: no examples");
    double total = 0.0;
    constexpr std::size_t chunk = 64;
    for (std::size_t s = 0; s < examples.size(); s += chunk) {
        std::vector<const Example*> batch;
        for (std::size_t i = s; i < std::min(examples.size(), s + chunk); ++i) batch.push_back(&examples[i]);
        total += batch_loss_and_grads(kind, batch, params, config, nullptr) * static_cast<double>(batch.size());
    }
    return total / static_cast<double>(examples.size());
}

MetricsReport evaluate_examples(ModelKind kind, const std::vector<Example>& examples, const ModelParams& params,
                                const ModelConfig& config) {
    std::vector<LabelVector> truths, preds;
    truths.reserve(examples.size());
    preds.reserve(examples.size());
    for (const auto& ex : examples) {
        truths.push_back(ex.labels);
        preds.push_back(predict_labels(sigmoid(forward(kind, ex.input, params, config)), config.threshold));
    }
    return evaluate(truths, preds);
}

ExampleTrainResult train_examples(ModelKind kind, const std::vector<Example>& train_set, const std::vector<Example>& test_set,
                                  const ModelConfig& config, const TrainConfig& train, ModelParams initial) {
    if (train_set.empty()) throw ContractError("train: empty training set");
    if (train.batch_size == 0) throw ContractError("train: batch_size must be positive");
    config.validate();
    ExampleTrainResult result{std::move(initial), {}};
    result.history.initial_train_loss = mean_loss(kind, train_set, result.params, config);

    AdamState state = AdamState::for_params(result.params, train.adam);
    std::mt19937_64 rng(train.shuffle_seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < order.size(); s += train.batch_size) {
            std::vector<const Example*> batch;
            for (std::size_t i = s; i < std::min(order.size(), s + train.batch_size); ++i) batch.push_back(&train_set[order[i]]);
            GradientMap grads;
            const double loss = batch_loss_and_grads(kind, batch, result.params, config, &grads);
            epoch_loss += loss * static_cast<double>(batch.size());
            adam_step_inplace(result.params, grads, state);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
        if (train.evaluate_each_epoch && !test_set.empty())
            rec.metrics = evaluate_examples(kind, test_set, result.params, config);
        result.history.epochs.push_back(std::move(rec));
    }
    return result;
}

std::vector<Example> make_examples(const std::vector<SuspectIDTE>& records, std::span<const std::size_t> index,
                                   const Vocabulary& vocab, const TokenizerOptions& tokenizer, const ModelConfig& config) {
    std::vector<Example> out;
    out.reserve(index.size());
    const std::size_t text_capacity = config.max_seq - config.image_tokens - 1;
    for (std::size_t i : index) {
        const auto& r = records.at(i);
        if (!r.labels) throw ValidationError("record " + std::to_string(r.id) + " is unlabeled");
        if (r.labels->width() != config.label_width())
            throw ValidationError("record " + std::to_string(r.id) + " has " + std::to_string(r.labels->width()) +
                                  " label slots, expected " + std::to_string(config.label_width()));
        validate_ground_truth(*r.labels, std::to_string(r.id));
        if (r.image_features.size() != config.d_img)
            throw ValidationError("record " + std::to_string(r.id) + " has " + std::to_string(r.image_features.size()) +
                                  " image features, expected " + std::to_string(config.d_img));
        auto tokens = tokenize(r.text, vocab, text_capacity, tokenizer);
        out.push_back(Example{std::to_string(r.id), make_input(tokens, r.image_features, config), *r.labels});
    }
    return out;
}

TrainOutcome train(const std::vector<SuspectIDTE>& records, ModelKind kind, ModelConfig config, const TrainConfig& train,
                   const TokenizerOptions& tokenizer, const VocabOptions& vocab_options) {
    if (records.empty()) throw ContractError("train: empty dataset");
    for (const auto& r : records) {
        if (!r.labels) throw ValidationError("record " + std::to_string(r.id) + " is unlabeled");
        validate_ground_truth(*r.labels, std::to_string(r.id));
    }
    config.drug_count = records.front().labels->width() - 1;
    config.d_img = records.front().image_features.empty() ? config.d_img : records.front().image_features.size();

    auto [tr, te] = split_indices(records.size(), train.train_fraction, train.split_seed);
    std::vector<std::string> texts;
    texts.reserve(tr.size());
    for (auto i : tr) texts.push_back(records[i].text);
    Vocabulary vocab = build_vocab(texts, vocab_options.min_freq, vocab_options.max_size, tokenizer);
    config.vocab_size = vocab.size();
    config.validate();

    auto train_set = make_examples(records, tr, vocab, tokenizer, config);
    auto test_set = make_examples(records, te, vocab, tokenizer, config);
    auto result = train_examples(kind, train_set, test_set, config, train, init_params(config, kind));

    TrainOutcome out;
    out.model = TrainedModel{kind, config, std::move(vocab), tokenizer, std::move(result.params)};
    out.history = std::move(result.history);
    out.train_index = std::move(tr);
    out.test_index = std::move(te);
    return out;
}

std::vector<ProbVector> predict_probs(const TrainedModel& model, const std::vector<SuspectIDTE>& records) {
    std::vector<ProbVector> out;
    out.reserve(records.size());
    const std::size_t text_capacity = model.config.max_seq - model.config.image_tokens - 1;
    for (const auto& r : records) {
        auto tokens = tokenize(r.text, model.vocab, text_capacity, model.tokenizer);
        auto input = make_input(tokens, r.image_features, model.config);
        out.push_back(sigmoid(forward(model.kind, input, model.params, model.config)));
    }
    return out;
}

MetricsReport evaluate_records(const TrainedModel& model, const std::vector<SuspectIDTE>& records) {
    std::vector<LabelVector> truths, preds;
    const auto probs = predict_probs(model, records);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].labels) throw ValidationError("record " + std::to_string(records[i].id) + " is unlabeled");
        truths.push_back(*records[i].labels);
        preds.push_back(predict_labels(probs[i], model.config.threshold));
    }
    return evaluate(truths, preds);
}

// ---------------------------------------------------------------------------
// Persistence

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".meta.json";
    return p;
}

void save_model(const std::filesystem::path& checkpoint, const TrainedModel& model) {
    save_checkpoint(checkpoint, model.params);
    nlohmann::json meta;
    meta["kind"] = to_string(model.kind);
    meta["config"] = model.config;
    std::vector<std::string> tokens(model.vocab.tokens().begin() + Vocabulary::kReserved, model.vocab.tokens().end());
    meta["vocab"] = tokens;
    meta["normalize"] = model.tokenizer.normalize;
    auto glyphs = nlohmann::json::array();
    for (const auto& [from, to] : model.tokenizer.rules.homoglyphs)
        glyphs.push_back({static_cast<std::uint32_t>(from), std::string(1, to)});
    meta["homoglyphs"] = std::move(glyphs);
    meta["separators"] = utf8_encode(model.tokenizer.rules.separators);
    std::ofstream out(sidecar_path(checkpoint), std::ios::binary);
    if (!out) throw IoError("cannot write " + sidecar_path(checkpoint).string());
    out << meta.dump(2) << '\n';
}

TrainedModel load_model(const std::filesystem::path& checkpoint) {
    if (!std::filesystem::exists(checkpoint)) throw IoError("model checkpoint not found: " + checkpoint.string());
    TrainedModel model;
    model.params = load_checkpoint(checkpoint);
    std::ifstream in(sidecar_path(checkpoint));
    if (!in) throw IoError("model metadata not found: " + sidecar_path(checkpoint).string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in);
        model.kind = model_kind_from_string(meta.at("kind").get<std::string>());
        model.config = meta.at("config").get<ModelConfig>();
        model.vocab = Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
        model.tokenizer.normalize = meta.value("normalize", true);
        if (meta.contains("homoglyphs")) {
            model.tokenizer.rules.homoglyphs.clear();
            for (const auto& g : meta.at("homoglyphs"))
                model.tokenizer.rules.homoglyphs[static_cast<char32_t>(g.at(0).get<std::uint32_t>())] = g.at(1).get<std::string>().at(0);
        }
        if (meta.contains("separators")) model.tokenizer.rules.separators = utf8_decode(meta.at("separators").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model metadata: " + std::string(e.what()));
    }
    model.config.validate();
    return model;
}

}  // namespace idte

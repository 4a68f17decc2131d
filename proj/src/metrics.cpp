#include "idte/metrics.hpp"

#include <json.hpp>

#include "idte/error.hpp"

namespace idte {

namespace {

void check_batch(std::span<const LabelVector> truths, std::span<const LabelVector> preds) {
    if (truths.empty()) throw ContractError("metrics: empty batch");
    if (truths.size() != preds.size())
        throw ContractError("metrics: batch sizes differ (" + std::to_string(truths.size()) + " vs " +
                            std::to_string(preds.size()) + ")");
    const std::size_t w = truths[0].width();
    for (std::size_t i = 0; i < truths.size(); ++i)
        if (truths[i].width() != w || preds[i].width() != w)
            throw ContractError("metrics: label width mismatch at example " + std::to_string(i));
}

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

LabelCounts label_counts(std::span<const LabelVector> truths, std::span<const LabelVector> preds) {
    check_batch(truths, preds);
    const std::size_t w = truths[0].width();
    LabelCounts out;
    out.per_label.resize(w);
    out.examples = truths.size();
    for (std::size_t i = 0; i < truths.size(); ++i)
        for (std::size_t c = 0; c < w; ++c) {
            auto& k = out.per_label[c];
            const bool y = truths[i][c], p = preds[i][c];
            if (y && p)
                ++k.tp;
            else if (!y && p)
                ++k.fp;
            else if (!y && !p)
                ++k.tn;
            else
                ++k.fn;
        }
    return out;
}

ExampleMetrics example_metrics(std::span<const LabelVector> truths, std::span<const LabelVector> preds) {
    check_batch(truths, preds);
    const std::size_t w = truths[0].width();
    std::uint64_t exact = 0;
    double hamming = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        std::size_t wrong = 0;
        for (std::size_t c = 0; c < w; ++c) wrong += truths[i][c] != preds[i][c];
        exact += wrong == 0;
        hamming += static_cast<double>(wrong) / static_cast<double>(w);
    }
    const double n = static_cast<double>(truths.size());
    return {static_cast<double>(exact) / n, hamming / n};
}

AggregateMetrics micro_macro(const LabelCounts& counts) {
    AggregateMetrics m;
    const std::size_t w = counts.per_label.size();
    if (w == 0) return m;
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (const auto& k : counts.per_label) {
        tp += k.tp;
        fp += k.fp;
        fn += k.fn;
        m.macro_precision += ratio(k.tp, k.tp + k.fp);
        m.macro_recall += ratio(k.tp, k.tp + k.fn);
        m.macro_f1 += ratio(2 * k.tp, 2 * k.tp + k.fp + k.fn);
    }
    m.macro_precision /= static_cast<double>(w);
    m.macro_recall /= static_cast<double>(w);
    m.macro_f1 /= static_cast<double>(w);
    m.micro_precision = ratio(tp, tp + fp);
    m.micro_recall = ratio(tp, tp + fn);
    m.micro_f1 = ratio(2 * tp, 2 * tp + fp + fn);
    return m;
}

MetricsReport evaluate(std::span<const LabelVector> truths, std::span<const LabelVector> preds) {
    MetricsReport r;
    r.counts = label_counts(truths, preds);
    const auto ex = example_metrics(truths, preds);
    const auto agg = micro_macro(r.counts);
    r.subset_accuracy = ex.subset_accuracy;
    r.hamming_loss = ex.hamming_loss;
    r.micro_precision = agg.micro_precision;
    r.micro_recall = agg.micro_recall;
    r.micro_f1 = agg.micro_f1;
    r.macro_precision = agg.macro_precision;
    r.macro_recall = agg.macro_recall;
    r.macro_f1 = agg.macro_f1;
    return r;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = nlohmann::json{
        {"subset_accuracy", r.subset_accuracy}, {"hamming_loss", r.hamming_loss},
        {"micro_precision", r.micro_precision}, {"micro_recall", r.micro_recall},
        {"micro_f1", r.micro_f1},               {"macro_precision", r.macro_precision},
        {"macro_recall", r.macro_recall},       {"macro_f1", r.macro_f1},
        {"examples", r.counts.examples},
    };
    auto labels = nlohmann::json::object();
    const std::size_t w = r.counts.per_label.size();
    for (std::size_t c = 0; c < w; ++c) {
        const auto& k = r.counts.per_label[c];
        labels[std::to_string(c)] = {
            {"name", category_name(c, w)}, {"tp", k.tp}, {"fp", k.fp}, {"tn", k.tn}, {"fn", k.fn},
        };
    }
    j["labels"] = std::move(labels);
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
    j.at("subset_accuracy").get_to(r.subset_accuracy);
    j.at("hamming_loss").get_to(r.hamming_loss);
    j.at("micro_precision").get_to(r.micro_precision);
    j.at("micro_recall").get_to(r.micro_recall);
    j.at("micro_f1").get_to(r.micro_f1);
    j.at("macro_precision").get_to(r.macro_precision);
    j.at("macro_recall").get_to(r.macro_recall);
    j.at("macro_f1").get_to(r.macro_f1);
    r.counts = {};
    r.counts.examples = j.value("examples", std::uint64_t{0});
    if (j.contains("labels")) {
        const auto& labels = j.at("labels");
        r.counts.per_label.resize(labels.size());
        for (auto it = labels.begin(); it != labels.end(); ++it) {
            const auto c = std::stoul(it.key());
            if (c >= r.counts.per_label.size()) throw ValidationError("metrics report: label index out of range");
            auto& k = r.counts.per_label[c];
            it->at("tp").get_to(k.tp);
            it->at("fp").get_to(k.fp);
            it->at("tn").get_to(k.tn);
            it->at("fn").get_to(k.fn);
        }
    }
}

}  // namespace idte

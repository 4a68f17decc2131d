#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "idte/labels.hpp"

#include <json.hpp>

namespace idte {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t total() const { return tp + fp + tn + fn; }
};

/// Per-label confusion tallies over N evaluated examples.
struct LabelCounts {
    std::vector<ConfusionCounts> per_label;
    std::uint64_t examples = 0;
};

struct ExampleMetrics {
    double subset_accuracy = 0.0;
    double hamming_loss = 0.0;
};

struct AggregateMetrics {
    double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
};

struct MetricsReport {
    double subset_accuracy = 0.0;
    double hamming_loss = 0.0;
    double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    LabelCounts counts;
};

LabelCounts label_counts(std::span<const LabelVector> truths, std::span<const LabelVector> preds);
ExampleMetrics example_metrics(std::span<const LabelVector> truths, std::span<const LabelVector> preds);

// Any ratio whose denominator is zero contributes 0. Macro F1 is the mean of
// per-label 2TP / (2TP + FP + FN), not the harmonic mean of macro P and R.
AggregateMetrics micro_macro(const LabelCounts& counts);

MetricsReport evaluate(std::span<const LabelVector> truths, std::span<const LabelVector> preds);

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

}  // namespace idte

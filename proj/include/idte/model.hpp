#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "idte/labels.hpp"
#include "idte/metrics.hpp"
#include "idte/optim.hpp"
#include "idte/records.hpp"
#include "idte/tensor.hpp"
#include "idte/text.hpp"

namespace idte {

struct ModelConfig {
    std::size_t d_model = 32;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;
    std::size_t ff_dim = 64;
    std::size_t vocab_size = 0;
    std::size_t max_seq = 64;
    std::size_t image_tokens = 4;  // M
    std::size_t d_img = 16;
    std::size_t drug_count = kDefaultDrugCount;  // C
    std::size_t fbc_rank = 8;
    double threshold = 0.5;  // tau
    std::uint64_t seed = 0;

    std::size_t label_width() const { return drug_count + 1; }
    void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

enum class ModelKind { mmbt, text_only, image_only, concat, fbc };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// One example laid out as [CLS] + M image tokens + [SEP] + text tokens,
/// optionally followed by [PAD] positions.
struct MultimodalInput {
    std::vector<int> text_ids;       // text token ids after [CLS]; may end in [PAD]s
    std::vector<double> image;       // length d_img
    std::vector<int> segments;       // per position: 0 for [CLS] and image, 1 for [SEP] and text
    std::vector<std::uint8_t> mask;  // per position: 1 attend, 0 padding

    std::size_t length() const { return segments.size(); }
};

/// Builds an input from a token sequence (whose first id is [CLS]). Text
/// beyond the config's capacity is truncated; `pad_text_to` appends [PAD]
/// tokens until the text part has that many positions.
MultimodalInput make_input(const TokenSequence& tokens, std::span<const double> image, const ModelConfig& config,
                           std::size_t pad_text_to = 0);

/// Fresh parameters for `kind`, Glorot-uniform weights and zero biases,
/// unit layer-norm gains. Only tensors the kind actually uses are created.
ModelParams init_params(const ModelConfig& config, ModelKind kind);

/// Affine projection of one image feature to M token rows of width d_model.
std::vector<std::vector<double>> encode_image_tokens(std::span<const double> image_feature, const ModelParams& params,
                                                     const ModelConfig& config);

using LogitVector = std::vector<double>;
using ProbVector = std::vector<double>;

LogitVector mmbt_forward(const MultimodalInput& input, const ModelParams& params, const ModelConfig& config);
LogitVector baseline_forward(ModelKind kind, const MultimodalInput& input, const ModelParams& params,
                             const ModelConfig& config);
/// Dispatches on kind (mmbt included).
LogitVector forward(ModelKind kind, const MultimodalInput& input, const ModelParams& params, const ModelConfig& config);

ProbVector sigmoid(const LogitVector& logits);

/// Bit c is set iff p_c >= tau. The drug-free rule is not enforced.
LabelVector predict_labels(std::span<const double> probs, double tau);

inline constexpr double kProbClamp = 1e-12;

/// Mean over examples of the summed per-label binary cross-entropy, with
/// probabilities clamped to [1e-12, 1 - 1e-12].
double bce_loss(std::span<const ProbVector> probs, std::span<const LabelVector> targets);

// Tape-level building blocks, exposed for gradient checks.
namespace graph {

class ParamBinder {
public:
    ParamBinder(Tape& tape, const ModelParams& params) : tape_(tape), params_(params) {}
    Var operator()(const std::string& name) { return tape_.param(name, params_.at(name)); }
    Tape& tape() { return tape_; }

private:
    Tape& tape_;
    const ModelParams& params_;
};

/// [1, C+1] logits for one example.
Var logits(ModelKind kind, ParamBinder& p, const MultimodalInput& input, const ModelConfig& config);
/// Final [CLS] state of the shared encoder, [1, d_model].
Var text_cls_state(ParamBinder& p, const MultimodalInput& input, const ModelConfig& config);
/// Low-rank bilinear interaction: z = ((phi_x U) * (phi_t V)) P.
Var fbc_interaction(Var phi_x, Var phi_t, Var u, Var v, Var p);
/// probs [N, W]; targets row-major N x W.
Var bce_loss(Var probs, const std::vector<LabelVector>& targets);

}  // namespace graph

struct Example {
    std::string id;
    MultimodalInput input;
    LabelVector labels;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double train_fraction = 0.75;
    std::uint64_t split_seed = 0;
    std::uint64_t shuffle_seed = 0;
    AdamHyper adam;
    bool evaluate_each_epoch = true;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<MetricsReport> metrics;
};

struct TrainHistory {
    double initial_train_loss = 0.0;
    std::vector<EpochRecord> epochs;
};

void to_json(nlohmann::json& j, const TrainHistory& h);

/// Seeded train/test partition of [0, n).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed);

struct ExampleTrainResult {
    ModelParams params;
    TrainHistory history;
};

/// Mini-batch Adam on bce_loss over prepared examples.
ExampleTrainResult train_examples(ModelKind kind, const std::vector<Example>& train_set, const std::vector<Example>& test_set,
                                  const ModelConfig& config, const TrainConfig& train, ModelParams initial);

double mean_loss(ModelKind kind, const std::vector<Example>& examples, const ModelParams& params, const ModelConfig& config);
MetricsReport evaluate_examples(ModelKind kind, const std::vector<Example>& examples, const ModelParams& params,
                                const ModelConfig& config);

/// Everything needed to score new records.
struct TrainedModel {
    ModelKind kind = ModelKind::mmbt;
    ModelConfig config;
    Vocabulary vocab;
    TokenizerOptions tokenizer;
    ModelParams params;
};

struct VocabOptions {
    std::size_t min_freq = 1;
    std::size_t max_size = 4096;
};

struct TrainOutcome {
    TrainedModel model;
    TrainHistory history;
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> test_index;
};

/// Converts labeled records to examples with a given vocabulary.
std::vector<Example> make_examples(const std::vector<SuspectIDTE>& records, std::span<const std::size_t> index,
                                   const Vocabulary& vocab, const TokenizerOptions& tokenizer, const ModelConfig& config);

/// Full pipeline: validate labels, split 75/25 (seeded), build the vocabulary
/// on the training texts, train. `config.vocab_size` is overwritten.
TrainOutcome train(const std::vector<SuspectIDTE>& records, ModelKind kind, ModelConfig config, const TrainConfig& train,
                   const TokenizerOptions& tokenizer = {}, const VocabOptions& vocab_options = {});

std::vector<ProbVector> predict_probs(const TrainedModel& model, const std::vector<SuspectIDTE>& records);
MetricsReport evaluate_records(const TrainedModel& model, const std::vector<SuspectIDTE>& records);

/// Model checkpoint plus a JSON sidecar holding kind, config and vocabulary.
void save_model(const std::filesystem::path& checkpoint, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& checkpoint);
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace idte

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idte/records.hpp"

namespace idte {

enum class DependenceMode { text_only, image_only, joint_and };

std::string to_string(DependenceMode mode);
DependenceMode dependence_mode_from_string(std::string_view name);

struct CorpusConfig {
    std::size_t n = 4648;
    std::size_t drug_count = kDefaultDrugCount;
    /// Length drug_count + 1. Entry 0 (non_drug) is informational: the
    /// drug-free bit is always derived from the drug bits.
    std::vector<double> priors;
    DependenceMode mode = DependenceMode::joint_and;
    double obfuscation_rate = 0.0;
    /// Probability that a negative drug label gets a one-modality decoy.
    double distractor_rate = 0.2;
    /// Fraction of records that are multi-drug "menu" ads (2 to 8 drugs).
    double bundle_rate = 0.03;
    /// Empty means the built-in lexicon (or generated terms when drug_count != 9).
    std::vector<std::vector<std::string>> lexicons;
    /// Empty means seeded random prototypes of norm `prototype_norm`.
    std::vector<std::vector<double>> prototypes;
    std::size_t d_img = 16;
    double prototype_norm = 3.0;
    double noise_scale = 0.3;
    double comment_fraction = 0.2;
    std::size_t authors = 500;
    std::uint64_t seed = 0;

    /// Priors, lexicons and prototypes with defaults filled in.
    CorpusConfig resolved() const;
    /// Throws ContractError naming the offending field.
    void validate() const;
};

void to_json(nlohmann::json& j, const CorpusConfig& c);
void from_json(const nlohmann::json& j, CorpusConfig& c);

std::vector<double> default_priors(std::size_t drug_count);
std::vector<std::vector<std::string>> default_lexicons(std::size_t drug_count);

/// Per drug: how often each modality carried the signal.
struct LabelSignalCounts {
    std::size_t positives = 0;                // label 1
    std::size_t positives_with_term = 0;
    std::size_t positives_with_prototype = 0;
    std::size_t text_distractors = 0;         // term present, label 0
    std::size_t image_distractors = 0;        // prototype present, label 0
};

struct CorpusStats {
    std::size_t n = 0;
    std::vector<LabelSignalCounts> per_drug;
    std::size_t obfuscated_terms = 0;
    std::size_t total_terms = 0;

    /// Best per-label accuracy any classifier seeing only that modality can
    /// reach for drug `d` (0-based over drugs).
    double text_ceiling(std::size_t d) const;
    double image_ceiling(std::size_t d) const;
};

void to_json(nlohmann::json& j, const CorpusStats& s);

struct Corpus {
    std::vector<SuspectIDTE> records;
    CorpusStats stats;
};

/// Deterministic in config (including seed).
Corpus generate_corpus(const CorpusConfig& config);

// ---------------------------------------------------------------------------
// Simulated platform

struct PlatformConfig {
    std::size_t users = 1000;
    std::size_t dealers = 100;
    std::size_t posts = 10000;
    std::size_t drug_hashtags = 40;
    std::size_t generic_hashtags = 400;
    double zipf_exponent = 1.1;
    std::size_t min_direct_posts = 1;
    std::size_t max_direct_posts = 3;
    /// Drug-ad comments each dealer plants under innocent posts.
    std::size_t ad_comments_per_dealer = 5;
    /// Mean dealer comments on each direct drug post.
    double comments_per_drug_post = 1.5;
    double comments_per_innocent_post = 1.0;
    std::size_t d_img = 16;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const PlatformConfig& c);
void from_json(const nlohmann::json& j, PlatformConfig& c);

struct PlatformUser {
    std::uint64_t id = 0;
    bool dealer = false;
};

struct PlatformPost {
    std::uint64_t id = 0;
    std::uint64_t author_id = 0;
    std::string text;
    std::vector<std::string> hashtags;
    std::vector<double> image_features;
    bool drug_ad = false;
};

struct PlatformComment {
    std::uint64_t id = 0;
    std::uint64_t post_id = 0;
    std::uint64_t author_id = 0;
    std::string text;
    bool drug_ad = false;
};

struct PlatformGraph {
    std::vector<PlatformUser> users;
    std::vector<PlatformPost> posts;        // sorted by id
    std::vector<PlatformComment> comments;  // sorted by id
    std::vector<std::string> drug_hashtags;
    std::vector<std::string> generic_hashtags;

    std::size_t dealer_count() const;
    const PlatformPost* find_post(std::uint64_t id) const;
};

/// Throws ContractError when dealers > users or the config is otherwise invalid.
PlatformGraph synth_platform(const PlatformConfig& config);

nlohmann::json platform_to_json(const PlatformGraph& g);
PlatformGraph platform_from_json(const nlohmann::json& j);
void save_platform(const std::filesystem::path& path, const PlatformGraph& g);
PlatformGraph load_platform(const std::filesystem::path& path);

}  // namespace idte

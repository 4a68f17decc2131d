#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idte/labels.hpp"

namespace idte {

enum class RecordKind { post, comment };

/// One post or comment under evaluation.
struct SuspectIDTE {
    std::uint64_t id = 0;
    RecordKind kind = RecordKind::post;
    std::optional<std::uint64_t> parent_id;
    std::uint64_t author_id = 0;
    std::string text;
    std::vector<std::string> hashtags;
    std::vector<double> image_features;
    std::optional<LabelVector> labels;

    bool operator==(const SuspectIDTE&) const = default;
};

std::string to_string(RecordKind kind);

/// Corpus JSONL line. `with_labels` false drops the labels field (crawl output).
nlohmann::json record_to_json(const SuspectIDTE& r, bool with_labels = true);
SuspectIDTE record_from_json(const nlohmann::json& j);

/// Doubles are written with shortest round-trip formatting, so output is
/// byte-stable for equal input.
void write_jsonl(std::ostream& out, const std::vector<SuspectIDTE>& records, bool with_labels = true);
std::vector<SuspectIDTE> read_jsonl(std::istream& in);
void save_jsonl(const std::filesystem::path& path, const std::vector<SuspectIDTE>& records, bool with_labels = true);
std::vector<SuspectIDTE> load_jsonl(const std::filesystem::path& path);

/// Checks comments reference an existing post and labeled records satisfy
/// the drug-free rule. Throws ValidationError naming the first offender.
void validate_records(const std::vector<SuspectIDTE>& records);

}  // namespace idte

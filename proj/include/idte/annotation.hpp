#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "idte/crawler.hpp"
#include "idte/records.hpp"

namespace idte {

enum class AnnotationLevel { hashtag, image, comment };
inline constexpr std::array<AnnotationLevel, 3> kAnnotationLevels = {AnnotationLevel::hashtag, AnnotationLevel::image,
                                                                     AnnotationLevel::comment};
std::string to_string(AnnotationLevel level);

struct AnnotationRecord {
    std::uint64_t idte_id = 0;
    std::string annotator_id;
    std::vector<std::string> hashtag_labels;  // canonical category names
    std::vector<std::string> image_labels;
    std::vector<std::string> comment_labels;
    std::string created_at;  // RFC 3339, UTC

    const std::vector<std::string>& level(AnnotationLevel l) const;
    bool operator==(const AnnotationRecord&) const = default;
};

nlohmann::json annotation_to_json(const AnnotationRecord& r);
/// Throws ValidationError on malformed input (missing fields, wrong types).
AnnotationRecord annotation_from_json(const nlohmann::json& j);

/// Sorts, dedups and checks a label set: every entry a canonical category,
/// non_drug alone when present. Throws ValidationError naming the value.
std::vector<std::string> canonical_label_set(const std::vector<std::string>& labels, std::string_view level);

/// UTC now as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

struct AgreementReport {
    std::size_t items_compared = 0;
    std::size_t pairs = 0;
    std::map<std::string, std::optional<double>> levels;      // hashtag, image, comment
    std::map<std::string, std::optional<double>> categories;  // canonical names
    std::optional<double> overall;
    std::vector<std::uint64_t> conflicts;
};

void to_json(nlohmann::json& j, const AgreementReport& r);

struct ExportResult {
    std::string corpus;        // labeled JSONL, sorted by id
    std::string adjudication;  // JSONL of tied items
    std::size_t exported = 0;
    std::size_t adjudicated = 0;
};

/// Items to annotate plus an append-only JSONL log of submissions. Each log
/// line is {"revision": n, "record": {...}}; the last record per
/// (annotator, item) wins. Readers take a shared lock, writers are
/// serialized.
class AnnotationStore {
public:
    /// Loads (or creates) the log at `log_path` and replays it. A torn final
    /// line left by a crash is discarded.
    AnnotationStore(std::vector<SuspectIDTE> items, std::filesystem::path log_path);
    /// In-memory store without durability.
    explicit AnnotationStore(std::vector<SuspectIDTE> items);
    ~AnnotationStore();
    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    std::optional<SuspectIDTE> next_unlabeled(const std::string& annotator_id) const;
    /// Validates, stamps created_at when empty, appends, applies. Returns the
    /// revision. NotFoundError for unknown items, ValidationError otherwise.
    std::uint64_t submit(AnnotationRecord record);

    AgreementReport agreement() const;
    ExportResult export_dataset() const;
    /// Writes corpus and adjudication files.
    ExportResult export_to(const std::filesystem::path& corpus, const std::filesystem::path& adjudication) const;

    std::uint64_t revision() const;
    std::size_t item_count() const { return items_.size(); }
    /// Effective records, ordered by (item, annotator).
    std::vector<AnnotationRecord> records() const;
    HashtagPool hashtag_weights() const;
    /// Deterministic dump of the durable state, for replay comparisons.
    nlohmann::json state_json() const;

private:
    void apply(const AnnotationRecord& r, std::uint64_t revision);
    void replay();
    const SuspectIDTE* find_item(std::uint64_t id) const;

    std::vector<SuspectIDTE> items_;  // sorted by id
    std::optional<std::filesystem::path> log_path_;
    int log_fd_ = -1;
    mutable std::shared_mutex mutex_;
    std::map<std::uint64_t, std::map<std::string, AnnotationRecord>> by_item_;
    std::uint64_t revision_ = 0;
    HashtagPool weights_;
};

class AnnotationServer {
public:
    explicit AnnotationServer(AnnotationStore& store);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen_after_bind();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace idte

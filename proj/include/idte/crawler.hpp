#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "idte/error.hpp"
#include "idte/records.hpp"
#include "idte/synthdata.hpp"

namespace idte {

/// Platform query failure; worth retrying.
class CrawlError : public Error {
public:
    CrawlError(std::string hashtag, const std::string& what)
        : Error("query for " + hashtag + " failed: " + what), hashtag_(std::move(hashtag)) {}
    const std::string& hashtag() const { return hashtag_; }

private:
    std::string hashtag_;
};

/// What the crawler can see of a post.
struct PostView {
    std::uint64_t id = 0;
    std::uint64_t author_id = 0;
    std::string text;
    std::vector<std::string> hashtags;
    std::vector<double> image_features;
};

struct CommentView {
    std::uint64_t id = 0;
    std::uint64_t post_id = 0;
    std::uint64_t author_id = 0;
    std::string text;
};

class Platform {
public:
    virtual ~Platform() = default;
    /// Up to `limit` posts carrying `hashtag`, in a stable order.
    virtual std::vector<PostView> search_hashtag(const std::string& hashtag, std::size_t limit) = 0;
    virtual std::vector<CommentView> comments(std::uint64_t post_id) = 0;
    /// Ground truth for the simulated gate.
    virtual bool is_drug_post(std::uint64_t post_id) const = 0;
};

/// Platform backed by a synthetic PlatformGraph. Hashtag search indexes post
/// hashtags and returns matches by ascending post id.
class SimulatedPlatform : public Platform {
public:
    explicit SimulatedPlatform(const PlatformGraph& graph);
    std::vector<PostView> search_hashtag(const std::string& hashtag, std::size_t limit) override;
    std::vector<CommentView> comments(std::uint64_t post_id) override;
    bool is_drug_post(std::uint64_t post_id) const override;
    std::size_t query_count() const { return queries_; }

private:
    const PlatformGraph& graph_;
    std::map<std::string, std::vector<std::size_t>> by_tag_;
    std::map<std::uint64_t, std::vector<std::size_t>> comments_by_post_;
    std::size_t queries_ = 0;
};

struct GateModel {
    double tpr = 0.95;
    double fpr = 0.05;
    std::uint64_t seed = 0;
    void validate() const;
};

/// Seeded coin flip against ground truth, a pure function of (seed, post id).
bool gate_classify(std::uint64_t post_id, bool is_drug, const GateModel& gate);

struct HashtagPool {
    std::map<std::string, std::uint64_t> counts;
    std::set<std::string> seeds;
    std::set<std::string> visited;

    /// Top `k` unvisited tags by count (ties lexicographic).
    std::vector<std::string> top_unvisited(std::size_t k) const;
    /// Top `k` tags by count regardless of visited state.
    std::vector<std::pair<std::string, std::uint64_t>> top(std::size_t k) const;
};

/// Each distinct tag on the post gains 1; duplicates within the post count once.
HashtagPool update_hashtag_pool(HashtagPool pool, const std::vector<std::string>& hashtags);
void update_hashtag_pool_inplace(HashtagPool& pool, const std::vector<std::string>& hashtags);

enum class StopReason { running, threshold, exhausted, max_iterations };
std::string to_string(StopReason reason);

struct CrawlConfig {
    std::size_t dealer_threshold = 1000;
    std::size_t top_k = 10;
    std::size_t posts_per_hashtag = 50;
    std::size_t max_iterations = 1000;
    std::size_t max_retries = 2;
    void validate() const;
};

void to_json(nlohmann::json& j, const CrawlConfig& c);
void from_json(const nlohmann::json& j, CrawlConfig& c);

struct CrawlState {
    std::size_t iterations = 0;
    std::vector<std::uint64_t> collected_posts;  // accepted, in acceptance order
    std::set<std::uint64_t> dealer_accounts;     // authors of accepted posts and their commenters
    std::set<std::uint64_t> gated_posts;         // every post the gate has seen
    HashtagPool pool;
    StopReason stop = StopReason::running;
    std::vector<SuspectIDTE> records;  // accepted posts followed by their comments
    std::size_t gate_calls = 0;
};

CrawlState crawl(Platform& platform, const std::vector<std::string>& seeds, const GateModel& gate, const CrawlConfig& config);

/// Summary JSON; `planted` adds recall against the platform's dealer flags.
nlohmann::json crawl_summary(const CrawlState& state, const PlatformGraph* planted = nullptr);
std::size_t planted_dealers_found(const CrawlState& state, const PlatformGraph& graph);

}  // namespace idte

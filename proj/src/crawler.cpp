#include "idte/crawler.hpp"

#include <algorithm>

#include "idte/random.hpp"
#include "idte/text.hpp"

namespace idte {

SimulatedPlatform::SimulatedPlatform(const PlatformGraph& graph) : graph_(graph) {
    for (std::size_t i = 0; i < graph.posts.size(); ++i)
        for (const auto& t : std::set<std::string>(graph.posts[i].hashtags.begin(), graph.posts[i].hashtags.end()))
            by_tag_[t].push_back(i);
    for (std::size_t i = 0; i < graph.comments.size(); ++i) comments_by_post_[graph.comments[i].post_id].push_back(i);
}

std::vector<PostView> SimulatedPlatform::search_hashtag(const std::string& hashtag, std::size_t limit) {
    ++queries_;
    std::vector<PostView> out;
    auto it = by_tag_.find(hashtag);
    if (it == by_tag_.end()) return out;
    for (std::size_t i : it->second) {
        if (out.size() >= limit) break;
        const auto& p = graph_.posts[i];
        out.push_back({p.id, p.author_id, p.text, p.hashtags, p.image_features});
    }
    return out;
}

std::vector<CommentView> SimulatedPlatform::comments(std::uint64_t post_id) {
    std::vector<CommentView> out;
    auto it = comments_by_post_.find(post_id);
    if (it == comments_by_post_.end()) return out;
    for (std::size_t i : it->second) {
        const auto& c = graph_.comments[i];
        out.push_back({c.id, c.post_id, c.author_id, c.text});
    }
    return out;
}

bool SimulatedPlatform::is_drug_post(std::uint64_t post_id) const {
    const auto* p = graph_.find_post(post_id);
    return p && p->drug_ad;
}

void GateModel::validate() const {
    if (!(tpr >= 0.0 && tpr <= 1.0)) throw ContractError("gate tpr must lie in [0, 1]");
    if (!(fpr >= 0.0 && fpr <= 1.0)) throw ContractError("gate fpr must lie in [0, 1]");
}

bool gate_classify(std::uint64_t post_id, bool is_drug, const GateModel& gate) {
    const std::uint64_t h = mix64(mix64(gate.seed) ^ post_id);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < (is_drug ? gate.tpr : gate.fpr);
}

std::vector<std::string> HashtagPool::top_unvisited(std::size_t k) const {
    std::vector<std::pair<std::string, std::uint64_t>> cand;
    for (const auto& [tag, c] : counts)
        if (!visited.count(tag)) cand.emplace_back(tag, c);
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, cand.size()); ++i) out.push_back(cand[i].first);
    return out;
}

std::vector<std::pair<std::string, std::uint64_t>> HashtagPool::top(std::size_t k) const {
    std::vector<std::pair<std::string, std::uint64_t>> all(counts.begin(), counts.end());
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

void update_hashtag_pool_inplace(HashtagPool& pool, const std::vector<std::string>& hashtags) {
    for (const auto& t : std::set<std::string>(hashtags.begin(), hashtags.end())) ++pool.counts[t];
}

HashtagPool update_hashtag_pool(HashtagPool pool, const std::vector<std::string>& hashtags) {
    update_hashtag_pool_inplace(pool, hashtags);
    return pool;
}

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::running: return "running";
        case StopReason::threshold: return "threshold";
        case StopReason::exhausted: return "exhausted";
        case StopReason::max_iterations: return "max_iterations";
    }
    return "unknown";
}

void CrawlConfig::validate() const {
    if (dealer_threshold == 0) throw ContractError("dealer_threshold must be positive");
    if (top_k == 0) throw ContractError("top_k must be positive");
    if (posts_per_hashtag == 0) throw ContractError("posts_per_hashtag must be positive");
}

void to_json(nlohmann::json& j, const CrawlConfig& c) {
    j = nlohmann::json{{"dealer_threshold", c.dealer_threshold},
                       {"top_k", c.top_k},
                       {"posts_per_hashtag", c.posts_per_hashtag},
                       {"max_iterations", c.max_iterations},
                       {"max_retries", c.max_retries}};
}

void from_json(const nlohmann::json& j, CrawlConfig& c) {
    CrawlConfig d;
    c.dealer_threshold = j.value("dealer_threshold", d.dealer_threshold);
    c.top_k = j.value("top_k", d.top_k);
    c.posts_per_hashtag = j.value("posts_per_hashtag", d.posts_per_hashtag);
    c.max_iterations = j.value("max_iterations", d.max_iterations);
    c.max_retries = j.value("max_retries", d.max_retries);
}

namespace {

std::vector<PostView> query_with_retry(Platform& platform, const std::string& tag, const CrawlConfig& config) {
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return platform.search_hashtag(tag, config.posts_per_hashtag);
        } catch (const CrawlError&) {
            if (attempt >= config.max_retries) throw;
        }
    }
}

}  // namespace

CrawlState crawl(Platform& platform, const std::vector<std::string>& seeds, const GateModel& gate, const CrawlConfig& config) {
    if (seeds.empty()) throw ContractError("crawl needs at least one seed hashtag");
    gate.validate();
    config.validate();

    CrawlState st;
    std::vector<std::string> frontier;
    for (const auto& s : seeds) {
        st.pool.seeds.insert(s);
        st.pool.counts.emplace(s, 0);
        if (std::find(frontier.begin(), frontier.end(), s) == frontier.end()) frontier.push_back(s);
    }

    while (st.stop == StopReason::running) {
        if (frontier.empty()) {
            st.stop = StopReason::exhausted;
            break;
        }
        if (st.iterations >= config.max_iterations) {
            st.stop = StopReason::max_iterations;
            break;
        }
        ++st.iterations;
        for (const auto& tag : frontier) {
            st.pool.visited.insert(tag);
            for (const auto& post : query_with_retry(platform, tag, config)) {
                if (!st.gated_posts.insert(post.id).second) continue;
                ++st.gate_calls;
                if (!gate_classify(post.id, platform.is_drug_post(post.id), gate)) continue;

                st.collected_posts.push_back(post.id);
                st.dealer_accounts.insert(post.author_id);
                update_hashtag_pool_inplace(st.pool, post.hashtags);
                SuspectIDTE rec;
                rec.id = post.id;
                rec.author_id = post.author_id;
                rec.text = post.text;
                rec.hashtags = post.hashtags;
                rec.image_features = post.image_features;
                st.records.push_back(std::move(rec));
                for (const auto& c : platform.comments(post.id)) {
                    st.dealer_accounts.insert(c.author_id);
                    SuspectIDTE cr;
                    cr.id = c.id;
                    cr.kind = RecordKind::comment;
                    cr.parent_id = c.post_id;
                    cr.author_id = c.author_id;
                    cr.text = c.text;
                    cr.hashtags = extract_hashtags(c.text);
                    st.records.push_back(std::move(cr));
                }
            }
            if (st.dealer_accounts.size() >= config.dealer_threshold) {
                st.stop = StopReason::threshold;
                break;
            }
        }
        if (st.stop != StopReason::running) break;
        frontier = st.pool.top_unvisited(config.top_k);
    }
    return st;
}

std::size_t planted_dealers_found(const CrawlState& state, const PlatformGraph& graph) {
    std::size_t n = 0;
    for (const auto& u : graph.users)
        if (u.dealer && state.dealer_accounts.count(u.id)) ++n;
    return n;
}

nlohmann::json crawl_summary(const CrawlState& state, const PlatformGraph* planted) {
    nlohmann::json j;
    j["iterations"] = state.iterations;
    j["collected"] = state.collected_posts.size();
    j["dealer_accounts"] = state.dealer_accounts.size();
    j["gate_calls"] = state.gate_calls;
    j["stop_reason"] = to_string(state.stop);
    auto top = nlohmann::json::array();
    for (const auto& [tag, count] : state.pool.top(20)) top.push_back({{"hashtag", tag}, {"count", count}});
    j["top_hashtags"] = std::move(top);
    if (planted) {
        j["planted_dealers"] = planted->dealer_count();
        j["planted_dealers_found"] = planted_dealers_found(state, *planted);
    }
    return j;
}

}  // namespace idte

#include "idte/hashtag_graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

#include "idte/error.hpp"
#include "idte/random.hpp"

namespace idte {

std::size_t CooccurrenceGraph::add_node(const std::string& tag) {
    auto [it, inserted] = index_.emplace(tag, tags_.size());
    if (inserted) {
        tags_.push_back(tag);
        adj_.emplace_back();
    }
    return it->second;
}

void CooccurrenceGraph::add_edge_weight(std::size_t a, std::size_t b, std::uint64_t w) {
    if (a == b) throw ContractError("self-loop on " + tags_.at(a));
    if (a >= tags_.size() || b >= tags_.size()) throw ContractError("edge endpoint out of range");
    if (w == 0) return;
    adj_[a][b] += w;
    adj_[b][a] += w;
}

std::size_t CooccurrenceGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& m : adj_) n += m.size();
    return n / 2;
}

std::optional<std::size_t> CooccurrenceGraph::index(const std::string& tag) const {
    auto it = index_.find(tag);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t CooccurrenceGraph::weight(std::size_t a, std::size_t b) const {
    const auto& m = adj_.at(a);
    auto it = m.find(b);
    return it == m.end() ? 0 : it->second;
}

std::uint64_t CooccurrenceGraph::total_weight() const {
    std::uint64_t w = 0;
    for (const auto& m : adj_)
        for (const auto& [_, x] : m) w += x;
    return w / 2;
}

CooccurrenceGraph build_cooccurrence_graph(const std::vector<SuspectIDTE>& posts) {
    std::set<std::string> all;
    for (const auto& p : posts) all.insert(p.hashtags.begin(), p.hashtags.end());
    CooccurrenceGraph g;
    for (const auto& t : all) g.add_node(t);
    for (const auto& p : posts) {
        const std::set<std::string> tags(p.hashtags.begin(), p.hashtags.end());
        std::vector<std::size_t> ids;
        for (const auto& t : tags) ids.push_back(*g.index(t));
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j) g.add_edge_weight(ids[i], ids[j]);
    }
    return g;
}

CommunityPartition detect_communities(const CooccurrenceGraph& graph, std::uint64_t seed, std::size_t max_sweeps) {
    const std::size_t n = graph.node_count();
    if (n == 0) throw ContractError("detect_communities: empty graph");
    std::vector<std::size_t> label(n), order(n);
    std::iota(label.begin(), label.end(), 0);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);

    CommunityPartition part;
    std::map<std::size_t, std::uint64_t> votes;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        shuffle(std::span<std::size_t>(order), rng);
        bool changed = false;
        for (std::size_t v : order) {
            const auto& nb = graph.neighbors(v);
            if (nb.empty()) continue;
            votes.clear();
            for (const auto& [u, w] : nb) votes[label[u]] += w;
            std::size_t best = votes.begin()->first;
            std::uint64_t best_w = votes.begin()->second;
            for (const auto& [l, w] : votes)
                if (w > best_w) best = l, best_w = w;  // map order makes ties resolve to the smallest label
            if (best != label[v]) {
                label[v] = best;
                changed = true;
            }
        }
        part.sweeps = sweep + 1;
        if (!changed) break;
    }

    // Dense ids in order of first appearance by node index.
    std::map<std::size_t, std::size_t> dense;
    part.community.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        auto [it, _] = dense.emplace(label[v], dense.size());
        part.community[v] = it->second;
    }
    part.count = dense.size();
    return part;
}

std::vector<NodeStats> graph_stats(const CooccurrenceGraph& graph) {
    const std::size_t n = graph.node_count();
    std::vector<NodeStats> out(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto& nb = graph.neighbors(v);
        out[v].degree = nb.size();
        if (nb.size() >= 2) {
            std::size_t closed = 0;
            for (auto a = nb.begin(); a != nb.end(); ++a)
                for (auto b = std::next(a); b != nb.end(); ++b)
                    if (graph.neighbors(a->first).count(b->first)) ++closed;
            const double pairs = static_cast<double>(nb.size()) * static_cast<double>(nb.size() - 1) / 2.0;
            out[v].clustering = static_cast<double>(closed) / pairs;
        }
    }

    // Brandes, unweighted.
    std::vector<double> cb(n, 0.0), sigma(n), delta(n);
    std::vector<long> dist(n);
    std::vector<std::vector<std::size_t>> pred(n);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        std::fill(dist.begin(), dist.end(), -1);
        for (auto& p : pred) p.clear();
        stack.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        std::deque<std::size_t> q{s};
        while (!q.empty()) {
            const std::size_t v = q.front();
            q.pop_front();
            stack.push_back(v);
            for (const auto& [w, _] : graph.neighbors(v)) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
                if (dist[w] == dist[v] + 1) {
                    sigma[w] += sigma[v];
                    pred[w].push_back(v);
                }
            }
        }
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            const std::size_t w = *it;
            for (std::size_t v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            if (w != s) cb[w] += delta[w];
        }
    }
    for (std::size_t v = 0; v < n; ++v) out[v].betweenness = cb[v] / 2.0;
    return out;
}

nlohmann::json graph_to_json(const CooccurrenceGraph& graph, const std::vector<NodeStats>& stats,
                             const CommunityPartition& partition) {
    if (stats.size() != graph.node_count() || partition.community.size() != graph.node_count())
        throw ContractError("graph_to_json: stats or partition size mismatch");
    nlohmann::json j;
    auto nodes = nlohmann::json::array();
    for (std::size_t v = 0; v < graph.node_count(); ++v)
        nodes.push_back({{"tag", graph.tag(v)},
                         {"degree", stats[v].degree},
                         {"clustering", stats[v].clustering},
                         {"betweenness", stats[v].betweenness},
                         {"community", partition.community[v]}});
    auto edges = nlohmann::json::array();
    for (std::size_t a = 0; a < graph.node_count(); ++a)
        for (const auto& [b, w] : graph.neighbors(a))
            if (a < b) edges.push_back({{"source", graph.tag(a)}, {"target", graph.tag(b)}, {"weight", w}});
    j["nodes"] = std::move(nodes);
    j["edges"] = std::move(edges);
    j["communities"] = partition.count;
    return j;
}

}  // namespace idte

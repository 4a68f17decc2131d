#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idte/records.hpp"

namespace idte {

/// Undirected weighted hashtag co-occurrence graph. Nodes are indexed
/// 0..n-1 in lexicographic tag order.
class CooccurrenceGraph {
public:
    std::size_t add_node(const std::string& tag);
    void add_edge_weight(std::size_t a, std::size_t b, std::uint64_t w = 1);

    std::size_t node_count() const { return tags_.size(); }
    std::size_t edge_count() const;
    const std::string& tag(std::size_t i) const { return tags_.at(i); }
    const std::vector<std::string>& tags() const { return tags_; }
    std::optional<std::size_t> index(const std::string& tag) const;
    /// Neighbor -> weight, ordered by neighbor index.
    const std::map<std::size_t, std::uint64_t>& neighbors(std::size_t i) const { return adj_.at(i); }
    std::uint64_t weight(std::size_t a, std::size_t b) const;
    std::uint64_t total_weight() const;

private:
    std::vector<std::string> tags_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::map<std::size_t, std::uint64_t>> adj_;
};

/// One node per distinct tag; every unordered pair of distinct tags on a
/// post gains weight 1. Duplicate tags within a post count once.
CooccurrenceGraph build_cooccurrence_graph(const std::vector<SuspectIDTE>& posts);

struct CommunityPartition {
    std::vector<std::size_t> community;  // per node, dense ids from 0
    std::size_t count = 0;
    std::size_t sweeps = 0;
};

inline constexpr std::size_t kMaxPropagationSweeps = 100;

/// Asynchronous weighted label propagation. Node order is reshuffled from
/// `seed` each sweep; ties go to the smallest label. Throws ContractError on
/// an empty graph.
CommunityPartition detect_communities(const CooccurrenceGraph& graph, std::uint64_t seed,
                                      std::size_t max_sweeps = kMaxPropagationSweeps);

struct NodeStats {
    std::size_t degree = 0;
    double clustering = 0.0;
    double betweenness = 0.0;
};

/// Degree, local clustering coefficient and raw unweighted betweenness
/// (each unordered pair counted once, fractional over equal-length paths).
std::vector<NodeStats> graph_stats(const CooccurrenceGraph& graph);

nlohmann::json graph_to_json(const CooccurrenceGraph& graph, const std::vector<NodeStats>& stats,
                             const CommunityPartition& partition);

}  // namespace idte

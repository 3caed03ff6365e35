#include "bimem/fact_graph.hpp"

#include <algorithm>
#include <random>

#include "bimem/embedding.hpp"
#include "bimem/errors.hpp"

namespace bimem {

FactGraph build_edges(std::vector<FactUnit>& facts, double tau) {
    if (tau < 0.0 || tau >= 1.0) throw usage_error("build_edges: tau must be in [0, 1)");
    for (const FactUnit& fact : facts) {
        if (!facts.empty() && fact.embedding.size() != facts.front().embedding.size()) {
            throw data_error("build_edges: fact " + std::to_string(fact.id) +
                             " has a mismatched embedding dimension");
        }
    }

    FactGraph graph;
    graph.tau = tau;
    for (FactUnit& fact : facts) {
        fact.edges.clear();
        graph.node_ids.push_back(fact.id);
        graph.adjacency[fact.id];
    }
    std::sort(graph.node_ids.begin(), graph.node_ids.end());

    for (std::size_t i = 0; i < facts.size(); ++i) {
        for (std::size_t l = i + 1; l < facts.size(); ++l) {
            double sim = ranking_sim(facts[i].embedding, facts[l].embedding);
            if (sim > tau) {
                facts[i].edges.insert(facts[l].id);
                facts[l].edges.insert(facts[i].id);
                graph.adjacency[facts[i].id].insert(facts[l].id);
                graph.adjacency[facts[l].id].insert(facts[i].id);
            }
        }
    }
    return graph;
}

namespace {

// Hand-rolled Fisher-Yates so visit orders are identical on every platform
// (std::shuffle is implementation-defined).
void seeded_shuffle(std::vector<int>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace

Clustering lpa_cluster(const FactGraph& graph, int max_iters, std::uint64_t seed) {
    if (max_iters < 1) throw usage_error("lpa_cluster: max_iters must be >= 1");

    std::map<int, int> label;
    for (int id : graph.node_ids) label[id] = id;

    std::vector<int> order(graph.node_ids.begin(), graph.node_ids.end());
    std::sort(order.begin(), order.end());
    std::mt19937_64 rng(seed);

    for (int iter = 0; iter < max_iters; ++iter) {
        seeded_shuffle(order, rng);
        bool changed = false;
        for (int node : order) {
            auto adj_it = graph.adjacency.find(node);
            if (adj_it == graph.adjacency.end() || adj_it->second.empty()) continue;

            // Most frequent neighbor label, smallest label on ties.
            std::map<int, int> counts;
            for (int neighbor : adj_it->second) counts[label.at(neighbor)] += 1;
            int best_label = label.at(node);
            int best_count = 0;
            for (const auto& [lbl, count] : counts) {
                if (count > best_count) {
                    best_label = lbl;
                    best_count = count;
                }
            }
            if (best_label != label.at(node)) {
                label[node] = best_label;
                changed = true;
            }
        }
        if (!changed) break;
    }

    // Dense relabel in order of smallest member id.
    std::map<int, std::set<int>> groups;
    for (const auto& [node, lbl] : label) groups[lbl].insert(node);
    std::vector<std::set<int>> ordered(groups.size());
    std::vector<std::pair<int, const std::set<int>*>> by_min;
    by_min.reserve(groups.size());
    for (const auto& [lbl, members] : groups) by_min.emplace_back(*members.begin(), &members);
    std::sort(by_min.begin(), by_min.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Clustering result;
    result.clusters.reserve(by_min.size());
    for (std::size_t dense = 0; dense < by_min.size(); ++dense) {
        result.clusters.push_back(*by_min[dense].second);
        for (int node : result.clusters.back()) result.assignment[node] = static_cast<int>(dense);
    }
    return result;
}

}  // namespace bimem

#pragma once
// Undirected fact graph from embedding similarity, and label-propagation
// clustering of it into thematic groups.

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "bimem/memory.hpp"

namespace bimem {

struct FactGraph {
    std::vector<int> node_ids;               // ascending
    std::map<int, std::set<int>> adjacency;  // symmetric, no self-loops
    double tau = 0.2;
};

struct Clustering {
    std::map<int, int> assignment;        // fact id -> dense label
    std::vector<std::set<int>> clusters;  // label-indexed, ordered by smallest member id
};

// All-pairs edge construction: an edge exists iff cosine similarity is
// strictly greater than tau. Edge sets are written back symmetrically into
// the facts. Zero-norm embeddings never form edges.
FactGraph build_edges(std::vector<FactUnit>& facts, double tau);

// Asynchronous label propagation: labels start as own ids, nodes are visited
// in a seeded-shuffle order each sweep, and each node adopts the most
// frequent neighbor label (ties to the smallest label). Stops when a sweep
// changes nothing or after max_iters sweeps. Isolated nodes stay singletons.
// Cluster labels are re-densified in order of smallest member id.
Clustering lpa_cluster(const FactGraph& graph, int max_iters = 20, std::uint64_t seed = 0);

}  // namespace bimem

#pragma once
// Shared helpers for the test suites: independent oracles (kept separate
// from the implementation paths they check), random bank generators, and
// stub backends.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bimem/construction.hpp"
#include "bimem/embedding.hpp"
#include "bimem/errors.hpp"
#include "bimem/fact_graph.hpp"
#include "bimem/memory.hpp"
#include "bimem/operators.hpp"
#include "bimem/text.hpp"

namespace testsupport {

// ----- independent oracles ---------------------------------------------------

// Cosine similarity written independently of bimem::cosine_sim.
inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

// Union-find connected components over an adjacency map; clusters come out
// ordered by smallest member id, matching the clustering contract.
class UnionFind {
public:
    explicit UnionFind(const std::vector<int>& ids) {
        for (int id : ids) parent_[id] = id;
    }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(int a, int b) { parent_[find(a)] = find(b); }

    std::vector<std::set<int>> components() {
        std::map<int, std::set<int>> groups;
        for (const auto& [id, p] : parent_) {
            (void)p;
            groups[find(id)].insert(id);
        }
        std::map<int, std::set<int>> by_min;
        for (auto& [root, members] : groups) {
            (void)root;
            by_min[*members.begin()] = members;
        }
        std::vector<std::set<int>> out;
        for (auto& [min_id, members] : by_min) {
            (void)min_id;
            out.push_back(members);
        }
        return out;
    }

private:
    std::map<int, int> parent_;
};

inline std::vector<std::set<int>> connected_components(const bimem::FactGraph& graph) {
    UnionFind uf(graph.node_ids);
    for (const auto& [node, neighbors] : graph.adjacency) {
        for (int peer : neighbors) uf.unite(node, peer);
    }
    return uf.components();
}

// ----- random structures -----------------------------------------------------

inline int pick(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> pool = {
        "harbor", "lantern", "meadow", "violin", "ember",    "quarry", "saffron", "timber",
        "anchor", "breeze",  "canyon", "damson", "estuary",  "fjord",  "glacier", "heather",
        "ingot",  "juniper", "kestrel", "larch", "marble",   "nectar", "orchid",  "pebble",
        "quartz", "ripple",  "sorrel", "thicket", "umber",   "vellum", "willow",  "yarrow",
        "zephyr", "bramble", "cinder", "drift",   "fennel",  "gorse",  "hollow",  "iris"};
    return pool;
}

inline std::string random_text(std::mt19937_64& rng, int min_words = 3, int max_words = 6) {
    const auto& pool = word_pool();
    int words = pick(rng, min_words, max_words);
    std::string out;
    for (int w = 0; w < words; ++w) {
        if (w > 0) out += " ";
        out += pool[static_cast<std::size_t>(rng() % pool.size())];
    }
    return out;
}

// Structurally valid bank with random content: symmetric random edges, a
// random partition into scenes, deltas on some scenes, full persona.
inline bimem::MemoryBank random_bank(std::mt19937_64& rng, int max_facts = 12, int dim = 32) {
    bimem::MemoryBank bank;
    bank.dimension = dim;
    const int n = pick(rng, 1, max_facts);

    for (int i = 0; i < n; ++i) {
        bimem::FactUnit fact;
        fact.id = i;
        fact.content = random_text(rng);
        for (const std::string& token : bimem::tokenize(fact.content)) {
            if (fact.keywords.size() < 4) fact.keywords.push_back(token);
        }
        if (rng() % 3 == 0) fact.tags.push_back("topic" + std::to_string(rng() % 5));
        fact.timestamp = "2023-0" + std::to_string(1 + i % 9) + "-1" + std::to_string(i % 10) +
                         "T0" + std::to_string(i % 10) + ":15:00";
        fact.embedding = bimem::deterministic_embed(fact.content, dim);
        bank.facts.emplace(i, std::move(fact));
    }

    // Random symmetric edges.
    for (int i = 0; i < n; ++i) {
        for (int l = i + 1; l < n; ++l) {
            if (rng() % 4 == 0) {
                bank.facts[i].edges.insert(l);
                bank.facts[l].edges.insert(i);
            }
        }
    }

    // Random partition: shuffle ids, cut into contiguous groups.
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = ids.size(); i > 1; --i) {
        std::swap(ids[i - 1], ids[rng() % i]);
    }
    int scene_id = 0;
    std::size_t cursor = 0;
    while (cursor < ids.size()) {
        std::size_t take = 1 + rng() % 4;
        take = std::min(take, ids.size() - cursor);
        bimem::SceneUnit scene;
        scene.id = scene_id++;
        std::vector<std::string> parts;
        for (std::size_t c = 0; c < take; ++c) {
            int fid = ids[cursor + c];
            scene.members.insert(fid);
            parts.push_back(bank.facts[fid].content);
        }
        scene.summary = bimem::join(parts, "; ");
        for (const std::string& token : bimem::tokenize(scene.summary)) {
            if (scene.keywords.size() < 6) scene.keywords.push_back(token);
        }
        if (rng() % 3 == 0) scene.delta = "echoes " + random_text(rng, 2, 3);
        scene.embedding = bimem::deterministic_embed(bimem::scene_text(scene), dim);
        bank.scenes.emplace(scene.id, std::move(scene));
        cursor += take;
    }

    for (int d = 0; d < bimem::kPersonaDimensionCount; ++d) {
        std::string text = random_text(rng, 2, 5);
        bank.persona.dimensions[static_cast<std::size_t>(d)] =
            bimem::PersonaEntry{text, bimem::deterministic_embed(text, dim)};
    }

    bank.provenance.embedder = "hash-" + std::to_string(dim);
    bank.provenance.chat_backend = "mock";
    bank.provenance.seed = rng() % 1000;
    return bank;
}

inline bool vectors_equal(const bimem::Vector& a, const bimem::Vector& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

// Field-for-field equality, independent of the JSON layer.
inline bool banks_equal(const bimem::MemoryBank& a, const bimem::MemoryBank& b) {
    if (a.dimension != b.dimension) return false;
    if (a.facts.size() != b.facts.size() || a.scenes.size() != b.scenes.size()) return false;
    for (const auto& [id, fa] : a.facts) {
        auto it = b.facts.find(id);
        if (it == b.facts.end()) return false;
        const bimem::FactUnit& fb = it->second;
        if (fa.id != fb.id || fa.content != fb.content || fa.keywords != fb.keywords ||
            fa.tags != fb.tags || fa.timestamp != fb.timestamp || fa.edges != fb.edges ||
            !vectors_equal(fa.embedding, fb.embedding)) {
            return false;
        }
    }
    for (const auto& [id, sa] : a.scenes) {
        auto it = b.scenes.find(id);
        if (it == b.scenes.end()) return false;
        const bimem::SceneUnit& sb = it->second;
        if (sa.id != sb.id || sa.summary != sb.summary || sa.keywords != sb.keywords ||
            sa.tags != sb.tags || sa.members != sb.members || sa.delta != sb.delta ||
            !vectors_equal(sa.embedding, sb.embedding)) {
            return false;
        }
    }
    for (int d = 0; d < bimem::kPersonaDimensionCount; ++d) {
        const auto& pa = a.persona.dimensions[static_cast<std::size_t>(d)];
        const auto& pb = b.persona.dimensions[static_cast<std::size_t>(d)];
        if (pa.text != pb.text || !vectors_equal(pa.embedding, pb.embedding)) return false;
    }
    const bimem::Provenance& va = a.provenance;
    const bimem::Provenance& vb = b.provenance;
    return va.tau == vb.tau && va.alpha == vb.alpha && va.k == vb.k && va.m == vb.m &&
           va.seed == vb.seed && va.lpa_max_iters == vb.lpa_max_iters &&
           va.embedder == vb.embedder && va.chat_backend == vb.chat_backend;
}

// ----- stub backends ----------------------------------------------------------

// Forces one calibration delta on a single scene; everything else stays mock.
class SingleDeltaBackend : public bimem::MockChatBackend {
public:
    SingleDeltaBackend(int target_scene, std::string delta)
        : target_(target_scene), delta_(std::move(delta)) {}

    bimem::CalibrationVerdict calibrate_scene(const bimem::SceneUnit& scene,
                                              const bimem::PersonaProfile& persona) override {
        (void)persona;
        if (scene.id == target_) return bimem::CalibrationVerdict{true, delta_, "stub"};
        return bimem::CalibrationVerdict{false, "", "stub"};
    }

private:
    int target_;
    std::string delta_;
};

// Returns the invariant-violating verdict (true + empty condition).
class BrokenVerdictBackend : public bimem::MockChatBackend {
public:
    bimem::CalibrationVerdict calibrate_scene(const bimem::SceneUnit&,
                                              const bimem::PersonaProfile&) override {
        return bimem::CalibrationVerdict{true, "", "stub"};
    }
};

// Fails answer generation; retrieval-side harness behavior stays intact.
class FailingAnswerBackend : public bimem::MockChatBackend {
public:
    std::string generate_answer(const std::string&, const std::string&) override {
        throw bimem::backend_error("stub breakdown");
    }
};

// Convenience conversation builder: one interaction per query text.
inline bimem::Conversation make_conversation(const std::vector<std::string>& queries,
                                             const std::string& id = "conv-test") {
    bimem::Conversation conv;
    conv.id = id;
    int turn = 1;
    for (const std::string& q : queries) {
        bimem::Interaction interaction;
        interaction.turn = turn;
        interaction.speaker = "";
        interaction.query = q;
        interaction.response = "noted";
        interaction.timestamp = "2023-05-1" + std::to_string(turn % 10) + "T10:00:00";
        conv.interactions.push_back(std::move(interaction));
        ++turn;
    }
    return conv;
}

}  // namespace testsupport

#pragma once
// Associative retrieval: hybrid-scored initial search over all three memory
// levels, then one hop of spreading activation (facts evoke their parent
// scene; scenes evoke their top-m member facts; persona units are global
// anchors and spread nowhere).
//
// Ablation strategies mirror the alternative retrieval configurations:
//   bimem         initial search + both spreading directions
//   hierarchical  initial search only
//   fact2scene    initial search + fact->parent-scene spreading only
//   scene2fact    initial search + scene->member-fact spreading only
//   topdown       persona-level search, then query-free association downward
//                 (persona -> scenes -> facts) under per-level quotas
//   bottomup      fact-level search, then association upward under the same
//                 quotas; persona units join as global anchors

#include <optional>
#include <string>
#include <vector>

#include "bimem/embedding.hpp"
#include "bimem/memory.hpp"

namespace bimem {

struct RetrievalConfig {
    int k = 30;        // initial search size, >= 1
    int m = 3;         // facts activated per retrieved scene, >= 0
    double alpha = 0.5;  // dense weight in the hybrid fusion, in [0, 1]
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
};

void validate_retrieval_config(const RetrievalConfig& cfg);

enum class QuestionCategory : int { single_hop = 0, multi_hop = 1, temporal = 2, open_domain = 3 };

const char* question_category_name(QuestionCategory c);
std::optional<QuestionCategory> parse_question_category(const std::string& name);

// Per-category defaults: k = 35 / 25 / 30 / 25, m = 3, alpha = 0.5.
RetrievalConfig preset_for(QuestionCategory category);

enum class RetrievalStrategy : int {
    bimem = 0,
    hierarchical = 1,
    topdown = 2,
    bottomup = 3,
    scene2fact = 4,
    fact2scene = 5,
};

const char* retrieval_strategy_name(RetrievalStrategy s);
std::optional<RetrievalStrategy> parse_retrieval_strategy(const std::string& name);

// Addressing for the unified candidate pool.
struct UnitKey {
    MemoryLevel level = MemoryLevel::fact;
    int id = 0;

    bool operator==(const UnitKey&) const = default;
    bool operator<(const UnitKey& other) const {
        if (level != other.level) return static_cast<int>(level) < static_cast<int>(other.level);
        return id < other.id;
    }
};

// Text and embedding a unit exposes to scoring. Persona units are indexed as
// "<dimension key>: <text>".
std::string unit_text(const MemoryBank& bank, UnitKey key);
const Vector& unit_embedding(const MemoryBank& bank, UnitKey key);

// All units of a bank: persona dimensions, then scenes, then facts.
std::vector<UnitKey> bank_units(const MemoryBank& bank);

// BM25 over the token streams of all retrieval units in a bank. Rebuilt
// deterministically from the bank; tokenization is lowercase alphanumeric.
class LexicalIndex {
public:
    explicit LexicalIndex(const MemoryBank& bank);

    // Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)); terms the
    // unit lacks contribute 0.
    double bm25_score(const std::vector<std::string>& query_tokens, UnitKey unit,
                      double k1 = 1.2, double b = 0.75) const;

    std::size_t size() const { return records_.size(); }

private:
    struct Record {
        UnitKey key;
        std::map<std::string, int> tf;
        int length = 0;
    };
    std::vector<Record> records_;
    std::map<UnitKey, std::size_t> lookup_;
    std::map<std::string, int> df_;
    double avg_length_ = 0.0;
};

// Fused scores for a candidate pool: alpha * dense + (1 - alpha) * bm25,
// each side min-max normalized over the pool (constant pools map to 0).
std::vector<double> hybrid_scores(const Vector& query_embedding,
                                  const std::vector<std::string>& query_tokens,
                                  const std::vector<UnitKey>& pool, const MemoryBank& bank,
                                  const LexicalIndex& index, const RetrievalConfig& cfg);

// Pool-normalized fused score of one unit (full-bank pool).
double hybrid_score(const std::string& query, UnitKey unit, const MemoryBank& bank,
                    const LexicalIndex& index, EmbeddingProvider& provider,
                    const RetrievalConfig& cfg);

// Global top-k across facts, calibrated scenes, and persona units. Ties break
// by level order persona < scene < fact, then smaller id.
RetrievedSet initial_search(const std::string& query, const MemoryBank& bank,
                            const LexicalIndex& index, EmbeddingProvider& provider,
                            const RetrievalConfig& cfg);

// One-hop expansion of the initial set; the result is a deduplicated union
// keeping first-seen origins: initial units in rank order, then spread units
// by (source rank, score desc). |result| <= k * (1 + max(1, m)).
RetrievedSet spread_activation(const RetrievedSet& initial, const MemoryBank& bank,
                               const RetrievalConfig& cfg);

RetrievedSet retrieve(const std::string& query, const MemoryBank& bank, const LexicalIndex& index,
                      EmbeddingProvider& provider, const RetrievalConfig& cfg);

RetrievedSet retrieve_with_strategy(RetrievalStrategy strategy, const std::string& query,
                                    const MemoryBank& bank, const LexicalIndex& index,
                                    EmbeddingProvider& provider, const RetrievalConfig& cfg);

}  // namespace bimem

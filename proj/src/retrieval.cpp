#include "bimem/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "bimem/errors.hpp"
#include "bimem/text.hpp"

namespace bimem {

void validate_retrieval_config(const RetrievalConfig& cfg) {
    if (cfg.k < 1) throw usage_error("retrieval config: k must be >= 1");
    if (cfg.m < 0) throw usage_error("retrieval config: m must be >= 0");
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw usage_error("retrieval config: alpha must be in [0, 1]");
    if (cfg.bm25_k1 < 0.0) throw usage_error("retrieval config: bm25_k1 must be >= 0");
    if (cfg.bm25_b < 0.0 || cfg.bm25_b > 1.0) throw usage_error("retrieval config: bm25_b must be in [0, 1]");
}

const char* question_category_name(QuestionCategory c) {
    switch (c) {
        case QuestionCategory::single_hop: return "single_hop";
        case QuestionCategory::multi_hop: return "multi_hop";
        case QuestionCategory::temporal: return "temporal";
        case QuestionCategory::open_domain: return "open_domain";
    }
    return "?";
}

std::optional<QuestionCategory> parse_question_category(const std::string& name) {
    if (name == "single_hop") return QuestionCategory::single_hop;
    if (name == "multi_hop") return QuestionCategory::multi_hop;
    if (name == "temporal") return QuestionCategory::temporal;
    if (name == "open_domain") return QuestionCategory::open_domain;
    return std::nullopt;
}

RetrievalConfig preset_for(QuestionCategory category) {
    RetrievalConfig cfg;
    switch (category) {
        case QuestionCategory::single_hop: cfg.k = 35; break;
        case QuestionCategory::multi_hop: cfg.k = 25; break;
        case QuestionCategory::temporal: cfg.k = 30; break;
        case QuestionCategory::open_domain: cfg.k = 25; break;
    }
    return cfg;
}

const char* retrieval_strategy_name(RetrievalStrategy s) {
    switch (s) {
        case RetrievalStrategy::bimem: return "bimem";
        case RetrievalStrategy::hierarchical: return "hierarchical";
        case RetrievalStrategy::topdown: return "topdown";
        case RetrievalStrategy::bottomup: return "bottomup";
        case RetrievalStrategy::scene2fact: return "scene2fact";
        case RetrievalStrategy::fact2scene: return "fact2scene";
    }
    return "?";
}

std::optional<RetrievalStrategy> parse_retrieval_strategy(const std::string& name) {
    if (name == "bimem") return RetrievalStrategy::bimem;
    if (name == "hierarchical") return RetrievalStrategy::hierarchical;
    if (name == "topdown") return RetrievalStrategy::topdown;
    if (name == "bottomup") return RetrievalStrategy::bottomup;
    if (name == "scene2fact") return RetrievalStrategy::scene2fact;
    if (name == "fact2scene") return RetrievalStrategy::fact2scene;
    return std::nullopt;
}

std::string unit_text(const MemoryBank& bank, UnitKey key) {
    switch (key.level) {
        case MemoryLevel::fact: {
            auto it = bank.facts.find(key.id);
            if (it == bank.facts.end()) throw data_error("integrity: fact " + std::to_string(key.id) + " not in bank");
            return it->second.content;
        }
        case MemoryLevel::scene: {
            auto it = bank.scenes.find(key.id);
            if (it == bank.scenes.end()) throw data_error("integrity: scene " + std::to_string(key.id) + " not in bank");
            return scene_text(it->second);
        }
        case MemoryLevel::persona: {
            if (key.id < 0 || key.id >= kPersonaDimensionCount) {
                throw data_error("integrity: persona dimension " + std::to_string(key.id) + " out of range");
            }
            return std::string(kPersonaDimensionKeys[key.id]) + ": " + bank.persona.dimensions[key.id].text;
        }
    }
    throw internal_error("unit_text: bad level");
}

const Vector& unit_embedding(const MemoryBank& bank, UnitKey key) {
    switch (key.level) {
        case MemoryLevel::fact: {
            auto it = bank.facts.find(key.id);
            if (it == bank.facts.end()) throw data_error("integrity: fact " + std::to_string(key.id) + " not in bank");
            return it->second.embedding;
        }
        case MemoryLevel::scene: {
            auto it = bank.scenes.find(key.id);
            if (it == bank.scenes.end()) throw data_error("integrity: scene " + std::to_string(key.id) + " not in bank");
            return it->second.embedding;
        }
        case MemoryLevel::persona: {
            if (key.id < 0 || key.id >= kPersonaDimensionCount) {
                throw data_error("integrity: persona dimension " + std::to_string(key.id) + " out of range");
            }
            return bank.persona.dimensions[key.id].embedding;
        }
    }
    throw internal_error("unit_embedding: bad level");
}

std::vector<UnitKey> bank_units(const MemoryBank& bank) {
    std::vector<UnitKey> pool;
    pool.reserve(kPersonaDimensionCount + bank.scenes.size() + bank.facts.size());
    for (int d = 0; d < kPersonaDimensionCount; ++d) {
        if (!bank.persona.dimensions[static_cast<std::size_t>(d)].text.empty()) {
            pool.push_back(UnitKey{MemoryLevel::persona, d});
        }
    }
    for (const auto& [id, scene] : bank.scenes) {
        (void)scene;
        pool.push_back(UnitKey{MemoryLevel::scene, id});
    }
    for (const auto& [id, fact] : bank.facts) {
        (void)fact;
        pool.push_back(UnitKey{MemoryLevel::fact, id});
    }
    return pool;
}

// ----- lexical index ----------------------------------------------------------

LexicalIndex::LexicalIndex(const MemoryBank& bank) {
    for (UnitKey key : bank_units(bank)) {
        Record record;
        record.key = key;
        for (const std::string& token : tokenize(unit_text(bank, key))) {
            record.tf[token] += 1;
            record.length += 1;
        }
        for (const auto& [token, n] : record.tf) {
            (void)n;
            df_[token] += 1;
        }
        lookup_[key] = records_.size();
        records_.push_back(std::move(record));
    }
    std::size_t total = 0;
    for (const Record& r : records_) total += static_cast<std::size_t>(r.length);
    avg_length_ = records_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(records_.size());
}

double LexicalIndex::bm25_score(const std::vector<std::string>& query_tokens, UnitKey unit,
                                double k1, double b) const {
    auto it = lookup_.find(unit);
    if (it == lookup_.end()) throw data_error("integrity: unit not in lexical index");
    const Record& record = records_[it->second];
    if (record.length == 0 || avg_length_ == 0.0) return 0.0;

    const double n_docs = static_cast<double>(records_.size());
    const double len_norm = 1.0 - b + b * static_cast<double>(record.length) / avg_length_;
    double score = 0.0;
    for (const std::string& token : query_tokens) {
        auto tf_it = record.tf.find(token);
        if (tf_it == record.tf.end()) continue;
        auto df_it = df_.find(token);
        const double df = df_it == df_.end() ? 0.0 : static_cast<double>(df_it->second);
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        const double tf = static_cast<double>(tf_it->second);
        score += idf * tf * (k1 + 1.0) / (tf + k1 * len_norm);
    }
    return score;
}

// ----- hybrid scoring ----------------------------------------------------------

namespace {

std::vector<double> min_max_normalize(std::vector<double> values) {
    if (values.empty()) return values;
    auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *min_it, hi = *max_it;
    if (hi <= lo) {
        std::fill(values.begin(), values.end(), 0.0);
        return values;
    }
    for (double& v : values) v = (v - lo) / (hi - lo);
    return values;
}

// Ranking comparator shared by every search: score desc, then level order
// persona < scene < fact, then smaller id.
bool rank_before(double score_a, UnitKey a, double score_b, UnitKey b) {
    if (score_a != score_b) return score_a > score_b;
    if (a.level != b.level) return static_cast<int>(a.level) < static_cast<int>(b.level);
    return a.id < b.id;
}

std::vector<std::size_t> ranked_order(const std::vector<UnitKey>& pool,
                                      const std::vector<double>& scores) {
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rank_before(scores[a], pool[a], scores[b], pool[b]);
    });
    return order;
}

}  // namespace

std::vector<double> hybrid_scores(const Vector& query_embedding,
                                  const std::vector<std::string>& query_tokens,
                                  const std::vector<UnitKey>& pool, const MemoryBank& bank,
                                  const LexicalIndex& index, const RetrievalConfig& cfg) {
    std::vector<double> dense(pool.size(), 0.0);
    std::vector<double> lexical(pool.size(), 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        dense[i] = ranking_sim(query_embedding, unit_embedding(bank, pool[i]));
        lexical[i] = index.bm25_score(query_tokens, pool[i], cfg.bm25_k1, cfg.bm25_b);
    }
    dense = min_max_normalize(std::move(dense));
    lexical = min_max_normalize(std::move(lexical));
    std::vector<double> fused(pool.size(), 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        fused[i] = cfg.alpha * dense[i] + (1.0 - cfg.alpha) * lexical[i];
    }
    return fused;
}

double hybrid_score(const std::string& query, UnitKey unit, const MemoryBank& bank,
                    const LexicalIndex& index, EmbeddingProvider& provider,
                    const RetrievalConfig& cfg) {
    std::vector<UnitKey> pool = bank_units(bank);
    auto it = std::find(pool.begin(), pool.end(), unit);
    if (it == pool.end()) throw data_error("integrity: unit not in bank pool");
    std::vector<double> fused =
        hybrid_scores(provider.embed(query), tokenize(query), pool, bank, index, cfg);
    return fused[static_cast<std::size_t>(it - pool.begin())];
}

RetrievedSet initial_search(const std::string& query, const MemoryBank& bank,
                            const LexicalIndex& index, EmbeddingProvider& provider,
                            const RetrievalConfig& cfg) {
    validate_retrieval_config(cfg);
    std::vector<UnitKey> pool = bank_units(bank);
    if (pool.empty()) return {};

    std::vector<double> fused =
        hybrid_scores(provider.embed(query), tokenize(query), pool, bank, index, cfg);
    std::vector<std::size_t> order = ranked_order(pool, fused);

    RetrievedSet out;
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), pool.size());
    out.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        const UnitKey key = pool[order[r]];
        out.push_back(RetrievalUnit{key.level, key.id, fused[order[r]], RetrievalOrigin::initial});
    }
    return out;
}

namespace {

// Scene -> top-m member facts by dense similarity of the stored embeddings
// (ties to the smaller fact id).
std::vector<RetrievalUnit> activate_members(const SceneUnit& scene, const MemoryBank& bank, int m) {
    std::vector<UnitKey> members;
    std::vector<double> scores;
    for (int fid : scene.members) {
        auto it = bank.facts.find(fid);
        if (it == bank.facts.end()) {
            throw data_error("integrity: scene " + std::to_string(scene.id) + " references missing fact " +
                             std::to_string(fid));
        }
        members.push_back(UnitKey{MemoryLevel::fact, fid});
        scores.push_back(ranking_sim(scene.embedding, it->second.embedding));
    }
    std::vector<std::size_t> order = ranked_order(members, scores);
    std::vector<RetrievalUnit> out;
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(m), members.size());
    for (std::size_t r = 0; r < take; ++r) {
        out.push_back(RetrievalUnit{MemoryLevel::fact, members[order[r]].id, scores[order[r]],
                                    RetrievalOrigin::spread_from_scene});
    }
    return out;
}

}  // namespace

RetrievedSet spread_activation(const RetrievedSet& initial, const MemoryBank& bank,
                               const RetrievalConfig& cfg) {
    // Fact -> owning scene, built once.
    std::map<int, int> parent;
    for (const auto& [sid, scene] : bank.scenes) {
        for (int fid : scene.members) parent.emplace(fid, sid);
    }

    RetrievedSet out;
    std::set<UnitKey> seen;
    auto push_unique = [&](const RetrievalUnit& unit) {
        if (seen.insert(UnitKey{unit.level, unit.ref_id}).second) out.push_back(unit);
    };

    for (const RetrievalUnit& unit : initial) push_unique(unit);

    for (const RetrievalUnit& unit : initial) {
        if (unit.level == MemoryLevel::fact) {
            auto it = parent.find(unit.ref_id);
            if (it == parent.end()) {
                throw data_error("integrity: fact " + std::to_string(unit.ref_id) + " has no parent scene");
            }
            push_unique(RetrievalUnit{MemoryLevel::scene, it->second, unit.score,
                                      RetrievalOrigin::spread_from_fact});
        } else if (unit.level == MemoryLevel::scene) {
            auto it = bank.scenes.find(unit.ref_id);
            if (it == bank.scenes.end()) {
                throw data_error("integrity: scene " + std::to_string(unit.ref_id) + " not in bank");
            }
            for (const RetrievalUnit& fact_unit : activate_members(it->second, bank, cfg.m)) {
                push_unique(fact_unit);
            }
        }
        // Persona units are global anchors: no association.
    }
    return out;
}

RetrievedSet retrieve(const std::string& query, const MemoryBank& bank, const LexicalIndex& index,
                      EmbeddingProvider& provider, const RetrievalConfig& cfg) {
    return spread_activation(initial_search(query, bank, index, provider, cfg), bank, cfg);
}

// ----- ablation strategies ------------------------------------------------------

namespace {

// Per-level selection sizes for the unidirectional strategies.
constexpr int kQuotaFacts = 1;
constexpr int kQuotaScenes = 15;
constexpr int kQuotaPersona = 25;

std::vector<UnitKey> level_units(const MemoryBank& bank, MemoryLevel level) {
    std::vector<UnitKey> pool;
    for (UnitKey key : bank_units(bank)) {
        if (key.level == level) pool.push_back(key);
    }
    return pool;
}

// Query-scored top-n over one level.
RetrievedSet search_level(const std::string& query, MemoryLevel level, int quota,
                          const MemoryBank& bank, const LexicalIndex& index,
                          EmbeddingProvider& provider, const RetrievalConfig& cfg) {
    std::vector<UnitKey> pool = level_units(bank, level);
    if (pool.empty()) return {};
    std::vector<double> fused =
        hybrid_scores(provider.embed(query), tokenize(query), pool, bank, index, cfg);
    std::vector<std::size_t> order = ranked_order(pool, fused);
    RetrievedSet out;
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(quota), pool.size());
    for (std::size_t r = 0; r < take; ++r) {
        out.push_back(RetrievalUnit{level, pool[order[r]].id, fused[order[r]], RetrievalOrigin::initial});
    }
    return out;
}

// Association step: units of `level` ranked by their best dense similarity
// to any anchor embedding. The query plays no part, which is exactly what
// makes the unidirectional strategies lose question grounding.
RetrievedSet associate_level(const std::vector<const Vector*>& anchors, MemoryLevel level,
                             const std::vector<UnitKey>& candidates, int quota,
                             const MemoryBank& bank, RetrievalOrigin origin) {
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (UnitKey key : candidates) {
        double best = 0.0;
        for (const Vector* anchor : anchors) {
            best = std::max(best, ranking_sim(*anchor, unit_embedding(bank, key)));
        }
        scores.push_back(best);
    }
    std::vector<std::size_t> order = ranked_order(candidates, scores);
    RetrievedSet out;
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(quota), candidates.size());
    for (std::size_t r = 0; r < take; ++r) {
        out.push_back(RetrievalUnit{level, candidates[order[r]].id, scores[order[r]], origin});
    }
    return out;
}

RetrievedSet retrieve_topdown(const std::string& query, const MemoryBank& bank,
                              const LexicalIndex& index, EmbeddingProvider& provider,
                              const RetrievalConfig& cfg) {
    RetrievedSet personas =
        search_level(query, MemoryLevel::persona, kQuotaPersona, bank, index, provider, cfg);
    std::vector<const Vector*> persona_anchors;
    for (const RetrievalUnit& u : personas) {
        persona_anchors.push_back(&unit_embedding(bank, UnitKey{u.level, u.ref_id}));
    }
    RetrievedSet scenes = associate_level(persona_anchors, MemoryLevel::scene,
                                          level_units(bank, MemoryLevel::scene), kQuotaScenes, bank,
                                          RetrievalOrigin::initial);
    std::vector<const Vector*> scene_anchors;
    std::vector<UnitKey> member_facts;
    std::set<int> member_seen;
    for (const RetrievalUnit& u : scenes) {
        const SceneUnit& scene = bank.scenes.at(u.ref_id);
        scene_anchors.push_back(&scene.embedding);
        for (int fid : scene.members) {
            if (member_seen.insert(fid).second) member_facts.push_back(UnitKey{MemoryLevel::fact, fid});
        }
    }
    RetrievedSet facts = associate_level(scene_anchors, MemoryLevel::fact, member_facts, kQuotaFacts,
                                         bank, RetrievalOrigin::spread_from_scene);

    RetrievedSet out;
    out.insert(out.end(), personas.begin(), personas.end());
    out.insert(out.end(), scenes.begin(), scenes.end());
    out.insert(out.end(), facts.begin(), facts.end());
    return out;
}

RetrievedSet retrieve_bottomup(const std::string& query, const MemoryBank& bank,
                               const LexicalIndex& index, EmbeddingProvider& provider,
                               const RetrievalConfig& cfg) {
    RetrievedSet facts = search_level(query, MemoryLevel::fact, kQuotaFacts, bank, index, provider, cfg);

    std::map<int, int> parent;
    for (const auto& [sid, scene] : bank.scenes) {
        for (int fid : scene.members) parent.emplace(fid, sid);
    }
    RetrievedSet scenes;
    std::set<int> scene_seen;
    for (const RetrievalUnit& u : facts) {
        auto it = parent.find(u.ref_id);
        if (it == parent.end()) {
            throw data_error("integrity: fact " + std::to_string(u.ref_id) + " has no parent scene");
        }
        if (static_cast<int>(scenes.size()) < kQuotaScenes && scene_seen.insert(it->second).second) {
            scenes.push_back(RetrievalUnit{MemoryLevel::scene, it->second, u.score,
                                           RetrievalOrigin::spread_from_fact});
        }
    }
    RetrievedSet personas;
    const std::size_t persona_take =
        std::min<std::size_t>(kQuotaPersona, kPersonaDimensionCount);
    for (std::size_t d = 0; d < persona_take; ++d) {
        personas.push_back(RetrievalUnit{MemoryLevel::persona, static_cast<int>(d), 0.0,
                                         RetrievalOrigin::initial});
    }

    RetrievedSet out;
    out.insert(out.end(), facts.begin(), facts.end());
    out.insert(out.end(), scenes.begin(), scenes.end());
    out.insert(out.end(), personas.begin(), personas.end());
    return out;
}

RetrievedSet spread_one_direction(const RetrievedSet& initial, const MemoryBank& bank,
                                  const RetrievalConfig& cfg, bool fact_to_scene,
                                  bool scene_to_fact) {
    RetrievalConfig masked = cfg;
    if (!scene_to_fact) masked.m = 0;
    if (fact_to_scene) return spread_activation(initial, bank, masked);

    // Scene->fact only: fact->scene association suppressed.
    RetrievedSet out;
    std::set<UnitKey> seen;
    auto push_unique = [&](const RetrievalUnit& unit) {
        if (seen.insert(UnitKey{unit.level, unit.ref_id}).second) out.push_back(unit);
    };
    for (const RetrievalUnit& unit : initial) push_unique(unit);
    for (const RetrievalUnit& unit : initial) {
        if (unit.level != MemoryLevel::scene) continue;
        auto it = bank.scenes.find(unit.ref_id);
        if (it == bank.scenes.end()) {
            throw data_error("integrity: scene " + std::to_string(unit.ref_id) + " not in bank");
        }
        for (const RetrievalUnit& fact_unit : activate_members(it->second, bank, masked.m)) {
            push_unique(fact_unit);
        }
    }
    return out;
}

}  // namespace

RetrievedSet retrieve_with_strategy(RetrievalStrategy strategy, const std::string& query,
                                    const MemoryBank& bank, const LexicalIndex& index,
                                    EmbeddingProvider& provider, const RetrievalConfig& cfg) {
    validate_retrieval_config(cfg);
    switch (strategy) {
        case RetrievalStrategy::bimem:
            return retrieve(query, bank, index, provider, cfg);
        case RetrievalStrategy::hierarchical:
            return initial_search(query, bank, index, provider, cfg);
        case RetrievalStrategy::fact2scene:
            return spread_one_direction(initial_search(query, bank, index, provider, cfg), bank, cfg,
                                        /*fact_to_scene=*/true, /*scene_to_fact=*/false);
        case RetrievalStrategy::scene2fact:
            return spread_one_direction(initial_search(query, bank, index, provider, cfg), bank, cfg,
                                        /*fact_to_scene=*/false, /*scene_to_fact=*/true);
        case RetrievalStrategy::topdown:
            return retrieve_topdown(query, bank, index, provider, cfg);
        case RetrievalStrategy::bottomup:
            return retrieve_bottomup(query, bank, index, provider, cfg);
    }
    throw internal_error("retrieve_with_strategy: bad strategy");
}

}  // namespace bimem

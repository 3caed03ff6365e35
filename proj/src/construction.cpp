#include "bimem/construction.hpp"

#include <chrono>
#include <exception>

#include "bimem/detail/parallel.hpp"
#include "bimem/errors.hpp"
#include "bimem/fact_graph.hpp"
#include "bimem/text.hpp"

namespace bimem {

void validate_conversation(const Conversation& conv) {
    if (conv.interactions.empty()) throw data_error("conversation " + conv.id + ": no interactions");
    int last_turn = -1;
    bool first = true;
    for (const Interaction& it : conv.interactions) {
        if (!first && it.turn <= last_turn) {
            throw data_error("conversation " + conv.id + ": turn ids not strictly increasing at turn " +
                             std::to_string(it.turn));
        }
        if (trim_copy(it.query).empty() && trim_copy(it.response).empty()) {
            throw data_error("conversation " + conv.id + ": turn " + std::to_string(it.turn) +
                             " has neither query nor response");
        }
        last_turn = it.turn;
        first = false;
    }
}

namespace {

[[noreturn]] void rethrow_with_stage(const char* stage) {
    try {
        throw;
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(stage) + ": " + e.what(), e.detail());
    } catch (const std::exception& e) {
        throw internal_error(std::string(stage) + ": " + e.what());
    }
}

Vector embed_scene(const SceneUnit& scene, const std::vector<FactUnit>& facts,
                   EmbeddingProvider& provider) {
    std::string text = trim_copy(scene_text(scene));
    if (!text.empty()) return provider.embed(text);
    // Degenerate aggregation: fall back to the mean of member embeddings.
    Vector mean(static_cast<std::size_t>(provider.dimension()), 0.0);
    for (int fid : scene.members) {
        for (const FactUnit& fact : facts) {
            if (fact.id == fid) {
                for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += fact.embedding[d];
                break;
            }
        }
    }
    for (double& x : mean) x /= static_cast<double>(scene.members.size());
    return mean;
}

}  // namespace

InductiveResult inductive_pass(const Conversation& conv, EmbeddingProvider& provider,
                               ChatBackend& backend, const ConstructionConfig& cfg) {
    validate_conversation(conv);
    InductiveResult result;
    const std::size_t n = conv.interactions.size();

    // Facts: one per interaction, embedded on their summarized content.
    result.facts.resize(n);
    try {
        detail::parallel_for(n, cfg.max_workers, [&](std::size_t i) {
            const Interaction& interaction = conv.interactions[i];
            FactDraft draft = backend.extract_fact(interaction.tagged_query(), interaction.response);
            FactUnit& fact = result.facts[i];
            fact.id = static_cast<int>(i);
            fact.content = draft.context;
            fact.keywords = draft.keywords;
            fact.tags = draft.tags;
            fact.timestamp = interaction.timestamp;
            fact.embedding = provider.embed(fact.content);
        });
    } catch (...) {
        rethrow_with_stage("fact extraction");
    }

    FactGraph graph;
    try {
        graph = build_edges(result.facts, cfg.tau);
    } catch (...) {
        rethrow_with_stage("edge construction");
    }

    Clustering clustering = lpa_cluster(graph, cfg.lpa_max_iters, cfg.seed);

    // Scenes: one per cluster; clusters are already ordered by smallest
    // member id, which becomes the scene id order.
    try {
        for (std::size_t j = 0; j < clustering.clusters.size(); ++j) {
            std::vector<const FactUnit*> members;
            for (int fid : clustering.clusters[j]) members.push_back(&result.facts[static_cast<std::size_t>(fid)]);
            SceneDraft draft = backend.aggregate_scene(members);
            SceneUnit scene;
            scene.id = static_cast<int>(j);
            scene.summary = draft.scene_memory;
            scene.keywords = draft.keywords;
            scene.tags = draft.tags;
            scene.members = clustering.clusters[j];
            scene.embedding = embed_scene(scene, result.facts, provider);
            result.scenes.push_back(std::move(scene));
        }
    } catch (...) {
        rethrow_with_stage("scene aggregation");
    }

    // Persona: five dimension-specific distillations over all scenes, with a
    // token budget that drops the oldest scenes when exceeded.
    try {
        std::vector<const SceneUnit*> scenes_for_persona;
        for (const SceneUnit& scene : result.scenes) scenes_for_persona.push_back(&scene);
        std::size_t total_tokens = 0;
        for (const SceneUnit* s : scenes_for_persona) total_tokens += tokenize(scene_text(*s)).size();
        std::size_t dropped = 0;
        while (scenes_for_persona.size() > 1 && total_tokens > cfg.persona_scene_token_budget) {
            total_tokens -= tokenize(scene_text(*scenes_for_persona.front())).size();
            scenes_for_persona.erase(scenes_for_persona.begin());
            ++dropped;
        }
        if (dropped > 0) {
            result.warnings.push_back("persona distillation: dropped " + std::to_string(dropped) +
                                      " oldest scene(s) to fit the token budget");
        }
        for (int d = 0; d < kPersonaDimensionCount; ++d) {
            PersonaDimension dim = static_cast<PersonaDimension>(d);
            std::string text = backend.distill_persona_dimension(scenes_for_persona, dim);
            if (trim_copy(text).empty()) text = "unknown";
            result.persona.dimensions[static_cast<std::size_t>(d)] =
                PersonaEntry{text, provider.embed(text)};
        }
    } catch (...) {
        rethrow_with_stage("persona distillation");
    }

    return result;
}

std::vector<std::string> reflective_pass(std::vector<SceneUnit>& scenes,
                                         const PersonaProfile& persona, ChatBackend& backend,
                                         EmbeddingProvider& provider) {
    std::vector<std::string> warnings;
    for (SceneUnit& scene : scenes) {
        CalibrationVerdict verdict;
        try {
            verdict = backend.calibrate_scene(scene, persona);
        } catch (const std::exception& e) {
            warnings.push_back("scene " + std::to_string(scene.id) +
                               ": calibration failed, left unchanged (" + e.what() + ")");
            continue;
        }
        sanitize_verdict(verdict, warnings, scene.id);
        if (!verdict.needs_calibration) continue;
        scene.delta = verdict.added_condition;
        try {
            scene.embedding = provider.embed(scene_text(scene));
        } catch (const std::exception& e) {
            scene.delta.reset();
            warnings.push_back("scene " + std::to_string(scene.id) +
                               ": could not embed calibrated text, calibration dropped (" + e.what() + ")");
        }
    }
    return warnings;
}

ConstructionResult construct_memory(const Conversation& conv, EmbeddingProvider& provider,
                                    ChatBackend& backend, const ConstructionConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    ConstructionResult result;

    InductiveResult inductive = inductive_pass(conv, provider, backend, cfg);
    result.warnings = std::move(inductive.warnings);
    std::vector<std::string> reflective_warnings =
        reflective_pass(inductive.scenes, inductive.persona, backend, provider);
    result.warnings.insert(result.warnings.end(), reflective_warnings.begin(),
                           reflective_warnings.end());

    MemoryBank& bank = result.bank;
    bank.dimension = provider.dimension();
    for (FactUnit& fact : inductive.facts) bank.facts.emplace(fact.id, std::move(fact));
    for (SceneUnit& scene : inductive.scenes) bank.scenes.emplace(scene.id, std::move(scene));
    bank.persona = std::move(inductive.persona);
    bank.provenance.tau = cfg.tau;
    bank.provenance.seed = cfg.seed;
    bank.provenance.lpa_max_iters = cfg.lpa_max_iters;
    bank.provenance.embedder = provider.name();
    bank.provenance.chat_backend = backend.name();

    std::vector<std::string> violations = validate_bank(bank);
    if (!violations.empty()) {
        throw internal_error("constructed bank failed validation: " + violations.front());
    }

    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace bimem

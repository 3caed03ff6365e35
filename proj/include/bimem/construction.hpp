#pragma once
// End-to-end bank construction: the bottom-up inductive pass (facts -> graph
// -> clusters -> scenes -> persona) followed by the top-down reflective pass
// that calibrates every scene against the persona. Fact-level memory is never
// modified by calibration.

#include <cstdint>
#include <string>
#include <vector>

#include "bimem/embedding.hpp"
#include "bimem/memory.hpp"
#include "bimem/operators.hpp"

namespace bimem {

struct ConstructionConfig {
    double tau = 0.2;
    int lpa_max_iters = 20;
    std::uint64_t seed = 0;
    // Whitespace-token budget for the combined scene text handed to persona
    // distillation; oldest scenes are dropped first when it overflows.
    std::size_t persona_scene_token_budget = 8000;
    int max_workers = 4;  // fact-extraction fan-out bound
};

struct Interaction {
    int turn = 0;
    std::string speaker;
    std::string query;
    std::string response;
    std::string timestamp;

    // Text handed to fact extraction; the speaker tag keeps "I"-statements
    // attributable once many sessions are merged.
    std::string tagged_query() const {
        return speaker.empty() ? query : speaker + ": " + query;
    }
};

struct Conversation {
    std::string id;
    std::vector<Interaction> interactions;  // non-empty, turn ids strictly increasing
};

// Throws a data error if the conversation breaks its invariants.
void validate_conversation(const Conversation& conv);

struct InductiveResult {
    std::vector<FactUnit> facts;
    std::vector<SceneUnit> scenes;  // ids ordered by smallest member fact id
    PersonaProfile persona;
    std::vector<std::string> warnings;
};

InductiveResult inductive_pass(const Conversation& conv, EmbeddingProvider& provider,
                               ChatBackend& backend, const ConstructionConfig& cfg);

// Calibrates scenes in id order. A scene whose operator call fails is left
// untouched and noted in the returned warnings; the pass always completes.
std::vector<std::string> reflective_pass(std::vector<SceneUnit>& scenes,
                                         const PersonaProfile& persona, ChatBackend& backend,
                                         EmbeddingProvider& provider);

struct ConstructionResult {
    MemoryBank bank;
    std::vector<std::string> warnings;
    double seconds = 0.0;
};

// inductive_pass + reflective_pass; the returned bank always validates.
ConstructionResult construct_memory(const Conversation& conv, EmbeddingProvider& provider,
                                    ChatBackend& backend, const ConstructionConfig& cfg);

}  // namespace bimem

#pragma once
// The five LLM-backed operators behind a backend contract: fact extraction,
// scene aggregation, persona distillation, scene calibration, and answer
// generation. MockChatBackend keeps the whole pipeline deterministic and
// offline; RemoteChatBackend talks to a chat-completions endpoint and parses
// strict JSON responses.

#include <memory>
#include <string>
#include <vector>

#include "bimem/memory.hpp"

namespace bimem {

struct FactDraft {
    std::vector<std::string> keywords;
    std::string context;      // non-empty
    std::vector<std::string> tags;
};

struct SceneDraft {
    std::string scene_memory; // non-empty
    std::vector<std::string> keywords;
    std::vector<std::string> tags;
};

struct CalibrationVerdict {
    bool needs_calibration = false;
    std::string added_condition;  // empty when needs_calibration is false
    std::string reason;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    virtual const std::string& name() const = 0;

    // Summarize one interaction into a fact draft. At least one of
    // query/response must be non-empty.
    virtual FactDraft extract_fact(const std::string& query, const std::string& response) = 0;

    // Aggregate an ordered, non-empty fact cluster into a scene draft.
    virtual SceneDraft aggregate_scene(const std::vector<const FactUnit*>& facts) = 0;

    // Distill one persona dimension from all scenes. Returns non-empty text.
    virtual std::string distill_persona_dimension(const std::vector<const SceneUnit*>& scenes,
                                                  PersonaDimension dimension) = 0;

    // Check one scene against the persona and propose a compensatory
    // condition when they disagree.
    virtual CalibrationVerdict calibrate_scene(const SceneUnit& scene,
                                               const PersonaProfile& persona) = 0;

    // Answer a query from an assembled memory context.
    virtual std::string generate_answer(const std::string& query, const std::string& context) = 0;
};

// Deterministic offline backend. Identical inputs produce byte-identical
// outputs across runs; calibration always reports consistency so offline
// construction stays reproducible.
class MockChatBackend : public ChatBackend {
public:
    const std::string& name() const override { return name_; }

    FactDraft extract_fact(const std::string& query, const std::string& response) override;
    SceneDraft aggregate_scene(const std::vector<const FactUnit*>& facts) override;
    std::string distill_persona_dimension(const std::vector<const SceneUnit*>& scenes,
                                          PersonaDimension dimension) override;
    CalibrationVerdict calibrate_scene(const SceneUnit& scene,
                                       const PersonaProfile& persona) override;
    std::string generate_answer(const std::string& query, const std::string& context) override;

private:
    std::string name_ = "mock";
};

struct RemoteChatConfig {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string api_key;
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    int max_retries = 2;
    int timeout_seconds = 120;
};

class RemoteChatBackend final : public ChatBackend {
public:
    explicit RemoteChatBackend(RemoteChatConfig config);
    ~RemoteChatBackend() override;

    const std::string& name() const override { return name_; }

    FactDraft extract_fact(const std::string& query, const std::string& response) override;
    SceneDraft aggregate_scene(const std::vector<const FactUnit*>& facts) override;
    std::string distill_persona_dimension(const std::vector<const SceneUnit*>& scenes,
                                          PersonaDimension dimension) override;
    CalibrationVerdict calibrate_scene(const SceneUnit& scene,
                                       const PersonaProfile& persona) override;
    std::string generate_answer(const std::string& query, const std::string& context) override;

    // Raw completion for one user message, with transport retries.
    std::string complete(const std::string& prompt);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string name_;
};

// Reads BIMEM_CHAT_URL / BIMEM_API_KEY / BIMEM_CHAT_MODEL.
RemoteChatConfig remote_chat_config_from_env();

std::unique_ptr<ChatBackend> make_backend(const std::string& id);

// ----- response parsing -----------------------------------------------------

enum class OperatorSchema { fact, scene, persona, calibration };

struct ParsedOperatorResponse {
    FactDraft fact;
    SceneDraft scene;
    // Persona responses may carry any subset of the five dimensions.
    std::vector<std::pair<PersonaDimension, std::string>> persona;
    CalibrationVerdict calibration;
};

// Strict parse of an operator response. Markdown code fences are stripped;
// unknown fields are ignored; a missing required field raises a data error
// naming the field. The calibration schema accepts both "added condition"
// and "added_condition".
ParsedOperatorResponse parse_operator_json(const std::string& raw, OperatorSchema schema);

// Enforces the verdict invariant (needs_calibration=false implies an empty
// condition). Returns true and appends a warning when the verdict had to be
// coerced to a no-op.
bool sanitize_verdict(CalibrationVerdict& verdict, std::vector<std::string>& warnings,
                      int scene_id);

// Prompt renderers for the remote operators.
std::string render_fact_prompt(const std::string& query, const std::string& response);
std::string render_scene_prompt(const std::vector<const FactUnit*>& facts);
std::string render_persona_prompt(const std::vector<const SceneUnit*>& scenes,
                                  PersonaDimension dimension);
std::string render_calibration_prompt(const SceneUnit& scene, const PersonaProfile& persona);
std::string render_answer_prompt(const std::string& query, const std::string& context);

}  // namespace bimem

#include "bimem/operators.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bimem/errors.hpp"
#include "bimem/http_support.hpp"
#include "bimem/text.hpp"

namespace bimem {

namespace {

constexpr std::size_t kMockContextLimit = 200;
constexpr std::size_t kMockSceneLimit = 500;
constexpr std::size_t kMockKeywordCount = 5;
constexpr std::size_t kMockSceneKeywordCount = 8;

// Frequency-ranked selection with lexicographic tie-breaking.
std::vector<std::string> top_by_frequency(const std::map<std::string, int>& counts, std::size_t limit) {
    std::vector<std::pair<std::string, int>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (const auto& [token, n] : entries) {
        (void)n;
        if (out.size() >= limit) break;
        out.push_back(token);
    }
    return out;
}

bool all_alpha(const std::string& token) {
    for (char c : token) {
        if (!(c >= 'a' && c <= 'z')) return false;
    }
    return !token.empty();
}

// Per-dimension cue words for the mock distiller. Scene keywords matching a
// cue land in that dimension's text.
const std::set<std::string>& dimension_lexicon(PersonaDimension d) {
    static const std::set<std::string> basic = {
        "name", "named", "age", "birthday", "occupation", "job", "work", "works", "working",
        "career", "engineer", "teacher", "nurse", "doctor", "student", "city", "town", "lives",
        "living", "location", "moved", "hometown", "office", "school", "university"};
    static const std::set<std::string> interests = {
        "hobby", "hobbies", "hiking", "photography", "camping", "painting", "reading", "cooking",
        "baking", "music", "guitar", "piano", "travel", "traveling", "travelling", "gardening",
        "garden", "yoga", "running", "swimming", "chess", "gaming", "games", "pottery", "knitting",
        "cycling", "climbing", "fishing", "drawing", "dancing", "writing", "movies", "books",
        "sports", "collecting", "crafts", "concerts", "recipes"};
    static const std::set<std::string> personality = {
        "personality", "outgoing", "introvert", "introverted", "extrovert", "extroverted",
        "curious", "patient", "cheerful", "anxious", "calm", "optimistic", "pessimistic",
        "empathy", "empathetic", "confident", "shy", "adventurous", "creative", "thoughtful",
        "courage", "courageous", "resilient", "humorous", "stubborn", "gentle"};
    static const std::set<std::string> values = {
        "values", "honesty", "honest", "family", "freedom", "sustainability", "loyalty",
        "kindness", "integrity", "authenticity", "authentic", "faith", "community", "fairness",
        "tradition", "ambition", "independence", "equality", "compassion", "generosity",
        "beliefs", "volunteering"};
    static const std::set<std::string> relationships = {
        "friend", "friends", "friendship", "mother", "father", "mom", "dad", "sister", "brother",
        "wife", "husband", "partner", "daughter", "son", "colleague", "colleagues", "neighbor",
        "neighbors", "family", "grandmother", "grandfather", "cousin", "mentor", "roommate",
        "coworker", "coworkers"};
    switch (d) {
        case PersonaDimension::basic_info: return basic;
        case PersonaDimension::interests: return interests;
        case PersonaDimension::personality: return personality;
        case PersonaDimension::values: return values;
        case PersonaDimension::relationships: return relationships;
    }
    return basic;
}

}  // namespace

// ----- mock backend ----------------------------------------------------------

FactDraft MockChatBackend::extract_fact(const std::string& query, const std::string& response) {
    std::string q = trim_copy(query);
    std::string r = trim_copy(response);
    if (q.empty() && r.empty()) {
        throw data_error("extract_fact: both query and response are empty");
    }
    FactDraft draft;
    draft.context = truncate_to(q.empty() ? r : q, kMockContextLimit);

    std::map<std::string, int> counts;
    for (const std::string& token : tokenize(draft.context)) {
        if (token.size() > 3 && all_alpha(token)) counts[token] += 1;
    }
    draft.keywords = top_by_frequency(counts, kMockKeywordCount);
    return draft;
}

SceneDraft MockChatBackend::aggregate_scene(const std::vector<const FactUnit*>& facts) {
    if (facts.empty()) throw data_error("aggregate_scene: empty fact cluster");
    SceneDraft draft;

    std::vector<std::string> contexts;
    contexts.reserve(facts.size());
    std::map<std::string, int> keyword_counts;
    std::set<std::string> tag_union;
    for (const FactUnit* fact : facts) {
        contexts.push_back(fact->content);
        for (const std::string& kw : fact->keywords) keyword_counts[kw] += 1;
        for (const std::string& tag : fact->tags) tag_union.insert(tag);
    }
    draft.scene_memory = truncate_to(join(contexts, "; "), kMockSceneLimit);
    draft.keywords = top_by_frequency(keyword_counts, kMockSceneKeywordCount);
    draft.tags.assign(tag_union.begin(), tag_union.end());
    return draft;
}

std::string MockChatBackend::distill_persona_dimension(const std::vector<const SceneUnit*>& scenes,
                                                       PersonaDimension dimension) {
    if (scenes.empty()) throw data_error("distill_persona_dimension: no scenes");
    const auto& lexicon = dimension_lexicon(dimension);
    std::vector<std::string> matched;
    std::set<std::string> seen;
    for (const SceneUnit* scene : scenes) {
        for (const std::string& kw : scene->keywords) {
            std::string lowered = lower_copy(kw);
            if (lexicon.count(lowered) > 0 && seen.insert(lowered).second) {
                matched.push_back(lowered);
            }
        }
    }
    if (matched.empty()) return "unknown";
    return join(matched, ", ");
}

CalibrationVerdict MockChatBackend::calibrate_scene(const SceneUnit&, const PersonaProfile&) {
    return CalibrationVerdict{false, "", "mock"};
}

std::string MockChatBackend::generate_answer(const std::string& query, const std::string& context) {
    if (trim_copy(query).empty()) throw data_error("generate_answer: empty query");

    // Candidate segments are sentence-ish fragments of the context; the one
    // sharing the most tokens with the query wins, earliest first.
    std::vector<std::string> segments;
    std::string current;
    for (char c : context) {
        if (c == '.' || c == '!' || c == '?' || c == ':' || c == ';' || c == '\n') {
            std::string seg = trim_copy(current);
            if (!seg.empty()) segments.push_back(std::move(seg));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (std::string seg = trim_copy(current); !seg.empty()) segments.push_back(std::move(seg));

    std::vector<std::string> query_tokens_list = tokenize(query);
    std::set<std::string> query_tokens(query_tokens_list.begin(), query_tokens_list.end());
    std::size_t best_overlap = 0;
    const std::string* best = nullptr;
    for (const std::string& seg : segments) {
        std::vector<std::string> toks = tokenize(seg);
        std::set<std::string> uniq(toks.begin(), toks.end());
        std::size_t overlap = 0;
        for (const std::string& t : uniq) {
            if (query_tokens.count(t) > 0) ++overlap;
        }
        if (best == nullptr || overlap > best_overlap) {
            best = &seg;
            best_overlap = overlap;
        }
    }
    if (best == nullptr || best_overlap == 0) return "";
    return *best;
}

// ----- response parsing -------------------------------------------------------

namespace {

std::string strip_code_fences(const std::string& raw) {
    std::string s = trim_copy(raw);
    if (s.rfind("```", 0) != 0) return s;
    std::size_t first_newline = s.find('\n');
    if (first_newline == std::string::npos) return s;
    std::size_t closing = s.rfind("```");
    if (closing <= first_newline) return s;
    return trim_copy(s.substr(first_newline + 1, closing - first_newline - 1));
}

nlohmann::json parse_json_or_throw(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("operator response is not JSON (byte " + std::to_string(e.byte) +
                         "): " + std::string(e.what()));
    }
}

const nlohmann::json& require_field(const nlohmann::json& doc, const char* field) {
    auto it = doc.find(field);
    if (it == doc.end()) throw data_error(std::string("operator response missing field \"") + field + "\"");
    return *it;
}

std::vector<std::string> string_list(const nlohmann::json& node, const char* field) {
    if (!node.is_array()) throw data_error(std::string("field \"") + field + "\" must be an array");
    std::vector<std::string> out;
    for (const auto& item : node) {
        if (item.is_string()) {
            out.push_back(item.get<std::string>());
        } else {
            out.push_back(item.dump());
        }
    }
    return out;
}

std::string string_field(const nlohmann::json& node, const char* field) {
    if (!node.is_string()) throw data_error(std::string("field \"") + field + "\" must be a string");
    return node.get<std::string>();
}

}  // namespace

ParsedOperatorResponse parse_operator_json(const std::string& raw, OperatorSchema schema) {
    ParsedOperatorResponse parsed;
    nlohmann::json doc = parse_json_or_throw(strip_code_fences(raw));
    if (!doc.is_object()) throw data_error("operator response must be a JSON object");

    switch (schema) {
        case OperatorSchema::fact: {
            parsed.fact.keywords = string_list(require_field(doc, "keywords"), "keywords");
            parsed.fact.context = string_field(require_field(doc, "context"), "context");
            parsed.fact.tags = string_list(require_field(doc, "tags"), "tags");
            if (trim_copy(parsed.fact.context).empty()) {
                throw data_error("field \"context\" must be non-empty");
            }
            break;
        }
        case OperatorSchema::scene: {
            parsed.scene.scene_memory = string_field(require_field(doc, "scene_memory"), "scene_memory");
            parsed.scene.keywords = string_list(require_field(doc, "keywords"), "keywords");
            parsed.scene.tags = string_list(require_field(doc, "tags"), "tags");
            if (trim_copy(parsed.scene.scene_memory).empty()) {
                throw data_error("field \"scene_memory\" must be non-empty");
            }
            break;
        }
        case OperatorSchema::persona: {
            for (int i = 0; i < kPersonaDimensionCount; ++i) {
                auto it = doc.find(kPersonaDimensionKeys[i]);
                if (it != doc.end() && it->is_string()) {
                    parsed.persona.emplace_back(static_cast<PersonaDimension>(i), it->get<std::string>());
                }
            }
            if (parsed.persona.empty()) {
                throw data_error("operator response missing persona dimension fields");
            }
            break;
        }
        case OperatorSchema::calibration: {
            const nlohmann::json& flag = require_field(doc, "needs_calibration");
            if (!flag.is_boolean()) throw data_error("field \"needs_calibration\" must be a boolean");
            parsed.calibration.needs_calibration = flag.get<bool>();
            // The printed template spells the key with a space; accept both.
            if (auto it = doc.find("added_condition"); it != doc.end()) {
                parsed.calibration.added_condition = string_field(*it, "added_condition");
            } else if (auto it2 = doc.find("added condition"); it2 != doc.end()) {
                parsed.calibration.added_condition = string_field(*it2, "added condition");
            } else if (parsed.calibration.needs_calibration) {
                throw data_error("operator response missing field \"added_condition\"");
            }
            if (auto it = doc.find("reason"); it != doc.end() && it->is_string()) {
                parsed.calibration.reason = it->get<std::string>();
            }
            break;
        }
    }
    return parsed;
}

bool sanitize_verdict(CalibrationVerdict& verdict, std::vector<std::string>& warnings, int scene_id) {
    if (verdict.needs_calibration && trim_copy(verdict.added_condition).empty()) {
        verdict.needs_calibration = false;
        verdict.added_condition.clear();
        warnings.push_back("scene " + std::to_string(scene_id) +
                           ": calibration asked for a change without a condition; treated as consistent");
        return true;
    }
    if (!verdict.needs_calibration && !verdict.added_condition.empty()) {
        verdict.added_condition.clear();
        warnings.push_back("scene " + std::to_string(scene_id) +
                           ": dropped added condition on a consistent verdict");
        return true;
    }
    return false;
}

// ----- prompt templates -------------------------------------------------------

std::string render_fact_prompt(const std::string& query, const std::string& response) {
    std::ostringstream out;
    out << "Generate a structured fact for the following interaction content by:\n"
        << "1. Identifying the most salient keywords (focus on nouns, verbs, and key concepts)\n"
        << "2. Extracting core themes and contextual elements\n"
        << "3. Creating relevant categorical tags\n"
        << "Format the response as a JSON object:\n"
        << "{\n"
        << "    \"keywords\": [\"keyword1\", \"keyword2\", ...],\n"
        << "    \"context\": \"one sentence summarizing the interaction content\",\n"
        << "    \"tags\": [\"tag1\", \"tag2\", ...]\n"
        << "}\n\n"
        << "Interaction content:\n"
        << "User: " << query << "\n"
        << "Assistant: " << response << "\n";
    return out.str();
}

std::string render_scene_prompt(const std::vector<const FactUnit*>& facts) {
    std::ostringstream content;
    for (const FactUnit* fact : facts) {
        content << "[" << fact->id << "] (" << fact->timestamp << ") " << fact->content << "\n";
    }
    std::ostringstream out;
    out << "You are a scene synthesizer specialized in factual comprehension.\n"
        << "Task: Summarize a cluster of related factual memories into a coherent 'Scene Memory'.\n"
        << "Input factual memories:\n"
        << content.str()
        << "Instructions:\n"
        << "1. Identify the core theme connecting these facts.\n"
        << "2. Generate a descriptive summary capturing the progression of conversational facts.\n"
        << "3. Extract key entities and topics.\n"
        << "Format the response as a JSON object:\n"
        << "{\n"
        << "    \"scene_memory\": \"A comprehensive summarized scene\",\n"
        << "    \"keywords\": [\"keyword1\", \"keyword2\", ...],\n"
        << "    \"tags\": [\"tag1\", \"tag2\", ...]\n"
        << "}\n";
    return out.str();
}

std::string render_persona_prompt(const std::vector<const SceneUnit*>& scenes,
                                  PersonaDimension dimension) {
    std::ostringstream content;
    for (const SceneUnit* scene : scenes) {
        content << "[scene " << scene->id << "] " << scene_text(*scene) << "\n";
    }
    std::ostringstream out;
    out << "You are a persona synthesizer specialized in psychological and behavioral analysis.\n"
        << "Task: Create a COMPREHENSIVE User persona based on the provided scene memories.\n"
        << "Input Scenes:\n"
        << content.str()
        << "Instructions:\n"
        << "1. Analyze these scenes deeply. Look for patterns in behavior, emotion, and choices.\n"
        << "2. For each dimension below, write a DETAILED paragraph (5-10 sentences). Do not be brief.\n"
        << "3. Use specific examples from the scenes to support your analysis.\n"
        << "Format the response as a JSON object:\n"
        << "{\n"
        << "    \"basic_info\": \"Detailed background...\",\n"
        << "    \"interests\": \"Comprehensive list of hobbies and how they engage with them...\",\n"
        << "    \"personality\": \"In-depth personality analysis...\",\n"
        << "    \"values\": \"Core beliefs and motivations...\",\n"
        << "    \"relationships\": \"Detailed social dynamics...\"\n"
        << "}\n\n"
        << "For this request, focus on the \"" << persona_dimension_key(dimension)
        << "\" dimension. You may return all five keys; the \"" << persona_dimension_key(dimension)
        << "\" field is the one that will be used.\n";
    return out.str();
}

std::string render_calibration_prompt(const SceneUnit& scene, const PersonaProfile& persona) {
    std::ostringstream persona_text;
    for (int i = 0; i < kPersonaDimensionCount; ++i) {
        persona_text << kPersonaDimensionKeys[i] << ": " << persona.dimensions[i].text << "\n";
    }
    std::ostringstream out;
    out << "You are a scene memory calibrator. Your goal is to align the given scene to the user's persona.\n"
        << "Persona-level memory:\n"
        << persona_text.str()
        << "Scene-level memory:\n"
        << scene_text(scene) << "\n"
        << "Instructions:\n"
        << "1. Read the persona-level memory to understand the user's key interests, values, and traits.\n"
        << "2. Check the current scene-level memory. Does it fail to mention any specific connection to "
           "the user persona that is likely present in the scene?\n"
        << "3. If yes, add a compensatory condition to append to the original scene. This addition should "
           "explicitly align the scene to the persona (e.g., \"This aligns with her interest in ...\").\n"
        << "4. CRITICAL: DO NOT REWRITE the existing summary. ONLY generate text to ADD.\n"
        << "5. If the current summary is already perfect, return an empty string for \"added condition\".\n"
        << "Format the response as a JSON object:\n"
        << "{\n"
        << "    \"needs_calibration\": true/false,\n"
        << "    \"added condition\": \"Text to add (or empty string) as a condition\",\n"
        << "    \"reason\": \"The reason why you decide to calibrate.\"\n"
        << "}\n";
    return out.str();
}

std::string render_answer_prompt(const std::string& query, const std::string& context) {
    std::ostringstream out;
    out << "Answer the user's question using only the memory context below. "
        << "Reply with the answer text alone.\n\n"
        << "Memory context:\n"
        << context << "\n\n"
        << "Question: " << query << "\n"
        << "Answer:";
    return out.str();
}

// ----- remote backend ----------------------------------------------------------

struct RemoteChatBackend::Impl {
    RemoteChatConfig config;

    explicit Impl(RemoteChatConfig cfg) : config(std::move(cfg)) {}

    // One transport attempt; returns nullopt and fills error on failure.
    std::optional<std::string> try_complete(const std::string& prompt, std::string& error,
                                            int& http_status) {
        nlohmann::json payload{
            {"model", config.model},
            {"messages", nlohmann::json::array({nlohmann::json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", config.temperature},
        };
        httplib::Client client(config.base_url);
        client.set_read_timeout(config.timeout_seconds, 0);
        client.set_connection_timeout(config.timeout_seconds, 0);
        httplib::Headers headers;
        if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);
        auto res = client.Post(config.path, headers, payload.dump(), "application/json");
        if (!res) {
            error = "chat transport failure: " + httplib::to_string(res.error());
            return std::nullopt;
        }
        if (res->status != 200) {
            http_status = res->status;
            error = "chat endpoint returned HTTP " + std::to_string(res->status);
            return std::nullopt;
        }
        try {
            nlohmann::json doc = nlohmann::json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            error = std::string("chat response shape unexpected: ") + e.what();
            return std::nullopt;
        }
    }

    // Re-prompt loop shared by the JSON operators: transport and parse
    // failures both consume an attempt; re-prompts carry a terse reminder.
    ParsedOperatorResponse json_call(const std::string& prompt, OperatorSchema schema) {
        std::string last_error = "no attempts made";
        int http_status = 0;
        for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
            std::string attempt_prompt = prompt;
            if (attempt > 0) attempt_prompt += "\n\nReturn valid JSON only.";
            auto completion = try_complete(attempt_prompt, last_error, http_status);
            if (!completion) continue;
            try {
                return parse_operator_json(*completion, schema);
            } catch (const Error& e) {
                last_error = e.what();
            }
        }
        throw backend_error("operator failed after " + std::to_string(config.max_retries + 1) +
                            " attempts: " + last_error, http_status);
    }
};

RemoteChatBackend::RemoteChatBackend(RemoteChatConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))),
      name_("remote:" + impl_->config.model) {
    if (impl_->config.base_url.empty()) {
        throw usage_error("RemoteChatBackend: base_url is empty (set BIMEM_CHAT_URL)");
    }
}

RemoteChatBackend::~RemoteChatBackend() = default;

std::string RemoteChatBackend::complete(const std::string& prompt) {
    std::string last_error = "no attempts made";
    int http_status = 0;
    for (int attempt = 0; attempt <= impl_->config.max_retries; ++attempt) {
        auto completion = impl_->try_complete(prompt, last_error, http_status);
        if (completion) return *completion;
    }
    throw backend_error(last_error, http_status);
}

FactDraft RemoteChatBackend::extract_fact(const std::string& query, const std::string& response) {
    if (trim_copy(query).empty() && trim_copy(response).empty()) {
        throw data_error("extract_fact: both query and response are empty");
    }
    return impl_->json_call(render_fact_prompt(query, response), OperatorSchema::fact).fact;
}

SceneDraft RemoteChatBackend::aggregate_scene(const std::vector<const FactUnit*>& facts) {
    if (facts.empty()) throw data_error("aggregate_scene: empty fact cluster");
    return impl_->json_call(render_scene_prompt(facts), OperatorSchema::scene).scene;
}

std::string RemoteChatBackend::distill_persona_dimension(const std::vector<const SceneUnit*>& scenes,
                                                         PersonaDimension dimension) {
    if (scenes.empty()) throw data_error("distill_persona_dimension: no scenes");
    std::string prompt = render_persona_prompt(scenes, dimension);
    std::string last_error;
    for (int attempt = 0; attempt <= impl_->config.max_retries; ++attempt) {
        ParsedOperatorResponse parsed = impl_->json_call(prompt, OperatorSchema::persona);
        for (const auto& [dim, text] : parsed.persona) {
            if (dim == dimension && !trim_copy(text).empty()) return text;
        }
        last_error = std::string("persona response lacks the \"") +
                     persona_dimension_key(dimension) + "\" dimension";
        prompt += "\n\nReturn valid JSON only.";
    }
    throw backend_error(last_error);
}

CalibrationVerdict RemoteChatBackend::calibrate_scene(const SceneUnit& scene,
                                                      const PersonaProfile& persona) {
    return impl_->json_call(render_calibration_prompt(scene, persona), OperatorSchema::calibration)
        .calibration;
}

std::string RemoteChatBackend::generate_answer(const std::string& query, const std::string& context) {
    if (trim_copy(query).empty()) throw data_error("generate_answer: empty query");
    return complete(render_answer_prompt(query, context));
}

RemoteChatConfig remote_chat_config_from_env() {
    RemoteChatConfig config;
    if (const char* url = std::getenv("BIMEM_CHAT_URL")) config.base_url = url;
    if (const char* key = std::getenv("BIMEM_API_KEY")) config.api_key = key;
    if (const char* model = std::getenv("BIMEM_CHAT_MODEL")) config.model = model;
    return config;
}

std::unique_ptr<ChatBackend> make_backend(const std::string& id) {
    if (id == "mock") return std::make_unique<MockChatBackend>();
    if (id == "remote" || id.rfind("remote:", 0) == 0) {
        RemoteChatConfig config = remote_chat_config_from_env();
        if (id.size() > 7) config.model = id.substr(7);
        return std::make_unique<RemoteChatBackend>(std::move(config));
    }
    throw usage_error("unknown chat backend id: " + id);
}

}  // namespace bimem

#pragma once
// The three-level memory model: facts, scenes, persona. Everything else in
// the engine operates on these value types.
//
// Structural rules enforced by validate_bank():
//   - fact edges are symmetric and never self-referential
//   - scene members partition the fact set exactly
//   - all embeddings share the bank dimension
//   - the persona always carries its five dimensions

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bimem {

using Vector = std::vector<double>;

// Atomic per-interaction memory unit.
struct FactUnit {
    int id = 0;
    std::string content;                 // summarized interaction
    std::vector<std::string> keywords;
    std::vector<std::string> tags;
    std::string timestamp;               // ISO-8601 text, never computed with
    std::set<int> edges;                 // similarity links to other fact ids
    Vector embedding;
};

// Thematic cluster summary over a subset of facts. `delta` is the
// compensatory condition appended by reflective calibration; absent means
// the scene was already consistent with the persona.
struct SceneUnit {
    int id = 0;
    std::string summary;
    std::vector<std::string> keywords;
    std::vector<std::string> tags;
    std::set<int> members;               // fact ids, non-empty
    std::optional<std::string> delta;
    Vector embedding;                    // embedding of scene_text()
};

// Canonical scene text: summary, plus the calibration delta when present.
std::string scene_text(const SceneUnit& scene);

enum class PersonaDimension : int {
    basic_info = 0,
    interests = 1,
    personality = 2,
    values = 3,
    relationships = 4,
};

inline constexpr int kPersonaDimensionCount = 5;

inline constexpr std::array<const char*, kPersonaDimensionCount> kPersonaDimensionKeys = {
    "basic_info", "interests", "personality", "values", "relationships"};

const char* persona_dimension_key(PersonaDimension d);
std::optional<PersonaDimension> parse_persona_dimension(const std::string& key);

struct PersonaEntry {
    std::string text;
    Vector embedding;
};

// Fixed five-dimension user profile. The array index is the dimension.
struct PersonaProfile {
    std::array<PersonaEntry, kPersonaDimensionCount> dimensions;

    PersonaEntry& at(PersonaDimension d) { return dimensions[static_cast<int>(d)]; }
    const PersonaEntry& at(PersonaDimension d) const { return dimensions[static_cast<int>(d)]; }
};

// Config snapshot recorded at construction time so banks are auditable
// and queryable offline.
struct Provenance {
    double tau = 0.2;
    double alpha = 0.5;
    int k = 30;
    int m = 3;
    std::uint64_t seed = 0;
    int lpa_max_iters = 20;
    std::string embedder;
    std::string chat_backend;
};

struct MemoryBank {
    int dimension = 0;
    std::map<int, FactUnit> facts;
    std::map<int, SceneUnit> scenes;
    PersonaProfile persona;
    Provenance provenance;

    // Scene owning the given fact; nullopt when the fact is unassigned
    // (only possible in invalid banks).
    std::optional<int> parent_scene_of(int fact_id) const;
};

// Returns one human-readable description per violated rule; empty means the
// bank is structurally sound. Violations are data, not failures.
std::vector<std::string> validate_bank(const MemoryBank& bank);

// ----- retrieval carriers ---------------------------------------------------

enum class MemoryLevel : int { persona = 0, scene = 1, fact = 2 };

enum class RetrievalOrigin : int { initial = 0, spread_from_fact = 1, spread_from_scene = 2 };

const char* memory_level_name(MemoryLevel level);
const char* retrieval_origin_name(RetrievalOrigin origin);

// A scored, level-tagged reference into a bank. For persona units `ref_id`
// is the dimension index.
struct RetrievalUnit {
    MemoryLevel level = MemoryLevel::fact;
    int ref_id = 0;
    double score = 0.0;
    RetrievalOrigin origin = RetrievalOrigin::initial;

    bool same_target(const RetrievalUnit& other) const {
        return level == other.level && ref_id == other.ref_id;
    }
};

using RetrievedSet = std::vector<RetrievalUnit>;

// Text shown for a retrieval unit's reference ("7" or a persona key).
std::string unit_ref_label(const RetrievalUnit& unit);

}  // namespace bimem

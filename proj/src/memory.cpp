#include "bimem/memory.hpp"

#include <cmath>
#include <sstream>

namespace bimem {

std::string scene_text(const SceneUnit& scene) {
    if (!scene.delta.has_value()) return scene.summary;
    return scene.summary + " " + *scene.delta;
}

const char* persona_dimension_key(PersonaDimension d) {
    return kPersonaDimensionKeys[static_cast<int>(d)];
}

std::optional<PersonaDimension> parse_persona_dimension(const std::string& key) {
    for (int i = 0; i < kPersonaDimensionCount; ++i) {
        if (key == kPersonaDimensionKeys[i]) return static_cast<PersonaDimension>(i);
    }
    return std::nullopt;
}

std::optional<int> MemoryBank::parent_scene_of(int fact_id) const {
    for (const auto& [sid, scene] : scenes) {
        if (scene.members.count(fact_id) > 0) return sid;
    }
    return std::nullopt;
}

const char* memory_level_name(MemoryLevel level) {
    switch (level) {
        case MemoryLevel::persona: return "persona";
        case MemoryLevel::scene: return "scene";
        case MemoryLevel::fact: return "fact";
    }
    return "?";
}

const char* retrieval_origin_name(RetrievalOrigin origin) {
    switch (origin) {
        case RetrievalOrigin::initial: return "initial";
        case RetrievalOrigin::spread_from_fact: return "spread_from_fact";
        case RetrievalOrigin::spread_from_scene: return "spread_from_scene";
    }
    return "?";
}

std::string unit_ref_label(const RetrievalUnit& unit) {
    if (unit.level == MemoryLevel::persona &&
        unit.ref_id >= 0 && unit.ref_id < kPersonaDimensionCount) {
        return kPersonaDimensionKeys[unit.ref_id];
    }
    return std::to_string(unit.ref_id);
}

namespace {

bool embedding_ok(const Vector& v, int dim) {
    if (static_cast<int>(v.size()) != dim) return false;
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

std::vector<std::string> validate_bank(const MemoryBank& bank) {
    std::vector<std::string> violations;
    auto add = [&](const std::string& msg) { violations.push_back(msg); };

    if (bank.dimension <= 0) add("dimension: must be positive, got " + std::to_string(bank.dimension));

    for (const auto& [id, fact] : bank.facts) {
        if (fact.id != id) add("fact " + std::to_string(id) + ": id field mismatch (" + std::to_string(fact.id) + ")");
        if (id < 0) add("fact " + std::to_string(id) + ": negative id");
        if (fact.edges.count(id) > 0) add("fact " + std::to_string(id) + ": self-edge");
        for (int peer : fact.edges) {
            auto it = bank.facts.find(peer);
            if (it == bank.facts.end()) {
                add("fact " + std::to_string(id) + ": edge to unknown fact " + std::to_string(peer));
            } else if (peer != id && it->second.edges.count(id) == 0) {
                add("symmetry: fact " + std::to_string(id) + " lists edge " + std::to_string(peer) +
                    " but fact " + std::to_string(peer) + " lacks the reverse edge");
            }
        }
        if (!embedding_ok(fact.embedding, bank.dimension)) {
            add("fact " + std::to_string(id) + ": embedding is not a finite vector of dimension " +
                std::to_string(bank.dimension));
        }
    }

    // Scene membership must partition the fact set.
    std::map<int, int> owner;  // fact id -> first owning scene
    std::size_t member_total = 0;
    for (const auto& [sid, scene] : bank.scenes) {
        if (scene.id != sid) add("scene " + std::to_string(sid) + ": id field mismatch");
        if (scene.members.empty()) add("scene " + std::to_string(sid) + ": empty member set");
        member_total += scene.members.size();
        for (int fid : scene.members) {
            if (bank.facts.find(fid) == bank.facts.end()) {
                add("scene " + std::to_string(sid) + ": member fact " + std::to_string(fid) + " does not exist");
                continue;
            }
            auto [it, inserted] = owner.emplace(fid, sid);
            if (!inserted) {
                add("partition: fact " + std::to_string(fid) + " appears in scenes " +
                    std::to_string(it->second) + " and " + std::to_string(sid));
            }
        }
        if (scene.delta.has_value() && scene.delta->empty()) {
            add("scene " + std::to_string(sid) + ": delta present but empty (use absent instead)");
        }
        if (!embedding_ok(scene.embedding, bank.dimension)) {
            add("scene " + std::to_string(sid) + ": embedding is not a finite vector of dimension " +
                std::to_string(bank.dimension));
        }
    }
    for (const auto& [fid, fact] : bank.facts) {
        (void)fact;
        if (owner.find(fid) == owner.end()) {
            add("partition: fact " + std::to_string(fid) + " is not covered by any scene");
        }
    }
    if (member_total < bank.facts.size()) {
        // Covered-by-owner check above already names the missing facts; this
        // catches counting drift when duplicate members mask a gap.
        if (owner.size() < bank.facts.size() && violations.empty()) {
            add("partition: scene members do not cover all facts");
        }
    }

    for (int i = 0; i < kPersonaDimensionCount; ++i) {
        const PersonaEntry& entry = bank.persona.dimensions[i];
        if (entry.text.empty()) {
            add(std::string("persona ") + kPersonaDimensionKeys[i] + ": empty text");
        }
        if (!embedding_ok(entry.embedding, bank.dimension)) {
            add(std::string("persona ") + kPersonaDimensionKeys[i] +
                ": embedding is not a finite vector of dimension " + std::to_string(bank.dimension));
        }
    }

    return violations;
}

}  // namespace bimem

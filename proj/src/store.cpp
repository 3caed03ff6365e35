#include "bimem/store.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "bimem/errors.hpp"

namespace bimem {

namespace {

nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : v) arr.push_back(x);
    return arr;
}

Vector vector_from_json(const nlohmann::json& node, const std::string& path) {
    if (!node.is_array()) throw data_error(path + ": expected number array");
    Vector v;
    v.reserve(node.size());
    for (const auto& x : node) {
        if (!x.is_number()) throw data_error(path + ": expected number array");
        v.push_back(x.get<double>());
    }
    return v;
}

std::vector<std::string> strings_from_json(const nlohmann::json& node, const std::string& path) {
    if (!node.is_array()) throw data_error(path + ": expected string array");
    std::vector<std::string> out;
    for (const auto& s : node) {
        if (!s.is_string()) throw data_error(path + ": expected string array");
        out.push_back(s.get<std::string>());
    }
    return out;
}

const nlohmann::json& expect(const nlohmann::json& node, const char* field, const std::string& path) {
    auto it = node.find(field);
    if (it == node.end()) throw data_error(path + ": missing field \"" + field + "\"");
    return *it;
}

}  // namespace

nlohmann::json bank_to_json(const MemoryBank& bank) {
    nlohmann::json facts = nlohmann::json::array();
    for (const auto& [id, fact] : bank.facts) {
        (void)id;
        facts.push_back(nlohmann::json{
            {"id", fact.id},
            {"content", fact.content},
            {"keywords", fact.keywords},
            {"tags", fact.tags},
            {"timestamp", fact.timestamp},
            {"edges", fact.edges},
            {"embedding", vector_to_json(fact.embedding)},
        });
    }

    nlohmann::json scenes = nlohmann::json::array();
    for (const auto& [id, scene] : bank.scenes) {
        (void)id;
        nlohmann::json node{
            {"id", scene.id},
            {"summary", scene.summary},
            {"keywords", scene.keywords},
            {"tags", scene.tags},
            {"members", scene.members},
            {"embedding", vector_to_json(scene.embedding)},
        };
        node["delta"] = scene.delta.has_value() ? nlohmann::json(*scene.delta) : nlohmann::json(nullptr);
        scenes.push_back(std::move(node));
    }

    nlohmann::json persona = nlohmann::json::object();
    for (int d = 0; d < kPersonaDimensionCount; ++d) {
        const PersonaEntry& entry = bank.persona.dimensions[static_cast<std::size_t>(d)];
        persona[kPersonaDimensionKeys[d]] = nlohmann::json{
            {"text", entry.text},
            {"embedding", vector_to_json(entry.embedding)},
        };
    }

    return nlohmann::json{
        {"format_version", kBankFormatVersion},
        {"dimension", bank.dimension},
        {"facts", std::move(facts)},
        {"scenes", std::move(scenes)},
        {"persona", std::move(persona)},
        {"provenance",
         {{"tau", bank.provenance.tau},
          {"alpha", bank.provenance.alpha},
          {"k", bank.provenance.k},
          {"m", bank.provenance.m},
          {"seed", bank.provenance.seed},
          {"lpa_max_iters", bank.provenance.lpa_max_iters},
          {"embedder", bank.provenance.embedder},
          {"chat_backend", bank.provenance.chat_backend}}},
    };
}

MemoryBank bank_from_json(const nlohmann::json& doc, const std::string& origin) {
    if (!doc.is_object()) throw data_error(origin + ": top level must be a JSON object");

    const nlohmann::json& version = expect(doc, "format_version", origin);
    if (!version.is_number_integer()) throw data_error(origin + ".format_version: expected integer");
    if (version.get<int>() != kBankFormatVersion) {
        throw data_error(origin + ": unsupported format_version " + version.dump() +
                         " (this build reads version " + std::to_string(kBankFormatVersion) + ")");
    }

    MemoryBank bank;
    const nlohmann::json& dim = expect(doc, "dimension", origin);
    if (!dim.is_number_integer()) throw data_error(origin + ".dimension: expected integer");
    bank.dimension = dim.get<int>();

    const nlohmann::json& facts = expect(doc, "facts", origin);
    if (!facts.is_array()) throw data_error(origin + ".facts: expected array");
    for (std::size_t i = 0; i < facts.size(); ++i) {
        const std::string path = origin + ".facts[" + std::to_string(i) + "]";
        const nlohmann::json& node = facts[i];
        FactUnit fact;
        const nlohmann::json& id = expect(node, "id", path);
        if (!id.is_number_integer()) throw data_error(path + ".id: expected integer");
        fact.id = id.get<int>();
        const nlohmann::json& content = expect(node, "content", path);
        if (!content.is_string()) throw data_error(path + ".content: expected string");
        fact.content = content.get<std::string>();
        fact.keywords = strings_from_json(expect(node, "keywords", path), path + ".keywords");
        fact.tags = strings_from_json(expect(node, "tags", path), path + ".tags");
        const nlohmann::json& ts = expect(node, "timestamp", path);
        if (!ts.is_string()) throw data_error(path + ".timestamp: expected string");
        fact.timestamp = ts.get<std::string>();
        const nlohmann::json& edges = expect(node, "edges", path);
        if (!edges.is_array()) throw data_error(path + ".edges: expected integer array");
        for (const auto& e : edges) {
            if (!e.is_number_integer()) throw data_error(path + ".edges: expected integer array");
            fact.edges.insert(e.get<int>());
        }
        fact.embedding = vector_from_json(expect(node, "embedding", path), path + ".embedding");
        if (bank.facts.count(fact.id) > 0) throw data_error(path + ": duplicate fact id " + std::to_string(fact.id));
        bank.facts.emplace(fact.id, std::move(fact));
    }

    const nlohmann::json& scenes = expect(doc, "scenes", origin);
    if (!scenes.is_array()) throw data_error(origin + ".scenes: expected array");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::string path = origin + ".scenes[" + std::to_string(i) + "]";
        const nlohmann::json& node = scenes[i];
        SceneUnit scene;
        const nlohmann::json& id = expect(node, "id", path);
        if (!id.is_number_integer()) throw data_error(path + ".id: expected integer");
        scene.id = id.get<int>();
        const nlohmann::json& summary = expect(node, "summary", path);
        if (!summary.is_string()) throw data_error(path + ".summary: expected string");
        scene.summary = summary.get<std::string>();
        scene.keywords = strings_from_json(expect(node, "keywords", path), path + ".keywords");
        scene.tags = strings_from_json(expect(node, "tags", path), path + ".tags");
        const nlohmann::json& members = expect(node, "members", path);
        if (!members.is_array()) throw data_error(path + ".members: expected integer array");
        for (const auto& m : members) {
            if (!m.is_number_integer()) throw data_error(path + ".members: expected integer array");
            scene.members.insert(m.get<int>());
        }
        const nlohmann::json& delta = expect(node, "delta", path);
        if (delta.is_string()) {
            scene.delta = delta.get<std::string>();
        } else if (!delta.is_null()) {
            throw data_error(path + ".delta: expected string or null");
        }
        scene.embedding = vector_from_json(expect(node, "embedding", path), path + ".embedding");
        if (bank.scenes.count(scene.id) > 0) throw data_error(path + ": duplicate scene id " + std::to_string(scene.id));
        bank.scenes.emplace(scene.id, std::move(scene));
    }

    const nlohmann::json& persona = expect(doc, "persona", origin);
    if (!persona.is_object()) throw data_error(origin + ".persona: expected object");
    for (int d = 0; d < kPersonaDimensionCount; ++d) {
        const std::string path = origin + ".persona." + kPersonaDimensionKeys[d];
        const nlohmann::json& entry = expect(persona, kPersonaDimensionKeys[d], origin + ".persona");
        if (!entry.is_object()) throw data_error(path + ": expected object");
        const nlohmann::json& text = expect(entry, "text", path);
        if (!text.is_string()) throw data_error(path + ".text: expected string");
        bank.persona.dimensions[static_cast<std::size_t>(d)].text = text.get<std::string>();
        bank.persona.dimensions[static_cast<std::size_t>(d)].embedding =
            vector_from_json(expect(entry, "embedding", path), path + ".embedding");
    }

    const nlohmann::json& provenance = expect(doc, "provenance", origin);
    if (!provenance.is_object()) throw data_error(origin + ".provenance: expected object");
    const std::string ppath = origin + ".provenance";
    bank.provenance.tau = expect(provenance, "tau", ppath).get<double>();
    bank.provenance.alpha = expect(provenance, "alpha", ppath).get<double>();
    bank.provenance.k = expect(provenance, "k", ppath).get<int>();
    bank.provenance.m = expect(provenance, "m", ppath).get<int>();
    bank.provenance.seed = expect(provenance, "seed", ppath).get<std::uint64_t>();
    bank.provenance.lpa_max_iters = expect(provenance, "lpa_max_iters", ppath).get<int>();
    bank.provenance.embedder = expect(provenance, "embedder", ppath).get<std::string>();
    bank.provenance.chat_backend = expect(provenance, "chat_backend", ppath).get<std::string>();

    return bank;
}

void save_bank(const MemoryBank& bank, const std::string& path) {
    std::vector<std::string> violations = validate_bank(bank);
    if (!violations.empty()) {
        std::string msg = "refusing to save invalid bank:";
        for (const std::string& v : violations) msg += "\n  - " + v;
        throw data_error(msg);
    }

    // nlohmann objects are key-sorted and numbers serialize via shortest
    // round-trip, so equal banks yield byte-identical files.
    const std::string payload = bank_to_json(bank).dump(2) + "\n";

    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path dir = target.parent_path();
    if (dir.empty()) dir = ".";

    std::random_device rd;
    fs::path temp = dir / (target.filename().string() + ".tmp." + std::to_string(rd()));
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open temp file for writing: " + temp.string());
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(temp, ec);
            throw io_error("write failed: " + temp.string());
        }
    }
    std::error_code ec;
    fs::rename(temp, target, ec);
    if (ec) {
        fs::remove(temp, ec);
        throw io_error("atomic rename to " + path + " failed: " + ec.message());
    }
}

MemoryBank load_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open bank file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(path + ": JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    MemoryBank bank = bank_from_json(doc, path);
    std::vector<std::string> violations = validate_bank(bank);
    if (!violations.empty()) {
        std::string msg = path + ": bank fails validation:";
        for (const std::string& v : violations) msg += "\n  - " + v;
        throw data_error(msg);
    }
    return bank;
}

bool looks_like_bank_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
        return false;
    }
    return doc.is_object() && doc.contains("format_version") && doc.contains("facts");
}

}  // namespace bimem

#include "bimem.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "bimem/construction.hpp"
#include "bimem/embedding.hpp"
#include "bimem/errors.hpp"
#include "bimem/operators.hpp"
#include "bimem/qa_eval.hpp"
#include "bimem/retrieval.hpp"
#include "bimem/store.hpp"
#include "bimem/text.hpp"

struct bimem_bank {
    bimem::MemoryBank bank;
    // Built at open time; the bank is immutable afterwards, so concurrent
    // queries share it read-only.
    std::unique_ptr<bimem::LexicalIndex> index;
};

namespace {

thread_local std::string g_last_error = "";

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

bimem_status status_of(const bimem::Error& e) {
    switch (e.kind()) {
        case bimem::ErrorKind::usage: return BIMEM_ERR_USAGE;
        case bimem::ErrorKind::data: return BIMEM_ERR_DATA;
        case bimem::ErrorKind::backend: return BIMEM_ERR_BACKEND;
        case bimem::ErrorKind::io: return BIMEM_ERR_DATA;
        case bimem::ErrorKind::internal: return BIMEM_ERR_INTERNAL;
    }
    return BIMEM_ERR_INTERNAL;
}

template <typename Fn>
bimem_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return BIMEM_OK;
    } catch (const bimem::Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BIMEM_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return BIMEM_ERR_INTERNAL;
    }
}

nlohmann::json parse_options(const char* options_json, std::initializer_list<const char*> allowed) {
    if (options_json == nullptr || std::string(options_json).empty()) {
        return nlohmann::json::object();
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(options_json);
    } catch (const nlohmann::json::parse_error& e) {
        throw bimem::usage_error(std::string("options are not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw bimem::usage_error("options must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        bool ok = false;
        for (const char* name : allowed) {
            if (key == name) {
                ok = true;
                break;
            }
        }
        if (!ok) throw bimem::usage_error("unknown option \"" + key + "\"");
    }
    return doc;
}

std::string opt_string(const nlohmann::json& options, const char* key, const std::string& fallback) {
    auto it = options.find(key);
    if (it == options.end()) return fallback;
    if (!it->is_string()) throw bimem::usage_error(std::string("option \"") + key + "\" must be a string");
    return it->get<std::string>();
}

double opt_number(const nlohmann::json& options, const char* key, double fallback) {
    auto it = options.find(key);
    if (it == options.end()) return fallback;
    if (!it->is_number()) throw bimem::usage_error(std::string("option \"") + key + "\" must be a number");
    return it->get<double>();
}

int opt_int(const nlohmann::json& options, const char* key, int fallback) {
    auto it = options.find(key);
    if (it == options.end()) return fallback;
    if (!it->is_number_integer()) {
        throw bimem::usage_error(std::string("option \"") + key + "\" must be an integer");
    }
    return it->get<int>();
}

bimem::ConstructionConfig construction_config_from(const nlohmann::json& options) {
    bimem::ConstructionConfig cfg;
    cfg.tau = opt_number(options, "tau", cfg.tau);
    if (cfg.tau < 0.0 || cfg.tau >= 1.0) throw bimem::usage_error("tau must be in [0, 1)");
    cfg.seed = static_cast<std::uint64_t>(opt_int(options, "seed", 0));
    cfg.lpa_max_iters = opt_int(options, "lpa_max_iters", cfg.lpa_max_iters);
    if (cfg.lpa_max_iters < 1) throw bimem::usage_error("lpa_max_iters must be >= 1");
    return cfg;
}

const bimem::Conversation& select_conversation(const bimem::Dataset& dataset,
                                               const std::string& wanted_id) {
    if (dataset.conversations.empty()) {
        throw bimem::data_error("dataset contains no conversations");
    }
    if (wanted_id.empty()) {
        if (dataset.conversations.size() > 1) {
            throw bimem::usage_error("dataset contains " +
                                     std::to_string(dataset.conversations.size()) +
                                     " conversations; pick one with the \"conversation\" option");
        }
        return dataset.conversations.front();
    }
    for (const bimem::Conversation& conv : dataset.conversations) {
        if (conv.id == wanted_id) return conv;
    }
    throw bimem::data_error("conversation \"" + wanted_id + "\" not found in dataset");
}

nlohmann::json retrieved_to_json(const bimem::RetrievedSet& retrieved) {
    nlohmann::json arr = nlohmann::json::array();
    for (const bimem::RetrievalUnit& unit : retrieved) {
        arr.push_back(nlohmann::json{
            {"level", bimem::memory_level_name(unit.level)},
            {"ref", bimem::unit_ref_label(unit)},
            {"score", unit.score},
            {"origin", bimem::retrieval_origin_name(unit.origin)},
        });
    }
    return arr;
}

}  // namespace

extern "C" {

const char* bimem_version(void) { return "0.1.0"; }

const char* bimem_status_name(bimem_status status) {
    switch (status) {
        case BIMEM_OK: return "ok";
        case BIMEM_ERR_USAGE: return "usage";
        case BIMEM_ERR_DATA: return "data";
        case BIMEM_ERR_BACKEND: return "backend";
        case BIMEM_ERR_INTERNAL: return "internal";
    }
    return "?";
}

const char* bimem_last_error(void) { return g_last_error.c_str(); }

void bimem_free(char* str) { std::free(str); }

bimem_status bimem_build(const char* conversation_path, const char* options_json,
                         const char* out_bank_path, char** out_warnings) {
    return guarded([&] {
        if (conversation_path == nullptr || out_bank_path == nullptr) {
            throw bimem::usage_error("conversation_path and out_bank_path are required");
        }
        nlohmann::json options = parse_options(
            options_json,
            {"backend", "embedder", "tau", "seed", "lpa_max_iters", "conversation"});

        bimem::Dataset dataset = bimem::load_dataset(conversation_path);
        const bimem::Conversation& conv =
            select_conversation(dataset, opt_string(options, "conversation", ""));

        auto provider = bimem::make_provider(opt_string(options, "embedder", "hash-1024"));
        auto backend = bimem::make_backend(opt_string(options, "backend", "mock"));
        bimem::ConstructionConfig cfg = construction_config_from(options);

        bimem::ConstructionResult result =
            bimem::construct_memory(conv, *provider, *backend, cfg);
        bimem::save_bank(result.bank, out_bank_path);

        if (out_warnings != nullptr) {
            *out_warnings = result.warnings.empty()
                                ? nullptr
                                : dup_string(bimem::join(result.warnings, "\n"));
        }
    });
}

bimem_status bimem_bank_open(const char* bank_path, bimem_bank** out_bank) {
    return guarded([&] {
        if (bank_path == nullptr || out_bank == nullptr) {
            throw bimem::usage_error("bank_path and out_bank are required");
        }
        auto handle = std::make_unique<bimem_bank>();
        handle->bank = bimem::load_bank(bank_path);
        handle->index = std::make_unique<bimem::LexicalIndex>(handle->bank);
        *out_bank = handle.release();
    });
}

void bimem_bank_close(bimem_bank* bank) { delete bank; }

bimem_status bimem_bank_inspect(const bimem_bank* bank, const char* options_json,
                                char** out_json) {
    return guarded([&] {
        if (bank == nullptr || out_json == nullptr) {
            throw bimem::usage_error("bank and out_json are required");
        }
        nlohmann::json options = parse_options(options_json, {"section"});
        const std::string section = opt_string(options, "section", "summary");
        const bimem::MemoryBank& b = bank->bank;

        nlohmann::json out;
        if (section == "summary") {
            std::size_t edge_total = 0;
            for (const auto& [id, fact] : b.facts) {
                (void)id;
                edge_total += fact.edges.size();
            }
            int calibrated = 0;
            for (const auto& [id, scene] : b.scenes) {
                (void)id;
                if (scene.delta.has_value()) ++calibrated;
            }
            out = nlohmann::json{
                {"dimension", b.dimension},
                {"facts", b.facts.size()},
                {"scenes", b.scenes.size()},
                {"calibrated_scenes", calibrated},
                {"edges", edge_total / 2},
                {"provenance",
                 {{"tau", b.provenance.tau},
                  {"seed", b.provenance.seed},
                  {"embedder", b.provenance.embedder},
                  {"chat_backend", b.provenance.chat_backend}}},
            };
        } else if (section == "scenes") {
            nlohmann::json scenes = nlohmann::json::array();
            for (const auto& [id, scene] : b.scenes) {
                (void)id;
                scenes.push_back(nlohmann::json{
                    {"id", scene.id},
                    {"members", scene.members},
                    {"calibrated", scene.delta.has_value()},
                    {"text", bimem::scene_text(scene)},
                    {"keywords", scene.keywords},
                });
            }
            out = nlohmann::json{{"scenes", std::move(scenes)}};
        } else if (section == "persona") {
            nlohmann::json persona = nlohmann::json::object();
            for (int d = 0; d < bimem::kPersonaDimensionCount; ++d) {
                persona[bimem::kPersonaDimensionKeys[d]] =
                    b.persona.dimensions[static_cast<std::size_t>(d)].text;
            }
            out = nlohmann::json{{"persona", std::move(persona)}};
        } else if (section == "graph") {
            std::size_t edge_total = 0;
            std::size_t isolated = 0;
            int max_degree = 0;
            for (const auto& [id, fact] : b.facts) {
                (void)id;
                edge_total += fact.edges.size();
                if (fact.edges.empty()) ++isolated;
                max_degree = std::max(max_degree, static_cast<int>(fact.edges.size()));
            }
            nlohmann::json cluster_sizes = nlohmann::json::array();
            for (const auto& [id, scene] : b.scenes) {
                (void)id;
                cluster_sizes.push_back(scene.members.size());
            }
            out = nlohmann::json{
                {"nodes", b.facts.size()},
                {"edges", edge_total / 2},
                {"isolated", isolated},
                {"max_degree", max_degree},
                {"cluster_sizes", std::move(cluster_sizes)},
                {"tau", b.provenance.tau},
            };
        } else {
            throw bimem::usage_error("unknown inspect section \"" + section + "\"");
        }
        *out_json = dup_string(out.dump(2));
    });
}

bimem_status bimem_bank_query(const bimem_bank* bank, const char* question,
                              const char* options_json, char** out_json) {
    return guarded([&] {
        if (bank == nullptr || question == nullptr || out_json == nullptr) {
            throw bimem::usage_error("bank, question and out_json are required");
        }
        if (bimem::trim_copy(question).empty()) throw bimem::usage_error("question is empty");
        nlohmann::json options = parse_options(
            options_json, {"k", "m", "alpha", "preset", "strategy", "backend", "budget"});

        bimem::RetrievalConfig cfg;
        const std::string preset = opt_string(options, "preset", "");
        if (!preset.empty()) {
            auto category = bimem::parse_question_category(preset);
            if (!category) throw bimem::usage_error("unknown preset \"" + preset + "\"");
            cfg = bimem::preset_for(*category);
        }
        cfg.k = opt_int(options, "k", cfg.k);
        cfg.m = opt_int(options, "m", cfg.m);
        cfg.alpha = opt_number(options, "alpha", cfg.alpha);
        bimem::validate_retrieval_config(cfg);

        auto strategy = bimem::parse_retrieval_strategy(opt_string(options, "strategy", "bimem"));
        if (!strategy) {
            throw bimem::usage_error("unknown strategy \"" + opt_string(options, "strategy", "") + "\"");
        }
        const int budget = opt_int(options, "budget", 2048);
        if (budget < 1) throw bimem::usage_error("budget must be >= 1");

        auto provider = bimem::make_provider(bank->bank.provenance.embedder);
        if (provider->dimension() != bank->bank.dimension &&
            bank->bank.provenance.embedder.rfind("hash-", 0) == 0) {
            throw bimem::data_error("bank dimension does not match its embedder provenance");
        }
        auto backend = bimem::make_backend(opt_string(options, "backend", "mock"));

        bimem::RetrievedSet retrieved = bimem::retrieve_with_strategy(
            *strategy, question, bank->bank, *bank->index, *provider, cfg);
        std::string context =
            bimem::assemble_context(retrieved, bank->bank, static_cast<std::size_t>(budget));
        std::string answer = backend->generate_answer(question, context);

        nlohmann::json out{
            {"question", question},
            {"strategy", bimem::retrieval_strategy_name(*strategy)},
            {"k", cfg.k},
            {"m", cfg.m},
            {"alpha", cfg.alpha},
            {"retrieved", retrieved_to_json(retrieved)},
            {"context", context},
            {"answer", answer},
        };
        *out_json = dup_string(out.dump(2));
    });
}

bimem_status bimem_eval(const char* source_path, const char* qa_path, const char* options_json,
                        const char* report_path, char** out_table) {
    return guarded([&] {
        if (source_path == nullptr) throw bimem::usage_error("source_path is required");
        nlohmann::json options = parse_options(
            options_json, {"backend", "embedder", "tau", "seed", "lpa_max_iters", "strategy",
                           "k", "m", "alpha", "budget"});

        bimem::EvalOptions eval_options;
        auto strategy = bimem::parse_retrieval_strategy(opt_string(options, "strategy", "bimem"));
        if (!strategy) {
            throw bimem::usage_error("unknown strategy \"" + opt_string(options, "strategy", "") + "\"");
        }
        eval_options.strategy = *strategy;
        eval_options.k_override = opt_int(options, "k", 0);
        eval_options.m_override = opt_int(options, "m", -1);
        eval_options.alpha_override = opt_number(options, "alpha", -1.0);
        const int budget = opt_int(options, "budget", 2048);
        if (budget < 1) throw bimem::usage_error("budget must be >= 1");
        eval_options.context_token_budget = static_cast<std::size_t>(budget);

        auto backend = bimem::make_backend(opt_string(options, "backend", "mock"));

        // QA items come from qa_path when given, else from the source file.
        std::vector<bimem::QAItem> items;
        int skipped = 0;
        if (qa_path != nullptr && std::string(qa_path) != "") {
            std::ifstream in(qa_path);
            if (!in) throw bimem::io_error(std::string("cannot open QA file: ") + qa_path);
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw bimem::data_error(std::string(qa_path) + ": JSON parse error: " + e.what());
            }
            if (!doc.contains("conversations")) doc["conversations"] = nlohmann::json::array();
            bimem::Dataset qa_only = bimem::parse_dataset(doc, qa_path);
            items = std::move(qa_only.items);
            skipped = qa_only.skipped_adversarial;
        }

        bimem::EvalReport report;
        if (bimem::looks_like_bank_file(source_path)) {
            bimem::MemoryBank bank = bimem::load_bank(source_path);
            auto provider = bimem::make_provider(bank.provenance.embedder);
            report = bimem::run_eval(bank, items, *provider, *backend, eval_options);
            report.skipped_adversarial = skipped;
        } else {
            bimem::Dataset dataset = bimem::load_dataset(source_path);
            if (!items.empty()) {
                dataset.items = items;
                dataset.skipped_adversarial += skipped;
            }
            auto provider = bimem::make_provider(opt_string(options, "embedder", "hash-1024"));
            bimem::ConstructionConfig cfg = construction_config_from(options);
            report = bimem::run_eval_dataset(dataset, *provider, *backend, cfg, eval_options);
        }

        if (report_path != nullptr && std::string(report_path) != "") {
            const std::string payload = report.to_json().dump(2) + "\n";
            std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
            if (!out) throw bimem::io_error(std::string("cannot write report: ") + report_path);
            out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
            if (!out) throw bimem::io_error(std::string("report write failed: ") + report_path);
        }
        if (out_table != nullptr) *out_table = dup_string(report.render_table());
    });
}

}  // extern "C"

#include "bimem/qa_eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

#include "bimem/detail/parallel.hpp"
#include "bimem/errors.hpp"
#include "bimem/text.hpp"

namespace bimem {

// ----- dataset loading ---------------------------------------------------------

namespace {

const std::regex kTimestampPattern(
    R"(^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$)");

std::string json_type_name(const nlohmann::json& node) { return node.type_name(); }

const nlohmann::json& expect(const nlohmann::json& node, const char* field, const std::string& path) {
    auto it = node.find(field);
    if (it == node.end()) throw data_error(path + ": missing field \"" + field + "\"");
    return *it;
}

std::string expect_string(const nlohmann::json& node, const char* field, const std::string& path) {
    const nlohmann::json& value = expect(node, field, path);
    if (!value.is_string()) {
        throw data_error(path + "." + field + ": expected string, got " + json_type_name(value));
    }
    return value.get<std::string>();
}

int expect_int(const nlohmann::json& node, const char* field, const std::string& path) {
    const nlohmann::json& value = expect(node, field, path);
    if (!value.is_number_integer()) {
        throw data_error(path + "." + field + ": expected integer, got " + json_type_name(value));
    }
    return value.get<int>();
}

}  // namespace

Dataset parse_dataset(const nlohmann::json& doc, const std::string& origin) {
    if (!doc.is_object()) throw data_error(origin + ": top level must be a JSON object");
    Dataset dataset;

    const nlohmann::json& conversations = expect(doc, "conversations", origin);
    if (!conversations.is_array()) throw data_error(origin + ".conversations: expected array");
    for (std::size_t ci = 0; ci < conversations.size(); ++ci) {
        const std::string cpath = origin + ".conversations[" + std::to_string(ci) + "]";
        const nlohmann::json& cnode = conversations[ci];
        Conversation conv;
        conv.id = expect_string(cnode, "id", cpath);
        const nlohmann::json& turns = expect(cnode, "turns", cpath);
        if (!turns.is_array() || turns.empty()) {
            throw data_error(cpath + ".turns: expected non-empty array");
        }
        for (std::size_t ti = 0; ti < turns.size(); ++ti) {
            const std::string tpath = cpath + ".turns[" + std::to_string(ti) + "]";
            const nlohmann::json& tnode = turns[ti];
            Interaction interaction;
            interaction.turn = expect_int(tnode, "turn", tpath);
            interaction.speaker = expect_string(tnode, "speaker", tpath);
            interaction.query = expect_string(tnode, "query", tpath);
            interaction.response = expect_string(tnode, "response", tpath);
            interaction.timestamp = expect_string(tnode, "timestamp", tpath);
            if (!std::regex_match(interaction.timestamp, kTimestampPattern)) {
                throw data_error(tpath + ".timestamp: not ISO-8601 (turn " +
                                 std::to_string(interaction.turn) + ", got \"" +
                                 interaction.timestamp + "\")");
            }
            conv.interactions.push_back(std::move(interaction));
        }
        validate_conversation(conv);
        dataset.conversations.push_back(std::move(conv));
    }

    if (auto qa = doc.find("qa"); qa != doc.end()) {
        if (!qa->is_array()) throw data_error(origin + ".qa: expected array");
        for (std::size_t qi = 0; qi < qa->size(); ++qi) {
            const std::string qpath = origin + ".qa[" + std::to_string(qi) + "]";
            const nlohmann::json& qnode = (*qa)[qi];
            const std::string category = expect_string(qnode, "category", qpath);
            if (category == "adversarial") {
                ++dataset.skipped_adversarial;
                continue;
            }
            auto parsed = parse_question_category(category);
            if (!parsed) {
                throw data_error(qpath + ".category: unknown category \"" + category + "\"");
            }
            QAItem item;
            item.category = *parsed;
            item.question = expect_string(qnode, "question", qpath);
            item.gold_answer = expect_string(qnode, "answer", qpath);
            item.conversation_id = expect_string(qnode, "conversation_id", qpath);
            dataset.items.push_back(std::move(item));
        }
    }
    return dataset;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open dataset file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(path + ": JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    return parse_dataset(doc, path);
}

// ----- context assembly --------------------------------------------------------

namespace {

std::size_t whitespace_token_count(const std::string& line) {
    std::istringstream stream(line);
    std::string token;
    std::size_t count = 0;
    while (stream >> token) ++count;
    return count;
}

}  // namespace

std::string assemble_context(const RetrievedSet& retrieved, const MemoryBank& bank,
                             std::size_t token_budget) {
    std::vector<std::string> persona_lines;
    std::vector<std::string> scene_lines;
    std::vector<std::string> fact_lines;

    for (const RetrievalUnit& unit : retrieved) {
        switch (unit.level) {
            case MemoryLevel::persona: {
                if (unit.ref_id < 0 || unit.ref_id >= kPersonaDimensionCount) {
                    throw data_error("integrity: persona dimension " + std::to_string(unit.ref_id) +
                                     " out of range");
                }
                persona_lines.push_back(std::string("PERSONA/") + kPersonaDimensionKeys[unit.ref_id] +
                                        ": " + bank.persona.dimensions[unit.ref_id].text);
                break;
            }
            case MemoryLevel::scene: {
                auto it = bank.scenes.find(unit.ref_id);
                if (it == bank.scenes.end()) {
                    throw data_error("integrity: scene " + std::to_string(unit.ref_id) + " not in bank");
                }
                scene_lines.push_back("SCENE " + std::to_string(unit.ref_id) + ": " +
                                      scene_text(it->second));
                break;
            }
            case MemoryLevel::fact: {
                auto it = bank.facts.find(unit.ref_id);
                if (it == bank.facts.end()) {
                    throw data_error("integrity: fact " + std::to_string(unit.ref_id) + " not in bank");
                }
                fact_lines.push_back("FACT " + std::to_string(unit.ref_id) + " [" +
                                     it->second.timestamp + "]: " + it->second.content);
                break;
            }
        }
    }

    std::vector<std::string> lines;
    std::size_t used = 0;
    for (std::string& line : persona_lines) {
        used += whitespace_token_count(line);
        lines.push_back(std::move(line));
    }
    for (std::string& line : scene_lines) {
        used += whitespace_token_count(line);
        lines.push_back(std::move(line));
    }
    bool truncated = false;
    for (std::string& line : fact_lines) {
        std::size_t cost = whitespace_token_count(line);
        if (used + cost > token_budget) {
            truncated = true;
            break;
        }
        used += cost;
        lines.push_back(std::move(line));
    }
    if (truncated) lines.push_back("[context truncated]");

    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

// ----- metrics -------------------------------------------------------------------

namespace {

std::vector<std::string> normalize_tokens(const std::string& text, bool drop_articles) {
    std::vector<std::string> tokens = tokenize(text);
    if (!drop_articles) return tokens;
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (std::string& t : tokens) {
        if (t == "a" || t == "an" || t == "the") continue;
        kept.push_back(std::move(t));
    }
    return kept;
}

std::map<std::string, int> counts_of(const std::vector<std::string>& tokens) {
    std::map<std::string, int> counts;
    for (const std::string& t : tokens) counts[t] += 1;
    return counts;
}

double clipped_overlap(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    std::map<std::string, int> pred_counts = counts_of(pred);
    std::map<std::string, int> gold_counts = counts_of(gold);
    double overlap = 0.0;
    for (const auto& [token, n] : pred_counts) {
        auto it = gold_counts.find(token);
        if (it != gold_counts.end()) overlap += std::min(n, it->second);
    }
    return overlap;
}

}  // namespace

double token_f1(const std::string& prediction, const std::string& gold) {
    std::vector<std::string> pred = normalize_tokens(prediction, /*drop_articles=*/true);
    std::vector<std::string> ref = normalize_tokens(gold, /*drop_articles=*/true);
    if (pred.empty() && ref.empty()) return 1.0;
    if (pred.empty() || ref.empty()) return 0.0;
    double overlap = clipped_overlap(pred, ref);
    if (overlap == 0.0) return 0.0;
    double precision = overlap / static_cast<double>(pred.size());
    double recall = overlap / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

double bleu1(const std::string& prediction, const std::string& gold) {
    std::vector<std::string> pred = normalize_tokens(prediction, /*drop_articles=*/false);
    std::vector<std::string> ref = normalize_tokens(gold, /*drop_articles=*/false);
    if (pred.empty()) return ref.empty() ? 1.0 : 0.0;
    double precision = clipped_overlap(pred, ref) / static_cast<double>(pred.size());
    const double c = static_cast<double>(pred.size());
    const double r = static_cast<double>(ref.size());
    const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
    return precision * brevity;
}

// ----- report ---------------------------------------------------------------------

CategoryAggregate EvalReport::aggregate(QuestionCategory category) const {
    CategoryAggregate agg;
    for (const EvalItemRecord& item : items) {
        if (item.category != category) continue;
        agg.count += 1;
        agg.f1_sum += item.f1;
        agg.bleu_sum += item.bleu;
    }
    return agg;
}

CategoryAggregate EvalReport::overall() const {
    CategoryAggregate agg;
    for (const EvalItemRecord& item : items) {
        agg.count += 1;
        agg.f1_sum += item.f1;
        agg.bleu_sum += item.bleu;
    }
    return agg;
}

double EvalReport::mean_answer_seconds() const {
    return items.empty() ? 0.0 : total_answer_seconds / static_cast<double>(items.size());
}

namespace {

double percent(double sum, int count) {
    if (count == 0) return 0.0;
    return std::round(sum / count * 100.0 * 100.0) / 100.0;  // two decimals
}

constexpr std::array<QuestionCategory, 4> kAllCategories = {
    QuestionCategory::single_hop, QuestionCategory::multi_hop, QuestionCategory::temporal,
    QuestionCategory::open_domain};

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json per_category = nlohmann::json::object();
    for (QuestionCategory category : kAllCategories) {
        CategoryAggregate agg = aggregate(category);
        per_category[question_category_name(category)] = {
            {"count", agg.count},
            {"f1", percent(agg.f1_sum, agg.count)},
            {"bleu1", percent(agg.bleu_sum, agg.count)},
        };
    }
    CategoryAggregate all = overall();

    nlohmann::json item_records = nlohmann::json::array();
    for (const EvalItemRecord& item : items) {
        nlohmann::json record{
            {"question", item.question},
            {"category", question_category_name(item.category)},
            {"conversation_id", item.conversation_id},
            {"retrieved", item.retrieved},
            {"answer", item.answer},
            {"f1", item.f1},
            {"bleu1", item.bleu},
        };
        if (!item.error.empty()) record["error"] = item.error;
        item_records.push_back(std::move(record));
    }

    return nlohmann::json{
        {"strategy", strategy},
        {"averaging", averaging},
        {"counts",
         {{"total", all.count}, {"skipped_adversarial", skipped_adversarial}}},
        {"per_category", per_category},
        {"average", {{"count", all.count}, {"f1", percent(all.f1_sum, all.count)},
                     {"bleu1", percent(all.bleu_sum, all.count)}}},
        {"timing",
         {{"construction_seconds", construction_seconds},
          {"mean_answer_seconds", mean_answer_seconds()}}},
        {"items", item_records},
    };
}

std::string EvalReport::render_table() const {
    std::ostringstream out;
    out << "strategy: " << strategy << " (averages are " << averaging << ")\n";
    out << std::left << std::setw(14) << "category" << std::right << std::setw(7) << "count"
        << std::setw(9) << "F1" << std::setw(9) << "B1" << "\n";
    auto row = [&](const std::string& name, const CategoryAggregate& agg) {
        out << std::left << std::setw(14) << name << std::right << std::setw(7) << agg.count
            << std::setw(9) << std::fixed << std::setprecision(2) << percent(agg.f1_sum, agg.count)
            << std::setw(9) << percent(agg.bleu_sum, agg.count) << "\n";
    };
    for (QuestionCategory category : kAllCategories) {
        row(question_category_name(category), aggregate(category));
    }
    row("average", overall());
    return out.str();
}

// ----- harness --------------------------------------------------------------------

RetrievalConfig effective_config(QuestionCategory category, const EvalOptions& options) {
    RetrievalConfig cfg = preset_for(category);
    if (options.k_override > 0) cfg.k = options.k_override;
    if (options.m_override >= 0) cfg.m = options.m_override;
    if (options.alpha_override >= 0.0) cfg.alpha = options.alpha_override;
    return cfg;
}

EvalReport run_eval(const MemoryBank& bank, const std::vector<QAItem>& items,
                    EmbeddingProvider& provider, ChatBackend& backend, const EvalOptions& options) {
    EvalReport report;
    report.strategy = retrieval_strategy_name(options.strategy);
    report.items.resize(items.size());

    LexicalIndex index(bank);
    const auto start = std::chrono::steady_clock::now();
    detail::parallel_for(items.size(), options.max_workers, [&](std::size_t i) {
        const QAItem& item = items[i];
        EvalItemRecord& record = report.items[i];
        record.question = item.question;
        record.category = item.category;
        record.conversation_id = item.conversation_id;
        try {
            RetrievalConfig cfg = effective_config(item.category, options);
            RetrievedSet retrieved =
                retrieve_with_strategy(options.strategy, item.question, bank, index, provider, cfg);
            for (const RetrievalUnit& unit : retrieved) {
                record.retrieved.push_back(std::string(memory_level_name(unit.level)) + ":" +
                                           unit_ref_label(unit));
            }
            std::string context = assemble_context(retrieved, bank, options.context_token_budget);
            record.answer = backend.generate_answer(item.question, context);
            record.f1 = token_f1(record.answer, item.gold_answer);
            record.bleu = bleu1(record.answer, item.gold_answer);
        } catch (const std::exception& e) {
            record.error = e.what();
            record.f1 = 0.0;
            record.bleu = 0.0;
        }
    });
    report.total_answer_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EvalReport run_eval_dataset(const Dataset& dataset, EmbeddingProvider& provider,
                            ChatBackend& backend, const ConstructionConfig& construction,
                            const EvalOptions& options) {
    // Banks are built once per conversation that at least one item references.
    std::map<std::string, MemoryBank> banks;
    double construction_seconds = 0.0;
    for (const Conversation& conv : dataset.conversations) {
        bool referenced = dataset.items.empty();
        for (const QAItem& item : dataset.items) {
            if (item.conversation_id == conv.id) {
                referenced = true;
                break;
            }
        }
        if (!referenced) continue;
        ConstructionResult result = construct_memory(conv, provider, backend, construction);
        construction_seconds += result.seconds;
        banks.emplace(conv.id, std::move(result.bank));
    }

    EvalReport report;
    report.strategy = retrieval_strategy_name(options.strategy);
    report.skipped_adversarial = dataset.skipped_adversarial;
    report.construction_seconds = construction_seconds;

    for (const auto& [conv_id, bank] : banks) {
        std::vector<QAItem> subset;
        for (const QAItem& item : dataset.items) {
            if (item.conversation_id == conv_id) subset.push_back(item);
        }
        if (subset.empty()) continue;
        EvalReport partial = run_eval(bank, subset, provider, backend, options);
        report.items.insert(report.items.end(), partial.items.begin(), partial.items.end());
        report.total_answer_seconds += partial.total_answer_seconds;
    }

    for (const QAItem& item : dataset.items) {
        if (banks.find(item.conversation_id) == banks.end()) {
            EvalItemRecord record;
            record.question = item.question;
            record.category = item.category;
            record.conversation_id = item.conversation_id;
            record.error = "conversation \"" + item.conversation_id + "\" not found in dataset";
            report.items.push_back(std::move(record));
        }
    }
    return report;
}

}  // namespace bimem

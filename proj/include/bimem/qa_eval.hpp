#pragma once
// QA evaluation: context assembly for answer generation, token-F1 and BLEU-1
// scoring, dataset loading, and the eval harness. Averages are micro (over
// items, not over categories).

#include <string>
#include <vector>

#include <json.hpp>

#include "bimem/construction.hpp"
#include "bimem/memory.hpp"
#include "bimem/operators.hpp"
#include "bimem/retrieval.hpp"

namespace bimem {

struct QAItem {
    std::string question;
    std::string gold_answer;
    QuestionCategory category = QuestionCategory::single_hop;
    std::string conversation_id;
};

struct Dataset {
    std::vector<Conversation> conversations;
    std::vector<QAItem> items;
    int skipped_adversarial = 0;
};

// Parses the external conversation/QA JSON schema. Adversarial items are
// skipped and counted; schema violations raise a data error naming the path.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset(const nlohmann::json& doc, const std::string& origin);

// Deterministic context layout: persona units first, then scenes, then
// facts, each section in retrieval order. The whitespace-token budget keeps
// persona and scenes intact and drops trailing facts, appending a marker
// line when anything was cut.
std::string assemble_context(const RetrievedSet& retrieved, const MemoryBank& bank,
                             std::size_t token_budget = 2048);

// Extractive-QA style F1: lowercase, punctuation stripped, articles dropped,
// multiset token overlap. Empty-vs-empty scores 1; one empty side scores 0.
double token_f1(const std::string& prediction, const std::string& gold);

// Clipped unigram precision times brevity penalty. Same normalization as
// token_f1 except articles are kept (standard BLEU counts them).
double bleu1(const std::string& prediction, const std::string& gold);

struct EvalItemRecord {
    std::string question;
    QuestionCategory category = QuestionCategory::single_hop;
    std::string conversation_id;
    std::vector<std::string> retrieved;  // "level:ref" labels in retrieval order
    std::string answer;
    double f1 = 0.0;
    double bleu = 0.0;
    std::string error;  // non-empty when the backend failed; item scores 0
};

struct CategoryAggregate {
    int count = 0;
    double f1_sum = 0.0;
    double bleu_sum = 0.0;
};

struct EvalReport {
    std::string strategy = "bimem";
    std::string averaging = "micro over items";
    std::vector<EvalItemRecord> items;
    int skipped_adversarial = 0;
    double construction_seconds = 0.0;
    double total_answer_seconds = 0.0;

    CategoryAggregate aggregate(QuestionCategory category) const;
    CategoryAggregate overall() const;
    double mean_answer_seconds() const;

    nlohmann::json to_json() const;
    // Aligned category x {F1, B1} table, percentages with two decimals.
    std::string render_table() const;
};

struct EvalOptions {
    RetrievalStrategy strategy = RetrievalStrategy::bimem;
    // Overrides on top of the per-category presets; <= 0 keeps the preset.
    int k_override = 0;
    int m_override = -1;
    double alpha_override = -1.0;
    std::size_t context_token_budget = 2048;
    int max_workers = 4;
};

RetrievalConfig effective_config(QuestionCategory category, const EvalOptions& options);

// Evaluates items against one bank. Backend failures score 0 and are noted
// per item; the harness always completes.
EvalReport run_eval(const MemoryBank& bank, const std::vector<QAItem>& items,
                    EmbeddingProvider& provider, ChatBackend& backend, const EvalOptions& options);

// Builds one bank per referenced conversation, then evaluates each item
// against its conversation's bank.
EvalReport run_eval_dataset(const Dataset& dataset, EmbeddingProvider& provider,
                            ChatBackend& backend, const ConstructionConfig& construction,
                            const EvalOptions& options);

}  // namespace bimem

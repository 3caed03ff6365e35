// bimem - command-line front end for the Bi-Mem memory engine.
//
// Thin shell over the C API: subcommands assemble an options JSON object,
// call the library, and print what comes back. Exit codes: 0 success,
// 1 usage, 2 data, 3 backend.

#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bimem.h"

namespace {

int finish(bimem_status status) {
    if (status != BIMEM_OK) {
        std::fprintf(stderr, "error (%s): %s\n", bimem_status_name(status), bimem_last_error());
    }
    return static_cast<int>(status);
}

void print_and_free(char* text) {
    if (text == nullptr) return;
    std::fputs(text, stdout);
    std::fputc('\n', stdout);
    bimem_free(text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bi-Mem: hierarchical conversational memory engine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(bimem_version()));

    // build
    std::string build_input, build_output, build_backend = "mock", build_embedder = "hash-1024";
    std::string build_conversation;
    double build_tau = 0.2;
    int build_seed = 0;
    auto* build = app.add_subcommand("build", "construct a memory bank from a conversation file");
    build->add_option("conversation", build_input, "conversation JSON file")->required();
    build->add_option("-o,--output", build_output, "bank file to write")->required();
    build->add_option("--backend", build_backend, "chat backend: mock or remote")
        ->check(CLI::IsMember({"mock", "remote"}));
    build->add_option("--embedder", build_embedder, "embedding provider id (hash-<dim> or remote)");
    build->add_option("--tau", build_tau, "edge similarity threshold (default 0.2)");
    build->add_option("--seed", build_seed, "clustering seed (default 0)");
    build->add_option("--conversation-id", build_conversation,
                      "conversation id when the file holds several");

    // query
    std::string query_bank, query_question, query_preset, query_strategy = "bimem";
    std::string query_backend = "mock";
    int query_k = -1, query_m = -1;
    double query_alpha = -1.0;
    auto* query = app.add_subcommand("query", "retrieve memories and answer a question");
    query->add_option("bank", query_bank, "bank JSON file")->required();
    query->add_option("question", query_question, "question text")->required();
    query->add_option("--k", query_k, "initial retrieval size");
    query->add_option("--m", query_m, "facts activated per retrieved scene");
    query->add_option("--alpha", query_alpha, "dense weight of the hybrid fusion");
    query->add_option("--preset", query_preset,
                      "category preset: single_hop, multi_hop, temporal, open_domain");
    query->add_option("--strategy", query_strategy, "retrieval strategy");
    query->add_option("--backend", query_backend, "chat backend for the answer");

    // eval
    std::string eval_source, eval_qa, eval_report, eval_strategy = "bimem";
    std::string eval_backend = "mock", eval_embedder = "hash-1024";
    double eval_tau = 0.2;
    int eval_seed = 0, eval_k = 0, eval_m = -1;
    double eval_alpha = -1.0;
    auto* eval = app.add_subcommand("eval", "run QA evaluation against a bank or conversation file");
    eval->add_option("source", eval_source, "bank JSON file or conversation/QA dataset")->required();
    eval->add_option("qa", eval_qa, "QA dataset file (optional when source embeds a qa section)");
    eval->add_option("-o,--output", eval_report, "report JSON file to write");
    eval->add_option("--strategy", eval_strategy,
                     "bimem | hierarchical | topdown | bottomup | scene2fact | fact2scene");
    eval->add_option("--backend", eval_backend, "chat backend")
        ->check(CLI::IsMember({"mock", "remote"}));
    eval->add_option("--embedder", eval_embedder, "embedding provider for construction");
    eval->add_option("--tau", eval_tau, "edge threshold for construction");
    eval->add_option("--seed", eval_seed, "clustering seed for construction");
    eval->add_option("--k", eval_k, "override the per-category k preset");
    eval->add_option("--m", eval_m, "override m");
    eval->add_option("--alpha", eval_alpha, "override alpha");

    // inspect
    std::string inspect_bank;
    bool inspect_scenes = false, inspect_persona = false, inspect_graph = false;
    auto* inspect = app.add_subcommand("inspect", "print bank structure stats");
    inspect->add_option("bank", inspect_bank, "bank JSON file")->required();
    inspect->add_flag("--scenes", inspect_scenes, "list scenes");
    inspect->add_flag("--persona", inspect_persona, "print the persona profile");
    inspect->add_flag("--graph", inspect_graph, "print fact-graph stats");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (build->parsed()) {
        nlohmann::json options{{"backend", build_backend}, {"embedder", build_embedder},
                               {"tau", build_tau},         {"seed", build_seed}};
        if (!build_conversation.empty()) options["conversation"] = build_conversation;
        char* warnings = nullptr;
        bimem_status status = bimem_build(build_input.c_str(), options.dump().c_str(),
                                          build_output.c_str(), &warnings);
        if (warnings != nullptr) {
            std::fprintf(stderr, "warnings:\n%s\n", warnings);
            bimem_free(warnings);
        }
        if (status == BIMEM_OK) std::printf("wrote %s\n", build_output.c_str());
        return finish(status);
    }

    if (query->parsed()) {
        nlohmann::json options{{"strategy", query_strategy}, {"backend", query_backend}};
        if (query_k >= 0) options["k"] = query_k;
        if (query_m >= 0) options["m"] = query_m;
        if (query_alpha >= 0.0) options["alpha"] = query_alpha;
        if (!query_preset.empty()) options["preset"] = query_preset;

        bimem_bank* bank = nullptr;
        bimem_status status = bimem_bank_open(query_bank.c_str(), &bank);
        if (status != BIMEM_OK) return finish(status);
        char* out = nullptr;
        status = bimem_bank_query(bank, query_question.c_str(), options.dump().c_str(), &out);
        bimem_bank_close(bank);
        if (status == BIMEM_OK) print_and_free(out);
        return finish(status);
    }

    if (eval->parsed()) {
        nlohmann::json options{{"strategy", eval_strategy}, {"backend", eval_backend},
                               {"embedder", eval_embedder}, {"tau", eval_tau},
                               {"seed", eval_seed}};
        if (eval_k > 0) options["k"] = eval_k;
        if (eval_m >= 0) options["m"] = eval_m;
        if (eval_alpha >= 0.0) options["alpha"] = eval_alpha;

        char* table = nullptr;
        bimem_status status =
            bimem_eval(eval_source.c_str(), eval_qa.empty() ? nullptr : eval_qa.c_str(),
                       options.dump().c_str(), eval_report.empty() ? nullptr : eval_report.c_str(),
                       &table);
        if (status == BIMEM_OK) {
            print_and_free(table);
            if (!eval_report.empty()) std::printf("report written to %s\n", eval_report.c_str());
        } else if (table != nullptr) {
            bimem_free(table);
        }
        return finish(status);
    }

    if (inspect->parsed()) {
        std::string section = "summary";
        if (inspect_scenes) section = "scenes";
        if (inspect_persona) section = "persona";
        if (inspect_graph) section = "graph";
        nlohmann::json options{{"section", section}};

        bimem_bank* bank = nullptr;
        bimem_status status = bimem_bank_open(inspect_bank.c_str(), &bank);
        if (status != BIMEM_OK) return finish(status);
        char* out = nullptr;
        status = bimem_bank_inspect(bank, options.dump().c_str(), &out);
        bimem_bank_close(bank);
        if (status == BIMEM_OK) print_and_free(out);
        return finish(status);
    }

    return 1;
}

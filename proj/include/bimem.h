/* bimem.h - C API for the Bi-Mem hierarchical conversational memory engine.
 *
 * The engine builds a three-level memory bank (facts / scenes / persona)
 * from a conversation log, retrieves from it with spreading activation, and
 * runs QA evaluation. Banks live in versioned JSON files.
 *
 * Conventions:
 *   - every function returns a bimem_status; details for the last failure on
 *     the calling thread come from bimem_last_error()
 *   - bimem_bank is an opaque handle; close it with bimem_bank_close()
 *   - strings returned through char** are heap-allocated UTF-8, owned by the
 *     caller and released with bimem_free()
 *   - options are JSON option objects; unknown keys are rejected so typos
 *     surface as usage errors. Pass NULL or "{}" for defaults.
 */

#ifndef BIMEM_H
#define BIMEM_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bimem_status {
    BIMEM_OK = 0,
    BIMEM_ERR_USAGE = 1,   /* bad arguments or options */
    BIMEM_ERR_DATA = 2,    /* parse / schema / validation / file problems */
    BIMEM_ERR_BACKEND = 3, /* chat or embedding backend failure */
    BIMEM_ERR_INTERNAL = 4
} bimem_status;

typedef struct bimem_bank bimem_bank;

const char* bimem_version(void);
const char* bimem_status_name(bimem_status status);

/* Message for the most recent failure on this thread; never NULL. */
const char* bimem_last_error(void);

void bimem_free(char* str);

/* Build a bank from a conversation JSON file and write it to out_bank_path.
 * Options: {"backend": "mock"|"remote", "embedder": "hash-256"|"remote",
 *           "tau": 0.2, "seed": 0, "lpa_max_iters": 20,
 *           "conversation": "<id>"}  (id required when the file holds
 * several conversations). Warnings, if any, are returned through
 * out_warnings as one newline-joined string (may be NULL). */
bimem_status bimem_build(const char* conversation_path, const char* options_json,
                         const char* out_bank_path, char** out_warnings);

bimem_status bimem_bank_open(const char* bank_path, bimem_bank** out_bank);
void bimem_bank_close(bimem_bank* bank);

/* Structure stats as indented JSON.
 * Options: {"section": "summary"|"scenes"|"persona"|"graph"} */
bimem_status bimem_bank_inspect(const bimem_bank* bank, const char* options_json,
                                char** out_json);

/* Retrieve + answer for one question; result is indented JSON with the
 * retrieved set, the assembled context, and the answer.
 * Options: {"k": 30, "m": 3, "alpha": 0.5, "preset": "<category>",
 *           "strategy": "bimem", "backend": "mock", "budget": 2048} */
bimem_status bimem_bank_query(const bimem_bank* bank, const char* question,
                              const char* options_json, char** out_json);

/* Run QA evaluation. source_path may be a bank file (items evaluated against
 * it) or a conversation/QA dataset file (one bank is built per referenced
 * conversation). qa_path may be NULL when source_path already contains the
 * "qa" section. Writes the report JSON to report_path when non-NULL and
 * returns the aligned text table through out_table when non-NULL.
 * Options: build options plus {"strategy": "bimem", "k": 0, "m": -1,
 *          "alpha": -1, "budget": 2048} */
bimem_status bimem_eval(const char* source_path, const char* qa_path, const char* options_json,
                        const char* report_path, char** out_table);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BIMEM_H */

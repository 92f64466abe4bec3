/* C interface to the CCP temporal-consistency evaluation harness.
 *
 * All functions return 0 on success, CCP_ERR_CONFIG (1) on configuration
 * errors, CCP_ERR_ABORTED (2) when a run tripped the error-rate threshold,
 * and CCP_ERR_RUNTIME (3) for anything else. The last error message is
 * retained per context and readable via ccp_last_error().
 */
#ifndef CCP_C_H
#define CCP_C_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define CCP_OK 0
#define CCP_ERR_CONFIG 1
#define CCP_ERR_ABORTED 2
#define CCP_ERR_RUNTIME 3

typedef struct ccp_ctx ccp_ctx;

ccp_ctx* ccp_ctx_new(void);
void ccp_ctx_free(ccp_ctx* ctx);

/* Message of the most recent error on this context; empty string if none.
 * Owned by the context, valid until the next call on it. */
const char* ccp_last_error(const ccp_ctx* ctx);

/* Strings returned through out-parameters are heap-allocated; release them
 * with ccp_string_free. */
void ccp_string_free(char* s);

/* Load one official dataset file ("tempevalqa_bi" | "tracie" | "mctaco"),
 * write normalized JSONL to out_path and a stats JSON next to it. */
int ccp_ingest(ccp_ctx* ctx, const char* dataset, const char* in_path,
               const char* out_path);

/* Execute a run described by a JSON config file. On success *run_id_out
 * (if non-NULL) receives the run id. */
int ccp_run(ccp_ctx* ctx, const char* config_path, char** run_id_out);

/* Complete the missing instances of an interrupted run. config_path may be
 * NULL; when given, the config is re-validated against the stored
 * manifest. */
int ccp_resume(ccp_ctx* ctx, const char* results_dir, const char* run_id,
               const char* config_path);

/* Side-by-side ACC/F1/INC comparison of runs sharing a dataset. Either
 * out-parameter may be NULL. */
int ccp_compare(ccp_ctx* ctx, const char* results_dir,
                const char* const* run_ids, size_t n_run_ids,
                char** table_out, char** json_out);

/* Evict cache entries; model may be NULL (purge everything). *evicted_out
 * (if non-NULL) receives the number of removed entries. */
int ccp_cache_purge(ccp_ctx* ctx, const char* cache_dir, const char* model,
                    long long* evicted_out);

#ifdef __cplusplus
}
#endif

#endif /* CCP_C_H */

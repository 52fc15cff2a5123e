/* C interface to the knowledge-synthesis-graph library.
 *
 * Every function returns a ksg_status. On failure the message for the calling
 * thread is available from ksg_last_error() until the next call on that
 * thread. Strings returned through `char**` out-parameters are NUL-terminated,
 * owned by the caller and released with ksg_string_free(). JSON documents use
 * the same layouts as the files in a run directory.
 */
#ifndef KSG_KSG_H
#define KSG_KSG_H

#include <stddef.h>

#if defined(KSG_BUILDING_LIBRARY)
#define KSG_API __attribute__((visibility("default")))
#else
#define KSG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ksg_status {
  KSG_OK = 0,
  KSG_E_INVALID_ARGUMENT = 1,
  KSG_E_IO = 2,
  KSG_E_PARSE = 3,
  KSG_E_SCHEMA = 4,
  KSG_E_VALIDATION = 5,
  KSG_E_CONFIG = 6,
  KSG_E_STAGE2 = 7,
  KSG_E_REPLAY_MISS = 8,
  KSG_E_TRANSPORT = 9,
  KSG_E_TIMEOUT = 10,
  KSG_E_IMMUTABLE = 11,
  KSG_E_MISMATCH = 12,
  KSG_E_NOT_FOUND = 13,
  KSG_E_INTERNAL = 14
} ksg_status;

typedef struct ksg_corpus ksg_corpus;
typedef struct ksg_graph ksg_graph;

typedef enum ksg_export_format {
  KSG_EXPORT_JSON = 0,
  KSG_EXPORT_GRAPHML = 1,
  KSG_EXPORT_DOT = 2
} ksg_export_format;

KSG_API const char* ksg_version(void);
KSG_API const char* ksg_status_name(ksg_status status);
KSG_API const char* ksg_last_error(void);
KSG_API void ksg_string_free(char* str);

/* Corpus ingestion. `format` is "json" or "csv"; `mapping_path` may be NULL. */
KSG_API ksg_status ksg_corpus_load(const char* path, const char* format, const char* mapping_path,
                                   ksg_corpus** out);
KSG_API size_t ksg_corpus_size(const ksg_corpus* corpus);
KSG_API ksg_status ksg_corpus_to_json(const ksg_corpus* corpus, char** out_json);
KSG_API void ksg_corpus_free(ksg_corpus* corpus);

/* Pipeline commands. `config_json` is a pipeline configuration document with
 * paths already resolved; the result is a JSON summary. */
KSG_API ksg_status ksg_ingest_check(const char* config_json, const char* gold_path, char** out_json);
KSG_API ksg_status ksg_pipeline_run(const char* config_json, char** out_summary_json);
KSG_API ksg_status ksg_eval_run(const char* store_root, const char* run_id, const char* gold_path,
                                char** out_report_json);
KSG_API ksg_status ksg_consistency(const char* store_root, const char* const* run_ids, size_t run_count,
                                   char** out_report_json);
KSG_API ksg_status ksg_runs_list(const char* store_root, char** out_json);

/* Graphs. */
KSG_API ksg_status ksg_graph_load_run(const char* store_root, const char* run_id, ksg_graph** out);
KSG_API ksg_status ksg_graph_import_json(const char* data, size_t size, ksg_graph** out);
/* Number of violations through `out_count`; report JSON through `out_json`
 * when non-NULL. */
KSG_API ksg_status ksg_graph_validate(const ksg_graph* graph, size_t* out_count, char** out_json);
/* KSG_E_VALIDATION for an invalid graph; the violation report is then the
 * last error message. `out_size` may be NULL. */
KSG_API ksg_status ksg_graph_export(const ksg_graph* graph, ksg_export_format format, char** out_data,
                                    size_t* out_size);
/* `out_empty` is set to 1 when the graphs are structurally equal. */
KSG_API ksg_status ksg_graph_diff(const ksg_graph* from, const ksg_graph* to, char** out_json, int* out_empty);
KSG_API void ksg_graph_free(ksg_graph* graph);

#ifdef __cplusplus
}
#endif

#endif /* KSG_KSG_H */

#ifndef JUDGEBLENDER_H
#define JUDGEBLENDER_H

/* C interface of the judgeblender library.
 *
 * Every call returns a jb_status. On failure jb_last_error() holds a message
 * for the calling thread. Strings returned through char** are heap-allocated
 * and must be released with jb_string_free. Output pointers may be NULL when
 * the caller does not want that output. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(JB_BUILDING_LIBRARY)
#    define JB_API __declspec(dllexport)
#  else
#    define JB_API __declspec(dllimport)
#  endif
#else
#  define JB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum jb_status {
  JB_OK = 0,
  JB_ERR_USAGE = 1,    /* bad argument or configuration */
  JB_ERR_DATA = 2,     /* malformed or inconsistent input */
  JB_ERR_PROVIDER = 3, /* backend failure after retries */
  JB_ERR_IO = 4,
  JB_ERR_CACHE = 5,
  JB_ERR_INTERNAL = 6
} jb_status;

typedef struct jb_qrels jb_qrels;
typedef struct jb_runs jb_runs;
typedef struct jb_config jb_config;

JB_API const char* jb_version(void);
JB_API const char* jb_status_name(jb_status status);
/* Empty string when the last call on this thread succeeded. */
JB_API const char* jb_last_error(void);
JB_API void jb_string_free(char* s);

JB_API jb_status jb_qrels_load(const char* path, jb_qrels** out);
JB_API void jb_qrels_free(jb_qrels* qrels);
JB_API size_t jb_qrels_size(const jb_qrels* qrels);

/* Every file in `dir`, one run per file. */
JB_API jb_status jb_runs_load_dir(const char* dir, jb_runs** out);
JB_API void jb_runs_free(jb_runs* runs);
JB_API size_t jb_runs_count(const jb_runs* runs);

/* `seed_override` may be NULL. */
JB_API jb_status jb_config_load(const char* path, const uint64_t* seed_override,
                                jb_config** out);
JB_API void jb_config_free(jb_config* config);

/* Queries and passages paths may be NULL; counts then come from the qrels. */
JB_API jb_status jb_stats(const char* qrels_path, const char* queries_path,
                          const char* passages_path, char** json_out, char** text_out);

typedef void (*jb_progress_fn)(size_t done, size_t total, void* user);

typedef struct jb_judge_options {
  const char* pairs_qrels; /* the (query, doc) pairs to judge */
  const char* queries;
  const char* passages;
  int strict;       /* a provider failure aborts the batch */
  int gold_hint;    /* embed the labels of pairs_qrels for copy-gold mocks */
  int max_parallel; /* 0: per-endpoint setting */
  jb_progress_fn progress;
  void* progress_user;
} jb_judge_options;

JB_API void jb_judge_options_init(jb_judge_options* options);

/* One judge of the config over the pairs; writes judgment JSONL. */
JB_API jb_status jb_judge(const jb_config* config, const char* judge_id,
                          const jb_judge_options* options, const char* out_path,
                          char** summary_json);

/* Runs every panel judge, then aggregates. `policy` NULL: the config's.
 * Writes judgment files, qrels and the aggregation sidecar into out_dir. */
JB_API jb_status jb_blend_panel(const jb_config* config, const char* policy,
                                const jb_judge_options* options, const char* out_dir,
                                char** summary_json);

/* Aggregates existing judgment files. */
JB_API jb_status jb_blend_files(const char* const* judgment_paths, size_t n_paths,
                                const char* policy, uint64_t seed, const char* panel_id,
                                int strict, const char* out_dir, char** summary_json);

/* `alpha_level`: "nominal", "ordinal" or "interval"; NULL means ordinal. */
JB_API jb_status jb_agreement(const jb_qrels* gold, const jb_qrels* generated,
                              const char* alpha_level, char** json_out, char** text_out,
                              char** matrix_csv_out, char** binary_csv_out);

/* `metric`: "ndcg@10" or "map". `categories_path` may be NULL. */
JB_API jb_status jb_rank_eval(const jb_qrels* gold, const jb_qrels* generated,
                              const jb_runs* runs, const char* metric,
                              const char* categories_path, int strict, char** json_out,
                              char** scatter_csv_out);

/* `runs` may be NULL, leaving the correlation columns empty. */
JB_API jb_status jb_report(const char* name, const jb_qrels* gold, const jb_qrels* generated,
                           const jb_runs* runs, const char* alpha_level, int strict,
                           char** text_out, char** json_out);

/* `profile`: "fixed", "digest", "copy-gold" or "malformed". */
JB_API jb_status jb_mock_complete(uint64_t seed, const char* profile, int fixed_label,
                                  double malformed_probability, const char* prompt,
                                  char** text_out);

typedef struct jb_synth_options {
  size_t n_queries;
  size_t docs_per_query;
  size_t n_runs;
  uint64_t seed;
} jb_synth_options;

JB_API void jb_synth_options_init(jb_synth_options* options);
JB_API jb_status jb_synth(const jb_synth_options* options, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif

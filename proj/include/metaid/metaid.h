/* C interface to the metaid pipeline: identifier construction for users and
 * items from rating interactions (meta-path walks, skip-gram embeddings,
 * cosine k-means, hierarchical tokens), plus the metrics and artifacts the
 * surrounding tooling consumes.
 *
 * Conventions:
 *   - Every function returns a metaid_status; 0 is success.
 *   - Constructors hand back opaque handles through out-parameters; each
 *     handle type has a matching _free function. Freeing NULL is a no-op.
 *   - On failure, metaid_last_error() describes the problem for the calling
 *     thread.
 *   - Array/string getters take (buf, capacity, *needed). *needed is always
 *     written (string capacities count the terminating NUL); when capacity is
 *     too small the call fails with METAID_USAGE_ERROR and buf is untouched.
 */
#ifndef METAID_H
#define METAID_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum metaid_status {
  METAID_OK = 0,
  METAID_USAGE_ERROR = 1,  /* bad arguments or configuration */
  METAID_DATA_ERROR = 2,   /* unreadable, malformed, or degenerate data */
  METAID_INTERNAL_ERROR = 3
} metaid_status;

const char* metaid_version(void);
/* Message of the calling thread's most recent failure; empty if none. */
const char* metaid_last_error(void);

typedef struct metaid_records metaid_records;
typedef struct metaid_index metaid_index;
typedef struct metaid_splits metaid_splits;
typedef struct metaid_graph metaid_graph;
typedef struct metaid_walks metaid_walks;
typedef struct metaid_embeddings metaid_embeddings;
typedef struct metaid_clusters metaid_clusters;
typedef struct metaid_assignment metaid_assignment;
typedef struct metaid_oracle metaid_oracle;
typedef struct metaid_trie metaid_trie;
typedef struct metaid_config metaid_config;

/* ---- interaction records ---------------------------------------------- */

/* Column layout for delimited input; indices are 0-based, -1 means absent.
 * jsonl != 0 switches to one JSON object per line (keys user, item, rating,
 * timestamp, optional review/summary/explanation/feature). */
typedef struct metaid_parse_format {
  char delimiter;
  int32_t col_user;
  int32_t col_item;
  int32_t col_rating;
  int32_t col_timestamp;
  int32_t col_review;
  int32_t col_summary;
  int32_t col_explanation;
  int32_t col_feature;
  int32_t jsonl;
} metaid_parse_format;

/* TAB-separated user, item, rating, timestamp; no text columns. */
void metaid_parse_format_init(metaid_parse_format* format);

metaid_status metaid_records_parse_file(const char* path, const metaid_parse_format* format,
                                        metaid_records** out);
/* Block-diagonal synthetic ratings; see the CLI `synth` subcommand. */
metaid_status metaid_records_synthetic(uint32_t blocks, uint32_t users_per_block,
                                       uint32_t items_per_block, double cross_block_noise,
                                       uint64_t seed, metaid_records** out);
metaid_status metaid_records_count(const metaid_records* records, uint64_t* count);
metaid_status metaid_records_write_tsv(const metaid_records* records, const char* path);
void metaid_records_free(metaid_records* records);

/* ---- dataset index ----------------------------------------------------- */

metaid_status metaid_index_build(const metaid_records* records, metaid_index** out);
metaid_status metaid_index_load(const char* path, metaid_index** out);
metaid_status metaid_index_save(const metaid_index* index, const char* path);
metaid_status metaid_index_counts(const metaid_index* index, uint64_t* users, uint64_t* items,
                                  uint64_t* reviews);
/* 100 * reviews / (users * items). */
metaid_status metaid_index_sparsity(const metaid_index* index, double* sparsity_percent);
void metaid_index_free(metaid_index* index);

/* ---- train/validation/test splits -------------------------------------- */

/* Last interaction per user to test, second-to-last to validation; users with
 * fewer than 3 interactions are dropped and counted. */
metaid_status metaid_splits_leave_one_out(const metaid_index* index, metaid_splits** out,
                                          uint32_t* dropped_users);
/* Seeded 80/10/10 shuffle split; every user and item keeps at least one
 * training instance. */
metaid_status metaid_splits_random(const metaid_index* index, uint64_t seed,
                                   metaid_splits** out);
metaid_status metaid_splits_sizes(const metaid_splits* splits, uint64_t* train,
                                  uint64_t* validation, uint64_t* test);
void metaid_splits_free(metaid_splits* splits);

/* ---- rating-partitioned graph ------------------------------------------ */

metaid_status metaid_graph_build(const metaid_index* index, metaid_graph** out);
metaid_status metaid_graph_edge_count(const metaid_graph* graph, int rating, uint64_t* count);
/* Sorted neighbor indices of a user (is_item = 0) or item (is_item = 1) at
 * the given rating. */
metaid_status metaid_graph_neighbors(const metaid_graph* graph, int is_item, uint32_t node,
                                     int rating, uint32_t* buf, uint64_t capacity,
                                     uint64_t* needed);
void metaid_graph_free(metaid_graph* graph);

/* ---- meta-path walk corpus --------------------------------------------- */

metaid_status metaid_walks_sample(const metaid_graph* graph, uint32_t walk_length,
                                  uint32_t rounds_per_node, uint64_t seed, uint32_t workers,
                                  metaid_walks** out);
metaid_status metaid_walks_count(const metaid_walks* walks, uint64_t* count);
metaid_status metaid_walks_save(const metaid_walks* walks, const char* path);
void metaid_walks_free(metaid_walks* walks);

/* ---- skip-gram embeddings ---------------------------------------------- */

typedef struct metaid_embed_config {
  uint32_t dim;
  uint32_t window;
  uint32_t negatives;
  double learning_rate;
  uint32_t epochs;
  uint64_t seed;
  int32_t deterministic; /* 0 permits racy multi-worker updates */
  uint32_t workers;
} metaid_embed_config;

/* dim 64, window 5, negatives 5, learning rate 1e-3, 10 epochs,
 * deterministic single worker. */
void metaid_embed_config_init(metaid_embed_config* config);

/* Trains on the walk corpus. epoch_loss_buf (when non-NULL, capacity >=
 * epochs) receives the per-epoch mean loss. */
metaid_status metaid_embed_train(const metaid_walks* walks, const metaid_embed_config* config,
                                 metaid_embeddings** out, double* epoch_loss_buf,
                                 uint64_t capacity, uint64_t* epochs_out);
metaid_status metaid_embeddings_shape(const metaid_embeddings* embeddings, uint64_t* users,
                                      uint64_t* items, uint32_t* dim);
/* Row r of the input matrix; users occupy rows [0, m), items [m, m+n). */
metaid_status metaid_embeddings_row(const metaid_embeddings* embeddings, uint64_t row,
                                    double* buf, uint64_t capacity, uint64_t* needed);
metaid_status metaid_embeddings_save(const metaid_embeddings* embeddings, const char* path);
metaid_status metaid_embeddings_load(const char* path, metaid_embeddings** out);
void metaid_embeddings_free(metaid_embeddings* embeddings);

/* ---- cosine k-means ----------------------------------------------------- */

/* Fits over the joint user+item rows and computes within-cluster ranks. */
metaid_status metaid_clusters_fit(const metaid_embeddings* embeddings, uint32_t groups,
                                  uint32_t max_iters, double tol, uint64_t seed,
                                  uint32_t workers, metaid_clusters** out);
metaid_status metaid_clusters_info(const metaid_clusters* clusters, uint32_t* groups,
                                   uint32_t* iterations, int* converged);
metaid_status metaid_clusters_assignment(const metaid_clusters* clusters, uint32_t* buf,
                                         uint64_t capacity, uint64_t* needed);
metaid_status metaid_clusters_fine_ranks(const metaid_clusters* clusters, uint32_t* buf,
                                         uint64_t capacity, uint64_t* needed);
/* Raw-mean centroid of one group. */
metaid_status metaid_clusters_centroid(const metaid_clusters* clusters, uint32_t group,
                                       double* buf, uint64_t capacity, uint64_t* needed);
metaid_status metaid_clusters_save(const metaid_clusters* clusters, const char* path);
metaid_status metaid_clusters_load(const char* path, metaid_clusters** out);
void metaid_clusters_free(metaid_clusters* clusters);

/* ---- identifier assignment --------------------------------------------- */

/* Hierarchical 3-token IDs from the cluster model, with the OOV vocabulary
 * and the alpha-scaled initialization matrix. */
metaid_status metaid_assign_meta(const metaid_clusters* clusters, const metaid_index* index,
                                 double alpha, uint64_t seed, metaid_assignment** out);
/* Random-integer IDs in digit-pair tokens; dim/alpha shape the token table
 * used for metric representations. */
metaid_status metaid_assign_rid(const metaid_index* index, uint64_t seed, uint32_t dim,
                                double alpha, metaid_assignment** out);
/* Sequential IDs: users 1..m, items numbered by first interaction. */
metaid_status metaid_assign_sid(const metaid_index* index, uint64_t seed, uint32_t dim,
                                double alpha, metaid_assignment** out);
/* Space-joined token sequence of one entity. */
metaid_status metaid_assignment_tokens(const metaid_assignment* assignment, int is_user,
                                       uint32_t index, char* buf, uint64_t capacity,
                                       uint64_t* needed);
/* found = 0 with METAID_OK when the sequence maps to no entity. */
metaid_status metaid_assignment_decode(const metaid_assignment* assignment,
                                       const char* space_joined_tokens, int* found,
                                       int* is_user, uint32_t* index);
metaid_status metaid_assignment_vocab_size(const metaid_assignment* assignment,
                                           uint64_t* count);
metaid_status metaid_assignment_save_vocab(const metaid_assignment* assignment,
                                           const char* path);
metaid_status metaid_assignment_save_f_init(const metaid_assignment* assignment,
                                            const char* path);
metaid_status metaid_assignment_save_id_map(const metaid_assignment* assignment,
                                            const metaid_index* index, const char* path);
/* Rebuilds an assignment from artifacts. vocab_path/f_init_path may be NULL
 * when metric representations are not needed. */
metaid_status metaid_assignment_load(const metaid_index* index, const char* id_map_path,
                                     const char* vocab_path, const char* f_init_path,
                                     metaid_assignment** out);
void metaid_assignment_free(metaid_assignment* assignment);

/* ---- rating-deviation oracle and metrics -------------------------------- */

metaid_status metaid_oracle_build(const metaid_index* index, metaid_oracle** out);
metaid_status metaid_oracle_user_mean(const metaid_oracle* oracle, uint32_t user,
                                      double* mean);
/* Deviation sum and squared sum over every rating of the item. */
metaid_status metaid_oracle_item_devs(const metaid_oracle* oracle, uint32_t item, double* dev,
                                      double* dev_sq);
/* Adjusted cosine similarity; exact != 0 selects the common-rater formula.
 * defined = 0 with METAID_OK when the similarity is undefined. */
metaid_status metaid_oracle_similarity(const metaid_oracle* oracle, uint32_t i, uint32_t j,
                                       int exact, int* defined, double* value);
void metaid_oracle_free(metaid_oracle* oracle);

/* Diversity and memorization scores of the assignment's item representations
 * (token-table means). */
metaid_status metaid_metrics_compute(const metaid_assignment* assignment,
                                     const metaid_oracle* oracle, uint64_t pair_samples,
                                     uint64_t item_samples, double softmax_temperature,
                                     int exact, uint64_t seed, double* ds, double* ms,
                                     uint64_t* ms_pairs_used, uint64_t* ms_pairs_skipped);
/* Per sample count: mean and sample std of DS across `trials` reruns. means
 * and stds must hold count entries. */
metaid_status metaid_metrics_ds_convergence(const metaid_assignment* assignment,
                                            const uint64_t* pair_sample_counts, uint64_t count,
                                            uint32_t trials, double softmax_temperature,
                                            uint64_t seed, double* means, double* stds);

/* ---- instruction corpus and decoding trie ------------------------------- */

/* Emits JSON-lines examples for the comma-separated tasks (sequential,
 * direct, rating, explanation, review). templates_path NULL uses the built-in
 * templates. per_task_counts (when non-NULL) must hold 5 entries and receives
 * counts in the canonical task order above, zeros for unselected tasks. */
metaid_status metaid_prompts_emit(const metaid_index* index, const metaid_splits* splits,
                                  const metaid_assignment* assignment, const char* tasks_csv,
                                  const char* templates_path, const char* out_path,
                                  uint64_t* per_task_counts);

metaid_status metaid_trie_build(const metaid_assignment* assignment, metaid_trie** out);
metaid_status metaid_trie_save(const metaid_trie* trie, const metaid_index* index,
                               const char* path);
metaid_status metaid_trie_load(const char* path, metaid_trie** out);
metaid_status metaid_trie_path_count(const metaid_trie* trie, uint64_t* count);
/* Space-joined tokens that extend the space-joined prefix ("" for the root);
 * an empty result string means no valid continuation. */
metaid_status metaid_trie_continuations(const metaid_trie* trie, const char* prefix,
                                        char* buf, uint64_t capacity, uint64_t* needed);
void metaid_trie_free(metaid_trie* trie);

/* ---- configuration and pipeline ----------------------------------------- */

metaid_status metaid_config_create(metaid_config** out);
/* INI-style file of [section] / key = value lines. */
metaid_status metaid_config_load_file(metaid_config* config, const char* path);
/* Sets one "section.key" entry, overriding file values. */
metaid_status metaid_config_set(metaid_config* config, const char* key, const char* value);
/* Working directory after full resolution, for locating artifacts. */
metaid_status metaid_config_workdir(const metaid_config* config, char* buf, uint64_t capacity,
                                    uint64_t* needed);
void metaid_config_free(metaid_config* config);

/* Runs the staged pipeline into the configured workdir, through stage `upto`
 * (NULL or "" for all stages: ingest, graph, walk, embed, cluster, idgen,
 * metrics, promptgen). Stages whose inputs and settings are unchanged are
 * skipped unless force != 0. */
metaid_status metaid_pipeline_run(const metaid_config* config, const char* upto, int force);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* METAID_H */

// C ABI shims over the core library. Every entry point funnels through
// guarded(), which maps the exception taxonomy onto status codes and records
// the message for metaid_last_error(). Handles are heap-allocated wrappers
// with a per-type magic tag so stale or mismatched pointers fail loudly
// instead of corrupting memory.

#include "metaid/metaid.h"

#include <cstring>
#include <exception>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "binio.hpp"
#include "cluster.hpp"
#include "configfile.hpp"
#include "embed.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "idgen.hpp"
#include "ingest.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "promptgen.hpp"
#include "walker.hpp"

namespace {

thread_local std::string g_last_error;

template <class Fn>
metaid_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return METAID_OK;
  } catch (const metaid::UsageError& e) {
    g_last_error = e.what();
    return METAID_USAGE_ERROR;
  } catch (const metaid::DataError& e) {
    g_last_error = e.what();
    return METAID_DATA_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return METAID_INTERNAL_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return METAID_INTERNAL_ERROR;
  }
}

constexpr uint32_t kRecordsMagic = 0x4d494431;
constexpr uint32_t kIndexMagic = 0x4d494432;
constexpr uint32_t kSplitsMagic = 0x4d494433;
constexpr uint32_t kGraphMagic = 0x4d494434;
constexpr uint32_t kWalksMagic = 0x4d494435;
constexpr uint32_t kEmbeddingsMagic = 0x4d494436;
constexpr uint32_t kClustersMagic = 0x4d494437;
constexpr uint32_t kAssignmentMagic = 0x4d494438;
constexpr uint32_t kOracleMagic = 0x4d494439;
constexpr uint32_t kTrieMagic = 0x4d49443a;
constexpr uint32_t kConfigMagic = 0x4d49443b;

template <class H>
H& deref(H* handle, uint32_t magic, const char* what) {
  if (handle == nullptr || handle->magic != magic)
    throw metaid::UsageError(std::string("invalid ") + what + " handle");
  return *handle;
}

template <class H>
const H& deref(const H* handle, uint32_t magic, const char* what) {
  return deref(const_cast<H*>(handle), magic, what);
}

template <class T>
T& out_param(T* p, const char* what) {
  if (p == nullptr) throw metaid::UsageError(std::string("null ") + what + " pointer");
  return *p;
}

// Fills *needed first so a too-small call still reports the required size.
template <class T>
void copy_array(const T* src, uint64_t count, T* buf, uint64_t capacity, uint64_t* needed) {
  out_param(needed, "needed") = count;
  if (count == 0) return;
  if (buf == nullptr || capacity < count) throw metaid::UsageError("buffer too small");
  std::memcpy(buf, src, count * sizeof(T));
}

// String variant; *needed counts the terminating NUL.
void copy_string(const std::string& s, char* buf, uint64_t capacity, uint64_t* needed) {
  out_param(needed, "needed") = s.size() + 1;
  if (buf == nullptr || capacity < s.size() + 1) throw metaid::UsageError("buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

std::string require_path(const char* path, const char* what) {
  if (path == nullptr || *path == '\0')
    throw metaid::UsageError(std::string("empty ") + what + " path");
  return path;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t space = text.find(' ', pos);
    if (space == std::string::npos) space = text.size();
    if (space > pos) tokens.push_back(text.substr(pos, space - pos));
    pos = space + 1;
  }
  return tokens;
}

template <class H, class... Args>
void emplace_handle(H** out, Args&&... args) {
  out_param(out, "out") = new H{std::forward<Args>(args)...};
}

template <class H>
void release_handle(H* handle) {
  if (handle == nullptr) return;
  handle->magic = 0;
  delete handle;
}

int require_rating(int rating) {
  if (rating < 1 || rating > 5) throw metaid::UsageError("rating outside 1..5");
  return rating;
}

}  // namespace

struct metaid_records {
  uint32_t magic = kRecordsMagic;
  std::vector<metaid::InteractionRecord> records;
};

struct metaid_index {
  uint32_t magic = kIndexMagic;
  metaid::DatasetIndex index;
};

struct metaid_splits {
  uint32_t magic = kSplitsMagic;
  metaid::DatasetSplits splits;
};

struct metaid_graph {
  uint32_t magic = kGraphMagic;
  metaid::InteractionGraph graph;
};

struct metaid_walks {
  uint32_t magic = kWalksMagic;
  metaid::WalkCorpus corpus;
};

struct metaid_embeddings {
  uint32_t magic = kEmbeddingsMagic;
  metaid::EmbeddingTable table;
};

struct metaid_clusters {
  uint32_t magic = kClustersMagic;
  metaid::ClusterModel model;
};

struct metaid_assignment {
  uint32_t magic = kAssignmentMagic;
  metaid::IdAssignment assignment;
  metaid::Vocabulary vocab;
  bool has_vocab = false;
};

struct metaid_oracle {
  uint32_t magic = kOracleMagic;
  metaid::SimilarityOracle oracle;
};

struct metaid_trie {
  uint32_t magic = kTrieMagic;
  metaid::IdTrie trie;
};

struct metaid_config {
  uint32_t magic = kConfigMagic;
  metaid::ConfigMap map;
};

extern "C" {

const char* metaid_version(void) { return "1.0.0"; }

const char* metaid_last_error(void) { return g_last_error.c_str(); }

/* ---- interaction records ---------------------------------------------- */

void metaid_parse_format_init(metaid_parse_format* format) {
  if (format == nullptr) return;
  metaid::ParseFormat defaults;
  format->delimiter = defaults.delimiter;
  format->col_user = defaults.col_user;
  format->col_item = defaults.col_item;
  format->col_rating = defaults.col_rating;
  format->col_timestamp = defaults.col_timestamp;
  format->col_review = defaults.col_review;
  format->col_summary = defaults.col_summary;
  format->col_explanation = defaults.col_explanation;
  format->col_feature = defaults.col_feature;
  format->jsonl = defaults.jsonl ? 1 : 0;
}

metaid_status metaid_records_parse_file(const char* path, const metaid_parse_format* format,
                                        metaid_records** out) {
  return guarded([&] {
    metaid::ParseFormat fmt;
    if (format != nullptr) {
      fmt.delimiter = format->delimiter;
      fmt.col_user = format->col_user;
      fmt.col_item = format->col_item;
      fmt.col_rating = format->col_rating;
      fmt.col_timestamp = format->col_timestamp;
      fmt.col_review = format->col_review;
      fmt.col_summary = format->col_summary;
      fmt.col_explanation = format->col_explanation;
      fmt.col_feature = format->col_feature;
      fmt.jsonl = format->jsonl != 0;
    }
    auto records = metaid::parse_interactions_file(require_path(path, "input"), fmt);
    emplace_handle(out, kRecordsMagic, std::move(records));
  });
}

metaid_status metaid_records_synthetic(uint32_t blocks, uint32_t users_per_block,
                                       uint32_t items_per_block, double cross_block_noise,
                                       uint64_t seed, metaid_records** out) {
  return guarded([&] {
    auto records = metaid::generate_synthetic(blocks, users_per_block, items_per_block,
                                              cross_block_noise, seed);
    emplace_handle(out, kRecordsMagic, std::move(records));
  });
}

metaid_status metaid_records_count(const metaid_records* records, uint64_t* count) {
  return guarded([&] {
    out_param(count, "count") = deref(records, kRecordsMagic, "records").records.size();
  });
}

metaid_status metaid_records_write_tsv(const metaid_records* records, const char* path) {
  return guarded([&] {
    metaid::write_records_tsv(deref(records, kRecordsMagic, "records").records,
                              require_path(path, "output"));
  });
}

void metaid_records_free(metaid_records* records) { release_handle(records); }

/* ---- dataset index ----------------------------------------------------- */

metaid_status metaid_index_build(const metaid_records* records, metaid_index** out) {
  return guarded([&] {
    emplace_handle(out, kIndexMagic,
                   metaid::build_index(deref(records, kRecordsMagic, "records").records));
  });
}

metaid_status metaid_index_load(const char* path, metaid_index** out) {
  return guarded([&] {
    emplace_handle(out, kIndexMagic, metaid::load_index_json(require_path(path, "index")));
  });
}

metaid_status metaid_index_save(const metaid_index* index, const char* path) {
  return guarded([&] {
    metaid::save_index_json(deref(index, kIndexMagic, "index").index,
                            require_path(path, "output"));
  });
}

metaid_status metaid_index_counts(const metaid_index* index, uint64_t* users, uint64_t* items,
                                  uint64_t* reviews) {
  return guarded([&] {
    const auto& idx = deref(index, kIndexMagic, "index").index;
    if (users != nullptr) *users = idx.user_count();
    if (items != nullptr) *items = idx.item_count();
    if (reviews != nullptr) *reviews = idx.interactions.size();
  });
}

metaid_status metaid_index_sparsity(const metaid_index* index, double* sparsity_percent) {
  return guarded([&] {
    const auto& idx = deref(index, kIndexMagic, "index").index;
    out_param(sparsity_percent, "sparsity") = metaid::compute_stats(idx).sparsity_percent;
  });
}

void metaid_index_free(metaid_index* index) { release_handle(index); }

/* ---- train/validation/test splits -------------------------------------- */

metaid_status metaid_splits_leave_one_out(const metaid_index* index, metaid_splits** out,
                                          uint32_t* dropped_users) {
  return guarded([&] {
    auto splits = metaid::split_leave_one_out(deref(index, kIndexMagic, "index").index);
    if (dropped_users != nullptr) *dropped_users = splits.dropped_users;
    emplace_handle(out, kSplitsMagic, std::move(splits));
  });
}

metaid_status metaid_splits_random(const metaid_index* index, uint64_t seed,
                                   metaid_splits** out) {
  return guarded([&] {
    emplace_handle(out, kSplitsMagic,
                   metaid::split_random(deref(index, kIndexMagic, "index").index, seed));
  });
}

metaid_status metaid_splits_sizes(const metaid_splits* splits, uint64_t* train,
                                  uint64_t* validation, uint64_t* test) {
  return guarded([&] {
    const auto& s = deref(splits, kSplitsMagic, "splits").splits;
    if (train != nullptr) *train = s.train.size();
    if (validation != nullptr) *validation = s.validation.size();
    if (test != nullptr) *test = s.test.size();
  });
}

void metaid_splits_free(metaid_splits* splits) { release_handle(splits); }

/* ---- rating-partitioned graph ------------------------------------------ */

metaid_status metaid_graph_build(const metaid_index* index, metaid_graph** out) {
  return guarded([&] {
    emplace_handle(out, kGraphMagic,
                   metaid::build_graph(deref(index, kIndexMagic, "index").index));
  });
}

metaid_status metaid_graph_edge_count(const metaid_graph* graph, int rating, uint64_t* count) {
  return guarded([&] {
    const auto& g = deref(graph, kGraphMagic, "graph").graph;
    out_param(count, "count") = g.edge_count[require_rating(rating) - 1];
  });
}

metaid_status metaid_graph_neighbors(const metaid_graph* graph, int is_item, uint32_t node,
                                     int rating, uint32_t* buf, uint64_t capacity,
                                     uint64_t* needed) {
  return guarded([&] {
    const auto& g = deref(graph, kGraphMagic, "graph").graph;
    const auto& nbrs = metaid::rating_neighbors(g, is_item != 0, node, rating);
    copy_array(nbrs.data(), nbrs.size(), buf, capacity, needed);
  });
}

void metaid_graph_free(metaid_graph* graph) { release_handle(graph); }

/* ---- meta-path walk corpus --------------------------------------------- */

metaid_status metaid_walks_sample(const metaid_graph* graph, uint32_t walk_length,
                                  uint32_t rounds_per_node, uint64_t seed, uint32_t workers,
                                  metaid_walks** out) {
  return guarded([&] {
    metaid::WalkConfig cfg;
    cfg.walk_length = walk_length;
    cfg.rounds_per_node = rounds_per_node;
    cfg.seed = seed;
    cfg.workers = workers;
    emplace_handle(out, kWalksMagic,
                   metaid::sample_walks(deref(graph, kGraphMagic, "graph").graph, cfg));
  });
}

metaid_status metaid_walks_count(const metaid_walks* walks, uint64_t* count) {
  return guarded([&] {
    out_param(count, "count") = deref(walks, kWalksMagic, "walks").corpus.walks.size();
  });
}

metaid_status metaid_walks_save(const metaid_walks* walks, const char* path) {
  return guarded([&] {
    metaid::save_walks_text(deref(walks, kWalksMagic, "walks").corpus,
                            require_path(path, "output"));
  });
}

void metaid_walks_free(metaid_walks* walks) { release_handle(walks); }

/* ---- skip-gram embeddings ---------------------------------------------- */

void metaid_embed_config_init(metaid_embed_config* config) {
  if (config == nullptr) return;
  metaid::SgConfig defaults;
  config->dim = defaults.dim;
  config->window = defaults.window;
  config->negatives = defaults.negatives;
  config->learning_rate = defaults.learning_rate;
  config->epochs = defaults.epochs;
  config->seed = defaults.seed;
  config->deterministic = defaults.deterministic ? 1 : 0;
  config->workers = defaults.workers;
}

metaid_status metaid_embed_train(const metaid_walks* walks, const metaid_embed_config* config,
                                 metaid_embeddings** out, double* epoch_loss_buf,
                                 uint64_t capacity, uint64_t* epochs_out) {
  return guarded([&] {
    const auto& corpus = deref(walks, kWalksMagic, "walks").corpus;
    metaid::SgConfig cfg;
    if (config != nullptr) {
      cfg.dim = config->dim;
      cfg.window = config->window;
      cfg.negatives = config->negatives;
      cfg.learning_rate = config->learning_rate;
      cfg.epochs = config->epochs;
      cfg.seed = config->seed;
      cfg.deterministic = config->deterministic != 0;
      cfg.workers = config->workers;
    }
    auto result = metaid::train_skipgram(corpus, cfg);
    if (epochs_out != nullptr) *epochs_out = result.epoch_mean_loss.size();
    if (epoch_loss_buf != nullptr) {
      if (capacity < result.epoch_mean_loss.size())
        throw metaid::UsageError("loss buffer too small");
      std::memcpy(epoch_loss_buf, result.epoch_mean_loss.data(),
                  result.epoch_mean_loss.size() * sizeof(double));
    }
    emplace_handle(out, kEmbeddingsMagic, std::move(result.table));
  });
}

metaid_status metaid_embeddings_shape(const metaid_embeddings* embeddings, uint64_t* users,
                                      uint64_t* items, uint32_t* dim) {
  return guarded([&] {
    const auto& table = deref(embeddings, kEmbeddingsMagic, "embeddings").table;
    if (users != nullptr) *users = table.user_count;
    if (items != nullptr) *items = table.item_count;
    if (dim != nullptr) *dim = table.input.dim;
  });
}

metaid_status metaid_embeddings_row(const metaid_embeddings* embeddings, uint64_t row,
                                    double* buf, uint64_t capacity, uint64_t* needed) {
  return guarded([&] {
    const auto& table = deref(embeddings, kEmbeddingsMagic, "embeddings").table;
    if (row >= table.input.rows) throw metaid::UsageError("row outside the embedding table");
    auto values = table.input.row(row);
    copy_array(values.data(), values.size(), buf, capacity, needed);
  });
}

metaid_status metaid_embeddings_save(const metaid_embeddings* embeddings, const char* path) {
  return guarded([&] {
    const auto& table = deref(embeddings, kEmbeddingsMagic, "embeddings").table;
    metaid::write_embedding_file(require_path(path, "output"), table.user_count,
                                 table.item_count, table.input);
  });
}

metaid_status metaid_embeddings_load(const char* path, metaid_embeddings** out) {
  return guarded([&] {
    auto file = metaid::read_embedding_file(require_path(path, "embeddings"));
    metaid::EmbeddingTable table;
    table.user_count = static_cast<uint32_t>(file.count_a);
    table.item_count = static_cast<uint32_t>(file.count_b);
    table.input = std::move(file.values);
    emplace_handle(out, kEmbeddingsMagic, std::move(table));
  });
}

void metaid_embeddings_free(metaid_embeddings* embeddings) { release_handle(embeddings); }

/* ---- cosine k-means ----------------------------------------------------- */

metaid_status metaid_clusters_fit(const metaid_embeddings* embeddings, uint32_t groups,
                                  uint32_t max_iters, double tol, uint64_t seed,
                                  uint32_t workers, metaid_clusters** out) {
  return guarded([&] {
    const auto& table = deref(embeddings, kEmbeddingsMagic, "embeddings").table;
    metaid::ClusterConfig cfg;
    cfg.groups = groups;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    cfg.seed = seed;
    cfg.workers = workers;
    auto model = metaid::kmeans_cosine(table.input, cfg);
    metaid::rank_within_cluster(model, table.input);
    emplace_handle(out, kClustersMagic, std::move(model));
  });
}

metaid_status metaid_clusters_info(const metaid_clusters* clusters, uint32_t* groups,
                                   uint32_t* iterations, int* converged) {
  return guarded([&] {
    const auto& model = deref(clusters, kClustersMagic, "clusters").model;
    if (groups != nullptr) *groups = model.groups;
    if (iterations != nullptr) *iterations = model.iterations;
    if (converged != nullptr) *converged = model.converged ? 1 : 0;
  });
}

metaid_status metaid_clusters_assignment(const metaid_clusters* clusters, uint32_t* buf,
                                         uint64_t capacity, uint64_t* needed) {
  return guarded([&] {
    const auto& model = deref(clusters, kClustersMagic, "clusters").model;
    copy_array(model.assignment.data(), model.assignment.size(), buf, capacity, needed);
  });
}

metaid_status metaid_clusters_fine_ranks(const metaid_clusters* clusters, uint32_t* buf,
                                         uint64_t capacity, uint64_t* needed) {
  return guarded([&] {
    const auto& model = deref(clusters, kClustersMagic, "clusters").model;
    copy_array(model.fine_rank.data(), model.fine_rank.size(), buf, capacity, needed);
  });
}

metaid_status metaid_clusters_centroid(const metaid_clusters* clusters, uint32_t group,
                                       double* buf, uint64_t capacity, uint64_t* needed) {
  return guarded([&] {
    const auto& model = deref(clusters, kClustersMagic, "clusters").model;
    if (group >= model.groups) throw metaid::UsageError("group outside the cluster model");
    auto row = model.centroids.row(group);
    copy_array(row.data(), row.size(), buf, capacity, needed);
  });
}

metaid_status metaid_clusters_save(const metaid_clusters* clusters, const char* path) {
  return guarded([&] {
    metaid::save_clusters_json(deref(clusters, kClustersMagic, "clusters").model,
                               require_path(path, "output"));
  });
}

metaid_status metaid_clusters_load(const char* path, metaid_clusters** out) {
  return guarded([&] {
    emplace_handle(out, kClustersMagic,
                   metaid::load_clusters_json(require_path(path, "clusters")));
  });
}

void metaid_clusters_free(metaid_clusters* clusters) { release_handle(clusters); }

/* ---- identifier assignment --------------------------------------------- */

metaid_status metaid_assign_meta(const metaid_clusters* clusters, const metaid_index* index,
                                 double alpha, uint64_t seed, metaid_assignment** out) {
  return guarded([&] {
    const auto& model = deref(clusters, kClustersMagic, "clusters").model;
    const auto& idx = deref(index, kIndexMagic, "index").index;
    auto [assignment, vocab] =
        metaid::assign_meta_ids(model, idx.user_count(), idx.item_count());
    metaid::build_f_init(model, vocab, alpha, seed);
    emplace_handle(out, kAssignmentMagic, std::move(assignment), std::move(vocab), true);
  });
}

metaid_status metaid_assign_rid(const metaid_index* index, uint64_t seed, uint32_t dim,
                                double alpha, metaid_assignment** out) {
  return guarded([&] {
    const auto& idx = deref(index, kIndexMagic, "index").index;
    auto assignment = metaid::assign_rid(idx.user_count(), idx.item_count(), seed);
    auto vocab = metaid::baseline_vocabulary(assignment, dim, alpha, seed);
    emplace_handle(out, kAssignmentMagic, std::move(assignment), std::move(vocab), true);
  });
}

metaid_status metaid_assign_sid(const metaid_index* index, uint64_t seed, uint32_t dim,
                                double alpha, metaid_assignment** out) {
  return guarded([&] {
    const auto& idx = deref(index, kIndexMagic, "index").index;
    auto assignment = metaid::assign_sid(idx);
    auto vocab = metaid::baseline_vocabulary(assignment, dim, alpha, seed);
    emplace_handle(out, kAssignmentMagic, std::move(assignment), std::move(vocab), true);
  });
}

metaid_status metaid_assignment_tokens(const metaid_assignment* assignment, int is_user,
                                       uint32_t index, char* buf, uint64_t capacity,
                                       uint64_t* needed) {
  return guarded([&] {
    const auto& a = deref(assignment, kAssignmentMagic, "assignment").assignment;
    const auto& ids = is_user != 0 ? a.user_ids : a.item_ids;
    if (index >= ids.size()) throw metaid::UsageError("entity index outside the assignment");
    copy_string(a.surface_of(is_user != 0, index), buf, capacity, needed);
  });
}

metaid_status metaid_assignment_decode(const metaid_assignment* assignment,
                                       const char* space_joined_tokens, int* found,
                                       int* is_user, uint32_t* index) {
  return guarded([&] {
    const auto& a = deref(assignment, kAssignmentMagic, "assignment").assignment;
    if (space_joined_tokens == nullptr) throw metaid::UsageError("null token string");
    auto ref = metaid::decode_id(a, split_tokens(space_joined_tokens));
    out_param(found, "found") = ref.has_value() ? 1 : 0;
    if (ref.has_value()) {
      if (is_user != nullptr) *is_user = ref->is_user ? 1 : 0;
      if (index != nullptr) *index = ref->index;
    }
  });
}

metaid_status metaid_assignment_vocab_size(const metaid_assignment* assignment,
                                           uint64_t* count) {
  return guarded([&] {
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    if (!h.has_vocab) throw metaid::UsageError("assignment carries no vocabulary");
    out_param(count, "count") = h.vocab.tokens.size();
  });
}

metaid_status metaid_assignment_save_vocab(const metaid_assignment* assignment,
                                           const char* path) {
  return guarded([&] {
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    if (!h.has_vocab) throw metaid::UsageError("assignment carries no vocabulary");
    metaid::save_vocab_tsv(h.vocab, require_path(path, "output"));
  });
}

metaid_status metaid_assignment_save_f_init(const metaid_assignment* assignment,
                                            const char* path) {
  return guarded([&] {
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    if (!h.has_vocab || h.vocab.f_init.rows != h.vocab.tokens.size())
      throw metaid::UsageError("assignment carries no token vectors");
    metaid::write_embedding_file(require_path(path, "output"), h.vocab.f_init.rows, 0,
                                 h.vocab.f_init);
  });
}

metaid_status metaid_assignment_save_id_map(const metaid_assignment* assignment,
                                            const metaid_index* index, const char* path) {
  return guarded([&] {
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    const auto& idx = deref(index, kIndexMagic, "index").index;
    metaid::save_id_map_json(h.assignment, idx, require_path(path, "output"));
  });
}

metaid_status metaid_assignment_load(const metaid_index* index, const char* id_map_path,
                                     const char* vocab_path, const char* f_init_path,
                                     metaid_assignment** out) {
  return guarded([&] {
    const auto& idx = deref(index, kIndexMagic, "index").index;
    if (f_init_path != nullptr && vocab_path == nullptr)
      throw metaid::UsageError("token vectors require the vocabulary");
    auto assignment = metaid::load_id_map_json(idx, require_path(id_map_path, "id map"));
    metaid::Vocabulary vocab;
    bool has_vocab = vocab_path != nullptr;
    if (has_vocab) {
      vocab = metaid::load_vocab_tsv(vocab_path);
      if (f_init_path != nullptr) {
        auto file = metaid::read_embedding_file(f_init_path);
        if (file.values.rows != vocab.tokens.size())
          throw metaid::DataError("token vector rows do not match the vocabulary");
        vocab.f_init = std::move(file.values);
      }
    }
    emplace_handle(out, kAssignmentMagic, std::move(assignment), std::move(vocab), has_vocab);
  });
}

void metaid_assignment_free(metaid_assignment* assignment) { release_handle(assignment); }

/* ---- rating-deviation oracle and metrics -------------------------------- */

metaid_status metaid_oracle_build(const metaid_index* index, metaid_oracle** out) {
  return guarded([&] {
    emplace_handle(out, kOracleMagic,
                   metaid::build_similarity_oracle(deref(index, kIndexMagic, "index").index));
  });
}

metaid_status metaid_oracle_user_mean(const metaid_oracle* oracle, uint32_t user,
                                      double* mean) {
  return guarded([&] {
    const auto& o = deref(oracle, kOracleMagic, "oracle").oracle;
    if (user >= o.user_mean.size()) throw metaid::UsageError("user outside the oracle");
    out_param(mean, "mean") = o.user_mean[user];
  });
}

metaid_status metaid_oracle_item_devs(const metaid_oracle* oracle, uint32_t item, double* dev,
                                      double* dev_sq) {
  return guarded([&] {
    const auto& o = deref(oracle, kOracleMagic, "oracle").oracle;
    if (item >= o.dev_sum.size()) throw metaid::UsageError("item outside the oracle");
    if (dev != nullptr) *dev = o.dev_sum[item];
    if (dev_sq != nullptr) *dev_sq = o.dev_sq_sum[item];
  });
}

metaid_status metaid_oracle_similarity(const metaid_oracle* oracle, uint32_t i, uint32_t j,
                                       int exact, int* defined, double* value) {
  return guarded([&] {
    const auto& o = deref(oracle, kOracleMagic, "oracle").oracle;
    if (i >= o.dev_sum.size() || j >= o.dev_sum.size())
      throw metaid::UsageError("item outside the oracle");
    auto sim = exact != 0 ? metaid::adjusted_cosine_exact(o, i, j)
                          : metaid::adjusted_cosine_fast(o, i, j);
    out_param(defined, "defined") = sim.has_value() ? 1 : 0;
    if (value != nullptr) *value = sim.value_or(0.0);
  });
}

void metaid_oracle_free(metaid_oracle* oracle) { release_handle(oracle); }

namespace {

metaid::Matrix item_representations(const metaid_assignment& handle) {
  if (!handle.has_vocab || handle.vocab.f_init.rows != handle.vocab.tokens.size())
    throw metaid::UsageError("assignment carries no token vectors");
  auto table = metaid::make_token_table(handle.vocab);
  return metaid::representations_for(handle.assignment, table, false);
}

}  // namespace

metaid_status metaid_metrics_compute(const metaid_assignment* assignment,
                                     const metaid_oracle* oracle, uint64_t pair_samples,
                                     uint64_t item_samples, double softmax_temperature,
                                     int exact, uint64_t seed, double* ds, double* ms,
                                     uint64_t* ms_pairs_used, uint64_t* ms_pairs_skipped) {
  return guarded([&] {
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    const auto& o = deref(oracle, kOracleMagic, "oracle").oracle;
    auto reps = item_representations(h);
    out_param(ds, "ds") = metaid::compute_ds(reps, pair_samples, seed, softmax_temperature);
    auto result = metaid::compute_ms(reps, o, item_samples, seed, exact != 0);
    out_param(ms, "ms") = result.ms;
    if (ms_pairs_used != nullptr) *ms_pairs_used = result.pairs_used;
    if (ms_pairs_skipped != nullptr) *ms_pairs_skipped = result.pairs_skipped;
  });
}

metaid_status metaid_metrics_ds_convergence(const metaid_assignment* assignment,
                                            const uint64_t* pair_sample_counts, uint64_t count,
                                            uint32_t trials, double softmax_temperature,
                                            uint64_t seed, double* means, double* stds) {
  return guarded([&] {
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    if (pair_sample_counts == nullptr || count == 0)
      throw metaid::UsageError("no sample counts");
    auto reps = item_representations(h);
    std::vector<uint64_t> counts(pair_sample_counts, pair_sample_counts + count);
    auto points = metaid::ds_convergence(reps, counts, trials, seed, softmax_temperature);
    double* mean_out = &out_param(means, "means");
    double* std_out = &out_param(stds, "stds");
    for (size_t k = 0; k < points.size(); ++k) {
      mean_out[k] = points[k].mean;
      std_out[k] = points[k].std_dev;
    }
  });
}

/* ---- instruction corpus and decoding trie ------------------------------- */

metaid_status metaid_prompts_emit(const metaid_index* index, const metaid_splits* splits,
                                  const metaid_assignment* assignment, const char* tasks_csv,
                                  const char* templates_path, const char* out_path,
                                  uint64_t* per_task_counts) {
  return guarded([&] {
    const auto& idx = deref(index, kIndexMagic, "index").index;
    const auto& s = deref(splits, kSplitsMagic, "splits").splits;
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    std::vector<metaid::Task> tasks;
    if (tasks_csv == nullptr || *tasks_csv == '\0') {
      tasks = metaid::all_tasks();
    } else {
      std::string csv = tasks_csv;
      size_t pos = 0;
      while (pos <= csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        std::string name = csv.substr(pos, comma - pos);
        size_t begin = name.find_first_not_of(" \t");
        size_t end = name.find_last_not_of(" \t");
        if (begin != std::string::npos)
          tasks.push_back(metaid::task_from_name(name.substr(begin, end - begin + 1)));
        pos = comma + 1;
      }
      if (tasks.empty()) throw metaid::UsageError("no tasks selected");
    }
    auto templates = templates_path == nullptr || *templates_path == '\0'
                         ? metaid::default_templates()
                         : metaid::load_templates(templates_path);
    auto counts = metaid::emit_corpus(idx, s, h.assignment, tasks, templates,
                                      require_path(out_path, "output"));
    if (per_task_counts != nullptr) {
      const auto& order = metaid::all_tasks();
      for (size_t k = 0; k < order.size(); ++k) {
        auto it = counts.find(order[k]);
        per_task_counts[k] = it == counts.end() ? 0 : it->second;
      }
    }
  });
}

metaid_status metaid_trie_build(const metaid_assignment* assignment, metaid_trie** out) {
  return guarded([&] {
    const auto& h = deref(assignment, kAssignmentMagic, "assignment");
    emplace_handle(out, kTrieMagic, metaid::build_id_trie(h.assignment));
  });
}

metaid_status metaid_trie_save(const metaid_trie* trie, const metaid_index* index,
                               const char* path) {
  return guarded([&] {
    const auto& t = deref(trie, kTrieMagic, "trie").trie;
    const auto& idx = deref(index, kIndexMagic, "index").index;
    metaid::save_trie_json(t, idx, require_path(path, "output"));
  });
}

metaid_status metaid_trie_load(const char* path, metaid_trie** out) {
  return guarded([&] {
    emplace_handle(out, kTrieMagic, metaid::load_trie_json(require_path(path, "trie")));
  });
}

metaid_status metaid_trie_path_count(const metaid_trie* trie, uint64_t* count) {
  return guarded([&] {
    out_param(count, "count") = metaid::trie_path_count(deref(trie, kTrieMagic, "trie").trie);
  });
}

metaid_status metaid_trie_continuations(const metaid_trie* trie, const char* prefix,
                                        char* buf, uint64_t capacity, uint64_t* needed) {
  return guarded([&] {
    const auto& t = deref(trie, kTrieMagic, "trie").trie;
    if (prefix == nullptr) throw metaid::UsageError("null prefix");
    auto tokens = metaid::valid_continuations(t, split_tokens(prefix));
    std::string joined;
    for (size_t k = 0; k < tokens.size(); ++k) {
      if (k > 0) joined += ' ';
      joined += tokens[k];
    }
    copy_string(joined, buf, capacity, needed);
  });
}

void metaid_trie_free(metaid_trie* trie) { release_handle(trie); }

/* ---- configuration and pipeline ----------------------------------------- */

metaid_status metaid_config_create(metaid_config** out) {
  return guarded([&] { emplace_handle(out); });
}

metaid_status metaid_config_load_file(metaid_config* config, const char* path) {
  return guarded([&] {
    deref(config, kConfigMagic, "config").map.load_file(require_path(path, "config"));
  });
}

metaid_status metaid_config_set(metaid_config* config, const char* key, const char* value) {
  return guarded([&] {
    if (key == nullptr || *key == '\0') throw metaid::UsageError("empty config key");
    if (value == nullptr) throw metaid::UsageError("null config value");
    deref(config, kConfigMagic, "config").map.set(key, value);
  });
}

metaid_status metaid_config_workdir(const metaid_config* config, char* buf, uint64_t capacity,
                                    uint64_t* needed) {
  return guarded([&] {
    const auto& map = deref(config, kConfigMagic, "config").map;
    copy_string(metaid::resolve_config(map).workdir, buf, capacity, needed);
  });
}

void metaid_config_free(metaid_config* config) { release_handle(config); }

metaid_status metaid_pipeline_run(const metaid_config* config, const char* upto, int force) {
  return guarded([&] {
    const auto& map = deref(config, kConfigMagic, "config").map;
    auto resolved = metaid::resolve_config(map);
    metaid::run_pipeline(resolved, upto == nullptr ? std::string() : upto, force != 0);
  });
}

}  // extern "C"

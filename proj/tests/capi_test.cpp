// Exercises the shared library through its C surface only: every call goes
// through metaid/metaid.h, no internal headers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <metaid/metaid.h>

namespace {

const char* kTinyTsv =
    "u1\ti1\t5\t0\n"
    "u1\ti2\t1\t1\n"
    "u2\ti1\t1\t2\n"
    "u2\ti2\t5\t3\n"
    "u3\ti2\t4\t4\n"
    "u3\ti3\t2\t5\n";

void write_file(const char* path, const char* text) {
  std::FILE* f = std::fopen(path, "w");
  REQUIRE(f);
  std::fputs(text, f);
  std::fclose(f);
}

// Loads the six-interaction fixture through the C API.
metaid_index* tiny_index() {
  write_file("capi_tiny.tsv", kTinyTsv);
  metaid_parse_format fmt;
  metaid_parse_format_init(&fmt);
  metaid_records* records = nullptr;
  REQUIRE(metaid_records_parse_file("capi_tiny.tsv", &fmt, &records) == METAID_OK);
  std::remove("capi_tiny.tsv");
  metaid_index* index = nullptr;
  REQUIRE(metaid_index_build(records, &index) == METAID_OK);
  metaid_records_free(records);
  return index;
}

}  // namespace

TEST_CASE("version string and error bookkeeping") {
  REQUIRE(metaid_version() != nullptr);
  CHECK(std::strlen(metaid_version()) > 0);

  // A failure records a message; the next success clears it.
  CHECK(metaid_records_parse_file(nullptr, nullptr, nullptr) == METAID_USAGE_ERROR);
  CHECK(std::strlen(metaid_last_error()) > 0);

  metaid_records* records = nullptr;
  CHECK(metaid_records_synthetic(1, 2, 2, 0.0, 1, &records) == METAID_OK);
  CHECK(std::strlen(metaid_last_error()) == 0);
  metaid_records_free(records);

  // Missing files are data errors, not usage errors.
  metaid_parse_format fmt;
  metaid_parse_format_init(&fmt);
  CHECK(metaid_records_parse_file("capi_no_such.tsv", &fmt, &records) == METAID_DATA_ERROR);
}

TEST_CASE("freeing NULL handles is harmless") {
  metaid_records_free(nullptr);
  metaid_index_free(nullptr);
  metaid_splits_free(nullptr);
  metaid_graph_free(nullptr);
  metaid_walks_free(nullptr);
  metaid_embeddings_free(nullptr);
  metaid_clusters_free(nullptr);
  metaid_assignment_free(nullptr);
  metaid_oracle_free(nullptr);
  metaid_trie_free(nullptr);
  metaid_config_free(nullptr);
}

TEST_CASE("handles are type-checked") {
  metaid_index* index = tiny_index();
  uint64_t count = 0;
  // An index handle is not a records handle; the magic tag catches the mixup.
  CHECK(metaid_records_count(reinterpret_cast<const metaid_records*>(index), &count) ==
        METAID_USAGE_ERROR);
  CHECK(std::strstr(metaid_last_error(), "records") != nullptr);
  metaid_index_free(index);
}

TEST_CASE("records, index, splits, and graph counts") {
  write_file("capi_tiny.tsv", kTinyTsv);
  metaid_parse_format fmt;
  metaid_parse_format_init(&fmt);
  metaid_records* records = nullptr;
  REQUIRE(metaid_records_parse_file("capi_tiny.tsv", &fmt, &records) == METAID_OK);
  std::remove("capi_tiny.tsv");
  uint64_t count = 0;
  CHECK(metaid_records_count(records, &count) == METAID_OK);
  CHECK(count == 6);

  metaid_index* index = nullptr;
  REQUIRE(metaid_index_build(records, &index) == METAID_OK);
  metaid_records_free(records);
  uint64_t users = 0, items = 0, reviews = 0;
  CHECK(metaid_index_counts(index, &users, &items, &reviews) == METAID_OK);
  CHECK(users == 3);
  CHECK(items == 3);
  CHECK(reviews == 6);
  double sparsity = 0.0;
  CHECK(metaid_index_sparsity(index, &sparsity) == METAID_OK);
  CHECK(sparsity == doctest::Approx(100.0 * 6 / 9).epsilon(1e-12));

  // Index survives a save/load cycle.
  CHECK(metaid_index_save(index, "capi_index.json") == METAID_OK);
  metaid_index* back = nullptr;
  CHECK(metaid_index_load("capi_index.json", &back) == METAID_OK);
  std::remove("capi_index.json");
  CHECK(metaid_index_counts(back, &users, &items, &reviews) == METAID_OK);
  CHECK(reviews == 6);
  metaid_index_free(back);

  // Every user has only two interactions: leave-one-out drops them all.
  metaid_splits* splits = nullptr;
  uint32_t dropped = 0;
  CHECK(metaid_splits_leave_one_out(index, &splits, &dropped) == METAID_DATA_ERROR);
  REQUIRE(metaid_splits_random(index, 7, &splits) == METAID_OK);
  uint64_t train = 0, validation = 0, test = 0;
  CHECK(metaid_splits_sizes(splits, &train, &validation, &test) == METAID_OK);
  CHECK(train + validation + test == 6);
  CHECK(train >= 4);  // the 80% floor, plus any rows moved in to cover entities
  metaid_splits_free(splits);

  metaid_graph* graph = nullptr;
  REQUIRE(metaid_graph_build(index, &graph) == METAID_OK);
  uint64_t edges = 0;
  CHECK(metaid_graph_edge_count(graph, 5, &edges) == METAID_OK);
  CHECK(edges == 2);
  CHECK(metaid_graph_edge_count(graph, 3, &edges) == METAID_OK);
  CHECK(edges == 0);
  CHECK(metaid_graph_edge_count(graph, 6, &edges) == METAID_USAGE_ERROR);

  // Two-call buffer pattern: probe reports the size, small capacity fails.
  uint64_t needed = 0;
  CHECK(metaid_graph_neighbors(graph, 1, 1, 5, nullptr, 0, &needed) == METAID_USAGE_ERROR);
  CHECK(needed == 1);
  uint32_t neighbor = 99;
  CHECK(metaid_graph_neighbors(graph, 1, 1, 5, &neighbor, 1, &needed) == METAID_OK);
  CHECK(needed == 1);
  CHECK(neighbor == 1);  // i2 at rating 5 is rated by u2

  metaid_graph_free(graph);
  metaid_index_free(index);
}

TEST_CASE("walks, embeddings, clusters, and meta ids through the C surface") {
  metaid_index* index = tiny_index();
  metaid_graph* graph = nullptr;
  REQUIRE(metaid_graph_build(index, &graph) == METAID_OK);

  metaid_walks* walks = nullptr;
  REQUIRE(metaid_walks_sample(graph, 6, 2, 99, 1, &walks) == METAID_OK);
  uint64_t walk_count = 0;
  CHECK(metaid_walks_count(walks, &walk_count) == METAID_OK);
  CHECK(walk_count == 24);  // 12 populated node-rating pairs x 2 rounds
  CHECK(metaid_walks_save(walks, "capi_walks.txt") == METAID_OK);
  std::remove("capi_walks.txt");

  metaid_embed_config cfg;
  metaid_embed_config_init(&cfg);
  CHECK(cfg.dim == 64);
  CHECK(cfg.epochs == 10);
  cfg.dim = 8;
  cfg.window = 2;
  cfg.negatives = 2;
  cfg.learning_rate = 0.05;
  cfg.epochs = 3;
  cfg.seed = 11;
  metaid_embeddings* embeddings = nullptr;
  double losses[3] = {0, 0, 0};
  uint64_t epochs_out = 0;
  REQUIRE(metaid_embed_train(walks, &cfg, &embeddings, losses, 3, &epochs_out) == METAID_OK);
  metaid_walks_free(walks);
  CHECK(epochs_out == 3);
  for (double l : losses) CHECK(std::isfinite(l));

  uint64_t users = 0, items = 0;
  uint32_t dim = 0;
  CHECK(metaid_embeddings_shape(embeddings, &users, &items, &dim) == METAID_OK);
  CHECK(users == 3);
  CHECK(items == 3);
  CHECK(dim == 8);
  uint64_t needed = 0;
  double row[8];
  CHECK(metaid_embeddings_row(embeddings, 0, nullptr, 0, &needed) == METAID_USAGE_ERROR);
  CHECK(needed == 8);
  CHECK(metaid_embeddings_row(embeddings, 0, row, 8, &needed) == METAID_OK);
  CHECK(metaid_embeddings_save(embeddings, "capi_emb.bin") == METAID_OK);
  metaid_embeddings* emb_back = nullptr;
  CHECK(metaid_embeddings_load("capi_emb.bin", &emb_back) == METAID_OK);
  std::remove("capi_emb.bin");
  metaid_embeddings_free(emb_back);

  metaid_clusters* clusters = nullptr;
  REQUIRE(metaid_clusters_fit(embeddings, 2, 50, 1e-6, 1, 1, &clusters) == METAID_OK);
  metaid_embeddings_free(embeddings);
  uint32_t groups = 0, iterations = 0;
  int converged = 0;
  CHECK(metaid_clusters_info(clusters, &groups, &iterations, &converged) == METAID_OK);
  CHECK(groups == 2);
  CHECK(iterations >= 1);
  uint32_t assignment_buf[6];
  CHECK(metaid_clusters_assignment(clusters, assignment_buf, 6, &needed) == METAID_OK);
  CHECK(needed == 6);
  for (uint32_t g : assignment_buf) CHECK(g < 2);
  uint32_t ranks[6];
  CHECK(metaid_clusters_fine_ranks(clusters, ranks, 6, &needed) == METAID_OK);
  for (uint32_t r : ranks) CHECK(r >= 1);
  double centroid[8];
  CHECK(metaid_clusters_centroid(clusters, 0, centroid, 8, &needed) == METAID_OK);
  CHECK(needed == 8);
  CHECK(metaid_clusters_centroid(clusters, 99, centroid, 8, &needed) == METAID_USAGE_ERROR);
  CHECK(metaid_clusters_save(clusters, "capi_clusters.json") == METAID_OK);
  metaid_clusters* cl_back = nullptr;
  CHECK(metaid_clusters_load("capi_clusters.json", &cl_back) == METAID_OK);
  std::remove("capi_clusters.json");
  metaid_clusters_free(cl_back);

  metaid_assignment* meta = nullptr;
  REQUIRE(metaid_assign_meta(clusters, index, 0.1, 5, &meta) == METAID_OK);
  metaid_clusters_free(clusters);

  // Token surface round trip, including the too-small-buffer contract.
  CHECK(metaid_assignment_tokens(meta, 1, 0, nullptr, 0, &needed) == METAID_USAGE_ERROR);
  REQUIRE(needed > 1);
  std::string surface(needed - 1, '\0');
  CHECK(metaid_assignment_tokens(meta, 1, 0, surface.data(), needed, &needed) == METAID_OK);
  CHECK(surface.rfind("<User> <CT_", 0) == 0);

  int found = 0, is_user = 0;
  uint32_t entity = 99;
  CHECK(metaid_assignment_decode(meta, surface.c_str(), &found, &is_user, &entity) ==
        METAID_OK);
  CHECK(found == 1);
  CHECK(is_user == 1);
  CHECK(entity == 0);
  CHECK(metaid_assignment_decode(meta, "total nonsense", &found, &is_user, &entity) ==
        METAID_OK);
  CHECK(found == 0);

  uint64_t vocab_size = 0;
  CHECK(metaid_assignment_vocab_size(meta, &vocab_size) == METAID_OK);
  CHECK(vocab_size >= 2 + 2 + 1);

  // Artifacts round trip into a fresh assignment.
  CHECK(metaid_assignment_save_vocab(meta, "capi_vocab.tsv") == METAID_OK);
  CHECK(metaid_assignment_save_f_init(meta, "capi_finit.bin") == METAID_OK);
  CHECK(metaid_assignment_save_id_map(meta, index, "capi_idmap.json") == METAID_OK);
  metaid_assignment* loaded = nullptr;
  REQUIRE(metaid_assignment_load(index, "capi_idmap.json", "capi_vocab.tsv",
                                 "capi_finit.bin", &loaded) == METAID_OK);
  std::string loaded_surface(needed - 1, '\0');
  CHECK(metaid_assignment_tokens(loaded, 1, 0, loaded_surface.data(), needed, &needed) ==
        METAID_OK);
  CHECK(loaded_surface == surface);

  // Metrics over the loaded assignment agree with the original.
  metaid_oracle* oracle = nullptr;
  REQUIRE(metaid_oracle_build(index, &oracle) == METAID_OK);
  double ds_a = 0, ms_a = 0, ds_b = 0, ms_b = 0;
  uint64_t used = 0, skipped = 0;
  REQUIRE(metaid_metrics_compute(meta, oracle, 50, 3, 1.0, 1, 0, &ds_a, &ms_a, &used,
                                 &skipped) == METAID_OK);
  CHECK(used == 2);  // of the three item pairs, i1-i3 has no common rater
  CHECK(skipped == 1);
  REQUIRE(metaid_metrics_compute(loaded, oracle, 50, 3, 1.0, 1, 0, &ds_b, &ms_b, &used,
                                 &skipped) == METAID_OK);
  // Token vectors travel as float32, so scores agree to storage precision only.
  CHECK(ds_b == doctest::Approx(ds_a).epsilon(1e-3));
  CHECK(ms_b == doctest::Approx(ms_a).epsilon(1e-5));
  metaid_assignment_free(loaded);

  // Without vocab and f_init paths the assignment decodes but cannot score.
  metaid_assignment* bare = nullptr;
  REQUIRE(metaid_assignment_load(index, "capi_idmap.json", nullptr, nullptr, &bare) ==
          METAID_OK);
  CHECK(metaid_assignment_decode(bare, surface.c_str(), &found, &is_user, &entity) ==
        METAID_OK);
  CHECK(found == 1);
  CHECK(metaid_metrics_compute(bare, oracle, 50, 3, 1.0, 1, 0, &ds_b, &ms_b, &used,
                               &skipped) == METAID_USAGE_ERROR);
  metaid_assignment_free(bare);
  std::remove("capi_vocab.tsv");
  std::remove("capi_finit.bin");
  std::remove("capi_idmap.json");

  metaid_oracle_free(oracle);
  metaid_assignment_free(meta);
  metaid_index_free(index);
}

TEST_CASE("oracle values and similarity flags") {
  metaid_index* index = tiny_index();
  metaid_oracle* oracle = nullptr;
  REQUIRE(metaid_oracle_build(index, &oracle) == METAID_OK);

  double mean = 0.0;
  CHECK(metaid_oracle_user_mean(oracle, 0, &mean) == METAID_OK);
  CHECK(mean == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(metaid_oracle_user_mean(oracle, 9, &mean) == METAID_USAGE_ERROR);

  double dev = 0.0, dev_sq = 0.0;
  CHECK(metaid_oracle_item_devs(oracle, 0, &dev, &dev_sq) == METAID_OK);
  CHECK(dev == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(dev_sq == doctest::Approx(8.0).epsilon(1e-15));

  int defined = 0;
  double value = 0.0;
  CHECK(metaid_oracle_similarity(oracle, 0, 1, 1, &defined, &value) == METAID_OK);
  CHECK(defined == 1);
  CHECK(value == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(metaid_oracle_similarity(oracle, 0, 2, 1, &defined, &value) == METAID_OK);
  CHECK(defined == 0);
  CHECK(metaid_oracle_similarity(oracle, 1, 2, 0, &defined, &value) == METAID_OK);
  CHECK(defined == 1);
  CHECK(value == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));

  metaid_oracle_free(oracle);
  metaid_index_free(index);
}

TEST_CASE("baseline ids, prompts, and the decoding trie") {
  metaid_index* index = tiny_index();

  metaid_assignment* rid = nullptr;
  REQUIRE(metaid_assign_rid(index, 3, 8, 0.1, &rid) == METAID_OK);
  uint64_t needed = 0;
  metaid_assignment_tokens(rid, 1, 0, nullptr, 0, &needed);
  std::string rid_surface(needed - 1, '\0');
  REQUIRE(metaid_assignment_tokens(rid, 1, 0, rid_surface.data(), needed, &needed) ==
          METAID_OK);
  CHECK(rid_surface.rfind("user ", 0) == 0);
  metaid_assignment_free(rid);

  metaid_assignment* sid = nullptr;
  REQUIRE(metaid_assign_sid(index, 0, 8, 0.1, &sid) == METAID_OK);
  metaid_assignment_tokens(sid, 0, 0, nullptr, 0, &needed);
  std::string sid_surface(needed - 1, '\0');
  REQUIRE(metaid_assignment_tokens(sid, 0, 0, sid_surface.data(), needed, &needed) ==
          METAID_OK);
  CHECK(sid_surface == "item 1");

  metaid_splits* splits = nullptr;
  REQUIRE(metaid_splits_random(index, 7, &splits) == METAID_OK);
  uint64_t counts[5] = {9, 9, 9, 9, 9};
  REQUIRE(metaid_prompts_emit(index, splits, sid, "rating,direct", nullptr,
                              "capi_corpus.jsonl", counts) == METAID_OK);
  CHECK(counts[0] == 0);  // sequential unselected
  CHECK(counts[1] == 6);  // direct
  CHECK(counts[2] == 6);  // rating
  CHECK(counts[3] == 0);
  CHECK(counts[4] == 0);
  CHECK(std::filesystem::exists("capi_corpus.jsonl"));
  std::remove("capi_corpus.jsonl");
  CHECK(metaid_prompts_emit(index, splits, sid, "rating,poetry", nullptr,
                            "capi_corpus.jsonl", counts) == METAID_USAGE_ERROR);
  metaid_splits_free(splits);

  metaid_trie* trie = nullptr;
  REQUIRE(metaid_trie_build(sid, &trie) == METAID_OK);
  uint64_t paths = 0;
  CHECK(metaid_trie_path_count(trie, &paths) == METAID_OK);
  CHECK(paths == 3);
  CHECK(metaid_trie_continuations(trie, "", nullptr, 0, &needed) == METAID_USAGE_ERROR);
  std::string cont(needed - 1, '\0');
  CHECK(metaid_trie_continuations(trie, "", cont.data(), needed, &needed) == METAID_OK);
  CHECK(cont == "item");
  metaid_trie_continuations(trie, "item", nullptr, 0, &needed);
  cont.assign(needed - 1, '\0');
  CHECK(metaid_trie_continuations(trie, "item", cont.data(), needed, &needed) == METAID_OK);
  CHECK(cont == "1 2 3");
  // Unknown prefixes answer with an empty string, not an error.
  char tiny_buf[4];
  CHECK(metaid_trie_continuations(trie, "zzz", tiny_buf, 4, &needed) == METAID_OK);
  CHECK(needed == 1);
  CHECK(tiny_buf[0] == '\0');

  CHECK(metaid_trie_save(trie, index, "capi_trie.json") == METAID_OK);
  metaid_trie* trie_back = nullptr;
  CHECK(metaid_trie_load("capi_trie.json", &trie_back) == METAID_OK);
  std::remove("capi_trie.json");
  CHECK(metaid_trie_path_count(trie_back, &paths) == METAID_OK);
  CHECK(paths == 3);
  metaid_trie_free(trie_back);
  metaid_trie_free(trie);
  metaid_assignment_free(sid);
  metaid_index_free(index);
}

TEST_CASE("config resolution and the staged pipeline") {
  std::filesystem::remove_all("capi_scratch");

  metaid_config* config = nullptr;
  REQUIRE(metaid_config_create(&config) == METAID_OK);
  write_file("capi_cfg.ini", "[embed]\ndim = 8\n");
  CHECK(metaid_config_load_file(config, "capi_cfg.ini") == METAID_OK);
  std::remove("capi_cfg.ini");

  auto set = [&](const char* key, const char* value) {
    REQUIRE(metaid_config_set(config, key, value) == METAID_OK);
  };
  set("paths.workdir", "capi_scratch");
  set("synth.blocks", "2");
  set("synth.users_per_block", "6");
  set("synth.items_per_block", "6");
  set("synth.noise", "0.1");
  set("walk.length", "8");
  set("walk.rounds", "2");
  set("embed.window", "2");
  set("embed.negatives", "2");
  set("embed.learning_rate", "0.05");
  set("embed.epochs", "2");
  set("cluster.groups", "2");
  set("metrics.pair_samples", "50");
  set("metrics.item_samples", "10");
  set("run.seed", "3");

  uint64_t needed = 0;
  CHECK(metaid_config_workdir(config, nullptr, 0, &needed) == METAID_USAGE_ERROR);
  std::string workdir(needed - 1, '\0');
  CHECK(metaid_config_workdir(config, workdir.data(), needed, &needed) == METAID_OK);
  CHECK(workdir == "capi_scratch");

  CHECK(metaid_pipeline_run(config, "", 0) == METAID_OK);
  metaid_index* produced = nullptr;
  CHECK(metaid_index_load("capi_scratch/index.json", &produced) == METAID_OK);
  metaid_index_free(produced);
  CHECK(metaid_pipeline_run(config, nullptr, 0) == METAID_OK);  // resume
  CHECK(metaid_pipeline_run(config, "polish", 0) == METAID_USAGE_ERROR);

  // Unknown keys surface when the config resolves, not when it is set.
  set("mystery.key", "1");
  CHECK(metaid_config_workdir(config, workdir.data(), needed, &needed) ==
        METAID_USAGE_ERROR);

  metaid_config_free(config);
  std::filesystem::remove_all("capi_scratch");
}

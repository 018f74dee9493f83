#include "pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "binio.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "sha256.hpp"

namespace metaid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed path ordinals, one per stage.
enum StageOrdinal : uint64_t {
  kIngest = 0,
  kGraph,
  kWalk,
  kEmbed,
  kCluster,
  kIdgen,
  kMetrics,
  kPromptgen
};

struct StageContext {
  const PipelineConfig& cfg;
  fs::path workdir;

  fs::path artifact(const std::string& name) const { return workdir / name; }
  uint64_t stage_seed(uint64_t ordinal) const { return derive_seed(cfg.seed, {ordinal}); }

  std::string digest_of(const std::string& name) const {
    return sha256_file((workdir / name).string());
  }
};

// Writes through a ".partial" path and renames once the writer returns. A
// throwing writer leaves the partial file behind for inspection.
void atomic_write(const fs::path& path, const std::function<void(const std::string&)>& writer) {
  fs::path partial = path;
  partial += ".partial";
  writer(partial.string());
  std::error_code ec;
  fs::rename(partial, path, ec);
  if (ec) throw DataError("cannot move " + partial.string() + " into place: " + ec.message());
}

void log_stage(const std::string& stage, const std::string& message) {
  std::fprintf(stderr, "[%s] %s\n", stage.c_str(), message.c_str());
}

std::string tasks_csv(const std::vector<Task>& tasks) {
  std::string out;
  for (size_t k = 0; k < tasks.size(); ++k) {
    if (k) out += ",";
    out += task_name(tasks[k]);
  }
  return out;
}

// ---- stage bodies -------------------------------------------------------

void stage_ingest(const StageContext& ctx) {
  const PipelineConfig& cfg = ctx.cfg;
  std::vector<InteractionRecord> records;
  if (!cfg.input.empty()) {
    records = parse_interactions_file(cfg.input, cfg.format);
    if (records.empty()) throw DataError("input holds no interaction records: " + cfg.input);
  } else {
    records = generate_synthetic(cfg.synth.blocks, cfg.synth.users_per_block,
                                 cfg.synth.items_per_block, cfg.synth.noise,
                                 ctx.stage_seed(kIngest));
  }
  DatasetIndex index = build_index(records);
  DatasetStats stats = compute_stats(index);
  log_stage("ingest", "users=" + std::to_string(stats.users) +
                          " items=" + std::to_string(stats.items) +
                          " reviews=" + std::to_string(stats.reviews));
  atomic_write(ctx.artifact("index.json"),
               [&](const std::string& p) { save_index_json(index, p); });
}

void stage_graph(const StageContext& ctx) {
  DatasetIndex index = load_index_json(ctx.artifact("index.json").string());
  InteractionGraph graph = build_graph(index);
  log_stage("graph", "edges=" + std::to_string(graph.total_edges()));
  atomic_write(ctx.artifact("graph.json"),
               [&](const std::string& p) { save_graph_json(graph, p); });
}

void stage_walk(const StageContext& ctx) {
  InteractionGraph graph = load_graph_json(ctx.artifact("graph.json").string());
  WalkConfig wcfg;
  wcfg.walk_length = ctx.cfg.walk_length;
  wcfg.rounds_per_node = ctx.cfg.walk_rounds;
  wcfg.seed = ctx.stage_seed(kWalk);
  wcfg.workers = ctx.cfg.workers;
  WalkCorpus corpus = sample_walks(graph, wcfg);
  log_stage("walk", "walks=" + std::to_string(corpus.walks.size()));
  atomic_write(ctx.artifact("walks.txt"),
               [&](const std::string& p) { save_walks_text(corpus, p); });
}

void stage_embed(const StageContext& ctx) {
  DatasetIndex index = load_index_json(ctx.artifact("index.json").string());
  WalkCorpus corpus = load_walks_text(ctx.artifact("walks.txt").string(), index.user_count(),
                                      index.item_count());
  SgConfig scfg = ctx.cfg.embed;
  scfg.seed = ctx.stage_seed(kEmbed);
  scfg.workers = ctx.cfg.workers;
  TrainResult result = train_skipgram(corpus, scfg);
  std::ostringstream losses;
  losses.precision(6);
  for (size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
    if (e) losses << ' ';
    losses << result.epoch_mean_loss[e];
  }
  log_stage("embed", "epoch mean loss: " + losses.str());
  atomic_write(ctx.artifact("embeddings.bin"), [&](const std::string& p) {
    write_embedding_file(p, index.user_count(), index.item_count(), result.table.input);
  });
}

void stage_cluster(const StageContext& ctx) {
  EmbeddingFile emb = read_embedding_file(ctx.artifact("embeddings.bin").string());
  ClusterConfig ccfg;
  ccfg.groups = ctx.cfg.groups;
  ccfg.max_iters = ctx.cfg.cluster_max_iters;
  ccfg.tol = ctx.cfg.cluster_tol;
  ccfg.seed = ctx.stage_seed(kCluster);
  ccfg.workers = ctx.cfg.workers;
  ClusterModel model = kmeans_cosine(emb.values, ccfg);
  rank_within_cluster(model, emb.values);
  log_stage("cluster", "groups=" + std::to_string(model.groups) +
                           " iterations=" + std::to_string(model.iterations) +
                           (model.converged ? " converged" : " hit max_iters"));
  atomic_write(ctx.artifact("clusters.json"),
               [&](const std::string& p) { save_clusters_json(model, p); });
}

void stage_idgen(const StageContext& ctx) {
  DatasetIndex index = load_index_json(ctx.artifact("index.json").string());
  uint32_t m = index.user_count(), n = index.item_count();
  uint64_t seed = ctx.stage_seed(kIdgen);
  IdAssignment assignment;
  Vocabulary vocab;
  switch (ctx.cfg.strategy) {
    case IdStrategy::META: {
      ClusterModel model = load_clusters_json(ctx.artifact("clusters.json").string());
      auto pair = assign_meta_ids(model, m, n);
      assignment = std::move(pair.first);
      vocab = std::move(pair.second);
      build_f_init(model, vocab, ctx.cfg.alpha, seed);
      break;
    }
    case IdStrategy::RID:
      assignment = assign_rid(m, n, seed);
      vocab = baseline_vocabulary(assignment, ctx.cfg.embed.dim, ctx.cfg.alpha, seed);
      break;
    case IdStrategy::SID:
      assignment = assign_sid(index);
      vocab = baseline_vocabulary(assignment, ctx.cfg.embed.dim, ctx.cfg.alpha, seed);
      break;
  }
  log_stage("idgen", std::string("strategy=") + strategy_name(ctx.cfg.strategy) +
                         " vocab=" + std::to_string(vocab.tokens.size()));
  atomic_write(ctx.artifact("vocab.tsv"),
               [&](const std::string& p) { save_vocab_tsv(vocab, p); });
  atomic_write(ctx.artifact("f_init.bin"), [&](const std::string& p) {
    write_embedding_file(p, vocab.tokens.size(), 0, vocab.f_init);
  });
  atomic_write(ctx.artifact("id_map.json"),
               [&](const std::string& p) { save_id_map_json(assignment, index, p); });
}

// Returns the extra artifact names it wrote beyond metrics.json.
std::vector<std::string> stage_metrics(const StageContext& ctx) {
  const PipelineConfig& cfg = ctx.cfg;
  DatasetIndex index = load_index_json(ctx.artifact("index.json").string());
  Vocabulary vocab = load_vocab_tsv(ctx.artifact("vocab.tsv").string());
  EmbeddingFile finit = read_embedding_file(ctx.artifact("f_init.bin").string());
  if (finit.values.rows != vocab.tokens.size())
    throw DataError("f_init row count does not match vocab.tsv");
  vocab.f_init = std::move(finit.values);
  IdAssignment assignment = load_id_map_json(index, ctx.artifact("id_map.json").string());
  TokenTable table = make_token_table(vocab);
  Matrix item_reps = representations_for(assignment, table, false);
  SimilarityOracle oracle = build_similarity_oracle(index);
  uint64_t seed = ctx.stage_seed(kMetrics);

  double ds = compute_ds(item_reps, cfg.pair_samples, seed, cfg.temperature);
  MsResult ms = compute_ms(item_reps, oracle, cfg.item_samples, seed, cfg.exact_similarity);
  log_stage("metrics", "ds=" + std::to_string(ds) + " ms=" + std::to_string(ms.ms) +
                           " (pairs=" + std::to_string(ms.pairs_used) +
                           " skipped=" + std::to_string(ms.pairs_skipped) + ")");
  json doc;
  doc["ds"] = ds;
  doc["ms"] = ms.ms;
  doc["ms_pairs_used"] = ms.pairs_used;
  doc["ms_pairs_skipped"] = ms.pairs_skipped;
  doc["config"] = {{"pair_samples", cfg.pair_samples},
                   {"item_samples", cfg.item_samples},
                   {"temperature", cfg.temperature},
                   {"exact", cfg.exact_similarity},
                   {"strategy", strategy_name(cfg.strategy)}};
  atomic_write(ctx.artifact("metrics.json"), [&](const std::string& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + p);
    out << doc.dump() << '\n';
    if (!out) throw DataError("write failed: " + p);
  });

  std::vector<std::string> extras;
  if (cfg.heatmap_size > 0) {
    uint32_t size = static_cast<uint32_t>(
        std::min<uint64_t>(cfg.heatmap_size, item_reps.rows));
    HeatmapResult heat = similarity_heatmap(item_reps, oracle, size, seed, true);
    atomic_write(ctx.artifact("heatmap_truth.csv"), [&](const std::string& truth_tmp) {
      atomic_write(ctx.artifact("heatmap_cosine.csv"), [&](const std::string& cos_tmp) {
        save_heatmap_csv(heat, cos_tmp, truth_tmp);
      });
    });
    extras.push_back("heatmap_cosine.csv");
    extras.push_back("heatmap_truth.csv");
  }
  if (!cfg.convergence.empty()) {
    auto points = ds_convergence(item_reps, cfg.convergence, cfg.trials, seed, cfg.temperature);
    atomic_write(ctx.artifact("convergence.csv"),
                 [&](const std::string& p) { save_convergence_csv(points, p); });
    extras.push_back("convergence.csv");
  }
  return extras;
}

void stage_promptgen(const StageContext& ctx) {
  const PipelineConfig& cfg = ctx.cfg;
  DatasetIndex index = load_index_json(ctx.artifact("index.json").string());
  IdAssignment assignment = load_id_map_json(index, ctx.artifact("id_map.json").string());
  DatasetSplits splits =
      cfg.split_kind == SplitKind::leave_one_out
          ? split_leave_one_out(index)
          : split_random(index, derive_seed(ctx.stage_seed(kPromptgen), {1}));
  if (splits.dropped_users)
    log_stage("promptgen",
              "dropped " + std::to_string(splits.dropped_users) + " short users from splits");
  TemplateSet templates =
      cfg.templates.empty() ? default_templates() : load_templates(cfg.templates);
  atomic_write(ctx.artifact("corpus.jsonl"), [&](const std::string& p) {
    auto counts = emit_corpus(index, splits, assignment, cfg.tasks, templates, p);
    std::string summary;
    for (const auto& [task, count] : counts)
      summary += std::string(task_name(task)) + "=" + std::to_string(count) + " ";
    log_stage("promptgen", "examples: " + summary);
  });
  IdTrie trie = build_id_trie(assignment);
  atomic_write(ctx.artifact("trie.json"),
               [&](const std::string& p) { save_trie_json(trie, index, p); });
}

// ---- manifest handling --------------------------------------------------

std::vector<StageRecord> load_manifest(const fs::path& path) {
  std::vector<StageRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.contains("stages")) return records;
  for (const auto& s : doc["stages"]) {
    StageRecord rec;
    rec.name = s.value("name", "");
    rec.fingerprint = s.value("fingerprint", "");
    if (s.contains("outputs"))
      for (const auto& o : s["outputs"])
        rec.outputs.push_back({o.value("file", ""), o.value("sha256", "")});
    records.push_back(std::move(rec));
  }
  return records;
}

void save_manifest(const fs::path& path, const std::vector<StageRecord>& records) {
  json doc;
  json stages = json::array();
  for (const auto& rec : records) {
    json s;
    s["name"] = rec.name;
    s["fingerprint"] = rec.fingerprint;
    json outputs = json::array();
    for (const auto& o : rec.outputs)
      outputs.push_back({{"file", o.file}, {"sha256", o.sha256}});
    s["outputs"] = std::move(outputs);
    stages.push_back(std::move(s));
  }
  doc["stages"] = std::move(stages);
  atomic_write(path, [&](const std::string& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + p);
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + p);
  });
}

struct StageSpec {
  std::string name;
  // Settings + input digests; any change invalidates cached outputs.
  std::function<std::string(const StageContext&)> fingerprint_source;
  // Runs the stage; returns artifact names written.
  std::function<std::vector<std::string>(const StageContext&)> run;
};

std::vector<StageSpec> build_stage_specs() {
  std::vector<StageSpec> specs;
  specs.push_back(
      {"ingest",
       [](const StageContext& ctx) {
         const PipelineConfig& c = ctx.cfg;
         std::ostringstream ss;
         ss << "ingest.v1|seed=" << ctx.stage_seed(kIngest);
         if (!c.input.empty()) {
           ss << "|input=" << sha256_file(c.input) << "|jsonl=" << c.format.jsonl
              << "|delim=" << static_cast<int>(c.format.delimiter) << "|cols=" << c.format.col_user
              << ',' << c.format.col_item << ',' << c.format.col_rating << ','
              << c.format.col_timestamp << ',' << c.format.col_review << ','
              << c.format.col_summary << ',' << c.format.col_explanation << ','
              << c.format.col_feature;
         } else {
           ss << "|synth=" << c.synth.blocks << ',' << c.synth.users_per_block << ','
              << c.synth.items_per_block << ',' << c.synth.noise;
         }
         return ss.str();
       },
       [](const StageContext& ctx) {
         stage_ingest(ctx);
         return std::vector<std::string>{"index.json"};
       }});
  specs.push_back({"graph",
                   [](const StageContext& ctx) {
                     return "graph.v1|index=" + ctx.digest_of("index.json");
                   },
                   [](const StageContext& ctx) {
                     stage_graph(ctx);
                     return std::vector<std::string>{"graph.json"};
                   }});
  specs.push_back({"walk",
                   [](const StageContext& ctx) {
                     std::ostringstream ss;
                     ss << "walk.v1|length=" << ctx.cfg.walk_length
                        << "|rounds=" << ctx.cfg.walk_rounds << "|seed=" << ctx.stage_seed(kWalk)
                        << "|graph=" << ctx.digest_of("graph.json");
                     return ss.str();
                   },
                   [](const StageContext& ctx) {
                     stage_walk(ctx);
                     return std::vector<std::string>{"walks.txt"};
                   }});
  specs.push_back({"embed",
                   [](const StageContext& ctx) {
                     const SgConfig& e = ctx.cfg.embed;
                     std::ostringstream ss;
                     ss << "embed.v1|dim=" << e.dim << "|window=" << e.window
                        << "|negatives=" << e.negatives << "|lr=" << e.learning_rate
                        << "|epochs=" << e.epochs << "|det=" << e.deterministic
                        << "|seed=" << ctx.stage_seed(kEmbed)
                        << "|walks=" << ctx.digest_of("walks.txt");
                     return ss.str();
                   },
                   [](const StageContext& ctx) {
                     stage_embed(ctx);
                     return std::vector<std::string>{"embeddings.bin"};
                   }});
  specs.push_back({"cluster",
                   [](const StageContext& ctx) {
                     std::ostringstream ss;
                     ss << "cluster.v1|groups=" << ctx.cfg.groups
                        << "|max_iters=" << ctx.cfg.cluster_max_iters
                        << "|tol=" << ctx.cfg.cluster_tol << "|seed=" << ctx.stage_seed(kCluster)
                        << "|embeddings=" << ctx.digest_of("embeddings.bin");
                     return ss.str();
                   },
                   [](const StageContext& ctx) {
                     stage_cluster(ctx);
                     return std::vector<std::string>{"clusters.json"};
                   }});
  specs.push_back({"idgen",
                   [](const StageContext& ctx) {
                     std::ostringstream ss;
                     ss << "idgen.v1|strategy=" << strategy_name(ctx.cfg.strategy)
                        << "|alpha=" << ctx.cfg.alpha << "|dim=" << ctx.cfg.embed.dim
                        << "|seed=" << ctx.stage_seed(kIdgen)
                        << "|index=" << ctx.digest_of("index.json");
                     if (ctx.cfg.strategy == IdStrategy::META)
                       ss << "|clusters=" << ctx.digest_of("clusters.json");
                     return ss.str();
                   },
                   [](const StageContext& ctx) {
                     stage_idgen(ctx);
                     return std::vector<std::string>{"vocab.tsv", "f_init.bin", "id_map.json"};
                   }});
  specs.push_back({"metrics",
                   [](const StageContext& ctx) {
                     const PipelineConfig& c = ctx.cfg;
                     std::ostringstream ss;
                     ss << "metrics.v1|pair_samples=" << c.pair_samples
                        << "|item_samples=" << c.item_samples << "|trials=" << c.trials
                        << "|temperature=" << c.temperature << "|exact=" << c.exact_similarity
                        << "|heatmap=" << c.heatmap_size << "|convergence=";
                     for (uint64_t n : c.convergence) ss << n << ',';
                     ss << "|seed=" << ctx.stage_seed(kMetrics)
                        << "|index=" << ctx.digest_of("index.json")
                        << "|vocab=" << ctx.digest_of("vocab.tsv")
                        << "|f_init=" << ctx.digest_of("f_init.bin")
                        << "|id_map=" << ctx.digest_of("id_map.json");
                     return ss.str();
                   },
                   [](const StageContext& ctx) {
                     std::vector<std::string> outputs{"metrics.json"};
                     for (auto& extra : stage_metrics(ctx)) outputs.push_back(extra);
                     return outputs;
                   }});
  specs.push_back(
      {"promptgen",
       [](const StageContext& ctx) {
         const PipelineConfig& c = ctx.cfg;
         std::ostringstream ss;
         ss << "promptgen.v1|tasks=" << tasks_csv(c.tasks) << "|split="
            << (c.split_kind == SplitKind::leave_one_out ? "loo" : "random")
            << "|templates=" << (c.templates.empty() ? "default" : sha256_file(c.templates))
            << "|seed=" << ctx.stage_seed(kPromptgen)
            << "|index=" << ctx.digest_of("index.json")
            << "|id_map=" << ctx.digest_of("id_map.json");
         return ss.str();
       },
       [](const StageContext& ctx) {
         stage_promptgen(ctx);
         return std::vector<std::string>{"corpus.jsonl", "trie.json"};
       }});
  return specs;
}

}  // namespace

const std::vector<std::string>& pipeline_stage_names() {
  static const std::vector<std::string> names = {"ingest", "graph",   "walk",    "embed",
                                                 "cluster", "idgen",  "metrics", "promptgen"};
  return names;
}

std::vector<StageRecord> run_pipeline(const PipelineConfig& config, const std::string& upto,
                                      bool force) {
  const auto& names = pipeline_stage_names();
  size_t last = names.size();
  if (!upto.empty()) {
    auto it = std::find(names.begin(), names.end(), upto);
    if (it == names.end()) throw UsageError("unknown pipeline stage: " + upto);
    last = static_cast<size_t>(it - names.begin()) + 1;
  }

  StageContext ctx{config, fs::path(config.workdir)};
  std::error_code ec;
  fs::create_directories(ctx.workdir, ec);
  if (ec) throw DataError("cannot create workdir " + config.workdir + ": " + ec.message());

  fs::path manifest_path = ctx.workdir / "manifest.json";
  std::vector<StageRecord> previous = load_manifest(manifest_path);
  auto previous_of = [&](const std::string& name) -> const StageRecord* {
    for (const auto& rec : previous)
      if (rec.name == name) return &rec;
    return nullptr;
  };

  std::vector<StageSpec> specs = build_stage_specs();
  std::vector<StageRecord> done;
  for (size_t k = 0; k < last; ++k) {
    const StageSpec& spec = specs[k];
    StageRecord record;
    record.name = spec.name;
    try {
      std::string fingerprint = sha256_hex(spec.fingerprint_source(ctx));
      record.fingerprint = fingerprint;
      const StageRecord* old = previous_of(spec.name);
      bool reusable = !force && old && old->fingerprint == fingerprint;
      if (reusable) {
        for (const auto& out : old->outputs) {
          fs::path p = ctx.artifact(out.file);
          if (!fs::exists(p) || sha256_file(p.string()) != out.sha256) {
            reusable = false;
            break;
          }
        }
      }
      if (reusable) {
        record.outputs = old->outputs;
        record.skipped = true;
        log_stage(spec.name, "up to date, skipping");
      } else {
        std::vector<std::string> outputs = spec.run(ctx);
        for (const auto& file : outputs)
          record.outputs.push_back({file, ctx.digest_of(file)});
      }
    } catch (const UsageError& e) {
      throw UsageError("stage " + spec.name + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("stage " + spec.name + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("stage " + spec.name + ": " + e.what());
    }
    done.push_back(record);

    // Persist progress: completed stages first, older records for the rest so
    // an interrupted run can still resume past them.
    std::vector<StageRecord> to_save = done;
    for (size_t j = done.size(); j < names.size(); ++j)
      if (const StageRecord* old = previous_of(names[j])) to_save.push_back(*old);
    save_manifest(manifest_path, to_save);
  }
  return done;
}

}  // namespace metaid

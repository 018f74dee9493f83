// Command-line front end. Talks to the library exclusively through the C API;
// every subcommand builds a configuration (file, then flags, in command-line
// order) and drives the staged pipeline, so partial results are reused across
// invocations.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "metaid/metaid.h"

namespace {

// Prints the library's error and exits with its status (1 usage, 2 data,
// 3 internal), which is the process exit-code contract.
void check(metaid_status status) {
  if (status == METAID_OK) return;
  std::fprintf(stderr, "error: %s\n", metaid_last_error());
  std::exit(static_cast<int>(status));
}

// Two-call pattern around a (buf, capacity, *needed) getter.
std::string read_string(const std::function<metaid_status(char*, uint64_t, uint64_t*)>& call) {
  uint64_t needed = 0;
  metaid_status probe = call(nullptr, 0, &needed);
  if (probe != METAID_OK && needed == 0) check(probe);  // failed before sizing
  std::string s(needed, '\0');
  check(call(s.data(), needed, &needed));
  s.resize(needed - 1);  // drop the NUL
  return s;
}

// Shared configuration surface. Precedence: config file, then the convenience
// flags, then --set entries in the order given.
struct ConfigCli {
  std::string config_path;
  std::string input;
  std::string workdir;
  std::string templates;
  std::string seed;
  std::string workers;
  std::vector<std::string> sets;
  bool force = false;
};

void add_config_options(CLI::App* cmd, ConfigCli& cli) {
  cmd->add_option("-c,--config", cli.config_path, "configuration file (INI sections)");
  cmd->add_option("--input", cli.input, "interaction file (omit to synthesize)");
  cmd->add_option("--workdir", cli.workdir, "artifact directory (default out)");
  cmd->add_option("--templates", cli.templates, "prompt template file");
  cmd->add_option("--seed", cli.seed, "global seed");
  cmd->add_option("--workers", cli.workers, "worker threads");
  cmd->add_option("--set", cli.sets, "override any section.key=value (repeatable)");
  cmd->add_flag("--force", cli.force, "recompute stages even when up to date");
}

metaid_config* build_config(const ConfigCli& cli) {
  metaid_config* config = nullptr;
  check(metaid_config_create(&config));
  if (!cli.config_path.empty()) check(metaid_config_load_file(config, cli.config_path.c_str()));
  auto apply = [config](const char* key, const std::string& value) {
    if (!value.empty()) check(metaid_config_set(config, key, value.c_str()));
  };
  apply("paths.input", cli.input);
  apply("paths.workdir", cli.workdir);
  apply("paths.templates", cli.templates);
  apply("run.seed", cli.seed);
  apply("run.workers", cli.workers);
  for (const auto& entry : cli.sets) {
    size_t eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects section.key=value, got '%s'\n", entry.c_str());
      std::exit(1);
    }
    check(metaid_config_set(config, entry.substr(0, eq).c_str(), entry.substr(eq + 1).c_str()));
  }
  return config;
}

void run_stages(const ConfigCli& cli, const char* upto) {
  metaid_config* config = build_config(cli);
  metaid_status status = metaid_pipeline_run(config, upto, cli.force ? 1 : 0);
  metaid_config_free(config);
  check(status);
}

std::string resolved_workdir(const ConfigCli& cli) {
  metaid_config* config = build_config(cli);
  std::string workdir = read_string([&](char* buf, uint64_t cap, uint64_t* needed) {
    return metaid_config_workdir(config, buf, cap, needed);
  });
  metaid_config_free(config);
  return workdir;
}

void cmd_stats(const ConfigCli& cli) {
  run_stages(cli, "ingest");
  std::string path = resolved_workdir(cli) + "/index.json";
  metaid_index* index = nullptr;
  check(metaid_index_load(path.c_str(), &index));
  uint64_t users = 0, items = 0, reviews = 0;
  double sparsity = 0.0;
  check(metaid_index_counts(index, &users, &items, &reviews));
  check(metaid_index_sparsity(index, &sparsity));
  metaid_index_free(index);
  std::printf("users: %" PRIu64 "\n", users);
  std::printf("items: %" PRIu64 "\n", items);
  std::printf("reviews: %" PRIu64 "\n", reviews);
  std::printf("sparsity%%: %.4f\n", sparsity);
}

void cmd_trie(const ConfigCli& cli, const std::vector<std::string>& prefixes) {
  run_stages(cli, "promptgen");
  std::string path = resolved_workdir(cli) + "/trie.json";
  metaid_trie* trie = nullptr;
  check(metaid_trie_load(path.c_str(), &trie));
  if (prefixes.empty()) {
    uint64_t paths = 0;
    check(metaid_trie_path_count(trie, &paths));
    std::printf("paths: %" PRIu64 "\n", paths);
  } else {
    for (const auto& prefix : prefixes) {
      std::string next = read_string([&](char* buf, uint64_t cap, uint64_t* needed) {
        return metaid_trie_continuations(trie, prefix.c_str(), buf, cap, needed);
      });
      std::printf("%s\n", next.c_str());
    }
  }
  metaid_trie_free(trie);
}

struct SynthOpts {
  uint32_t blocks = 2;
  uint32_t users = 50;
  uint32_t items = 50;
  double noise = 0.05;
  uint64_t seed = 42;
  std::string out;
};

void cmd_synth(const SynthOpts& opts) {
  metaid_records* records = nullptr;
  check(metaid_records_synthetic(opts.blocks, opts.users, opts.items, opts.noise, opts.seed,
                                 &records));
  metaid_status status = metaid_records_write_tsv(records, opts.out.c_str());
  uint64_t count = 0;
  if (status == METAID_OK) status = metaid_records_count(records, &count);
  metaid_records_free(records);
  check(status);
  std::printf("records: %" PRIu64 "\n", count);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"identifier pipeline for recommendation corpora"};
  app.require_subcommand(1);

  ConfigCli cli;
  std::vector<std::string> trie_prefixes;
  std::string strategy;
  SynthOpts synth;

  // Stage subcommands share the configuration surface and run the pipeline up
  // to (and including) their stage; earlier stages are reused when unchanged.
  struct StageCmd {
    const char* name;
    const char* upto;
    const char* help;
  };
  const StageCmd stages[] = {
      {"ingest", "ingest", "parse the input and write the dataset index"},
      {"walk", "walk", "build the rating graph and sample meta-path walks"},
      {"embed", "embed", "train skip-gram embeddings on the walk corpus"},
      {"cluster", "cluster", "fit cosine k-means over the embeddings"},
      {"assign-ids", "idgen", "derive identifier tokens and the init matrix"},
      {"metrics", "metrics", "score identifier diversity and memorization"},
      {"prompts", "promptgen", "emit the instruction corpus and decoding trie"},
      {"pipeline", "", "run every stage"},
  };
  for (const auto& stage : stages) {
    CLI::App* cmd = app.add_subcommand(stage.name, stage.help);
    add_config_options(cmd, cli);
    if (std::string(stage.name) == "assign-ids")
      cmd->add_option("--strategy", strategy, "meta, rid, or sid")
          ->check(CLI::IsMember({"meta", "rid", "sid"}));
    const char* upto = stage.upto;
    cmd->callback([&cli, &strategy, upto] {
      if (!strategy.empty()) cli.sets.push_back("ids.strategy=" + strategy);
      run_stages(cli, upto);
    });
  }

  CLI::App* stats = app.add_subcommand("stats", "print dataset statistics");
  add_config_options(stats, cli);
  stats->callback([&cli] { cmd_stats(cli); });

  CLI::App* trie = app.add_subcommand("trie", "inspect the constrained-decoding trie");
  add_config_options(trie, cli);
  trie->add_option("--prefix", trie_prefixes,
                   "space-joined token prefix; prints valid continuations (repeatable)");
  trie->callback([&cli, &trie_prefixes] { cmd_trie(cli, trie_prefixes); });

  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic interaction file");
  synth_cmd->add_option("--blocks", synth.blocks, "block count");
  synth_cmd->add_option("--users", synth.users, "users per block");
  synth_cmd->add_option("--items", synth.items, "items per block");
  synth_cmd->add_option("--noise", synth.noise, "cross-block interaction probability");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--out", synth.out, "output TSV path")->required();
  synth_cmd->callback([&synth] { cmd_synth(synth); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1 regardless of CLI11's code
  }
  return 0;
}

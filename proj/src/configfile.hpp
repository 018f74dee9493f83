#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cluster.hpp"
#include "embed.hpp"
#include "idgen.hpp"
#include "ingest.hpp"
#include "promptgen.hpp"
#include "walker.hpp"

namespace metaid {

// Flat "section.key" -> value store. Files are INI-style UTF-8: [section]
// headers, key = value lines, full-line # or ; comments. Later assignments
// win, so command-line overrides are plain set() calls on top.
struct ConfigMap {
  std::map<std::string, std::string> values;

  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
};

struct SynthSpec {
  uint32_t blocks = 2;
  uint32_t users_per_block = 50;
  uint32_t items_per_block = 50;
  double noise = 0.05;
};

// Fully resolved pipeline settings. Stage seeds are derived from `seed` at run
// time; `workers` never changes artifact content for deterministic stages.
struct PipelineConfig {
  std::string input;  // empty: synthesize records per `synth`
  std::string workdir = "out";
  std::string templates;  // empty: built-in templates
  ParseFormat format;
  SynthSpec synth;
  SplitKind split_kind = SplitKind::leave_one_out;
  uint32_t walk_length = 64;
  uint32_t walk_rounds = 32;
  SgConfig embed;
  uint32_t groups = 100;
  uint32_t cluster_max_iters = 100;
  double cluster_tol = 1e-6;
  IdStrategy strategy = IdStrategy::META;
  double alpha = 0.1;
  uint64_t pair_samples = 10000;
  uint64_t item_samples = 50;
  uint32_t trials = 5;
  double temperature = 1.0;
  bool exact_similarity = false;
  uint32_t heatmap_size = 0;             // 0 disables the heatmap artifact
  std::vector<uint64_t> convergence;     // empty disables the convergence artifact
  std::vector<Task> tasks = all_tasks();
  uint64_t seed = 42;
  unsigned workers = 1;
};

// Applies every entry of the map onto defaults. Throws UsageError on an
// unknown key or a value that fails to parse.
PipelineConfig resolve_config(const ConfigMap& map);

}  // namespace metaid

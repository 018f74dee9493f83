#include "configfile.hpp"

#include <cstdlib>
#include <fstream>

#include "errors.hpp"

namespace metaid {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw UsageError("config " + key + ": not an integer: " + v);
  return x;
}

uint32_t to_u32(const std::string& key, const std::string& v) {
  uint64_t x = to_u64(key, v);
  if (x > 0xffffffffull) throw UsageError("config " + key + ": value too large: " + v);
  return static_cast<uint32_t>(x);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw UsageError("config " + key + ": not a number: " + v);
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config " + key + ": not a boolean: " + v);
}

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= v.size()) {
    size_t pos = v.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(v.substr(start)));
      break;
    }
    out.push_back(trim(v.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

void apply_columns(ParseFormat& format, const std::string& key, const std::string& v) {
  format.col_user = format.col_item = format.col_rating = format.col_timestamp = -1;
  format.col_review = format.col_summary = format.col_explanation = format.col_feature = -1;
  auto names = split_csv(v);
  for (int k = 0; k < static_cast<int>(names.size()); ++k) {
    const std::string& name = names[k];
    if (name == "user") format.col_user = k;
    else if (name == "item") format.col_item = k;
    else if (name == "rating") format.col_rating = k;
    else if (name == "timestamp") format.col_timestamp = k;
    else if (name == "review") format.col_review = k;
    else if (name == "summary") format.col_summary = k;
    else if (name == "explanation") format.col_explanation = k;
    else if (name == "feature") format.col_feature = k;
    else if (name == "-") continue;  // skipped column
    else throw UsageError("config " + key + ": unknown column name: " + name);
  }
  if (format.col_user < 0 || format.col_item < 0 || format.col_rating < 0 ||
      format.col_timestamp < 0)
    throw UsageError("config " + key + ": user, item, rating, timestamp are required");
}

char parse_delimiter(const std::string& key, const std::string& v) {
  if (v == "\\t" || v == "tab") return '\t';
  if (v == "space") return ' ';
  if (v.size() == 1) return v[0];
  throw UsageError("config " + key + ": delimiter must be one character, 'tab' or 'space'");
}

}  // namespace

void ConfigMap::set(const std::string& key, const std::string& value) {
  values[key] = value;
}

void ConfigMap::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::string line, section;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw UsageError("config " + path + " line " + std::to_string(line_no) +
                         ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("config " + path + " line " + std::to_string(line_no) +
                       ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw UsageError("config " + path + " line " + std::to_string(line_no) + ": empty key");
    set(section.empty() ? key : section + "." + key, value);
  }
}

PipelineConfig resolve_config(const ConfigMap& map) {
  PipelineConfig cfg;
  for (const auto& [key, v] : map.values) {
    if (key == "paths.input") cfg.input = v;
    else if (key == "paths.workdir") cfg.workdir = v;
    else if (key == "paths.templates") cfg.templates = v;
    else if (key == "input.format") {
      if (v == "tsv") cfg.format.jsonl = false;
      else if (v == "jsonl") cfg.format.jsonl = true;
      else throw UsageError("config input.format: expected tsv or jsonl");
    } else if (key == "input.delimiter") cfg.format.delimiter = parse_delimiter(key, v);
    else if (key == "input.columns") apply_columns(cfg.format, key, v);
    else if (key == "synth.blocks") cfg.synth.blocks = to_u32(key, v);
    else if (key == "synth.users_per_block") cfg.synth.users_per_block = to_u32(key, v);
    else if (key == "synth.items_per_block") cfg.synth.items_per_block = to_u32(key, v);
    else if (key == "synth.noise") cfg.synth.noise = to_double(key, v);
    else if (key == "split.kind") {
      if (v == "leave-one-out" || v == "loo") cfg.split_kind = SplitKind::leave_one_out;
      else if (v == "random") cfg.split_kind = SplitKind::random_80_10_10;
      else throw UsageError("config split.kind: expected leave-one-out or random");
    } else if (key == "walk.length") cfg.walk_length = to_u32(key, v);
    else if (key == "walk.rounds") cfg.walk_rounds = to_u32(key, v);
    else if (key == "embed.dim") cfg.embed.dim = to_u32(key, v);
    else if (key == "embed.window") cfg.embed.window = to_u32(key, v);
    else if (key == "embed.negatives") cfg.embed.negatives = to_u32(key, v);
    else if (key == "embed.learning_rate") cfg.embed.learning_rate = to_double(key, v);
    else if (key == "embed.epochs") cfg.embed.epochs = to_u32(key, v);
    else if (key == "embed.deterministic") cfg.embed.deterministic = to_bool(key, v);
    else if (key == "cluster.groups") cfg.groups = to_u32(key, v);
    else if (key == "cluster.max_iters") cfg.cluster_max_iters = to_u32(key, v);
    else if (key == "cluster.tol") cfg.cluster_tol = to_double(key, v);
    else if (key == "ids.strategy") cfg.strategy = strategy_from_name(v);
    else if (key == "ids.alpha") cfg.alpha = to_double(key, v);
    else if (key == "metrics.pair_samples") cfg.pair_samples = to_u64(key, v);
    else if (key == "metrics.item_samples") cfg.item_samples = to_u64(key, v);
    else if (key == "metrics.trials") cfg.trials = to_u32(key, v);
    else if (key == "metrics.temperature") cfg.temperature = to_double(key, v);
    else if (key == "metrics.exact") cfg.exact_similarity = to_bool(key, v);
    else if (key == "metrics.heatmap_size") cfg.heatmap_size = to_u32(key, v);
    else if (key == "metrics.convergence") {
      cfg.convergence.clear();
      if (!v.empty())
        for (const auto& part : split_csv(v)) cfg.convergence.push_back(to_u64(key, part));
    } else if (key == "prompts.tasks") {
      cfg.tasks.clear();
      for (const auto& part : split_csv(v))
        if (!part.empty()) cfg.tasks.push_back(task_from_name(part));
      if (cfg.tasks.empty()) throw UsageError("config prompts.tasks: no tasks listed");
    } else if (key == "run.seed") cfg.seed = to_u64(key, v);
    else if (key == "run.workers") cfg.workers = to_u32(key, v);
    else throw UsageError("unknown config key: " + key);
  }
  return cfg;
}

}  // namespace metaid

#include "walker.hpp"

#include <fstream>
#include <sstream>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace metaid {

WalkCorpus sample_walks(const InteractionGraph& graph, const WalkConfig& config) {
  if (config.walk_length < 2) throw UsageError("walk_length must be >= 2");
  if (config.rounds_per_node < 1) throw UsageError("rounds_per_node must be >= 1");
  if (graph.total_edges() == 0) throw DataError("cannot walk a graph with zero edges");
  uint32_t m = graph.user_count;
  uint32_t n = graph.item_count;

  // Canonical task order: global node id, then rating.
  struct Task {
    uint32_t node;  // global id
    int rating;
  };
  std::vector<Task> tasks;
  for (uint32_t node = 0; node < m + n; ++node) {
    bool is_item = node >= m;
    uint32_t local = is_item ? node - m : node;
    for (int r = 1; r <= 5; ++r)
      if (!rating_neighbors(graph, is_item, local, r).empty()) tasks.push_back({node, r});
  }

  WalkCorpus corpus;
  corpus.user_count = m;
  corpus.item_count = n;
  corpus.config = config;
  corpus.walks.resize(tasks.size() * static_cast<size_t>(config.rounds_per_node));

  parallel_for(tasks.size(), config.workers, [&](uint64_t begin, uint64_t end) {
    for (uint64_t t = begin; t < end; ++t) {
      const Task& task = tasks[t];
      for (uint32_t round = 0; round < config.rounds_per_node; ++round) {
        Rng rng(derive_seed(config.seed,
                            {task.node, static_cast<uint64_t>(task.rating), round}));
        std::vector<uint32_t> walk;
        walk.reserve(config.walk_length);
        uint32_t cur = task.node;
        walk.push_back(cur);
        for (uint32_t step = 1; step < config.walk_length; ++step) {
          bool is_item = cur >= m;
          uint32_t local = is_item ? cur - m : cur;
          const auto& nbrs = rating_neighbors(graph, is_item, local, task.rating);
          if (nbrs.empty()) break;  // dead end: truncate
          uint32_t next_local = nbrs[rng.below(nbrs.size())];
          cur = is_item ? next_local : m + next_local;
          walk.push_back(cur);
        }
        corpus.walks[t * config.rounds_per_node + round] = std::move(walk);
      }
    }
  });
  // Drop degenerate single-node walks (possible only via immediate dead ends).
  std::vector<std::vector<uint32_t>> kept;
  kept.reserve(corpus.walks.size());
  for (auto& w : corpus.walks)
    if (w.size() >= 2) kept.push_back(std::move(w));
  corpus.walks = std::move(kept);
  return corpus;
}

void save_walks_text(const WalkCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  uint32_t m = corpus.user_count;
  for (const auto& walk : corpus.walks) {
    for (size_t k = 0; k < walk.size(); ++k) {
      if (k) out << ' ';
      if (walk[k] < m)
        out << 'u' << walk[k];
      else
        out << 'i' << (walk[k] - m);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

WalkCorpus load_walks_text(const std::string& path, uint32_t user_count, uint32_t item_count) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  WalkCorpus corpus;
  corpus.user_count = user_count;
  corpus.item_count = item_count;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<uint32_t> walk;
    while (ss >> tok) {
      if (tok.size() < 2 || (tok[0] != 'u' && tok[0] != 'i'))
        throw DataError("walks line " + std::to_string(line_no) + ": bad token " + tok);
      uint32_t idx = 0;
      for (size_t k = 1; k < tok.size(); ++k) {
        if (tok[k] < '0' || tok[k] > '9')
          throw DataError("walks line " + std::to_string(line_no) + ": bad token " + tok);
        idx = idx * 10 + static_cast<uint32_t>(tok[k] - '0');
      }
      if (tok[0] == 'u') {
        if (idx >= user_count)
          throw DataError("walks line " + std::to_string(line_no) + ": user out of range");
        walk.push_back(idx);
      } else {
        if (idx >= item_count)
          throw DataError("walks line " + std::to_string(line_no) + ": item out of range");
        walk.push_back(user_count + idx);
      }
    }
    if (!walk.empty()) corpus.walks.push_back(std::move(walk));
  }
  return corpus;
}

}  // namespace metaid

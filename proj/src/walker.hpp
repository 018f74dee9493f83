#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graph.hpp"

namespace metaid {

struct WalkConfig {
  uint32_t walk_length = 64;
  uint32_t rounds_per_node = 32;
  uint64_t seed = 0;
  unsigned workers = 1;
};

// Node tokens are global ids: users occupy [0, m), items [m, m+n).
struct WalkCorpus {
  uint32_t user_count = 0;
  uint32_t item_count = 0;
  WalkConfig config;
  std::vector<std::vector<uint32_t>> walks;

  uint32_t node_count() const { return user_count + item_count; }
};

// One walk per (node, rating with edges, round), every step drawn uniformly
// from the current node's neighbors at the walk's fixed rating. The walk
// stream order is canonical (node, then rating, then round) and each walk
// seeds its own generator from those coordinates, so the output is identical
// for any worker count. Throws DataError on a graph with zero edges.
WalkCorpus sample_walks(const InteractionGraph& graph, const WalkConfig& config);

// One walk per line, tokens "u{idx}" / "i{idx}" separated by spaces.
void save_walks_text(const WalkCorpus& corpus, const std::string& path);
WalkCorpus load_walks_text(const std::string& path, uint32_t user_count, uint32_t item_count);

}  // namespace metaid

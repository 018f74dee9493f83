#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ingest.hpp"

namespace metaid {

// Bipartite user-item adjacency, partitioned by rating level 1..5.
// Neighbor lists are sorted ascending so seeded index draws are reproducible.
struct InteractionGraph {
  uint32_t user_count = 0;
  uint32_t item_count = 0;
  // adjacency[r-1]: per-user then per-item neighbor lists at rating r.
  std::vector<std::vector<uint32_t>> user_adj[5];
  std::vector<std::vector<uint32_t>> item_adj[5];
  uint64_t edge_count[5] = {0, 0, 0, 0, 0};

  uint64_t total_edges() const {
    uint64_t n = 0;
    for (uint64_t c : edge_count) n += c;
    return n;
  }
};

InteractionGraph build_graph(const DatasetIndex& index);

// Neighbor list of a user (is_item=false) or item (is_item=true) node at the
// given rating. Throws UsageError on an out-of-range node or rating.
const std::vector<uint32_t>& rating_neighbors(const InteractionGraph& graph, bool is_item,
                                              uint32_t node, int rating);

// Per-rating edge lists, for debugging and the pipeline artifact.
void save_graph_json(const InteractionGraph& graph, const std::string& path);
InteractionGraph load_graph_json(const std::string& path);

}  // namespace metaid

#include "graph.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"

namespace metaid {

using nlohmann::json;

InteractionGraph build_graph(const DatasetIndex& index) {
  InteractionGraph g;
  g.user_count = index.user_count();
  g.item_count = index.item_count();
  for (int r = 0; r < 5; ++r) {
    g.user_adj[r].resize(g.user_count);
    g.item_adj[r].resize(g.item_count);
  }
  for (const auto& x : index.interactions) {
    int r = x.rating - 1;
    g.user_adj[r][x.user].push_back(x.item);
    g.item_adj[r][x.item].push_back(x.user);
    ++g.edge_count[r];
  }
  // Duplicate interactions stay as parallel edges; sorting keeps them adjacent.
  for (int r = 0; r < 5; ++r) {
    for (auto& nbrs : g.user_adj[r]) std::sort(nbrs.begin(), nbrs.end());
    for (auto& nbrs : g.item_adj[r]) std::sort(nbrs.begin(), nbrs.end());
  }
  return g;
}

const std::vector<uint32_t>& rating_neighbors(const InteractionGraph& graph, bool is_item,
                                              uint32_t node, int rating) {
  if (rating < 1 || rating > 5)
    throw UsageError("rating out of range: " + std::to_string(rating));
  uint32_t limit = is_item ? graph.item_count : graph.user_count;
  if (node >= limit) throw UsageError("node index out of range: " + std::to_string(node));
  return is_item ? graph.item_adj[rating - 1][node] : graph.user_adj[rating - 1][node];
}

void save_graph_json(const InteractionGraph& graph, const std::string& path) {
  json doc;
  doc["users"] = graph.user_count;
  doc["items"] = graph.item_count;
  json edges = json::object();
  for (int r = 0; r < 5; ++r) {
    json list = json::array();
    for (uint32_t u = 0; u < graph.user_count; ++u)
      for (uint32_t i : graph.user_adj[r][u]) list.push_back(json::array({u, i}));
    edges[std::to_string(r + 1)] = std::move(list);
  }
  doc["edges"] = std::move(edges);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << doc.dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

InteractionGraph load_graph_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw DataError("invalid JSON in " + path);
  InteractionGraph g;
  try {
    g.user_count = doc.at("users").get<uint32_t>();
    g.item_count = doc.at("items").get<uint32_t>();
    for (int r = 0; r < 5; ++r) {
      g.user_adj[r].resize(g.user_count);
      g.item_adj[r].resize(g.item_count);
      for (const auto& e : doc.at("edges").at(std::to_string(r + 1))) {
        uint32_t u = e.at(0).get<uint32_t>();
        uint32_t i = e.at(1).get<uint32_t>();
        if (u >= g.user_count || i >= g.item_count)
          throw DataError("edge endpoint out of range in " + path);
        g.user_adj[r][u].push_back(i);
        g.item_adj[r][i].push_back(u);
        ++g.edge_count[r];
      }
      for (auto& nbrs : g.user_adj[r]) std::sort(nbrs.begin(), nbrs.end());
      for (auto& nbrs : g.item_adj[r]) std::sort(nbrs.begin(), nbrs.end());
    }
  } catch (const json::exception& e) {
    throw DataError("malformed graph file " + path + ": " + e.what());
  }
  return g;
}

}  // namespace metaid

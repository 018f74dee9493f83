#include "cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace metaid {

using nlohmann::json;

namespace {

double dot_rows(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

double norm_row(std::span<const double> a) { return std::sqrt(dot_rows(a, a)); }

uint64_t count_distinct_rows(const Matrix& points) {
  std::vector<uint64_t> order(points.rows);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](uint64_t a, uint64_t b) {
    auto ra = points.row(a), rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  uint64_t distinct = points.rows == 0 ? 0 : 1;
  for (uint64_t k = 1; k < points.rows; ++k) {
    auto ra = points.row(order[k - 1]), rb = points.row(order[k]);
    if (!std::equal(ra.begin(), ra.end(), rb.begin())) ++distinct;
  }
  return distinct;
}

}  // namespace

ClusterModel kmeans_cosine(const Matrix& points, const ClusterConfig& config) {
  uint64_t n = points.rows;
  uint32_t d = points.dim;
  uint32_t G = config.groups;
  if (G < 1) throw UsageError("groups must be >= 1");
  if (n == 0) throw DataError("no points to cluster");
  if (G > n) throw DataError("more groups than points");

  Matrix unit(n, d);
  for (uint64_t x = 0; x < n; ++x) {
    double nn = norm_row(points.row(x));
    if (nn == 0.0) throw DataError("zero vector at row " + std::to_string(x) +
                                   ": cosine distance undefined");
    auto src = points.row(x);
    auto dst = unit.row(x);
    for (uint32_t j = 0; j < d; ++j) dst[j] = src[j] / nn;
  }
  if (count_distinct_rows(points) < G)
    throw DataError("fewer distinct vectors than groups");

  // k-means++ over normalized points, weights = cosine distance to the
  // nearest chosen direction.
  Rng rng(derive_seed(config.seed, {0x4b4d5050ull}));  // "KMPP"
  Matrix dirs(G, d);
  std::vector<double> best_dist(n, 2.0);
  {
    uint64_t first = rng.below(n);
    auto src = unit.row(first);
    auto dst = dirs.row(0);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  for (uint32_t g = 1; g < G; ++g) {
    double total = 0.0;
    for (uint64_t x = 0; x < n; ++x) {
      double dist = 1.0 - dot_rows(unit.row(x), dirs.row(g - 1));
      if (dist < best_dist[x]) best_dist[x] = dist;
      if (best_dist[x] > 0.0) total += best_dist[x];
    }
    uint64_t pick = n;  // sentinel
    if (total > 0.0) {
      double target = rng.unit() * total;
      double run = 0.0;
      for (uint64_t x = 0; x < n; ++x) {
        if (best_dist[x] <= 0.0) continue;
        run += best_dist[x];
        if (run >= target) {
          pick = x;
          break;
        }
      }
    }
    if (pick == n) {
      // All remaining mass at distance zero; take the first point distinct
      // from every chosen direction (one exists: distinct rows >= G).
      for (uint64_t x = 0; x < n && pick == n; ++x)
        if (best_dist[x] > 0.0) pick = x;
      if (pick == n) pick = 0;
    }
    auto src = unit.row(pick);
    auto dst = dirs.row(g);
    std::copy(src.begin(), src.end(), dst.begin());
  }

  std::vector<uint32_t> assign(n, 0);
  std::vector<uint32_t> sizes(G, 0);
  ClusterModel model;
  model.groups = G;
  model.dim = d;

  Matrix sums(G, d);
  auto rebuild_sums = [&]() {
    std::fill(sums.data.begin(), sums.data.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (uint64_t x = 0; x < n; ++x) {  // fixed entity order: deterministic sums
      auto row = unit.row(x);
      auto acc = sums.row(assign[x]);
      for (uint32_t j = 0; j < d; ++j) acc[j] += row[j];
      ++sizes[assign[x]];
    }
  };

  bool converged = false;
  uint32_t iter = 0;
  for (; iter < config.max_iters; ++iter) {
    // Assignment by max cosine to the current directions; ties keep lowest g.
    std::vector<uint32_t> next(n);
    parallel_for(n, config.workers, [&](uint64_t begin, uint64_t end) {
      for (uint64_t x = begin; x < end; ++x) {
        double best = -2.0;
        uint32_t best_g = 0;
        for (uint32_t g = 0; g < G; ++g) {
          double cos = dot_rows(unit.row(x), dirs.row(g));
          if (cos > best) {
            best = cos;
            best_g = g;
          }
        }
        next[x] = best_g;
      }
    });
    bool changed = iter == 0 || next != assign;
    assign = std::move(next);
    rebuild_sums();

    // Repair empty clusters by seizing the worst-fitting point of any
    // cluster that can spare one.
    for (uint32_t g = 0; g < G; ++g) {
      if (sizes[g] != 0) continue;
      double worst = -1.0;
      uint64_t victim = n;
      for (uint64_t x = 0; x < n; ++x) {
        if (sizes[assign[x]] < 2) continue;
        double dist = 1.0 - dot_rows(unit.row(x), dirs.row(assign[x]));
        if (dist > worst) {
          worst = dist;
          victim = x;
        }
      }
      if (victim == n) throw DataError("cannot repair empty cluster");
      uint32_t old = assign[victim];
      auto row = unit.row(victim);
      auto from = sums.row(old);
      auto to = sums.row(g);
      for (uint32_t j = 0; j < d; ++j) {
        from[j] -= row[j];
        to[j] += row[j];
      }
      --sizes[old];
      ++sizes[g];
      assign[victim] = g;
      changed = true;
    }

    double movement = 0.0;
    for (uint32_t g = 0; g < G; ++g) {
      auto sum = sums.row(g);
      double nn = norm_row(sum);
      auto dir = dirs.row(g);
      if (nn == 0.0) continue;  // members cancelled; keep the old direction
      double delta = 0.0;
      for (uint32_t j = 0; j < d; ++j) {
        double v = sum[j] / nn;
        delta += (v - dir[j]) * (v - dir[j]);
        dir[j] = v;
      }
      movement = std::max(movement, std::sqrt(delta));
    }
    if (!changed) {
      converged = true;
      ++iter;
      break;
    }
    if (movement < config.tol) {
      converged = true;
      ++iter;
      break;
    }
  }

  model.assignment = std::move(assign);
  model.cluster_sizes = std::move(sizes);
  model.iterations = iter;
  model.converged = converged;
  model.centroids = Matrix(G, d);
  for (uint64_t x = 0; x < n; ++x) {  // raw-vector means, fixed entity order
    auto row = points.row(x);
    auto acc = model.centroids.row(model.assignment[x]);
    for (uint32_t j = 0; j < d; ++j) acc[j] += row[j];
  }
  for (uint32_t g = 0; g < G; ++g) {
    auto acc = model.centroids.row(g);
    for (uint32_t j = 0; j < d; ++j) acc[j] /= static_cast<double>(model.cluster_sizes[g]);
  }
  return model;
}

void rank_within_cluster(ClusterModel& model, const Matrix& points) {
  uint64_t n = points.rows;
  if (model.assignment.size() != n) throw DataError("model/points size mismatch");
  model.fine_rank.assign(n, 0);
  std::vector<std::vector<uint64_t>> members(model.groups);
  for (uint64_t x = 0; x < n; ++x) members[model.assignment[x]].push_back(x);
  for (uint32_t g = 0; g < model.groups; ++g) {
    auto mu = model.centroids.row(g);
    double mu_norm = norm_row(mu);
    std::vector<double> dist(members[g].size());
    for (size_t k = 0; k < members[g].size(); ++k) {
      auto row = points.row(members[g][k]);
      double nn = norm_row(row);
      // Zero centroid makes every distance equal; ranks fall back to index order.
      dist[k] = (mu_norm == 0.0 || nn == 0.0)
                    ? 0.0
                    : 1.0 - dot_rows(row, mu) / (nn * mu_norm);
    }
    std::vector<size_t> order(members[g].size());
    std::iota(order.begin(), order.end(), 0);
    // Members arrive in ascending entity order; stable sort keeps that order
    // among ties.
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return dist[a] < dist[b]; });
    for (size_t r = 0; r < order.size(); ++r)
      model.fine_rank[members[g][order[r]]] = static_cast<uint32_t>(r + 1);
  }
}

void save_clusters_json(const ClusterModel& model, const std::string& path) {
  json doc;
  doc["groups"] = model.groups;
  doc["dim"] = model.dim;
  json cents = json::array();
  for (uint32_t g = 0; g < model.groups; ++g) {
    auto row = model.centroids.row(g);
    cents.push_back(std::vector<double>(row.begin(), row.end()));
  }
  doc["centroids"] = std::move(cents);
  doc["assignment"] = model.assignment;
  doc["fine_rank"] = model.fine_rank;
  doc["cluster_sizes"] = model.cluster_sizes;
  doc["iterations"] = model.iterations;
  doc["converged"] = model.converged;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << doc.dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

ClusterModel load_clusters_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw DataError("invalid JSON in " + path);
  ClusterModel model;
  try {
    model.groups = doc.at("groups").get<uint32_t>();
    model.dim = doc.at("dim").get<uint32_t>();
    model.centroids = Matrix(model.groups, model.dim);
    const auto& cents = doc.at("centroids");
    if (cents.size() != model.groups) throw DataError("centroid count mismatch in " + path);
    for (uint32_t g = 0; g < model.groups; ++g) {
      auto row = model.centroids.row(g);
      const auto& src = cents[g];
      if (src.size() != model.dim) throw DataError("centroid dim mismatch in " + path);
      for (uint32_t j = 0; j < model.dim; ++j) row[j] = src[j].get<double>();
    }
    model.assignment = doc.at("assignment").get<std::vector<uint32_t>>();
    model.fine_rank = doc.at("fine_rank").get<std::vector<uint32_t>>();
    model.cluster_sizes = doc.at("cluster_sizes").get<std::vector<uint32_t>>();
    model.iterations = doc.at("iterations").get<uint32_t>();
    model.converged = doc.at("converged").get<bool>();
  } catch (const json::exception& e) {
    throw DataError("malformed cluster file " + path + ": " + e.what());
  }
  return model;
}

}  // namespace metaid

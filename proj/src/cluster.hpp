#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace metaid {

struct ClusterConfig {
  uint32_t groups = 100;
  uint32_t max_iters = 100;
  double tol = 1e-6;
  uint64_t seed = 0;
  unsigned workers = 1;
};

// Cosine K-Means fit over one joint point set (users and items stacked).
// `centroids` row g is the arithmetic mean of the raw vectors assigned to g;
// assignment uses the spherical direction (normalized mean of normalized
// members), which is tracked separately during iteration.
struct ClusterModel {
  uint32_t groups = 0;
  uint32_t dim = 0;
  Matrix centroids;                 // raw-mean centroids, G x d
  std::vector<uint32_t> assignment;  // per entity, in [0, G)
  std::vector<uint32_t> fine_rank;   // per entity, 1..cluster size
  std::vector<uint32_t> cluster_sizes;
  uint32_t iterations = 0;
  bool converged = false;
};

// Lloyd iterations with k-means++ seeding on unit-normalized copies of the
// input rows. Stops when assignments are stable, direction movement drops
// below tol, or max_iters is reached. Empty clusters seize the point farthest
// from its own centroid among clusters of size >= 2. Throws DataError on a
// zero vector or fewer distinct rows than groups.
ClusterModel kmeans_cosine(const Matrix& points, const ClusterConfig& config);

// Populates fine_rank: within each cluster, members ordered by ascending
// cosine distance to the raw-mean centroid, ties broken by ascending entity
// index, ranked 1..size.
void rank_within_cluster(ClusterModel& model, const Matrix& points);

void save_clusters_json(const ClusterModel& model, const std::string& path);
ClusterModel load_clusters_json(const std::string& path);

}  // namespace metaid

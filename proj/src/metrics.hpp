#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "idgen.hpp"
#include "ingest.hpp"
#include "matrix.hpp"

namespace metaid {

// Precomputed rating deviations. For every item, dev lists hold (user, sum of
// that user's deviations on the item) sorted by user; dev_sum/dev_sq_sum count
// every rating occurrence separately.
struct SimilarityOracle {
  std::vector<double> user_mean;
  std::vector<std::vector<std::pair<uint32_t, double>>> item_user_dev;
  std::vector<double> dev_sum;     // Dev(i)
  std::vector<double> dev_sq_sum;  // DevS(i)
};

SimilarityOracle build_similarity_oracle(const DatasetIndex& index);

// Adjusted cosine over the common-rater set. Empty common set or zero
// deviation energy on either side yields nullopt (undefined).
std::optional<double> adjusted_cosine_exact(const SimilarityOracle& oracle, uint32_t i,
                                            uint32_t j);

// Approximation Dev(i)*Dev(j) / (sqrt(DevS(i)) * sqrt(DevS(j))); undefined
// when either DevS is zero.
std::optional<double> adjusted_cosine_fast(const SimilarityOracle& oracle, uint32_t i,
                                           uint32_t j);

// Surface -> f_init row lookup. Borrows the vocabulary's matrix.
struct TokenTable {
  std::unordered_map<std::string, uint32_t> row_of;
  const Matrix* rows = nullptr;
};

TokenTable make_token_table(const Vocabulary& vocab);

// Mean of the sequence's token vectors. Throws DataError naming any token
// absent from the table.
std::vector<double> id_representation(const std::vector<std::string>& tokens,
                                      const TokenTable& table);

// One representation row per user (is_user) or item.
Matrix representations_for(const IdAssignment& assignment, const TokenTable& table,
                           bool is_user);

// Mean symmetric KL divergence over sampled pairs of softmax-normalized rows.
// Draws pair_samples pairs with replacement, or enumerates every unordered
// pair once when pair_samples covers them all.
double compute_ds(const Matrix& reps, uint64_t pair_samples, uint64_t seed,
                  double softmax_temperature);

struct MsResult {
  double ms = 0.0;
  uint64_t pairs_used = 0;
  uint64_t pairs_skipped = 0;  // undefined ground-truth similarity
};

// Mean of (cos(e_i, e_j) - sim(i, j))^2 over all unordered pairs among
// item_samples sampled items. exact selects the common-rater formula instead
// of the Dev/DevS approximation.
MsResult compute_ms(const Matrix& item_reps, const SimilarityOracle& oracle,
                    uint64_t item_samples, uint64_t seed, bool exact);

struct ConvergencePoint {
  uint64_t pair_samples = 0;
  double mean = 0.0;
  double std_dev = 0.0;
};

// DS repeated `trials` times per sample count with independently derived
// seeds; sample standard deviation uses the n-1 denominator.
std::vector<ConvergencePoint> ds_convergence(const Matrix& reps,
                                             const std::vector<uint64_t>& pair_sample_counts,
                                             uint32_t trials, uint64_t seed,
                                             double softmax_temperature);

struct HeatmapResult {
  std::vector<uint32_t> items;  // sampled item indices, ascending
  Matrix cosine;                // sample x sample, unit diagonal
  Matrix ground_truth;          // NaN where undefined
  std::vector<char> defined;    // row-major mask for ground_truth
};

HeatmapResult similarity_heatmap(const Matrix& item_reps, const SimilarityOracle& oracle,
                                 uint32_t sample_size, uint64_t seed, bool exact);

void save_heatmap_csv(const HeatmapResult& result, const std::string& cosine_path,
                      const std::string& ground_truth_path);
void save_convergence_csv(const std::vector<ConvergencePoint>& points, const std::string& path);

}  // namespace metaid

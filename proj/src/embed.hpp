#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "matrix.hpp"
#include "walker.hpp"

namespace metaid {

struct SgConfig {
  uint32_t dim = 64;
  uint32_t window = 5;
  uint32_t negatives = 5;
  double learning_rate = 1e-3;
  uint32_t epochs = 10;
  uint64_t seed = 0;
  bool deterministic = true;  // false permits racy multi-worker updates
  unsigned workers = 1;
};

// Skip-gram parameter pair. Rows 0..m-1 are users, m..m+n-1 items. The input
// matrix is the representation consumed downstream; the output matrix is the
// context side of the objective.
struct EmbeddingTable {
  uint32_t user_count = 0;
  uint32_t item_count = 0;
  Matrix input;
  Matrix output;
};

struct TrainResult {
  EmbeddingTable table;
  std::vector<double> epoch_mean_loss;
};

// One SGD step of the SGNS loss
//   L = -log sigma(center.context) - sum_neg log sigma(-center.neg).
// All dot products are taken before any write, so the returned loss and the
// applied gradients are both evaluated at the pre-update parameters.
double sgns_step(std::span<double> center_in, std::span<double> context_out,
                 const std::vector<std::span<double>>& negatives_out, double learning_rate);

// SGD over all (center, context) pairs within `window` positions, negatives
// drawn from the corpus unigram distribution raised to 3/4. Deterministic mode
// fixes the update order; otherwise walks are processed concurrently and
// updates may race. Throws DataError on an empty corpus or non-finite loss.
TrainResult train_skipgram(const WalkCorpus& corpus, const SgConfig& config);

}  // namespace metaid

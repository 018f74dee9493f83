#include "embed.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace metaid {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -log sigma(x), computed without overflow for large |x|.
inline double softplus_neg(double x) {
  double z = -x;
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

struct StepScratch {
  std::vector<double> dot_neg;
  std::vector<double> g_neg;
  std::vector<double> center_grad;
  std::vector<double> center_pre;
};

// Shared by the public sgns_step and the training loop; scratch buffers are
// caller-owned so the hot path does not allocate.
double step_impl(std::span<double> center_in, std::span<double> context_out,
                 const std::vector<std::span<double>>& negatives_out, double learning_rate,
                 StepScratch& s) {
  size_t d = center_in.size();
  size_t negs = negatives_out.size();
  s.dot_neg.assign(negs, 0.0);
  s.g_neg.resize(negs);
  s.center_grad.assign(d, 0.0);
  s.center_pre.assign(center_in.begin(), center_in.end());

  double dot_pos = 0.0;
  for (size_t j = 0; j < d; ++j) dot_pos += center_in[j] * context_out[j];
  for (size_t k = 0; k < negs; ++k) {
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j) acc += center_in[j] * negatives_out[k][j];
    s.dot_neg[k] = acc;
  }

  double loss = softplus_neg(dot_pos);
  for (double v : s.dot_neg) loss += softplus_neg(-v);

  double g_pos = sigmoid(dot_pos) - 1.0;  // dL/d(dot_pos)
  for (size_t k = 0; k < negs; ++k) s.g_neg[k] = sigmoid(s.dot_neg[k]);

  for (size_t j = 0; j < d; ++j) s.center_grad[j] = g_pos * context_out[j];
  for (size_t k = 0; k < negs; ++k)
    for (size_t j = 0; j < d; ++j) s.center_grad[j] += s.g_neg[k] * negatives_out[k][j];

  // Output rows take gradients against the pre-update center.
  for (size_t j = 0; j < d; ++j) context_out[j] -= learning_rate * g_pos * s.center_pre[j];
  for (size_t k = 0; k < negs; ++k)
    for (size_t j = 0; j < d; ++j)
      negatives_out[k][j] -= learning_rate * s.g_neg[k] * s.center_pre[j];
  for (size_t j = 0; j < d; ++j) center_in[j] -= learning_rate * s.center_grad[j];
  return loss;
}

// Cumulative-weight table for unigram^0.75 negative draws.
struct NegativeTable {
  std::vector<uint32_t> tokens;
  std::vector<double> cumulative;
  double total = 0.0;

  uint32_t draw(Rng& rng) const {
    double x = rng.unit() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    size_t k = static_cast<size_t>(it - cumulative.begin());
    if (k >= tokens.size()) k = tokens.size() - 1;
    return tokens[k];
  }
};

NegativeTable build_negative_table(const WalkCorpus& corpus, uint32_t node_count) {
  std::vector<uint64_t> counts(node_count, 0);
  for (const auto& walk : corpus.walks)
    for (uint32_t tok : walk) {
      if (tok >= node_count) throw DataError("corpus token out of range: " + std::to_string(tok));
      ++counts[tok];
    }
  NegativeTable table;
  double run = 0.0;
  for (uint32_t tok = 0; tok < node_count; ++tok) {
    if (counts[tok] == 0) continue;
    run += std::pow(static_cast<double>(counts[tok]), 0.75);
    table.tokens.push_back(tok);
    table.cumulative.push_back(run);
  }
  table.total = run;
  if (table.tokens.empty()) throw DataError("empty walk corpus");
  return table;
}

}  // namespace

double sgns_step(std::span<double> center_in, std::span<double> context_out,
                 const std::vector<std::span<double>>& negatives_out, double learning_rate) {
  StepScratch scratch;
  return step_impl(center_in, context_out, negatives_out, learning_rate, scratch);
}

TrainResult train_skipgram(const WalkCorpus& corpus, const SgConfig& config) {
  if (config.dim < 2) throw UsageError("dim must be >= 2");
  if (config.window < 1) throw UsageError("window must be >= 1");
  if (config.negatives < 1) throw UsageError("negatives must be >= 1");
  if (config.learning_rate <= 0.0) throw UsageError("learning_rate must be > 0");
  if (corpus.walks.empty()) throw DataError("empty walk corpus");
  uint32_t nodes = corpus.node_count();
  if (nodes == 0) throw DataError("corpus has no node universe");
  NegativeTable negatives = build_negative_table(corpus, nodes);

  TrainResult result;
  result.table.user_count = corpus.user_count;
  result.table.item_count = corpus.item_count;
  result.table.input = Matrix(nodes, config.dim);
  result.table.output = Matrix(nodes, config.dim);
  {
    Rng init(derive_seed(config.seed, {0x494e4954ull}));  // "INIT"
    double half = 0.5 / config.dim;
    for (double& v : result.table.input.data) v = init.range(-half, half);
  }

  Matrix& input = result.table.input;
  Matrix& output = result.table.output;

  struct WalkScratch {
    std::vector<uint32_t> neg_tokens;
    std::vector<std::span<double>> neg_rows;
    StepScratch step;
  };

  auto process_walk = [&](uint64_t epoch, uint64_t walk_idx, WalkScratch& ws, double& loss_sum,
                          uint64_t& pair_count) {
    const auto& walk = corpus.walks[walk_idx];
    Rng rng(derive_seed(config.seed, {0x5347ull, epoch, walk_idx}));
    size_t len = walk.size();
    for (size_t p = 0; p < len; ++p) {
      size_t lo = p >= config.window ? p - config.window : 0;
      size_t hi = std::min(len - 1, p + config.window);
      for (size_t q = lo; q <= hi; ++q) {
        if (q == p) continue;
        uint32_t center = walk[p];
        uint32_t context = walk[q];
        ws.neg_rows.clear();
        for (uint32_t k = 0; k < config.negatives; ++k) {
          uint32_t tok = context;
          for (int tries = 0; tries < 100 && tok == context; ++tries)
            tok = negatives.draw(rng);
          // A one-token corpus cannot avoid the context; drop that draw.
          if (tok != context) ws.neg_rows.push_back(output.row(tok));
        }
        double loss = step_impl(input.row(center), output.row(context), ws.neg_rows,
                                config.learning_rate, ws.step);
        if (!std::isfinite(loss))
          throw DataError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", walk " +
                          std::to_string(walk_idx));
        loss_sum += loss;
        ++pair_count;
      }
    }
  };

  WalkScratch serial_scratch;
  for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    uint64_t pair_count = 0;
    if (config.deterministic || config.workers <= 1) {
      for (uint64_t w = 0; w < corpus.walks.size(); ++w)
        process_walk(epoch, w, serial_scratch, loss_sum, pair_count);
    } else {
      std::mutex mu;
      std::exception_ptr failure;
      parallel_for(corpus.walks.size(), config.workers, [&](uint64_t begin, uint64_t end) {
        WalkScratch local;
        double local_loss = 0.0;
        uint64_t local_pairs = 0;
        try {
          for (uint64_t w = begin; w < end; ++w)
            process_walk(epoch, w, local, local_loss, local_pairs);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          return;
        }
        std::lock_guard<std::mutex> lock(mu);
        loss_sum += local_loss;
        pair_count += local_pairs;
      });
      if (failure) std::rethrow_exception(failure);
    }
    if (pair_count == 0) throw DataError("corpus produced no training pairs");
    result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(pair_count));
  }
  return result;
}

}  // namespace metaid

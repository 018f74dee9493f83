#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "errors.hpp"
#include "rng.hpp"

namespace metaid {

namespace {

double dot_vec(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = std::sqrt(dot_vec(a, a));
  double nb = std::sqrt(dot_vec(b, b));
  if (na == 0.0 || nb == 0.0) throw DataError("zero representation: cosine undefined");
  return dot_vec(a, b) / (na * nb);
}

// Row-wise log-softmax at the given temperature.
Matrix log_distributions(const Matrix& reps, double temperature) {
  if (temperature <= 0.0) throw UsageError("softmax temperature must be > 0");
  Matrix logp(reps.rows, reps.dim);
  for (uint64_t r = 0; r < reps.rows; ++r) {
    auto src = reps.row(r);
    auto dst = logp.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (uint32_t j = 0; j < reps.dim; ++j) mx = std::max(mx, src[j] / temperature);
    double sum = 0.0;
    for (uint32_t j = 0; j < reps.dim; ++j) sum += std::exp(src[j] / temperature - mx);
    double lse = mx + std::log(sum);
    for (uint32_t j = 0; j < reps.dim; ++j) dst[j] = src[j] / temperature - lse;
  }
  return logp;
}

double symmetric_kl(std::span<const double> lp, std::span<const double> lq) {
  double acc = 0.0;
  for (size_t j = 0; j < lp.size(); ++j)
    acc += (std::exp(lp[j]) - std::exp(lq[j])) * (lp[j] - lq[j]);
  return acc;  // KL(p||q) + KL(q||p)
}

// First `take` entries of a seeded partial Fisher-Yates draw, returned sorted.
std::vector<uint32_t> sample_distinct(uint64_t universe, uint64_t take, Rng& rng) {
  std::vector<uint32_t> order(universe);
  std::iota(order.begin(), order.end(), 0u);
  for (uint64_t k = 0; k < take; ++k) {
    uint64_t j = k + rng.below(universe - k);
    std::swap(order[k], order[j]);
  }
  order.resize(take);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

SimilarityOracle build_similarity_oracle(const DatasetIndex& index) {
  SimilarityOracle oracle;
  uint32_t m = index.user_count();
  uint32_t n = index.item_count();
  oracle.user_mean.assign(m, 0.0);
  std::vector<uint64_t> user_counts(m, 0);
  for (const auto& x : index.interactions) {
    oracle.user_mean[x.user] += x.rating;
    ++user_counts[x.user];
  }
  for (uint32_t u = 0; u < m; ++u)
    if (user_counts[u]) oracle.user_mean[u] /= static_cast<double>(user_counts[u]);

  oracle.item_user_dev.resize(n);
  oracle.dev_sum.assign(n, 0.0);
  oracle.dev_sq_sum.assign(n, 0.0);
  for (const auto& x : index.interactions) {
    double dev = x.rating - oracle.user_mean[x.user];
    oracle.dev_sum[x.item] += dev;
    oracle.dev_sq_sum[x.item] += dev * dev;
    oracle.item_user_dev[x.item].push_back({x.user, dev});
  }
  // Duplicate ratings by one user collapse to their summed deviation for the
  // common-rater formula.
  for (auto& list : oracle.item_user_dev) {
    std::sort(list.begin(), list.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    size_t w = 0;
    for (size_t r = 0; r < list.size(); ++r) {
      if (w > 0 && list[w - 1].first == list[r].first)
        list[w - 1].second += list[r].second;
      else
        list[w++] = list[r];
    }
    list.resize(w);
  }
  return oracle;
}

std::optional<double> adjusted_cosine_exact(const SimilarityOracle& oracle, uint32_t i,
                                            uint32_t j) {
  if (i >= oracle.item_user_dev.size() || j >= oracle.item_user_dev.size())
    throw UsageError("item index out of range");
  const auto& a = oracle.item_user_dev[i];
  const auto& b = oracle.item_user_dev[j];
  double num = 0.0, energy_a = 0.0, energy_b = 0.0;
  size_t pa = 0, pb = 0;
  while (pa < a.size() && pb < b.size()) {
    if (a[pa].first < b[pb].first) {
      ++pa;
    } else if (b[pb].first < a[pa].first) {
      ++pb;
    } else {
      num += a[pa].second * b[pb].second;
      energy_a += a[pa].second * a[pa].second;
      energy_b += b[pb].second * b[pb].second;
      ++pa;
      ++pb;
    }
  }
  if (energy_a == 0.0 || energy_b == 0.0) return std::nullopt;
  return num / (std::sqrt(energy_a) * std::sqrt(energy_b));
}

std::optional<double> adjusted_cosine_fast(const SimilarityOracle& oracle, uint32_t i,
                                           uint32_t j) {
  if (i >= oracle.dev_sum.size() || j >= oracle.dev_sum.size())
    throw UsageError("item index out of range");
  if (oracle.dev_sq_sum[i] == 0.0 || oracle.dev_sq_sum[j] == 0.0) return std::nullopt;
  return oracle.dev_sum[i] * oracle.dev_sum[j] /
         (std::sqrt(oracle.dev_sq_sum[i]) * std::sqrt(oracle.dev_sq_sum[j]));
}

TokenTable make_token_table(const Vocabulary& vocab) {
  TokenTable table;
  table.rows = &vocab.f_init;
  for (uint32_t k = 0; k < vocab.tokens.size(); ++k)
    table.row_of.emplace(vocab.tokens[k].surface, k);
  return table;
}

std::vector<double> id_representation(const std::vector<std::string>& tokens,
                                      const TokenTable& table) {
  if (tokens.empty()) throw DataError("empty token sequence");
  std::vector<double> rep(table.rows->dim, 0.0);
  for (const auto& tok : tokens) {
    auto it = table.row_of.find(tok);
    if (it == table.row_of.end()) throw DataError("token not in table: " + tok);
    auto row = table.rows->row(it->second);
    for (size_t j = 0; j < rep.size(); ++j) rep[j] += row[j];
  }
  for (double& v : rep) v /= static_cast<double>(tokens.size());
  return rep;
}

Matrix representations_for(const IdAssignment& assignment, const TokenTable& table,
                           bool is_user) {
  const auto& side = is_user ? assignment.user_ids : assignment.item_ids;
  Matrix reps(side.size(), table.rows->dim);
  for (uint64_t e = 0; e < side.size(); ++e) {
    auto rep = id_representation(side[e], table);
    auto dst = reps.row(e);
    std::copy(rep.begin(), rep.end(), dst.begin());
  }
  return reps;
}

double compute_ds(const Matrix& reps, uint64_t pair_samples, uint64_t seed,
                  double softmax_temperature) {
  uint64_t n = reps.rows;
  if (n < 2) throw DataError("need at least 2 representations for DS");
  if (pair_samples < 1) throw UsageError("pair_samples must be >= 1");
  Matrix logp = log_distributions(reps, softmax_temperature);
  double acc = 0.0;
  uint64_t total_pairs = n * (n - 1) / 2;
  uint64_t used = 0;
  if (pair_samples >= total_pairs) {
    for (uint64_t i = 0; i < n; ++i)
      for (uint64_t j = i + 1; j < n; ++j) acc += symmetric_kl(logp.row(i), logp.row(j));
    used = total_pairs;
  } else {
    Rng rng(derive_seed(seed, {0x4453ull}));  // "DS"
    for (uint64_t k = 0; k < pair_samples; ++k) {
      uint64_t i = rng.below(n);
      uint64_t j = rng.below(n - 1);
      if (j >= i) ++j;
      acc += symmetric_kl(logp.row(i), logp.row(j));
    }
    used = pair_samples;
  }
  return acc / (2.0 * static_cast<double>(used));
}

MsResult compute_ms(const Matrix& item_reps, const SimilarityOracle& oracle,
                    uint64_t item_samples, uint64_t seed, bool exact) {
  uint64_t n = item_reps.rows;
  if (item_samples < 2) throw UsageError("item_samples must be >= 2");
  if (n < 2) throw DataError("need at least 2 item representations for MS");
  uint64_t take = std::min(item_samples, n);
  std::vector<uint32_t> chosen;
  if (take == n) {
    chosen.resize(n);
    std::iota(chosen.begin(), chosen.end(), 0u);
  } else {
    Rng rng(derive_seed(seed, {0x4d53ull}));  // "MS"
    chosen = sample_distinct(n, take, rng);
  }
  MsResult result;
  double acc = 0.0;
  for (size_t a = 0; a < chosen.size(); ++a)
    for (size_t b = a + 1; b < chosen.size(); ++b) {
      uint32_t i = chosen[a], j = chosen[b];
      auto sim = exact ? adjusted_cosine_exact(oracle, i, j)
                       : adjusted_cosine_fast(oracle, i, j);
      if (!sim) {
        ++result.pairs_skipped;
        continue;
      }
      double diff = cosine(item_reps.row(i), item_reps.row(j)) - *sim;
      acc += diff * diff;
      ++result.pairs_used;
    }
  if (result.pairs_used == 0)
    throw DataError("every sampled pair has undefined ground-truth similarity");
  result.ms = acc / static_cast<double>(result.pairs_used);
  return result;
}

std::vector<ConvergencePoint> ds_convergence(const Matrix& reps,
                                             const std::vector<uint64_t>& pair_sample_counts,
                                             uint32_t trials, uint64_t seed,
                                             double softmax_temperature) {
  if (trials < 2) throw UsageError("trials must be >= 2");
  std::vector<ConvergencePoint> points;
  for (size_t k = 0; k < pair_sample_counts.size(); ++k) {
    std::vector<double> values;
    values.reserve(trials);
    for (uint32_t t = 0; t < trials; ++t)
      values.push_back(compute_ds(reps, pair_sample_counts[k],
                                  derive_seed(seed, {k, t}), softmax_temperature));
    double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                  static_cast<double>(trials);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(trials - 1);
    points.push_back({pair_sample_counts[k], mean, std::sqrt(var)});
  }
  return points;
}

HeatmapResult similarity_heatmap(const Matrix& item_reps, const SimilarityOracle& oracle,
                                 uint32_t sample_size, uint64_t seed, bool exact) {
  uint64_t n = item_reps.rows;
  if (sample_size < 1) throw UsageError("sample_size must be >= 1");
  if (sample_size > n) throw UsageError("sample_size exceeds item count");
  HeatmapResult result;
  if (sample_size == n) {
    result.items.resize(n);
    std::iota(result.items.begin(), result.items.end(), 0u);
  } else {
    Rng rng(derive_seed(seed, {0x484d41ull}));  // "HMA"
    result.items = sample_distinct(n, sample_size, rng);
  }
  uint32_t s = sample_size;
  result.cosine = Matrix(s, s);
  result.ground_truth = Matrix(s, s);
  result.defined.assign(static_cast<size_t>(s) * s, 0);
  double nan = std::numeric_limits<double>::quiet_NaN();
  for (uint32_t a = 0; a < s; ++a)
    for (uint32_t b = 0; b < s; ++b) {
      uint32_t i = result.items[a], j = result.items[b];
      result.cosine.row(a)[b] =
          a == b ? 1.0 : cosine(item_reps.row(i), item_reps.row(j));
      auto sim = exact ? adjusted_cosine_exact(oracle, i, j)
                       : adjusted_cosine_fast(oracle, i, j);
      result.ground_truth.row(a)[b] = sim ? *sim : nan;
      result.defined[static_cast<size_t>(a) * s + b] = sim ? 1 : 0;
    }
  return result;
}

void save_heatmap_csv(const HeatmapResult& result, const std::string& cosine_path,
                      const std::string& ground_truth_path) {
  auto write = [&](const Matrix& mat, const std::string& path, bool masked) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.precision(17);
    uint32_t s = static_cast<uint32_t>(result.items.size());
    out << "item";
    for (uint32_t b = 0; b < s; ++b) out << ',' << result.items[b];
    out << '\n';
    for (uint32_t a = 0; a < s; ++a) {
      out << result.items[a];
      for (uint32_t b = 0; b < s; ++b) {
        out << ',';
        bool ok = !masked || result.defined[static_cast<size_t>(a) * s + b];
        if (ok) out << mat.row(a)[b];  // undefined cells stay empty
      }
      out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
  };
  write(result.cosine, cosine_path, false);
  write(result.ground_truth, ground_truth_path, true);
}

void save_convergence_csv(const std::vector<ConvergencePoint>& points,
                          const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  out << "pair_samples,mean,std\n";
  for (const auto& p : points)
    out << p.pair_samples << ',' << p.mean << ',' << p.std_dev << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace metaid

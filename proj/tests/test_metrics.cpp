#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "cluster.hpp"
#include "doctest.h"
#include "embed.hpp"
#include "errors.hpp"
#include "fixtures.hpp"
#include "graph.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "walker.hpp"

using namespace metaid;
using namespace metaid::testfix;

namespace {

Matrix random_matrix(uint64_t rows, uint32_t dim, uint64_t seed) {
  Matrix m(rows, dim);
  Rng rng(seed);
  for (double& v : m.data) v = rng.range(-1.0, 1.0);
  return m;
}

// Independent softmax + symmetric KL, for checking the library's DS.
std::vector<double> softmax_ref(std::span<const double> row, double temperature) {
  std::vector<double> p(row.begin(), row.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v / temperature);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

double sym_kl_ref(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (size_t j = 0; j < p.size(); ++j)
    acc += p[j] * std::log(p[j] / q[j]) + q[j] * std::log(q[j] / p[j]);
  return acc;
}

double cosine_ref(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (size_t j = 0; j < a.size(); ++j) {
    num += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  return num / std::sqrt(na * nb);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("oracle deviations on the six-rating fixture") {
  SimilarityOracle oracle = build_similarity_oracle(tiny_index());
  // Every user's ratings average to 3.
  for (double mu : oracle.user_mean) CHECK(mu == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(oracle.dev_sum[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));   // +2 - 2
  CHECK(oracle.dev_sq_sum[0] == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(oracle.dev_sum[1] == doctest::Approx(1.0).epsilon(1e-15));              // -2 + 2 + 1
  CHECK(oracle.dev_sq_sum[1] == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(oracle.dev_sum[2] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(oracle.dev_sq_sum[2] == doctest::Approx(1.0).epsilon(1e-15));
  // Per-item rater lists are sorted with one entry per user.
  CHECK(oracle.item_user_dev[1].size() == 3);
  CHECK(oracle.item_user_dev[1][0].first == 0);
  CHECK(oracle.item_user_dev[1][2].first == 2);
}

TEST_CASE("exact adjusted cosine over common raters") {
  SimilarityOracle oracle = build_similarity_oracle(tiny_index());
  // i1 and i2 share raters u1, u2 with opposite deviations.
  auto s01 = adjusted_cosine_exact(oracle, 0, 1);
  REQUIRE(s01.has_value());
  CHECK(*s01 == doctest::Approx(-1.0).epsilon(1e-12));
  // i2 and i3 share only u3: +1 against -1.
  auto s12 = adjusted_cosine_exact(oracle, 1, 2);
  REQUIRE(s12.has_value());
  CHECK(*s12 == doctest::Approx(-1.0).epsilon(1e-12));
  // i1 and i3 have no common rater.
  CHECK(!adjusted_cosine_exact(oracle, 0, 2).has_value());
  CHECK_THROWS_AS(adjusted_cosine_exact(oracle, 0, 9), UsageError);
}

TEST_CASE("fast adjusted cosine uses summed deviations") {
  SimilarityOracle oracle = build_similarity_oracle(tiny_index());
  auto s01 = adjusted_cosine_fast(oracle, 0, 1);
  REQUIRE(s01.has_value());
  CHECK(*s01 == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));  // Dev(i1) = 0
  auto s12 = adjusted_cosine_fast(oracle, 1, 2);
  REQUIRE(s12.has_value());
  CHECK(*s12 == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(adjusted_cosine_fast(oracle, 9, 0), UsageError);
}

TEST_CASE("a user with zero rating spread makes similarities undefined") {
  DatasetIndex index = build_index(parse_tsv(std::string(tiny_tsv()) + "u4\ti4\t3\t6\n"));
  SimilarityOracle oracle = build_similarity_oracle(index);
  CHECK(oracle.dev_sq_sum[3] == 0.0);
  CHECK(!adjusted_cosine_fast(oracle, 3, 0).has_value());
  CHECK(!adjusted_cosine_exact(oracle, 3, 3).has_value());
}

TEST_CASE("exact and fast agree when one user rates everything") {
  // A single common rater reduces both formulas to the sign of the deviation
  // product.
  DatasetIndex index = build_index(parse_tsv("u\ti1\t5\t0\nu\ti2\t1\t1\nu\ti3\t4\t2\n"));
  SimilarityOracle oracle = build_similarity_oracle(index);
  for (uint32_t i = 0; i < 3; ++i)
    for (uint32_t j = i + 1; j < 3; ++j) {
      auto exact = adjusted_cosine_exact(oracle, i, j);
      auto fast = adjusted_cosine_fast(oracle, i, j);
      REQUIRE(exact.has_value());
      REQUIRE(fast.has_value());
      CHECK(*exact == doctest::Approx(*fast).epsilon(1e-12));
      CHECK(std::fabs(*exact) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("duplicate ratings from one user collapse to a single rater entry") {
  DatasetIndex index =
      build_index(parse_tsv("u1\ti1\t5\t0\nu1\ti1\t1\t1\nu2\ti1\t4\t2\nu2\ti2\t2\t3\n"));
  SimilarityOracle oracle = build_similarity_oracle(index);
  // u1's two ratings of i1 (devs +2, -2) merge to 0.
  REQUIRE(oracle.item_user_dev[0].size() == 2);
  CHECK(oracle.item_user_dev[0][0].first == 0);
  CHECK(oracle.item_user_dev[0][0].second == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(oracle.item_user_dev[0][1].second == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("id_representation averages token rows") {
  Vocabulary vocab;
  vocab.tokens.push_back({"a", TokenKind::prefix});
  vocab.tokens.push_back({"b", TokenKind::digit});
  vocab.f_init = Matrix(2, 2);
  vocab.f_init.row(0)[0] = 1.0;
  vocab.f_init.row(0)[1] = 2.0;
  vocab.f_init.row(1)[0] = 3.0;
  vocab.f_init.row(1)[1] = 4.0;
  TokenTable table = make_token_table(vocab);
  auto rep = id_representation({"a", "b"}, table);
  CHECK(rep == std::vector<double>{2.0, 3.0});
  CHECK(id_representation({"a"}, table) == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_WITH_AS(id_representation({"a", "z"}, table),
                       doctest::Contains("z"), DataError);
  CHECK_THROWS_AS(id_representation({}, table), DataError);
}

TEST_CASE("representations_for stacks one row per entity") {
  IdAssignment a = assign_rid(3, 4, 9);
  Vocabulary vocab = baseline_vocabulary(a, 6, 0.1, 2);
  TokenTable table = make_token_table(vocab);
  Matrix users = representations_for(a, table, true);
  Matrix items = representations_for(a, table, false);
  CHECK(users.rows == 3);
  CHECK(items.rows == 4);
  CHECK(users.dim == 6);
  for (uint32_t u = 0; u < 3; ++u) {
    auto rep = id_representation(a.user_ids[u], table);
    for (uint32_t j = 0; j < 6; ++j) CHECK(users.row(u)[j] == rep[j]);
  }
}

TEST_CASE("DS of two known distributions") {
  // softmax(ln 2, 0) = (2/3, 1/3) against its mirror image: the symmetric KL
  // is (2/3) ln 2, and halving over one pair gives (1/3) ln 2.
  Matrix reps(2, 2);
  reps.row(0)[0] = std::log(2.0);
  reps.row(1)[1] = std::log(2.0);
  double ds = compute_ds(reps, 10, 0, 1.0);
  CHECK(ds == doctest::Approx(std::log(2.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("DS is zero for identical rows and shrinks at high temperature") {
  Matrix same(3, 4);
  for (uint64_t r = 0; r < 3; ++r)
    for (uint32_t j = 0; j < 4; ++j) same.row(r)[j] = 0.25 * (j + 1);
  CHECK(compute_ds(same, 100, 0, 1.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

  Matrix reps = random_matrix(6, 4, 31);
  double sharp = compute_ds(reps, 1000, 1, 0.5);
  double mild = compute_ds(reps, 1000, 1, 1.0);
  double flat = compute_ds(reps, 1000, 1, 4.0);
  CHECK(flat < mild);
  CHECK(mild < sharp);
}

TEST_CASE("DS enumerates every pair when samples cover them") {
  Matrix reps = random_matrix(10, 4, 17);
  double expected = 0.0;
  for (uint64_t i = 0; i < 10; ++i)
    for (uint64_t j = i + 1; j < 10; ++j)
      expected += sym_kl_ref(softmax_ref(reps.row(i), 1.0), softmax_ref(reps.row(j), 1.0));
  expected /= 2.0 * 45.0;
  CHECK(compute_ds(reps, 45, 0, 1.0) == doctest::Approx(expected).epsilon(1e-9));
  // Any larger budget hits the same enumeration.
  CHECK(compute_ds(reps, 1000000, 5, 1.0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("sampled DS is seed-deterministic") {
  Matrix reps = random_matrix(30, 4, 23);
  double a = compute_ds(reps, 50, 12, 1.0);
  double b = compute_ds(reps, 50, 12, 1.0);
  CHECK(a == b);
  CHECK(a >= 0.0);
}

TEST_CASE("compute_ds validates input") {
  Matrix reps = random_matrix(4, 3, 2);
  CHECK_THROWS_AS(compute_ds(reps, 0, 0, 1.0), UsageError);
  CHECK_THROWS_AS(compute_ds(reps, 10, 0, 0.0), UsageError);
  Matrix one = random_matrix(1, 3, 2);
  CHECK_THROWS_AS(compute_ds(one, 10, 0, 1.0), DataError);
}

TEST_CASE("MS of a single hand-built pair") {
  // Identical representations give cosine 1; the ground truth is -1/3, so the
  // squared gap is (4/3)^2.
  SimilarityOracle oracle;
  oracle.dev_sum = {1.0, -1.0};
  oracle.dev_sq_sum = {9.0, 1.0};
  Matrix reps(2, 2);
  reps.row(0)[0] = 1.0;
  reps.row(1)[0] = 1.0;
  MsResult r = compute_ms(reps, oracle, 2, 0, false);
  CHECK(r.ms == doctest::Approx(16.0 / 9.0).epsilon(1e-12));
  CHECK(r.pairs_used == 1);
  CHECK(r.pairs_skipped == 0);
}

TEST_CASE("MS skips undefined pairs and reports the counts") {
  SimilarityOracle oracle;
  oracle.dev_sum = {1.0, -1.0, 0.0};
  oracle.dev_sq_sum = {9.0, 1.0, 0.0};  // item 2 has no deviation energy
  Matrix reps = random_matrix(3, 2, 3);
  MsResult r = compute_ms(reps, oracle, 3, 0, false);
  CHECK(r.pairs_used == 1);
  CHECK(r.pairs_skipped == 2);

  oracle.dev_sq_sum = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(compute_ms(reps, oracle, 3, 0, false), DataError);
}

TEST_CASE("MS over all items matches a direct recomputation") {
  auto records = generate_synthetic(2, 10, 10, 0.3, 5);
  DatasetIndex index = build_index(records);
  SimilarityOracle oracle = build_similarity_oracle(index);
  Matrix reps = random_matrix(index.item_count(), 8, 41);
  for (bool exact : {false, true}) {
    MsResult r = compute_ms(reps, oracle, index.item_count(), 0, exact);
    double acc = 0.0;
    uint64_t used = 0, skipped = 0;
    for (uint32_t i = 0; i < index.item_count(); ++i)
      for (uint32_t j = i + 1; j < index.item_count(); ++j) {
        auto sim = exact ? adjusted_cosine_exact(oracle, i, j)
                         : adjusted_cosine_fast(oracle, i, j);
        if (!sim) {
          ++skipped;
          continue;
        }
        double diff = cosine_ref(reps.row(i), reps.row(j)) - *sim;
        acc += diff * diff;
        ++used;
      }
    CHECK(r.pairs_used == used);
    CHECK(r.pairs_skipped == skipped);
    CHECK(r.ms == doctest::Approx(acc / used).epsilon(1e-9));
  }
}

TEST_CASE("MS subsampling is seed-deterministic") {
  auto records = generate_synthetic(2, 8, 12, 0.3, 6);
  DatasetIndex index = build_index(records);
  SimilarityOracle oracle = build_similarity_oracle(index);
  Matrix reps = random_matrix(index.item_count(), 6, 13);
  MsResult a = compute_ms(reps, oracle, 5, 77, false);
  MsResult b = compute_ms(reps, oracle, 5, 77, false);
  CHECK(a.ms == b.ms);
  CHECK(a.pairs_used == b.pairs_used);
  CHECK(a.pairs_used + a.pairs_skipped == 10);  // C(5, 2)
}

TEST_CASE("compute_ms validates input and zero vectors") {
  SimilarityOracle oracle;
  oracle.dev_sum = {1.0, 1.0};
  oracle.dev_sq_sum = {1.0, 1.0};
  Matrix reps(2, 2);
  reps.row(0)[0] = 1.0;  // row 1 all-zero: cosine undefined
  CHECK_THROWS_AS(compute_ms(reps, oracle, 2, 0, false), DataError);
  CHECK_THROWS_AS(compute_ms(reps, oracle, 1, 0, false), UsageError);
  Matrix one(1, 2);
  CHECK_THROWS_AS(compute_ms(one, oracle, 2, 0, false), DataError);
}

TEST_CASE("DS convergence points carry per-budget spread") {
  Matrix same(4, 3);
  for (uint64_t r = 0; r < 4; ++r) same.row(r)[0] = 1.0;
  auto points = ds_convergence(same, {2, 4}, 3, 0, 1.0);
  REQUIRE(points.size() == 2);
  CHECK(points[0].pair_samples == 2);
  CHECK(points[1].pair_samples == 4);
  for (const auto& p : points) {
    CHECK(p.mean == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK(p.std_dev == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(ds_convergence(same, {2}, 1, 0, 1.0), UsageError);
}

TEST_CASE("similarity heatmap covers the sample with masks for undefined cells") {
  SimilarityOracle oracle = build_similarity_oracle(tiny_index());
  Matrix reps = random_matrix(3, 4, 19);
  HeatmapResult hm = similarity_heatmap(reps, oracle, 3, 0, true);
  CHECK(hm.items == std::vector<uint32_t>{0, 1, 2});
  for (uint32_t a = 0; a < 3; ++a) {
    CHECK(hm.cosine.row(a)[a] == 1.0);
    for (uint32_t b = 0; b < 3; ++b)
      CHECK(hm.cosine.row(a)[b] == doctest::Approx(hm.cosine.row(b)[a]).epsilon(1e-12));
  }
  // i1-i3 share no rater: masked off. i1-i2 sits at exactly -1.
  CHECK(hm.defined[0 * 3 + 2] == 0);
  CHECK(std::isnan(hm.ground_truth.row(0)[2]));
  CHECK(hm.defined[0 * 3 + 1] == 1);
  CHECK(hm.ground_truth.row(0)[1] == doctest::Approx(-1.0).epsilon(1e-12));

  HeatmapResult one = similarity_heatmap(reps, oracle, 1, 4, true);
  CHECK(one.items.size() == 1);
  CHECK(one.cosine.row(0)[0] == 1.0);

  CHECK_THROWS_AS(similarity_heatmap(reps, oracle, 4, 0, true), UsageError);
  CHECK_THROWS_AS(similarity_heatmap(reps, oracle, 0, 0, true), UsageError);
}

TEST_CASE("heatmap and convergence CSV files") {
  SimilarityOracle oracle = build_similarity_oracle(tiny_index());
  Matrix reps = random_matrix(3, 4, 19);
  HeatmapResult hm = similarity_heatmap(reps, oracle, 3, 0, true);
  save_heatmap_csv(hm, "hm_cos.csv", "hm_truth.csv");
  std::string cos_text = slurp("hm_cos.csv");
  std::string truth_text = slurp("hm_truth.csv");
  std::remove("hm_cos.csv");
  std::remove("hm_truth.csv");
  CHECK(cos_text.rfind("item,0,1,2\n", 0) == 0);
  CHECK(cos_text.find("\n0,1,") != std::string::npos);  // unit diagonal row
  // The undefined i1-i3 cell is an empty field, not a number.
  std::istringstream truth(truth_text);
  std::string header, row0;
  std::getline(truth, header);
  std::getline(truth, row0);
  std::vector<std::string> cells = {""};
  for (char c : row0) {
    if (c == ',')
      cells.emplace_back();
    else
      cells.back().push_back(c);
  }
  REQUIRE(cells.size() == 4);
  CHECK(cells[3].empty());
  CHECK(!cells[2].empty());

  auto points = ds_convergence(reps, {4, 8}, 2, 0, 1.0);
  save_convergence_csv(points, "conv.csv");
  std::string conv_text = slurp("conv.csv");
  std::remove("conv.csv");
  CHECK(conv_text.rfind("pair_samples,mean,std\n", 0) == 0);
  CHECK(conv_text.find("\n4,") != std::string::npos);
  CHECK(conv_text.find("\n8,") != std::string::npos);
}

TEST_CASE("clustered ids track ground truth closer than random ids") {
  // Two-community dataset: IDs distilled from trained embeddings must score a
  // lower MS than random token soup of the same dimension, on every seed.
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    DatasetIndex index = build_index(generate_synthetic(2, 30, 30, 0.05, seed));
    InteractionGraph graph = build_graph(index);
    WalkConfig walk_cfg;
    walk_cfg.walk_length = 16;
    walk_cfg.rounds_per_node = 4;
    walk_cfg.seed = seed;
    WalkCorpus corpus = sample_walks(graph, walk_cfg);
    SgConfig sg;
    sg.dim = 16;
    sg.window = 4;
    sg.negatives = 4;
    sg.learning_rate = 0.05;
    sg.epochs = 6;
    sg.seed = seed;
    TrainResult trained = train_skipgram(corpus, sg);
    ClusterConfig cluster_cfg;
    cluster_cfg.groups = 2;
    cluster_cfg.seed = seed;
    ClusterModel model = kmeans_cosine(trained.table.input, cluster_cfg);
    rank_within_cluster(model, trained.table.input);

    uint32_t m = index.user_count(), n = index.item_count();
    auto [meta, vocab] = assign_meta_ids(model, m, n);
    build_f_init(model, vocab, 0.1, seed);
    Matrix meta_reps = representations_for(meta, make_token_table(vocab), false);
    IdAssignment rid = assign_rid(m, n, seed);
    Vocabulary rid_vocab = baseline_vocabulary(rid, sg.dim, 0.1, seed);
    Matrix rid_reps = representations_for(rid, make_token_table(rid_vocab), false);

    SimilarityOracle oracle = build_similarity_oracle(index);
    double ms_meta = compute_ms(meta_reps, oracle, n, seed, true).ms;
    double ms_rid = compute_ms(rid_reps, oracle, n, seed, true).ms;
    CHECK(ms_meta < ms_rid);
  }
}

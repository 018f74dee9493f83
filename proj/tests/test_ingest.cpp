#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "errors.hpp"
#include "fixtures.hpp"
#include "ingest.hpp"
#include "rng.hpp"

using namespace metaid;
using namespace metaid::testfix;

namespace {

std::vector<InteractionRecord> parse_text(const std::string& text,
                                          const ParseFormat& format = {}) {
  std::istringstream in(text);
  return parse_interactions(in, format);
}

using RecordKey = std::tuple<std::string, std::string, int, int64_t>;

std::vector<RecordKey> record_multiset(const std::vector<InteractionRecord>& records) {
  std::vector<RecordKey> keys;
  for (const auto& r : records) keys.emplace_back(r.user_key, r.item_key, r.rating, r.timestamp);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

TEST_CASE("parse_interactions reads the default TSV layout") {
  auto records = parse_text(tiny_tsv());
  REQUIRE(records.size() == 6);
  CHECK(records[0].user_key == "u1");
  CHECK(records[0].item_key == "i1");
  CHECK(records[0].rating == 5);
  CHECK(records[0].timestamp == 0);
  CHECK(records[5].user_key == "u3");
  CHECK(records[5].rating == 2);
  CHECK(records[5].timestamp == 5);
}

TEST_CASE("parse_interactions accepts integral float ratings") {
  auto records = parse_text("a\tb\t5.0\t10\n");
  REQUIRE(records.size() == 1);
  CHECK(records[0].rating == 5);
}

TEST_CASE("parse_interactions skips blank lines and strips CR") {
  auto records = parse_text("a\tb\t3\t1\r\n\n\nc\td\t4\t2\n");
  REQUIRE(records.size() == 2);
  CHECK(records[0].timestamp == 1);
  CHECK(records[1].user_key == "c");
}

TEST_CASE("parse_interactions rejects malformed lines with the line number") {
  auto expect_line = [](const std::string& text, const char* fragment) {
    try {
      parse_text(text);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  expect_line("a\tb\t3\t1\na\tb\n", "line 2");              // wrong column count
  expect_line("a\tb\tsix\t1\n", "line 1");                  // non-numeric rating
  expect_line("a\tb\t3\t1\na\tb\t9\t2\n", "line 2");        // rating outside 1..5
  expect_line("a\tb\t3.5\t1\n", "line 1");                  // non-integral rating
  expect_line("a\tb\t0\t1\n", "line 1");                    // rating zero
  expect_line("\tb\t3\t1\n", "line 1");                     // empty user key
}

TEST_CASE("parse_interactions honors custom column layouts") {
  ParseFormat fmt;
  fmt.delimiter = ',';
  fmt.col_rating = 0;
  fmt.col_user = 1;
  fmt.col_item = 2;
  fmt.col_timestamp = 3;
  fmt.col_review = 4;
  auto records = parse_text("4,alice,book,99,loved it\n", fmt);
  REQUIRE(records.size() == 1);
  CHECK(records[0].user_key == "alice");
  CHECK(records[0].item_key == "book");
  CHECK(records[0].rating == 4);
  CHECK(records[0].timestamp == 99);
  CHECK(records[0].review_text == "loved it");
}

TEST_CASE("parse_interactions reads JSON lines") {
  ParseFormat fmt;
  fmt.jsonl = true;
  auto records = parse_text(
      "{\"user\":\"u9\",\"item\":\"i7\",\"rating\":5,\"timestamp\":123,"
      "\"review\":\"fine\",\"summary\":\"ok\"}\n"
      "{\"user\":\"u9\",\"item\":\"i8\",\"rating\":1,\"timestamp\":124}\n",
      fmt);
  REQUIRE(records.size() == 2);
  CHECK(records[0].user_key == "u9");
  CHECK(records[0].review_text == "fine");
  CHECK(records[0].summary == "ok");
  CHECK(records[1].rating == 1);
  CHECK_THROWS_AS(parse_text("{\"user\":\"u9\"}\n", fmt), DataError);
  CHECK_THROWS_AS(parse_text("not json\n", fmt), DataError);
}

TEST_CASE("parse_interactions_file reports unreadable paths") {
  CHECK_THROWS_AS(parse_interactions_file("missing_input.tsv", {}), DataError);
}

TEST_CASE("build_index assigns first-occurrence indices") {
  DatasetIndex index = tiny_index();
  CHECK(index.user_count() == 3);
  CHECK(index.item_count() == 3);
  CHECK(index.user_names == std::vector<std::string>{"u1", "u2", "u3"});
  CHECK(index.item_names == std::vector<std::string>{"i1", "i2", "i3"});
  REQUIRE(index.interactions.size() == 6);
  CHECK(index.interactions[0].user == 0);
  CHECK(index.interactions[0].item == 0);
  CHECK(index.interactions[5].user == 2);
  CHECK(index.interactions[5].item == 2);
}

TEST_CASE("build_index sorts per-user sequences by timestamp") {
  DatasetIndex index = tiny_index();
  // u1 interacted with i1 (t=0) then i2 (t=1).
  REQUIRE(index.per_user_sequence[0].size() == 2);
  CHECK(index.interactions[index.per_user_sequence[0][0]].item == 0);
  CHECK(index.interactions[index.per_user_sequence[0][1]].item == 1);

  // Shuffled input timestamps still sort; ties keep input order.
  auto records = parse_text(
      "u\ta\t3\t5\n"
      "u\tb\t3\t1\n"
      "u\tc\t3\t5\n");
  DatasetIndex shuffled = build_index(records);
  const auto& seq = shuffled.per_user_sequence[0];
  REQUIRE(seq.size() == 3);
  auto item_key = [&](size_t k) { return shuffled.item_names[shuffled.interactions[seq[k]].item]; };
  CHECK(item_key(0) == "b");
  CHECK(item_key(1) == "a");  // t=5, listed first
  CHECK(item_key(2) == "c");
}

TEST_CASE("build_index rejects an empty record set") {
  CHECK_THROWS_AS(build_index({}), DataError);
}

TEST_CASE("emit_records round-trips the interaction multiset") {
  auto records = tiny_records();
  DatasetIndex index = build_index(records);
  CHECK(record_multiset(emit_records(index)) == record_multiset(records));
}

TEST_CASE("duplicate interactions survive as a multiset") {
  std::string text = "u\ti\t4\t9\nu\ti\t4\t9\n";
  auto records = parse_text(text);
  DatasetIndex index = build_index(records);
  CHECK(index.interactions.size() == 2);
  CHECK(record_multiset(emit_records(index)) == record_multiset(records));
}

TEST_CASE("split_leave_one_out holds out the last two interactions") {
  auto records = parse_text(
      "u\ta\t3\t1\n"
      "u\tb\t3\t2\n"
      "u\tc\t3\t3\n"
      "u\td\t3\t4\n");
  DatasetIndex index = build_index(records);
  DatasetSplits splits = split_leave_one_out(index);
  CHECK(splits.dropped_users == 0);
  REQUIRE(splits.test.size() == 1);
  REQUIRE(splits.validation.size() == 1);
  CHECK(splits.train.size() == 2);
  CHECK(index.interactions[splits.test[0]].timestamp == 4);
  CHECK(index.interactions[splits.validation[0]].timestamp == 3);
}

TEST_CASE("split_leave_one_out drops users with fewer than three interactions") {
  // TINY users all have exactly two interactions, so nobody survives.
  CHECK_THROWS_AS(split_leave_one_out(tiny_index()), DataError);

  auto records = tiny_records();
  auto extra = records[0];
  extra.item_key = "i3";
  extra.timestamp = 99;
  records.push_back(extra);  // u1 now has 3 interactions
  DatasetSplits splits = split_leave_one_out(build_index(records));
  CHECK(splits.dropped_users == 2);
  CHECK(splits.train.size() == 1);
  CHECK(splits.validation.size() == 1);
  CHECK(splits.test.size() == 1);
}

TEST_CASE("split_random matches an independent shuffle oracle") {
  DatasetIndex index = tiny_index();
  DatasetSplits splits = split_random(index, 7);

  // Reference: same Fisher-Yates walk on a raw mt19937_64, then the cut.
  size_t n = index.interactions.size();
  std::vector<uint32_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = uint32_t(i);
  std::mt19937_64 eng(7);
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[eng() % i]);
  size_t n_train = size_t(0.8 * double(n)), n_val = size_t(0.1 * double(n));
  std::vector<uint32_t> train(order.begin(), order.begin() + n_train);
  std::vector<uint32_t> val(order.begin() + n_train, order.begin() + n_train + n_val);
  std::vector<uint32_t> test(order.begin() + n_train + n_val, order.end());

  // Replay the coverage repair on the reference.
  std::vector<char> user_ok(3, 0), item_ok(3, 0);
  auto mark = [&](uint32_t id) {
    user_ok[index.interactions[id].user] = 1;
    item_ok[index.interactions[id].item] = 1;
  };
  for (uint32_t id : train) mark(id);
  for (auto* pool : {&val, &test}) {
    for (size_t k = 0; k < pool->size();) {
      uint32_t id = (*pool)[k];
      if (!user_ok[index.interactions[id].user] || !item_ok[index.interactions[id].item]) {
        train.push_back(id);
        mark(id);
        pool->erase(pool->begin() + ptrdiff_t(k));
      } else {
        ++k;
      }
    }
  }
  CHECK(splits.train == train);
  CHECK(splits.validation == val);
  CHECK(splits.test == test);
}

TEST_CASE("split_random covers every entity and partitions the interactions") {
  auto records = generate_synthetic(3, 8, 8, 0.2, 17);
  DatasetIndex index = build_index(records);
  DatasetSplits splits = split_random(index, 5);

  std::set<uint32_t> seen;
  for (const auto* part : {&splits.train, &splits.validation, &splits.test})
    for (uint32_t id : *part) CHECK(seen.insert(id).second);  // disjoint
  CHECK(seen.size() == index.interactions.size());

  std::vector<char> user_ok(index.user_count(), 0), item_ok(index.item_count(), 0);
  for (uint32_t id : splits.train) {
    user_ok[index.interactions[id].user] = 1;
    item_ok[index.interactions[id].item] = 1;
  }
  CHECK(std::count(user_ok.begin(), user_ok.end(), 0) == 0);
  CHECK(std::count(item_ok.begin(), item_ok.end(), 0) == 0);

  // Determinism in the seed.
  DatasetSplits again = split_random(index, 5);
  CHECK(again.train == splits.train);
  CHECK(again.test == splits.test);
  CHECK(split_random(index, 6).train != splits.train);
}

TEST_CASE("split_random pre-repair sizes follow the 80/10/10 cut") {
  // 20 users x 2 items, every pair present: repair can't trigger because
  // every entity appears 0.8*40/2 >= 1 times in expectation... instead just
  // assert the documented floor arithmetic on the combined sizes.
  auto records = generate_synthetic(1, 5, 8, 0.0, 3);
  DatasetIndex index = build_index(records);  // 40 interactions
  DatasetSplits splits = split_random(index, 11);
  size_t n = index.interactions.size();
  CHECK(n == 40);
  CHECK(splits.train.size() + splits.validation.size() + splits.test.size() == n);
  CHECK(splits.train.size() >= size_t(0.8 * double(n)));  // repair only grows train
}

TEST_CASE("compute_stats matches the sparsity formula") {
  DatasetIndex index = tiny_index();
  DatasetStats stats = compute_stats(index);
  CHECK(stats.users == 3);
  CHECK(stats.items == 3);
  CHECK(stats.reviews == 6);
  CHECK(stats.sparsity_percent == doctest::Approx(100.0 * 6 / 9).epsilon(1e-12));
}

TEST_CASE("generate_synthetic builds block-diagonal ratings") {
  auto records = generate_synthetic(2, 3, 4, 0.0, 1);
  CHECK(records.size() == 2 * 3 * 4);
  for (const auto& r : records) CHECK(r.rating == 5);
  // Block membership: u0..u2 rate i0..i3, u3..u5 rate i4..i7.
  for (const auto& r : records) {
    int u = std::stoi(r.user_key.substr(1));
    int i = std::stoi(r.item_key.substr(1));
    CHECK(u / 3 == i / 4);
  }
  // Timestamps are the emission sequence.
  for (size_t k = 0; k < records.size(); ++k) CHECK(records[k].timestamp == int64_t(k));
}

TEST_CASE("generate_synthetic noise adds rating-1 cross-block edges") {
  auto records = generate_synthetic(2, 10, 10, 0.3, 9);
  size_t cross = 0;
  for (const auto& r : records) {
    int u = std::stoi(r.user_key.substr(1));
    int i = std::stoi(r.item_key.substr(1));
    if (u / 10 != i / 10) {
      ++cross;
      CHECK(r.rating == 1);
    } else {
      CHECK(r.rating == 5);
    }
  }
  CHECK(cross > 0);
  // Deterministic in the seed.
  CHECK(record_multiset(generate_synthetic(2, 10, 10, 0.3, 9)) == record_multiset(records));
  CHECK(record_multiset(generate_synthetic(2, 10, 10, 0.3, 10)) != record_multiset(records));
}

TEST_CASE("generate_synthetic validates its arguments") {
  CHECK_THROWS_AS(generate_synthetic(0, 5, 5, 0.0, 1), DataError);
  CHECK_THROWS_AS(generate_synthetic(2, 0, 5, 0.0, 1), DataError);
  CHECK_THROWS_AS(generate_synthetic(2, 5, 5, 1.0, 1), DataError);
}

TEST_CASE("index JSON round trip preserves everything") {
  auto records = parse_text(
      "u1\ti1\t5\t0\tgreat\tshort\twhy\tword\n"
      "u2\ti1\t3\t2\t\t\t\t\n",
      [] {
        ParseFormat f;
        f.col_review = 4;
        f.col_summary = 5;
        f.col_explanation = 6;
        f.col_feature = 7;
        return f;
      }());
  DatasetIndex index = build_index(records);
  save_index_json(index, "ingest_index.json");
  DatasetIndex back = load_index_json("ingest_index.json");
  std::remove("ingest_index.json");

  CHECK(back.user_names == index.user_names);
  CHECK(back.item_names == index.item_names);
  REQUIRE(back.interactions.size() == index.interactions.size());
  for (size_t k = 0; k < back.interactions.size(); ++k) {
    CHECK(back.interactions[k].user == index.interactions[k].user);
    CHECK(back.interactions[k].item == index.interactions[k].item);
    CHECK(back.interactions[k].rating == index.interactions[k].rating);
    CHECK(back.interactions[k].timestamp == index.interactions[k].timestamp);
    CHECK(back.interactions[k].review_text == index.interactions[k].review_text);
    CHECK(back.interactions[k].summary == index.interactions[k].summary);
    CHECK(back.interactions[k].explanation == index.interactions[k].explanation);
    CHECK(back.interactions[k].feature_word == index.interactions[k].feature_word);
  }
  CHECK(back.per_user_sequence == index.per_user_sequence);
}

TEST_CASE("write_records_tsv re-parses to the same records") {
  auto records = tiny_records();
  records[0].review_text = "nice one";
  records[0].summary = "nice";
  records[0].explanation = "because";
  records[0].feature_word = "quality";
  write_records_tsv(records, "ingest_tsv_out.tsv");
  ParseFormat fmt;
  fmt.col_review = 4;
  fmt.col_summary = 5;
  fmt.col_explanation = 6;
  fmt.col_feature = 7;
  auto back = parse_interactions_file("ingest_tsv_out.tsv", fmt);
  std::remove("ingest_tsv_out.tsv");
  REQUIRE(back.size() == records.size());
  CHECK(back[0].review_text == "nice one");
  CHECK(back[0].feature_word == "quality");
  CHECK(record_multiset(back) == record_multiset(records));
}

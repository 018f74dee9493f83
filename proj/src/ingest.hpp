#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace metaid {

// One user-item rating event. Text fields are optional and empty when absent.
struct InteractionRecord {
  std::string user_key;
  std::string item_key;
  int rating = 0;  // integer 1..5
  int64_t timestamp = 0;
  std::string review_text;
  std::string summary;
  std::string explanation;
  std::string feature_word;
};

// Column layout for delimited input. Column indices are 0-based; -1 = absent.
// jsonl = true switches to one-JSON-object-per-line mode with keys
// user/item/rating/timestamp and optional review/summary/explanation/feature.
struct ParseFormat {
  char delimiter = '\t';
  int col_user = 0;
  int col_item = 1;
  int col_rating = 2;
  int col_timestamp = 3;
  int col_review = -1;
  int col_summary = -1;
  int col_explanation = -1;
  int col_feature = -1;
  bool jsonl = false;
};

struct Interaction {
  uint32_t user = 0;
  uint32_t item = 0;
  int rating = 0;
  int64_t timestamp = 0;
  std::string review_text;
  std::string summary;
  std::string explanation;
  std::string feature_word;
};

// Contiguous re-indexing of a record stream. Indices follow first-occurrence
// order of the keys. per_user_sequence holds interaction ids (positions in
// `interactions`) sorted by timestamp, ties broken by input order.
struct DatasetIndex {
  std::vector<std::string> user_names;
  std::vector<std::string> item_names;
  std::vector<Interaction> interactions;
  std::vector<std::vector<uint32_t>> per_user_sequence;

  uint32_t user_count() const { return static_cast<uint32_t>(user_names.size()); }
  uint32_t item_count() const { return static_cast<uint32_t>(item_names.size()); }
};

enum class SplitKind { leave_one_out, random_80_10_10 };

// Train/validation/test partition of interaction ids.
struct DatasetSplits {
  SplitKind kind = SplitKind::leave_one_out;
  std::vector<uint32_t> train;
  std::vector<uint32_t> validation;
  std::vector<uint32_t> test;
  uint32_t dropped_users = 0;  // leave-one-out only: users with <3 interactions
};

struct DatasetStats {
  uint64_t users = 0;
  uint64_t items = 0;
  uint64_t reviews = 0;
  double sparsity_percent = 0.0;  // 100 * reviews / (users * items)
};

// Reads line-delimited text. Throws DataError naming the 1-based line on a
// malformed line (wrong column count, non-integer rating, rating outside 1..5,
// empty key). Blank lines are skipped. An empty stream yields an empty array.
std::vector<InteractionRecord> parse_interactions(std::istream& in, const ParseFormat& format);
std::vector<InteractionRecord> parse_interactions_file(const std::string& path,
                                                       const ParseFormat& format);

// Writes records in the default TSV layout (user, item, rating, timestamp,
// plus the four text columns when any record carries text).
void write_records_tsv(const std::vector<InteractionRecord>& records, const std::string& path);

// Throws DataError on an empty record array.
DatasetIndex build_index(const std::vector<InteractionRecord>& records);

// Inverse of build_index up to ordering: re-emits one record per interaction.
std::vector<InteractionRecord> emit_records(const DatasetIndex& index);

// Per user: last interaction to test, second-to-last to validation, rest to
// train. Users with fewer than 3 interactions are dropped (counted in
// dropped_users). Throws DataError when no user survives.
DatasetSplits split_leave_one_out(const DatasetIndex& index);

// Seeded Fisher-Yates shuffle of all interaction ids (descending position i,
// swap target drawn as next() % (i+1)), then a (floor(0.8n), floor(0.1n),
// rest) cut. Afterwards any user or item absent from train has its first
// val/test interaction moved into train.
DatasetSplits split_random(const DatasetIndex& index, uint64_t seed);

DatasetStats compute_stats(const DatasetIndex& index);

// Block-diagonal synthetic ratings: every user rates every item of its own
// block with 5; each (user, foreign item) pair independently draws a rating-1
// interaction with probability cross_block_noise. Timestamps are the emission
// sequence 0,1,2,... Keys are "u{idx}" / "i{idx}".
std::vector<InteractionRecord> generate_synthetic(uint32_t blocks, uint32_t users_per_block,
                                                  uint32_t items_per_block,
                                                  double cross_block_noise, uint64_t seed);

// JSON round trip for the index artifact.
void save_index_json(const DatasetIndex& index, const std::string& path);
DatasetIndex load_index_json(const std::string& path);

}  // namespace metaid

#include "ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace metaid {

namespace {

using nlohmann::json;

[[noreturn]] void line_error(uint64_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

// Accepts integers and integral floats ("5" and "5.0"); rejects everything else.
int parse_rating(const std::string& field, uint64_t line_no) {
  if (field.empty()) line_error(line_no, "empty rating");
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size()) line_error(line_no, "rating not numeric: " + field);
  double rounded = std::round(v);
  if (std::fabs(v - rounded) > 1e-9) line_error(line_no, "rating not an integer: " + field);
  int r = static_cast<int>(rounded);
  if (r < 1 || r > 5) line_error(line_no, "rating outside [1,5]: " + field);
  return r;
}

int64_t parse_timestamp(const std::string& field, uint64_t line_no) {
  if (field.empty()) line_error(line_no, "empty timestamp");
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size()) line_error(line_no, "timestamp not numeric: " + field);
  return static_cast<int64_t>(v);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

InteractionRecord record_from_json(const json& obj, uint64_t line_no) {
  if (!obj.is_object()) line_error(line_no, "not a JSON object");
  InteractionRecord rec;
  if (!obj.contains("user") || !obj["user"].is_string())
    line_error(line_no, "missing string field 'user'");
  if (!obj.contains("item") || !obj["item"].is_string())
    line_error(line_no, "missing string field 'item'");
  rec.user_key = obj["user"].get<std::string>();
  rec.item_key = obj["item"].get<std::string>();
  if (!obj.contains("rating")) line_error(line_no, "missing field 'rating'");
  if (obj["rating"].is_number()) {
    double v = obj["rating"].get<double>();
    if (std::fabs(v - std::round(v)) > 1e-9) line_error(line_no, "rating not an integer");
    rec.rating = static_cast<int>(std::round(v));
  } else if (obj["rating"].is_string()) {
    rec.rating = parse_rating(obj["rating"].get<std::string>(), line_no);
  } else {
    line_error(line_no, "rating neither number nor string");
  }
  if (rec.rating < 1 || rec.rating > 5) line_error(line_no, "rating outside [1,5]");
  if (!obj.contains("timestamp") || !obj["timestamp"].is_number())
    line_error(line_no, "missing numeric field 'timestamp'");
  rec.timestamp = static_cast<int64_t>(obj["timestamp"].get<double>());
  auto text = [&](const char* key) -> std::string {
    if (obj.contains(key) && obj[key].is_string()) return obj[key].get<std::string>();
    return {};
  };
  rec.review_text = text("review");
  rec.summary = text("summary");
  rec.explanation = text("explanation");
  rec.feature_word = text("feature");
  return rec;
}

}  // namespace

std::vector<InteractionRecord> parse_interactions(std::istream& in, const ParseFormat& format) {
  std::vector<InteractionRecord> records;
  std::string line;
  uint64_t line_no = 0;
  int max_col = std::max({format.col_user, format.col_item, format.col_rating,
                          format.col_timestamp, format.col_review, format.col_summary,
                          format.col_explanation, format.col_feature});
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    InteractionRecord rec;
    if (format.jsonl) {
      json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded()) line_error(line_no, "invalid JSON");
      rec = record_from_json(obj, line_no);
    } else {
      std::vector<std::string> cols = split_line(line, format.delimiter);
      if (static_cast<int>(cols.size()) <= max_col)
        line_error(line_no, "expected at least " + std::to_string(max_col + 1) +
                                " columns, got " + std::to_string(cols.size()));
      rec.user_key = cols[format.col_user];
      rec.item_key = cols[format.col_item];
      rec.rating = parse_rating(cols[format.col_rating], line_no);
      rec.timestamp = parse_timestamp(cols[format.col_timestamp], line_no);
      if (format.col_review >= 0) rec.review_text = cols[format.col_review];
      if (format.col_summary >= 0) rec.summary = cols[format.col_summary];
      if (format.col_explanation >= 0) rec.explanation = cols[format.col_explanation];
      if (format.col_feature >= 0) rec.feature_word = cols[format.col_feature];
    }
    if (rec.user_key.empty()) line_error(line_no, "empty user key");
    if (rec.item_key.empty()) line_error(line_no, "empty item key");
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<InteractionRecord> parse_interactions_file(const std::string& path,
                                                       const ParseFormat& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input: " + path);
  return parse_interactions(in, format);
}

void write_records_tsv(const std::vector<InteractionRecord>& records, const std::string& path) {
  bool any_text = false;
  for (const auto& r : records) {
    if (!r.review_text.empty() || !r.summary.empty() || !r.explanation.empty() ||
        !r.feature_word.empty()) {
      any_text = true;
      break;
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& r : records) {
    out << r.user_key << '\t' << r.item_key << '\t' << r.rating << '\t' << r.timestamp;
    if (any_text)
      out << '\t' << r.review_text << '\t' << r.summary << '\t' << r.explanation << '\t'
          << r.feature_word;
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

DatasetIndex build_index(const std::vector<InteractionRecord>& records) {
  if (records.empty()) throw DataError("cannot index zero records");
  DatasetIndex index;
  std::unordered_map<std::string, uint32_t> user_ids;
  std::unordered_map<std::string, uint32_t> item_ids;
  index.interactions.reserve(records.size());
  for (const auto& rec : records) {
    auto [uit, u_new] = user_ids.try_emplace(rec.user_key,
                                             static_cast<uint32_t>(index.user_names.size()));
    if (u_new) index.user_names.push_back(rec.user_key);
    auto [iit, i_new] = item_ids.try_emplace(rec.item_key,
                                             static_cast<uint32_t>(index.item_names.size()));
    if (i_new) index.item_names.push_back(rec.item_key);
    Interaction x;
    x.user = uit->second;
    x.item = iit->second;
    x.rating = rec.rating;
    x.timestamp = rec.timestamp;
    x.review_text = rec.review_text;
    x.summary = rec.summary;
    x.explanation = rec.explanation;
    x.feature_word = rec.feature_word;
    index.interactions.push_back(std::move(x));
  }
  index.per_user_sequence.resize(index.user_names.size());
  for (uint32_t id = 0; id < index.interactions.size(); ++id)
    index.per_user_sequence[index.interactions[id].user].push_back(id);
  // Stable sort keeps input order among equal timestamps.
  for (auto& seq : index.per_user_sequence)
    std::stable_sort(seq.begin(), seq.end(), [&](uint32_t a, uint32_t b) {
      return index.interactions[a].timestamp < index.interactions[b].timestamp;
    });
  return index;
}

std::vector<InteractionRecord> emit_records(const DatasetIndex& index) {
  std::vector<InteractionRecord> records;
  records.reserve(index.interactions.size());
  for (const auto& x : index.interactions) {
    InteractionRecord rec;
    rec.user_key = index.user_names[x.user];
    rec.item_key = index.item_names[x.item];
    rec.rating = x.rating;
    rec.timestamp = x.timestamp;
    rec.review_text = x.review_text;
    rec.summary = x.summary;
    rec.explanation = x.explanation;
    rec.feature_word = x.feature_word;
    records.push_back(std::move(rec));
  }
  return records;
}

DatasetSplits split_leave_one_out(const DatasetIndex& index) {
  DatasetSplits splits;
  splits.kind = SplitKind::leave_one_out;
  for (const auto& seq : index.per_user_sequence) {
    if (seq.size() < 3) {
      ++splits.dropped_users;
      continue;
    }
    for (size_t p = 0; p + 2 < seq.size(); ++p) splits.train.push_back(seq[p]);
    splits.validation.push_back(seq[seq.size() - 2]);
    splits.test.push_back(seq[seq.size() - 1]);
  }
  if (splits.test.empty())
    throw DataError("leave-one-out: no user has 3 or more interactions");
  return splits;
}

DatasetSplits split_random(const DatasetIndex& index, uint64_t seed) {
  DatasetSplits splits;
  splits.kind = SplitKind::random_80_10_10;
  size_t n = index.interactions.size();
  std::vector<uint32_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
  Rng rng(seed);
  for (size_t i = n; i > 1; --i) {
    uint64_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  size_t n_train = static_cast<size_t>(std::floor(0.8 * static_cast<double>(n)));
  size_t n_val = static_cast<size_t>(std::floor(0.1 * static_cast<double>(n)));
  splits.train.assign(order.begin(), order.begin() + n_train);
  splits.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  splits.test.assign(order.begin() + n_train + n_val, order.end());

  // Coverage repair: every user and item must keep one training instance.
  std::vector<char> user_in_train(index.user_names.size(), 0);
  std::vector<char> item_in_train(index.item_names.size(), 0);
  auto mark = [&](uint32_t id) {
    user_in_train[index.interactions[id].user] = 1;
    item_in_train[index.interactions[id].item] = 1;
  };
  for (uint32_t id : splits.train) mark(id);
  auto needs_move = [&](uint32_t id) {
    return !user_in_train[index.interactions[id].user] ||
           !item_in_train[index.interactions[id].item];
  };
  auto repair_from = [&](std::vector<uint32_t>& pool) {
    for (size_t k = 0; k < pool.size();) {
      if (needs_move(pool[k])) {
        splits.train.push_back(pool[k]);
        mark(pool[k]);
        pool.erase(pool.begin() + static_cast<ptrdiff_t>(k));
      } else {
        ++k;
      }
    }
  };
  repair_from(splits.validation);
  repair_from(splits.test);
  std::string uncovered;
  for (uint32_t u = 0; u < user_in_train.size(); ++u)
    if (!user_in_train[u]) uncovered += " user " + index.user_names[u];
  for (uint32_t i = 0; i < item_in_train.size(); ++i)
    if (!item_in_train[i]) uncovered += " item " + index.item_names[i];
  if (!uncovered.empty())
    throw DataError("random split cannot cover entities in train:" + uncovered);
  return splits;
}

DatasetStats compute_stats(const DatasetIndex& index) {
  DatasetStats s;
  s.users = index.user_names.size();
  s.items = index.item_names.size();
  s.reviews = index.interactions.size();
  s.sparsity_percent = 100.0 * static_cast<double>(s.reviews) /
                       (static_cast<double>(s.users) * static_cast<double>(s.items));
  return s;
}

std::vector<InteractionRecord> generate_synthetic(uint32_t blocks, uint32_t users_per_block,
                                                  uint32_t items_per_block,
                                                  double cross_block_noise, uint64_t seed) {
  if (blocks < 1) throw DataError("synthetic: blocks must be >= 1");
  if (users_per_block == 0 || items_per_block == 0)
    throw DataError("synthetic: zero users or items per block");
  if (cross_block_noise < 0.0 || cross_block_noise >= 1.0)
    throw DataError("synthetic: noise must lie in [0,1)");
  std::vector<InteractionRecord> records;
  Rng rng(derive_seed(seed, {0x53594e54ull}));  // "SYNT"
  int64_t t = 0;
  uint64_t n_items = static_cast<uint64_t>(blocks) * items_per_block;
  auto emit = [&records, &t](const std::string& user_key, uint64_t item_idx, int rating) {
    InteractionRecord rec;
    rec.user_key = user_key;
    rec.item_key = "i" + std::to_string(item_idx);
    rec.rating = rating;
    rec.timestamp = t++;
    records.push_back(std::move(rec));
  };
  for (uint32_t b = 0; b < blocks; ++b) {
    for (uint32_t u = 0; u < users_per_block; ++u) {
      uint64_t user_idx = static_cast<uint64_t>(b) * users_per_block + u;
      std::string user_key = "u" + std::to_string(user_idx);
      for (uint32_t i = 0; i < items_per_block; ++i)
        emit(user_key, static_cast<uint64_t>(b) * items_per_block + i, 5);
      for (uint64_t item_idx = 0; item_idx < n_items; ++item_idx) {
        if (item_idx / items_per_block == b) continue;
        if (rng.unit() < cross_block_noise) emit(user_key, item_idx, 1);
      }
    }
  }
  return records;
}

void save_index_json(const DatasetIndex& index, const std::string& path) {
  json doc;
  doc["users"] = index.user_names;
  doc["items"] = index.item_names;
  json arr = json::array();
  for (const auto& x : index.interactions) {
    json e;
    e["u"] = x.user;
    e["i"] = x.item;
    e["r"] = x.rating;
    e["t"] = x.timestamp;
    if (!x.review_text.empty()) e["review"] = x.review_text;
    if (!x.summary.empty()) e["summary"] = x.summary;
    if (!x.explanation.empty()) e["explanation"] = x.explanation;
    if (!x.feature_word.empty()) e["feature"] = x.feature_word;
    arr.push_back(std::move(e));
  }
  doc["interactions"] = std::move(arr);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << doc.dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

DatasetIndex load_index_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw DataError("invalid JSON in " + path);
  DatasetIndex index;
  try {
    index.user_names = doc.at("users").get<std::vector<std::string>>();
    index.item_names = doc.at("items").get<std::vector<std::string>>();
    for (const auto& e : doc.at("interactions")) {
      Interaction x;
      x.user = e.at("u").get<uint32_t>();
      x.item = e.at("i").get<uint32_t>();
      x.rating = e.at("r").get<int>();
      x.timestamp = e.at("t").get<int64_t>();
      if (e.contains("review")) x.review_text = e["review"].get<std::string>();
      if (e.contains("summary")) x.summary = e["summary"].get<std::string>();
      if (e.contains("explanation")) x.explanation = e["explanation"].get<std::string>();
      if (e.contains("feature")) x.feature_word = e["feature"].get<std::string>();
      if (x.user >= index.user_names.size() || x.item >= index.item_names.size())
        throw DataError("interaction index out of range in " + path);
      index.interactions.push_back(std::move(x));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed index file " + path + ": " + e.what());
  }
  index.per_user_sequence.resize(index.user_names.size());
  for (uint32_t id = 0; id < index.interactions.size(); ++id)
    index.per_user_sequence[index.interactions[id].user].push_back(id);
  for (auto& seq : index.per_user_sequence)
    std::stable_sort(seq.begin(), seq.end(), [&](uint32_t a, uint32_t b) {
      return index.interactions[a].timestamp < index.interactions[b].timestamp;
    });
  return index;
}

}  // namespace metaid

#include "idgen.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace metaid {

using nlohmann::json;

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, char sep) {
  std::string out;
  for (size_t k = 0; k < tokens.size(); ++k) {
    if (k) out.push_back(sep);
    out += tokens[k];
  }
  return out;
}

void build_reverse(IdAssignment& a) {
  a.reverse.clear();
  auto add = [&](bool is_user, uint32_t idx, const std::vector<std::string>& tokens) {
    auto [it, inserted] = a.reverse.try_emplace(join_tokens(tokens, '\t'),
                                                EntityRef{is_user, idx});
    if (!inserted)
      throw std::runtime_error("duplicate id sequence: " + join_tokens(tokens, ' '));
  };
  for (uint32_t u = 0; u < a.user_ids.size(); ++u) add(true, u, a.user_ids[u]);
  for (uint32_t i = 0; i < a.item_ids.size(); ++i) add(false, i, a.item_ids[i]);
}

}  // namespace

const char* token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::prefix: return "prefix";
    case TokenKind::coarse: return "coarse";
    case TokenKind::fine: return "fine";
    case TokenKind::digit: return "digit";
  }
  return "fine";
}

TokenKind token_kind_from_name(const std::string& name) {
  if (name == "prefix") return TokenKind::prefix;
  if (name == "coarse") return TokenKind::coarse;
  if (name == "fine") return TokenKind::fine;
  if (name == "digit") return TokenKind::digit;
  throw DataError("unknown token kind: " + name);
}

std::optional<uint32_t> Vocabulary::index_of(const std::string& surface) const {
  for (uint32_t k = 0; k < tokens.size(); ++k)
    if (tokens[k].surface == surface) return k;
  return std::nullopt;
}

const char* strategy_name(IdStrategy s) {
  switch (s) {
    case IdStrategy::META: return "meta";
    case IdStrategy::RID: return "rid";
    case IdStrategy::SID: return "sid";
  }
  return "meta";
}

IdStrategy strategy_from_name(const std::string& name) {
  if (name == "meta") return IdStrategy::META;
  if (name == "rid") return IdStrategy::RID;
  if (name == "sid") return IdStrategy::SID;
  throw UsageError("unknown id strategy: " + name);
}

const std::vector<std::string>& IdAssignment::tokens_of(bool is_user, uint32_t idx) const {
  const auto& side = is_user ? user_ids : item_ids;
  if (idx >= side.size()) throw UsageError("entity index out of range");
  return side[idx];
}

std::string IdAssignment::surface_of(bool is_user, uint32_t idx) const {
  return join_tokens(tokens_of(is_user, idx), ' ');
}

std::vector<std::string> digit_pair_tokens(uint64_t v) {
  std::string digits = std::to_string(v);
  std::vector<std::string> tokens;
  size_t pos = 0;
  if (digits.size() % 2 == 1) {
    tokens.push_back(digits.substr(0, 1));
    pos = 1;
  }
  for (; pos < digits.size(); pos += 2) tokens.push_back(digits.substr(pos, 2));
  return tokens;
}

std::pair<IdAssignment, Vocabulary> assign_meta_ids(const ClusterModel& model,
                                                    uint32_t user_count, uint32_t item_count) {
  uint64_t entities = static_cast<uint64_t>(user_count) + item_count;
  if (model.assignment.size() != entities)
    throw DataError("cluster model covers " + std::to_string(model.assignment.size()) +
                    " entities, index has " + std::to_string(entities));
  if (model.fine_rank.size() != entities) throw DataError("fine ranks missing from model");

  IdAssignment a;
  a.strategy = IdStrategy::META;
  auto sequence = [&](uint64_t row, bool is_user) {
    uint32_t g = model.assignment[row];
    uint32_t y = model.fine_rank[row];
    return std::vector<std::string>{is_user ? "<User>" : "<Item>",
                                    "<CT_" + std::to_string(g + 1) + ">",
                                    "<y_" + std::to_string(y) + ">"};
  };
  a.user_ids.reserve(user_count);
  for (uint32_t u = 0; u < user_count; ++u) a.user_ids.push_back(sequence(u, true));
  a.item_ids.reserve(item_count);
  for (uint32_t i = 0; i < item_count; ++i)
    a.item_ids.push_back(sequence(static_cast<uint64_t>(user_count) + i, false));
  build_reverse(a);

  Vocabulary vocab;
  vocab.tokens.push_back({"<User>", TokenKind::prefix});
  vocab.tokens.push_back({"<Item>", TokenKind::prefix});
  for (uint32_t g = 0; g < model.groups; ++g)
    vocab.tokens.push_back({"<CT_" + std::to_string(g + 1) + ">", TokenKind::coarse});
  uint32_t max_size = 0;
  for (uint32_t s : model.cluster_sizes) max_size = std::max(max_size, s);
  for (uint32_t y = 1; y <= max_size; ++y)
    vocab.tokens.push_back({"<y_" + std::to_string(y) + ">", TokenKind::fine});
  return {std::move(a), std::move(vocab)};
}

IdAssignment assign_rid(uint32_t user_count, uint32_t item_count, uint64_t seed) {
  IdAssignment a;
  a.strategy = IdStrategy::RID;
  uint64_t entities = static_cast<uint64_t>(user_count) + item_count;
  uint64_t range = 10 * entities;
  Rng rng(derive_seed(seed, {0x524944ull}));  // "RID"
  std::unordered_set<uint64_t> used;
  auto draw = [&]() {
    while (true) {
      uint64_t v = rng.below(range);
      if (used.insert(v).second) return v;
    }
  };
  a.user_ids.reserve(user_count);
  for (uint32_t u = 0; u < user_count; ++u) {
    std::vector<std::string> tokens{"user"};
    for (auto& t : digit_pair_tokens(draw())) tokens.push_back(std::move(t));
    a.user_ids.push_back(std::move(tokens));
  }
  a.item_ids.reserve(item_count);
  for (uint32_t i = 0; i < item_count; ++i) {
    std::vector<std::string> tokens{"item"};
    for (auto& t : digit_pair_tokens(draw())) tokens.push_back(std::move(t));
    a.item_ids.push_back(std::move(tokens));
  }
  build_reverse(a);
  return a;
}

IdAssignment assign_sid(const DatasetIndex& index) {
  IdAssignment a;
  a.strategy = IdStrategy::SID;
  uint32_t m = index.user_count();
  uint32_t n = index.item_count();
  a.user_ids.reserve(m);
  for (uint32_t u = 0; u < m; ++u) {
    std::vector<std::string> tokens{"user"};
    for (auto& t : digit_pair_tokens(u + 1)) tokens.push_back(std::move(t));
    a.user_ids.push_back(std::move(tokens));
  }
  std::vector<uint64_t> item_number(n, 0);
  uint64_t next = 1;
  for (uint32_t u = 0; u < m; ++u)
    for (uint32_t id : index.per_user_sequence[u]) {
      uint32_t item = index.interactions[id].item;
      if (item_number[item] == 0) item_number[item] = next++;
    }
  a.item_ids.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    std::vector<std::string> tokens{"item"};
    for (auto& t : digit_pair_tokens(item_number[i])) tokens.push_back(std::move(t));
    a.item_ids.push_back(std::move(tokens));
  }
  build_reverse(a);
  return a;
}

Vocabulary baseline_vocabulary(const IdAssignment& assignment, uint32_t dim, double alpha,
                               uint64_t seed) {
  Vocabulary vocab;
  vocab.alpha = alpha;
  std::unordered_set<std::string> seen;
  auto collect = [&](const std::vector<std::vector<std::string>>& side) {
    for (const auto& tokens : side)
      for (size_t k = 0; k < tokens.size(); ++k)
        if (seen.insert(tokens[k]).second)
          vocab.tokens.push_back({tokens[k], k == 0 ? TokenKind::prefix : TokenKind::digit});
  };
  collect(assignment.user_ids);
  collect(assignment.item_ids);
  vocab.f_init = Matrix(vocab.tokens.size(), dim);
  Rng rng(derive_seed(seed, {0x46494e49ull}));  // "FINI"
  double half = alpha / dim;
  for (double& v : vocab.f_init.data) v = rng.range(-half, half);
  return vocab;
}

void build_f_init(const ClusterModel& model, Vocabulary& vocab, double alpha, uint64_t seed) {
  vocab.alpha = alpha;
  vocab.f_init = Matrix(vocab.tokens.size(), model.dim);
  Rng rng(derive_seed(seed, {0x46494e49ull}));  // "FINI"
  double half = alpha / model.dim;
  for (uint32_t k = 0; k < vocab.tokens.size(); ++k) {
    auto row = vocab.f_init.row(k);
    if (vocab.tokens[k].kind == TokenKind::coarse) {
      const std::string& s = vocab.tokens[k].surface;  // "<CT_g>" with g 1-based
      uint32_t g = 0;
      for (char c : s)
        if (c >= '0' && c <= '9') g = g * 10 + static_cast<uint32_t>(c - '0');
      if (g == 0 || g > model.groups)
        throw DataError("coarse token outside the cluster model: " + s);
      auto mu = model.centroids.row(g - 1);
      for (uint32_t j = 0; j < model.dim; ++j) row[j] = alpha * mu[j];
    } else {
      for (uint32_t j = 0; j < model.dim; ++j) row[j] = rng.range(-half, half);
    }
  }
}

std::optional<EntityRef> decode_id(const IdAssignment& assignment,
                                   const std::vector<std::string>& tokens) {
  auto it = assignment.reverse.find(join_tokens(tokens, '\t'));
  if (it == assignment.reverse.end()) return std::nullopt;
  return it->second;
}

void save_vocab_tsv(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (uint32_t k = 0; k < vocab.tokens.size(); ++k)
    out << vocab.tokens[k].surface << '\t' << token_kind_name(vocab.tokens[k].kind) << '\t' << k
        << '\n';
  if (!out) throw DataError("write failed: " + path);
}

Vocabulary load_vocab_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  Vocabulary vocab;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string surface, kind, idx;
    if (!std::getline(ss, surface, '\t') || !std::getline(ss, kind, '\t') ||
        !std::getline(ss, idx))
      throw DataError("vocab line " + std::to_string(line_no) + ": expected 3 columns");
    if (std::to_string(vocab.tokens.size()) != idx)
      throw DataError("vocab line " + std::to_string(line_no) + ": index out of order");
    vocab.tokens.push_back({surface, token_kind_from_name(kind)});
  }
  return vocab;
}

void save_id_map_json(const IdAssignment& assignment, const DatasetIndex& index,
                      const std::string& path) {
  if (assignment.user_ids.size() != index.user_count() ||
      assignment.item_ids.size() != index.item_count())
    throw DataError("assignment does not cover the index");
  json doc;
  doc["strategy"] = strategy_name(assignment.strategy);
  json users = json::object();
  for (uint32_t u = 0; u < index.user_count(); ++u)
    users[index.user_names[u]] = assignment.user_ids[u];
  json items = json::object();
  for (uint32_t i = 0; i < index.item_count(); ++i)
    items[index.item_names[i]] = assignment.item_ids[i];
  doc["users"] = std::move(users);
  doc["items"] = std::move(items);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << doc.dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

IdAssignment load_id_map_json(const DatasetIndex& index, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw DataError("invalid JSON in " + path);
  IdAssignment a;
  try {
    a.strategy = strategy_from_name(doc.at("strategy").get<std::string>());
    a.user_ids.resize(index.user_count());
    a.item_ids.resize(index.item_count());
    const auto& users = doc.at("users");
    for (uint32_t u = 0; u < index.user_count(); ++u) {
      auto it = users.find(index.user_names[u]);
      if (it == users.end()) throw DataError("id map missing user " + index.user_names[u]);
      a.user_ids[u] = it->get<std::vector<std::string>>();
    }
    const auto& items = doc.at("items");
    for (uint32_t i = 0; i < index.item_count(); ++i) {
      auto it = items.find(index.item_names[i]);
      if (it == items.end()) throw DataError("id map missing item " + index.item_names[i]);
      a.item_ids[i] = it->get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw DataError("malformed id map " + path + ": " + e.what());
  }
  build_reverse(a);
  return a;
}

}  // namespace metaid

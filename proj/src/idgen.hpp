#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cluster.hpp"
#include "ingest.hpp"
#include "matrix.hpp"

namespace metaid {

enum class TokenKind { prefix, coarse, fine, digit };

const char* token_kind_name(TokenKind kind);
TokenKind token_kind_from_name(const std::string& name);

struct OovToken {
  std::string surface;
  TokenKind kind = TokenKind::fine;
};

// Token inventory plus the initialization matrix handed to the fine-tuning
// stack. Row k of f_init belongs to tokens[k]; vocab indices are positions.
struct Vocabulary {
  std::vector<OovToken> tokens;
  Matrix f_init;
  double alpha = 0.1;

  std::optional<uint32_t> index_of(const std::string& surface) const;
};

enum class IdStrategy { META, RID, SID };

const char* strategy_name(IdStrategy s);
IdStrategy strategy_from_name(const std::string& name);

// (is_user, entity index) pair naming one side of the bipartite universe.
struct EntityRef {
  bool is_user = false;
  uint32_t index = 0;
};

struct IdAssignment {
  IdStrategy strategy = IdStrategy::META;
  std::vector<std::vector<std::string>> user_ids;
  std::vector<std::vector<std::string>> item_ids;
  // Keyed by the tab-joined token sequence; populated at construction.
  std::unordered_map<std::string, EntityRef> reverse;

  const std::vector<std::string>& tokens_of(bool is_user, uint32_t idx) const;
  std::string surface_of(bool is_user, uint32_t idx) const;  // space-joined
};

// Renders v in decimal and cuts it into digit pairs left to right; an odd
// length leaves a single leading digit ("2024" -> "20","24"; "123" -> "1","23").
std::vector<std::string> digit_pair_tokens(uint64_t v);

// Entity in cluster g with fine rank y becomes (<User>|<Item>, <CT_{g+1}>,
// <y_y>). Vocabulary order: the two prefixes, <CT_1>..<CT_G>, then <y_1> up to
// the largest cluster size. f_init is left empty; see build_f_init.
std::pair<IdAssignment, Vocabulary> assign_meta_ids(const ClusterModel& model,
                                                    uint32_t user_count, uint32_t item_count);

// Distinct random integers in [0, 10*(m+n)) rendered as digit pairs behind a
// literal "user"/"item" token.
IdAssignment assign_rid(uint32_t user_count, uint32_t item_count, uint64_t seed);

// Users take 1..m in index order. Items are numbered by first touch while
// walking users in index order through their chronological sequences.
IdAssignment assign_sid(const DatasetIndex& index);

// Token inventory of a baseline assignment (first-appearance order over users
// then items); every f_init row is seeded uniform noise, as with META's
// non-coarse rows.
Vocabulary baseline_vocabulary(const IdAssignment& assignment, uint32_t dim, double alpha,
                               uint64_t seed);

// Fills f_init: coarse rows are alpha * centroid, every other row is seeded
// uniform in [-alpha/dim, alpha/dim]. Throws DataError when a coarse token
// refers outside the model.
void build_f_init(const ClusterModel& model, Vocabulary& vocab, double alpha, uint64_t seed);

std::optional<EntityRef> decode_id(const IdAssignment& assignment,
                                   const std::vector<std::string>& tokens);

// Artifact writers: "surface<TAB>kind<TAB>index" lines; f_init in the shared
// binary matrix format; the ID map as JSON keyed by entity key strings.
void save_vocab_tsv(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab_tsv(const std::string& path);  // f_init left empty
void save_id_map_json(const IdAssignment& assignment, const DatasetIndex& index,
                      const std::string& path);
IdAssignment load_id_map_json(const DatasetIndex& index, const std::string& path);

}  // namespace metaid

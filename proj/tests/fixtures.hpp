#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "ingest.hpp"

namespace metaid::testfix {

// Hand-checkable six-interaction dataset used across suites:
//   u1: i1=5, i2=1   u2: i1=1, i2=5   u3: i2=4, i3=2
// Timestamps increase in listing order, so indices follow first appearance:
// users u1,u2,u3 -> 0,1,2 and items i1,i2,i3 -> 0,1,2.
inline const char* tiny_tsv() {
  return
      "u1\ti1\t5\t0\n"
      "u1\ti2\t1\t1\n"
      "u2\ti1\t1\t2\n"
      "u2\ti2\t5\t3\n"
      "u3\ti2\t4\t4\n"
      "u3\ti3\t2\t5\n";
}

inline std::vector<InteractionRecord> tiny_records() {
  auto rec = [](const char* u, const char* i, int r, int64_t t) {
    InteractionRecord x;
    x.user_key = u;
    x.item_key = i;
    x.rating = r;
    x.timestamp = t;
    return x;
  };
  return {rec("u1", "i1", 5, 0), rec("u1", "i2", 1, 1), rec("u2", "i1", 1, 2),
          rec("u2", "i2", 5, 3), rec("u3", "i2", 4, 4), rec("u3", "i3", 2, 5)};
}

inline DatasetIndex tiny_index() { return build_index(tiny_records()); }

// Default-format parse of inline TSV text.
inline std::vector<InteractionRecord> parse_tsv(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in, ParseFormat{});
}

}  // namespace metaid::testfix

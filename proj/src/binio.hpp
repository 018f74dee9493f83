#pragma once

#include <cstdint>
#include <string>

#include "matrix.hpp"

namespace metaid {

// Embedding container file: magic "MPEB", three little-endian u64 header
// fields (count_a, count_b, dim), then (count_a + count_b) * dim float32
// values, row-major, little-endian. Joint user+item embeddings use
// (users, items, dim); standalone matrices use (rows, 0, dim).
struct EmbeddingFile {
  uint64_t count_a = 0;
  uint64_t count_b = 0;
  Matrix values;  // (count_a + count_b) rows; doubles in memory, float32 on disk.
};

void write_embedding_file(const std::string& path, uint64_t count_a, uint64_t count_b,
                          const Matrix& values);
// Throws DataError on missing file, bad magic, or truncated payload.
EmbeddingFile read_embedding_file(const std::string& path);

}  // namespace metaid

#include "binio.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "errors.hpp"

namespace metaid {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'E', 'B'};

void put_u64(std::ofstream& out, uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::ifstream& in, const std::string& path) {
  uint8_t b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw DataError("truncated header in " + path);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_embedding_file(const std::string& path, uint64_t count_a, uint64_t count_b,
                          const Matrix& values) {
  if (values.rows != count_a + count_b)
    throw DataError("embedding row count mismatch writing " + path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  put_u64(out, count_a);
  put_u64(out, count_b);
  put_u64(out, values.dim);
  std::vector<float> row(values.dim);
  for (uint64_t r = 0; r < values.rows; ++r) {
    auto src = values.row(r);
    for (uint32_t j = 0; j < values.dim; ++j) row[j] = static_cast<float>(src[j]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw DataError("write failed: " + path);
}

EmbeddingFile read_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad magic in " + path);
  EmbeddingFile f;
  f.count_a = get_u64(in, path);
  f.count_b = get_u64(in, path);
  uint64_t dim = get_u64(in, path);
  if (dim == 0 || dim > (1u << 20)) throw DataError("implausible dimension in " + path);
  uint64_t rows = f.count_a + f.count_b;
  f.values = Matrix(rows, static_cast<uint32_t>(dim));
  std::vector<float> row(dim);
  for (uint64_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (static_cast<uint64_t>(in.gcount()) != dim * sizeof(float))
      throw DataError("truncated payload in " + path);
    auto dst = f.values.row(r);
    for (uint64_t j = 0; j < dim; ++j) dst[j] = row[j];
  }
  return f;
}

}  // namespace metaid

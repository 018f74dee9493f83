#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace metaid {

// Dense row-major matrix of doubles.
struct Matrix {
  uint64_t rows = 0;
  uint32_t dim = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(uint64_t r, uint32_t d) : rows(r), dim(d), data(r * static_cast<uint64_t>(d), 0.0) {}

  std::span<double> row(uint64_t i) { return {data.data() + i * dim, dim}; }
  std::span<const double> row(uint64_t i) const { return {data.data() + i * dim, dim}; }
};

}  // namespace metaid

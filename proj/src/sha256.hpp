#pragma once

#include <cstdint>
#include <string>

namespace metaid {

// Incremental SHA-256. hex() finalizes a copy, so the hasher stays usable.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  // Lowercase hex digest of everything fed so far.
  std::string hex() const;

 private:
  void process_block(const uint8_t* block);

  uint32_t state_[8];
  uint64_t total_len_ = 0;
  uint8_t buffer_[64];
  size_t buffer_len_ = 0;
};

std::string sha256_hex(const std::string& data);
// Throws DataError if the file cannot be opened.
std::string sha256_file(const std::string& path);

}  // namespace metaid

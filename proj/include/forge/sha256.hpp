#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace forge {

// Incremental SHA-256. Content hashes are used for provenance (artifact
// identity, cache keys, frozen-reference checks), not for security.
class Sha256 {
 public:
  Sha256();

  void update(const void* data, std::size_t len);
  void update(std::span<const std::uint8_t> data) { update(data.data(), data.size()); }
  void update(const std::string& s) { update(s.data(), s.size()); }

  std::array<std::uint8_t, 32> digest();

 private:
  void process_block(const std::uint8_t* block);

  std::array<std::uint32_t, 8> state_;
  std::array<std::uint8_t, 64> buffer_;
  std::uint64_t bit_count_ = 0;
  std::size_t buffer_len_ = 0;
  bool finalized_ = false;
};

std::string to_hex(std::span<const std::uint8_t> bytes);

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::vector<double>& values);

// Hash of a file's raw bytes. Throws IoError if unreadable.
std::string sha256_file_hex(const std::string& path);

}  // namespace forge

#pragma once

#include <cstdint>
#include <vector>

#include "segrest/common/codec.hpp"
#include "segrest/common/types.hpp"

namespace segrest {

// Bloom filter over page ids using double hashing: probe i sets bit
// (h1 + i * h2) mod bit_len.
class BloomFilter {
 public:
  static constexpr std::uint32_t kBitsPerKey = 10;
  static constexpr std::uint32_t kHashes = 7;

  BloomFilter() = default;
  explicit BloomFilter(std::uint64_t expected_keys);

  void add(PageId page);
  bool may_contain(PageId page) const;

  std::uint32_t bit_len() const { return bit_len_; }

  // u32 bit_len followed by ceil(bit_len / 8) bytes.
  void serialize(Writer& w) const;
  static BloomFilter deserialize(Reader& r);

 private:
  std::uint32_t bit_len_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace segrest

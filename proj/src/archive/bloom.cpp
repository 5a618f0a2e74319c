#include "segrest/archive/bloom.hpp"

#include <algorithm>

#include "segrest/common/errors.hpp"

namespace segrest {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

BloomFilter::BloomFilter(std::uint64_t expected_keys)
    : bit_len_(static_cast<std::uint32_t>(std::max<std::uint64_t>(64, expected_keys * kBitsPerKey))),
      bits_((bit_len_ + 7) / 8, 0) {}

void BloomFilter::add(PageId page) {
  const std::uint64_t h1 = mix(page.value);
  const std::uint64_t h2 = mix(h1) | 1;
  for (std::uint32_t i = 0; i < kHashes; ++i) {
    const std::uint64_t bit = (h1 + i * h2) % bit_len_;
    bits_[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
  }
}

bool BloomFilter::may_contain(PageId page) const {
  if (bit_len_ == 0) return false;
  const std::uint64_t h1 = mix(page.value);
  const std::uint64_t h2 = mix(h1) | 1;
  for (std::uint32_t i = 0; i < kHashes; ++i) {
    const std::uint64_t bit = (h1 + i * h2) % bit_len_;
    if ((bits_[bit / 8] & (1u << (bit % 8))) == 0) return false;
  }
  return true;
}

void BloomFilter::serialize(Writer& w) const {
  w.u32(bit_len_);
  w.raw(std::as_bytes(std::span(bits_.data(), bits_.size())));
}

BloomFilter BloomFilter::deserialize(Reader& r) {
  BloomFilter f;
  f.bit_len_ = r.u32();
  const auto raw = r.raw((f.bit_len_ + 7) / 8);
  f.bits_.resize(raw.size());
  std::transform(raw.begin(), raw.end(), f.bits_.begin(),
                 [](std::byte b) { return static_cast<std::uint8_t>(b); });
  return f;
}

}  // namespace segrest

#include "segrest/storage/page.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "segrest/common/codec.hpp"
#include "segrest/common/errors.hpp"

namespace segrest {

namespace {

auto key_less = [](const Page::Record& r, std::uint32_t key) { return r.key < key; };

void put_le(std::byte* p, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) p[i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
}

std::uint64_t get_le(const std::byte* p, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::optional<Value> Page::find(std::uint32_t key) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), key, key_less);
  if (it == records_.end() || it->key != key) return std::nullopt;
  return it->value;
}

bool Page::set(std::uint32_t key, const Value& value, std::size_t max_records) {
  auto it = std::lower_bound(records_.begin(), records_.end(), key, key_less);
  if (it != records_.end() && it->key == key) {
    it->value = value;
    return true;
  }
  if (records_.size() >= max_records) return false;
  records_.insert(it, Record{key, value});
  return true;
}

bool Page::erase(std::uint32_t key) {
  auto it = std::lower_bound(records_.begin(), records_.end(), key, key_less);
  if (it == records_.end() || it->key != key) return false;
  records_.erase(it);
  return true;
}

void Page::serialize(std::span<std::byte> out) const {
  if (kHeaderSize + records_.size() * kRecordSize > out.size()) {
    throw Error("page " + std::to_string(id_.value) + " overflows its frame");
  }
  std::byte* p = out.data();
  put_le(p + 4, id_.value, 8);
  put_le(p + 12, lsn_.value, 8);
  put_le(p + 20, records_.size(), 2);
  std::byte* rec = p + kHeaderSize;
  for (const auto& r : records_) {
    put_le(rec, r.key, 4);
    std::memcpy(rec + 4, r.value.data(), kValueSize);
    rec += kRecordSize;
  }
  std::memset(rec, 0, static_cast<std::size_t>(out.data() + out.size() - rec));
  store_u32(out, crc32(out.subspan(4)));
}

Page Page::deserialize(std::span<const std::byte> in, PageId expected) {
  if (in.size() < kHeaderSize || load_u32(in) != crc32(in.subspan(4))) {
    throw CorruptionError("checksum mismatch on page " + std::to_string(expected.value));
  }
  const std::byte* p = in.data();
  Page page(PageId{get_le(p + 4, 8)});
  if (page.id_ != expected) {
    throw CorruptionError("page " + std::to_string(expected.value) + " holds image of page " +
                          std::to_string(page.id_.value));
  }
  page.lsn_ = Lsn{get_le(p + 12, 8)};
  const auto count = static_cast<std::size_t>(get_le(p + 20, 2));
  if (kHeaderSize + count * kRecordSize > in.size()) {
    throw CorruptionError("record count out of range on page " + std::to_string(expected.value));
  }
  page.records_.resize(count);
  const std::byte* rec = p + kHeaderSize;
  for (auto& r : page.records_) {
    r.key = static_cast<std::uint32_t>(get_le(rec, 4));
    std::memcpy(r.value.data(), rec + 4, kValueSize);
    rec += kRecordSize;
  }
  return page;
}

}  // namespace segrest

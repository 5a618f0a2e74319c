#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "segrest/common/types.hpp"

namespace segrest {

inline constexpr std::size_t kValueSize = 16;
using Value = std::array<std::byte, kValueSize>;

// In-memory image of one fixed-size page: a sorted key/value set stamped
// with the LSN of the last update applied to it.
//
// On-disk layout (little-endian, exactly page_size bytes):
//   u32 checksum   crc32 over bytes [4, page_size)
//   u64 page_id
//   u64 page_lsn
//   u16 record_count
//   record_count x (u32 key, kValueSize value bytes), ascending by key
//   zero padding
class Page {
 public:
  struct Record {
    std::uint32_t key = 0;
    Value value{};
    bool operator==(const Record&) const = default;
  };

  static constexpr std::size_t kHeaderSize = 4 + 8 + 8 + 2;
  static constexpr std::size_t kRecordSize = 4 + kValueSize;

  Page() = default;
  explicit Page(PageId id) : id_(id) {}

  PageId id() const { return id_; }
  Lsn lsn() const { return lsn_; }
  void set_lsn(Lsn lsn) { lsn_ = lsn; }

  // Records that fit in a page of the given size.
  static std::size_t capacity(std::uint32_t page_size) {
    return (page_size - kHeaderSize) / kRecordSize;
  }

  std::optional<Value> find(std::uint32_t key) const;

  // Returns false when inserting a new key would exceed `max_records`.
  bool set(std::uint32_t key, const Value& value, std::size_t max_records);
  bool erase(std::uint32_t key);

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  void serialize(std::span<std::byte> out) const;

  // Validates the checksum; throws CorruptionError naming `expected` on
  // mismatch or if the stored id differs.
  static Page deserialize(std::span<const std::byte> in, PageId expected);

  bool operator==(const Page&) const = default;

 private:
  PageId id_{};
  Lsn lsn_{};
  std::vector<Record> records_;
};

}  // namespace segrest

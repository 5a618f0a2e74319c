#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "segrest/common/codec.hpp"
#include "segrest/common/types.hpp"
#include "segrest/storage/page.hpp"

namespace segrest {

enum class LogOp : std::uint8_t { Set = 1, Delete = 2 };

// The redo payload of one page update.
struct Payload {
  LogOp op = LogOp::Set;
  std::uint32_t key = 0;
  Value value{};

  static Payload set(std::uint32_t key, const Value& value) { return {LogOp::Set, key, value}; }
  static Payload erase(std::uint32_t key) { return {LogOp::Delete, key, {}}; }

  bool operator==(const Payload&) const = default;
};

// One page update. Wire format, little-endian:
//   u32 total_len | u64 lsn | u64 page_id | u64 txn_id | u64 prev_page_lsn |
//   u8 op | u32 key | u16 value_len | value bytes | u32 crc
// total_len covers the whole record; crc covers every byte before it.
struct LogRecord {
  Lsn lsn;
  PageId page_id;
  TxnId txn_id = 0;
  Lsn prev_page_lsn;
  Payload payload;

  static constexpr std::size_t kFixedSize = 4 + 8 + 8 + 8 + 8 + 1 + 4 + 2 + 4;

  std::size_t encoded_size() const {
    return kFixedSize + (payload.op == LogOp::Set ? kValueSize : 0);
  }

  void encode(Bytes& out) const;

  // Decodes one record from the front of `in`. Throws CorruptionError on a
  // checksum or framing error; `in` must hold the whole record.
  static LogRecord decode(std::span<const std::byte> in);

  // Length prefix of the record starting at `in`, or 0 if fewer than four
  // bytes are available.
  static std::uint32_t peek_length(std::span<const std::byte> in);

  bool operator==(const LogRecord&) const = default;
};

// Orders records by (page id, LSN): the archive sort key.
struct PageLsnLess {
  bool operator()(const LogRecord& a, const LogRecord& b) const {
    if (a.page_id != b.page_id) return a.page_id < b.page_id;
    return a.lsn < b.lsn;
  }
};

// Applies the payload to the page image and stamps the page with the
// record's LSN. Throws Error if a set would overflow the page.
void apply_update(Page& page, const LogRecord& record, std::size_t max_records);

}  // namespace segrest

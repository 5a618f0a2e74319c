#include "segrest/wal/log_record.hpp"

#include <algorithm>
#include <string>

#include "segrest/common/errors.hpp"

namespace segrest {

void LogRecord::encode(Bytes& out) const {
  const std::size_t start = out.size();
  const auto value_len = static_cast<std::uint16_t>(payload.op == LogOp::Set ? kValueSize : 0);
  Writer w(out);
  w.u32(static_cast<std::uint32_t>(encoded_size()));
  w.u64(lsn.value);
  w.u64(page_id.value);
  w.u64(txn_id);
  w.u64(prev_page_lsn.value);
  w.u8(static_cast<std::uint8_t>(payload.op));
  w.u32(payload.key);
  w.u16(value_len);
  if (value_len > 0) w.raw(payload.value);
  w.u32(crc32(std::span<const std::byte>(out).subspan(start)));
}

std::uint32_t LogRecord::peek_length(std::span<const std::byte> in) {
  if (in.size() < 4) return 0;
  return load_u32(in);
}

LogRecord LogRecord::decode(std::span<const std::byte> in) {
  const std::uint32_t total = peek_length(in);
  if (total < kFixedSize || total > in.size()) throw CorruptionError("bad log record length");
  const auto body = in.first(total - 4);
  if (load_u32(in.subspan(total - 4)) != crc32(body)) {
    throw CorruptionError("log record checksum mismatch");
  }
  Reader r(body);
  r.u32();
  LogRecord rec;
  rec.lsn = Lsn{r.u64()};
  rec.page_id = PageId{r.u64()};
  rec.txn_id = r.u64();
  rec.prev_page_lsn = Lsn{r.u64()};
  const auto op = r.u8();
  if (op != static_cast<std::uint8_t>(LogOp::Set) && op != static_cast<std::uint8_t>(LogOp::Delete)) {
    throw CorruptionError("unknown log op " + std::to_string(op));
  }
  rec.payload.op = static_cast<LogOp>(op);
  rec.payload.key = r.u32();
  const auto value_len = r.u16();
  const std::size_t expected = rec.payload.op == LogOp::Set ? kValueSize : 0;
  if (value_len != expected || r.remaining() != value_len) {
    throw CorruptionError("bad log record value length");
  }
  if (value_len > 0) {
    auto v = r.raw(value_len);
    std::copy(v.begin(), v.end(), rec.payload.value.begin());
  }
  return rec;
}

void apply_update(Page& page, const LogRecord& record, std::size_t max_records) {
  switch (record.payload.op) {
    case LogOp::Set:
      if (!page.set(record.payload.key, record.payload.value, max_records)) {
        throw Error("page " + std::to_string(page.id().value) + " full");
      }
      break;
    case LogOp::Delete:
      page.erase(record.payload.key);
      break;
  }
  page.set_lsn(record.lsn);
}

}  // namespace segrest

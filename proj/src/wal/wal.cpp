#include "segrest/wal/wal.hpp"

#include <algorithm>
#include <string>

#include "segrest/common/errors.hpp"

namespace segrest {

namespace {

constexpr std::string_view kWalMagic{"SGWAL1\0\0", 8};
constexpr std::size_t kScanChunk = 256 * 1024;
// Large enough for any record this log writes.
constexpr std::size_t kRecordProbe = 64;

}  // namespace

LogScanner::LogScanner(const Wal& wal, Lsn from, Lsn end)
    : wal_(&wal), offset_(from.value), end_(end.value) {}

bool LogScanner::fill() {
  if (offset_ >= end_) return false;
  const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(kScanChunk, end_ - offset_));
  buffer_.resize(n);
  wal_->device_->read(offset_, buffer_);
  buffer_start_ = offset_;
  return true;
}

std::optional<LogRecord> LogScanner::next() {
  if (offset_ >= end_) return std::nullopt;
  auto available = [&] {
    if (offset_ < buffer_start_ || offset_ >= buffer_start_ + buffer_.size()) {
      return std::span<const std::byte>{};
    }
    return std::span<const std::byte>(buffer_).subspan(offset_ - buffer_start_);
  };
  auto view = available();
  std::uint32_t len = LogRecord::peek_length(view);
  if (len == 0 || len > view.size()) {
    fill();
    view = available();
    len = LogRecord::peek_length(view);
  }
  if (len < LogRecord::kFixedSize || len > view.size()) {
    throw CorruptionError("torn or corrupt log record at offset " + std::to_string(offset_));
  }
  LogRecord rec;
  try {
    rec = LogRecord::decode(view.first(len));
  } catch (const CorruptionError& e) {
    throw CorruptionError(std::string(e.what()) + " at offset " + std::to_string(offset_));
  }
  if (rec.lsn.value != offset_) {
    throw CorruptionError("log record at offset " + std::to_string(offset_) + " claims lsn " +
                          std::to_string(rec.lsn.value));
  }
  offset_ += len;
  return rec;
}

std::optional<LogRecord> PageChainCursor::next() {
  if (next_ == kNullLsn || next_ < stop_below_) return std::nullopt;
  LogRecord rec = wal_->read_at(next_);
  if (rec.page_id != page_) {
    throw BrokenChainError("chain of page " + std::to_string(page_.value) + " reaches lsn " +
                           std::to_string(next_.value) + " of page " +
                           std::to_string(rec.page_id.value));
  }
  if (rec.prev_page_lsn >= rec.lsn) {
    throw BrokenChainError("chain of page " + std::to_string(page_.value) + " does not descend at lsn " +
                           std::to_string(rec.lsn.value));
  }
  next_ = rec.prev_page_lsn;
  return rec;
}

Wal::Wal(std::unique_ptr<Device> device, WalOptions options)
    : device_(std::move(device)), options_(options) {}

std::unique_ptr<Wal> Wal::open(const std::filesystem::path& path, LatencyModel latency,
                               std::shared_ptr<Clock> clock, WalOptions options) {
  auto device = std::make_unique<Device>(DeviceRole::Log, path, File::Mode::Create, latency,
                                         std::move(clock));
  std::unique_ptr<Wal> wal(new Wal(std::move(device), options));
  if (wal->device_->size() == 0) {
    wal->device_->write(0, std::as_bytes(std::span(kWalMagic.data(), kWalMagic.size())));
  } else {
    wal->recover();
  }
  return wal;
}

void Wal::recover() {
  Bytes magic(kHeaderSize);
  device_->read(0, magic);
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::byte*>(kWalMagic.data()))) {
    throw CorruptionError("bad log magic in " + device_->path().string());
  }
  const std::uint64_t size = device_->size();
  LogScanner scanner(*this, first_lsn(), Lsn{size});
  std::uint64_t good_end = kHeaderSize;
  try {
    while (auto rec = scanner.next()) {
      index_[rec->page_id] = rec->lsn;
      good_end = scanner.position().value;
    }
  } catch (const CorruptionError&) {
    // Torn tail from an interrupted flush; everything before it is intact.
  }
  if (good_end < size) device_->resize(good_end);
  tail_ = good_end;
  pending_start_ = good_end;
  durable_.store(good_end, std::memory_order_release);
}

Lsn Wal::append(PageId page, TxnId txn, const Payload& payload) {
  Lsn lsn;
  bool need_flush = false;
  {
    std::lock_guard lock(append_mutex_);
    LogRecord rec;
    rec.lsn = Lsn{tail_};
    rec.page_id = page;
    rec.txn_id = txn;
    if (auto it = index_.find(page); it != index_.end()) rec.prev_page_lsn = it->second;
    rec.payload = payload;
    const std::size_t size = rec.encoded_size();
    if (options_.capacity_bytes != 0 && tail_ + size > options_.capacity_bytes) {
      throw LogFullError("log device full at " + std::to_string(tail_) + " bytes");
    }
    rec.encode(pending_);
    tail_ += size;
    index_[page] = rec.lsn;
    lsn = rec.lsn;
    if (options_.flush_interval == 0 || ++since_flush_ >= options_.flush_interval) {
      since_flush_ = 0;
      need_flush = true;
    }
  }
  if (need_flush) flush(lsn);
  return lsn;
}

void Wal::flush(Lsn up_to) {
  if (up_to.value < durable_.load(std::memory_order_acquire)) return;
  std::lock_guard flush_lock(flush_mutex_);
  if (up_to.value < durable_.load(std::memory_order_acquire)) return;
  Bytes batch;
  std::uint64_t start = 0;
  {
    std::lock_guard lock(append_mutex_);
    batch.swap(pending_);
    start = pending_start_;
    pending_start_ = tail_;
  }
  if (batch.empty()) return;
  device_->write(start, batch);
  durable_.store(start + batch.size(), std::memory_order_release);
}

Lsn Wal::end_lsn() const {
  std::lock_guard lock(append_mutex_);
  return Lsn{tail_};
}

LogScanner Wal::scan(Lsn from) const {
  const Lsn start = std::max(from, first_lsn());
  if (start < truncated_before()) {
    throw BrokenChainError("scan from " + std::to_string(start.value) + " below truncation point " +
                           std::to_string(truncated_before().value));
  }
  return LogScanner(*this, start, durable_lsn());
}

LogRecord Wal::read_at(Lsn lsn) const {
  const std::uint64_t durable = durable_.load(std::memory_order_acquire);
  if (lsn < first_lsn() || lsn < truncated_before() || lsn.value >= durable) {
    throw BrokenChainError("log record " + std::to_string(lsn.value) + " is not readable");
  }
  Bytes buf(static_cast<std::size_t>(std::min<std::uint64_t>(kRecordProbe, durable - lsn.value)));
  device_->read(lsn.value, buf);
  const std::uint32_t len = LogRecord::peek_length(buf);
  if (len > buf.size() && lsn.value + len <= durable) {
    buf.resize(len);
    device_->read(lsn.value, buf);
  }
  if (len < LogRecord::kFixedSize || len > buf.size()) {
    throw CorruptionError("corrupt log record at offset " + std::to_string(lsn.value));
  }
  LogRecord rec = LogRecord::decode(std::span<const std::byte>(buf).first(len));
  if (rec.lsn != lsn) {
    throw CorruptionError("log record at offset " + std::to_string(lsn.value) + " claims lsn " +
                          std::to_string(rec.lsn.value));
  }
  return rec;
}

PageChainCursor Wal::page_chain(PageId page, std::optional<Lsn> from, Lsn stop_below) {
  const Lsn start = from.value_or(head(page));
  if (start != kNullLsn) flush(start);
  return PageChainCursor(*this, page, start, stop_below);
}

Lsn Wal::head(PageId page) const {
  std::lock_guard lock(append_mutex_);
  auto it = index_.find(page);
  return it == index_.end() ? kNullLsn : it->second;
}

std::unordered_map<PageId, Lsn> Wal::recovery_index() const {
  std::lock_guard lock(append_mutex_);
  return index_;
}

void Wal::truncate_before(Lsn lsn) {
  std::uint64_t current = truncated_.load(std::memory_order_acquire);
  while (lsn.value > current &&
         !truncated_.compare_exchange_weak(current, lsn.value, std::memory_order_acq_rel)) {
  }
}

}  // namespace segrest

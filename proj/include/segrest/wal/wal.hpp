#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "segrest/common/codec.hpp"
#include "segrest/storage/buffer_pool.hpp"
#include "segrest/storage/device.hpp"
#include "segrest/wal/log_record.hpp"

namespace segrest {

struct WalOptions {
  // Maximum log size in bytes; 0 means unbounded.
  std::uint64_t capacity_bytes = 0;
  // Appends between automatic flushes; 0 flushes on every append.
  std::uint32_t flush_interval = 0;
};

class Wal;

// Forward cursor over durable records with lsn >= from.
class LogScanner {
 public:
  std::optional<LogRecord> next();

  // Offset of the record `next` will decode.
  Lsn position() const { return Lsn{offset_}; }

 private:
  friend class Wal;
  LogScanner(const Wal& wal, Lsn from, Lsn end);

  bool fill();

  const Wal* wal_;
  std::uint64_t offset_;
  std::uint64_t end_;
  Bytes buffer_;
  std::uint64_t buffer_start_ = 0;
};

// Backward cursor along one page's prev_page_lsn chain.
class PageChainCursor {
 public:
  // Newest remaining record, or nullopt once the chain reaches the null LSN
  // or `stop_below`.
  std::optional<LogRecord> next();

 private:
  friend class Wal;
  PageChainCursor(const Wal& wal, PageId page, Lsn from, Lsn stop_below)
      : wal_(&wal), page_(page), next_(from), stop_below_(stop_below) {}

  const Wal* wal_;
  PageId page_;
  Lsn next_;
  Lsn stop_below_;
};

// Append-only redo log. LSNs are byte offsets into the log file, which starts
// with an 8-byte header so that no record sits at the null LSN.
//
// Also maintains the page recovery index (page -> newest LSN), kept in
// memory and rebuilt by a scan when an existing log is opened.
class Wal final : public LogFlusher {
 public:
  static constexpr std::uint64_t kHeaderSize = 8;

  // Opens or creates the log at `path`.
  static std::unique_ptr<Wal> open(const std::filesystem::path& path, LatencyModel latency,
                                   std::shared_ptr<Clock> clock, WalOptions options = {});

  Lsn append(PageId page, TxnId txn, const Payload& payload);

  // Makes every record with lsn <= up_to durable. Clamped to end of log.
  void flush(Lsn up_to) override;
  Lsn durable_lsn() const override { return Lsn{durable_.load(std::memory_order_acquire)}; }
  Lsn end_lsn() const override;

  static Lsn first_lsn() { return Lsn{kHeaderSize}; }

  LogScanner scan(Lsn from) const;

  // Walks a page's history newest-first, starting at `from` (default: the
  // recovery index head) and stopping before records older than `stop_below`.
  PageChainCursor page_chain(PageId page, std::optional<Lsn> from = std::nullopt,
                             Lsn stop_below = kNullLsn);

  // Newest LSN written for the page, kNullLsn if none.
  Lsn head(PageId page) const;
  std::unordered_map<PageId, Lsn> recovery_index() const;

  // Archive-driven truncation: records below `lsn` become unreadable.
  void truncate_before(Lsn lsn);
  Lsn truncated_before() const { return Lsn{truncated_.load(std::memory_order_acquire)}; }

  Device& device() { return *device_; }

  // Reads the record at `lsn`. Throws BrokenChainError if it lies in the
  // truncated or non-durable part of the log.
  LogRecord read_at(Lsn lsn) const;

 private:
  friend class LogScanner;

  Wal(std::unique_ptr<Device> device, WalOptions options);
  void recover();

  std::unique_ptr<Device> device_;
  WalOptions options_;

  mutable std::mutex append_mutex_;
  std::uint64_t tail_ = kHeaderSize;
  Bytes pending_;
  std::uint64_t pending_start_ = kHeaderSize;
  std::uint32_t since_flush_ = 0;
  std::unordered_map<PageId, Lsn> index_;

  std::mutex flush_mutex_;
  std::atomic<std::uint64_t> durable_{kHeaderSize};
  std::atomic<std::uint64_t> truncated_{0};
};

}  // namespace segrest

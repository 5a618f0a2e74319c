#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "segrest/archive/log_archive.hpp"
#include "segrest/backup/backup.hpp"
#include "segrest/restore/scheduler.hpp"
#include "segrest/restore/segment_bitmap.hpp"
#include "segrest/storage/buffer_pool.hpp"
#include "segrest/storage/volume.hpp"

namespace segrest {

struct RestoreOptions {
  RestorePolicy policy = RestorePolicy::Preemptive;
  std::uint64_t batch_cap = 64;
  unsigned max_attempts = 3;
  unsigned workers = 1;
};

struct RestoreContext {
  const BackupImage* backup = nullptr;
  const LogArchive* archive = nullptr;
  Volume* replacement = nullptr;
  // Optional; when set it must already have failed.
  const Device* failed_device = nullptr;
  Lsn failure_lsn;
  std::shared_ptr<Clock> clock;
};

struct RestoreStatus {
  std::uint64_t restored_count = 0;
  std::uint64_t total = 0;
  std::uint64_t bytes_restored = 0;
  std::size_t queue_depth = 0;
};

struct RestoreEvent {
  Nanos completed_at{0};
  SegmentId first;
  std::uint64_t count = 0;
  bool on_demand = false;
  std::uint64_t bytes = 0;
};

class RestoreManager;

// Completion handle for one segment request.
class RestoreTicket {
 public:
  SegmentId segment() const { return seg_; }
  bool ready() const;
  // Blocks until the segment is restored. Throws RestoreError if the
  // restore gave up on it after the request was made.
  void wait() const;

 private:
  friend class RestoreManager;
  RestoreTicket(const RestoreManager& mgr, SegmentId seg, std::uint64_t generation)
      : mgr_(&mgr), seg_(seg), generation_(generation) {}

  const RestoreManager* mgr_;
  SegmentId seg_;
  std::uint64_t generation_;
};

// Incremental restore of a failed volume onto a replacement: per segment,
// read the backup, merge in the archived log for that page range and write
// the result. Either driven by its own worker threads (start) or stepped by
// the caller (next_batch / execute / complete).
class RestoreManager final : public SegmentGate {
 public:
  // Checks preconditions: the archive covers the log through failure_lsn and
  // the replacement matches the backup geometry. Throws RestoreError.
  RestoreManager(RestoreContext ctx, RestoreOptions options);
  ~RestoreManager() override;

  RestoreManager(const RestoreManager&) = delete;
  RestoreManager& operator=(const RestoreManager&) = delete;

  void start();
  void stop();

  bool is_restored(PageId page) const override;
  void await_restored(PageId page) override;

  const Geometry& geometry() const { return geo_; }
  SegmentId segment_of(PageId page) const { return geo_.segment_of(page); }
  SegmentState state(SegmentId seg) const { return bitmap_.state(seg); }

  // Never blocks. Already-restored segments give a ready ticket.
  RestoreTicket request_segment(SegmentId seg);
  void wait_until_complete() const;

  RestoreStatus status() const;

  // Stepping interface.
  std::optional<RestoreBatch> next_batch();
  // Reads, replays and writes the batch. Throws on failure; the caller then
  // hands the exception to fail().
  void execute(const RestoreBatch& batch);
  void complete(const RestoreBatch& batch);
  void fail(const RestoreBatch& batch, std::exception_ptr error);
  // next_batch + execute + complete/fail. False if there was nothing to do.
  bool run_one();

  // Completed restore bodies per segment.
  std::uint64_t executions(SegmentId seg) const;
  std::vector<RestoreEvent> events() const;
  std::uint64_t failed_attempts() const { return failed_attempts_.load(); }

  // Called at the start of every execute; throwing from it fails the batch.
  void set_fault_injector(std::function<void(const RestoreBatch&)> hook) {
    fault_injector_ = std::move(hook);
  }

 private:
  friend class RestoreTicket;

  void worker_loop();
  bool failed_since(SegmentId seg, std::uint64_t generation, std::string* message) const;
  std::uint64_t batch_pages(const RestoreBatch& batch) const;

  RestoreContext ctx_;
  RestoreOptions options_;
  Geometry geo_;
  std::size_t max_records_;

  SegmentBitmap bitmap_;

  mutable std::mutex sched_mutex_;
  std::condition_variable sched_cv_;
  RestoreScheduler scheduler_;
  std::vector<unsigned> attempts_;  // guarded by sched_mutex_

  mutable std::mutex wait_mutex_;
  mutable std::condition_variable restored_cv_;
  std::vector<std::uint64_t> failure_generation_;  // guarded by wait_mutex_
  std::vector<std::string> failure_message_;       // guarded by wait_mutex_
  std::vector<RestoreEvent> events_;               // guarded by wait_mutex_

  std::unique_ptr<std::atomic<std::uint64_t>[]> executions_;
  std::atomic<std::uint64_t> bytes_restored_{0};
  std::atomic<std::uint64_t> failed_attempts_{0};

  std::function<void(const RestoreBatch&)> fault_injector_;
  std::atomic<bool> stop_{false};
  std::vector<std::thread> workers_;
};

}  // namespace segrest

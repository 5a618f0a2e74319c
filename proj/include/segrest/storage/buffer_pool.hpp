#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "segrest/common/types.hpp"
#include "segrest/storage/page.hpp"
#include "segrest/storage/volume.hpp"

namespace segrest {

// The log as seen by the buffer pool: enough to enforce the write-ahead rule
// and to stamp a media failure with the end of the log.
class LogFlusher {
 public:
  virtual ~LogFlusher() = default;
  virtual Lsn durable_lsn() const = 0;
  virtual Lsn end_lsn() const = 0;
  virtual void flush(Lsn up_to) = 0;
};

// Consulted for every device access after the database device has failed.
// A page may be read from or written to the replacement device only once its
// segment is restored.
class SegmentGate {
 public:
  virtual ~SegmentGate() = default;
  virtual bool is_restored(PageId page) const = 0;
  // Blocks until the page's segment is restored. Implementations that cannot
  // block (the discrete-event driver) throw instead; the pool leaves no
  // partial state behind when this throws.
  virtual void await_restored(PageId page) = 0;
};

struct FailureToken {
  Lsn failure_lsn;
};

enum class LatchMode { Shared, Exclusive };

struct PoolStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t flushes = 0;
  std::uint64_t replacement_reads = 0;
  std::uint64_t replacement_writes = 0;
};

class BufferPool;

// One slot of the pool. pin_count and page_id are guarded by the pool mutex;
// the page image by the latch.
struct BufferFrame {
  Page page;
  PageId page_id{};
  bool in_use = false;
  // Cleared if loading the page failed; pinned waiters must retry.
  bool valid = false;
  bool referenced = false;
  std::uint32_t pin_count = 0;
  std::atomic<bool> dirty{false};
  std::shared_mutex latch;
};

// A pinned, latched buffer frame. Unpins (clean) on destruction if the owner
// did not call unfix.
class FrameHandle {
 public:
  FrameHandle() = default;
  ~FrameHandle();
  FrameHandle(FrameHandle&& other) noexcept;
  FrameHandle& operator=(FrameHandle&& other) noexcept;
  FrameHandle(const FrameHandle&) = delete;
  FrameHandle& operator=(const FrameHandle&) = delete;

  const Page& page() const;
  // Exclusive handles only.
  Page& mutable_page();

  LatchMode mode() const { return mode_; }
  bool pinned() const { return frame_ != nullptr; }
  std::uint32_t pin_count() const;

  // Releases latch and pin. Throws std::logic_error on a second call.
  void unfix(bool mark_dirty = false);

 private:
  friend class BufferPool;
  FrameHandle(BufferPool* pool, BufferFrame* frame, LatchMode mode)
      : pool_(pool), frame_(frame), mode_(mode) {}

  BufferPool* pool_ = nullptr;
  BufferFrame* frame_ = nullptr;
  LatchMode mode_ = LatchMode::Shared;
};

// Fixed-capacity page cache over the database volume with CLOCK eviction.
//
// Thread safety: all public members may be called concurrently. The pool
// mutex only guards the page table and pin counts; device I/O and waits on
// the segment gate happen without it.
class BufferPool {
 public:
  BufferPool(Volume& database, std::size_t frame_count, LogFlusher& log);
  ~BufferPool();

  BufferPool(const BufferPool&) = delete;
  BufferPool& operator=(const BufferPool&) = delete;

  FrameHandle fix(PageId page, LatchMode mode);

  // Writes the page if dirty, flushing the log first as far as its LSN.
  void flush_page(PageId page);
  void flush_all();

  // Marks the database device failed; from now on misses go to the
  // replacement volume through the segment gate.
  FailureToken fail_device();
  void attach_replacement(Volume& replacement, SegmentGate& gate);
  bool device_failed() const { return failed_.load(std::memory_order_acquire); }

  bool resident(PageId page) const;
  std::size_t frame_count() const { return frames_.size(); }
  std::size_t resident_count() const;
  const Geometry& geometry() const { return database_.geometry(); }
  PoolStats stats() const;

  // Observes every page write: (page, durable log LSN at the time of write).
  using FlushObserver = std::function<void(const Page&, Lsn)>;
  void set_flush_observer(FlushObserver observer) { flush_observer_ = std::move(observer); }

 private:
  friend class FrameHandle;

  enum class Pick { Found, NeedsFlush, NeedsRestore, None };

  Pick pick_victim(std::size_t& index);
  void write_frame(BufferFrame& frame);
  std::optional<Page> load(PageId page);
  bool gate_open(PageId page) const;
  void await_gate(PageId page);
  void release(BufferFrame& frame, LatchMode mode, bool mark_dirty);

  Volume& database_;
  LogFlusher& log_;
  std::vector<std::unique_ptr<BufferFrame>> frames_;
  std::unordered_map<PageId, std::size_t> table_;
  mutable std::mutex mutex_;
  std::size_t hand_ = 0;

  std::atomic<bool> failed_{false};
  std::atomic<Volume*> replacement_{nullptr};
  std::atomic<SegmentGate*> gate_{nullptr};

  std::atomic<std::uint64_t> hits_{0}, misses_{0}, evictions_{0}, flushes_{0};
  std::atomic<std::uint64_t> replacement_reads_{0}, replacement_writes_{0};
  FlushObserver flush_observer_;
};

}  // namespace segrest

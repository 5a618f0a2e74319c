#include "segrest/storage/buffer_pool.hpp"

#include <optional>
#include <stdexcept>
#include <string>

#include "segrest/common/errors.hpp"

namespace segrest {

FrameHandle::~FrameHandle() {
  if (frame_ != nullptr) pool_->release(*frame_, mode_, false);
}

FrameHandle::FrameHandle(FrameHandle&& other) noexcept
    : pool_(other.pool_), frame_(std::exchange(other.frame_, nullptr)), mode_(other.mode_) {}

FrameHandle& FrameHandle::operator=(FrameHandle&& other) noexcept {
  if (this != &other) {
    if (frame_ != nullptr) pool_->release(*frame_, mode_, false);
    pool_ = other.pool_;
    frame_ = std::exchange(other.frame_, nullptr);
    mode_ = other.mode_;
  }
  return *this;
}

const Page& FrameHandle::page() const {
  if (frame_ == nullptr) throw std::logic_error("page() on unpinned handle");
  return frame_->page;
}

Page& FrameHandle::mutable_page() {
  if (frame_ == nullptr) throw std::logic_error("mutable_page() on unpinned handle");
  if (mode_ != LatchMode::Exclusive) throw std::logic_error("page is latched shared");
  return frame_->page;
}

std::uint32_t FrameHandle::pin_count() const {
  if (frame_ == nullptr) return 0;
  std::lock_guard lock(pool_->mutex_);
  return frame_->pin_count;
}

void FrameHandle::unfix(bool mark_dirty) {
  if (frame_ == nullptr) throw std::logic_error("double unfix");
  pool_->release(*std::exchange(frame_, nullptr), mode_, mark_dirty);
}

BufferPool::BufferPool(Volume& database, std::size_t frame_count, LogFlusher& log)
    : database_(database), log_(log) {
  if (frame_count == 0) throw std::invalid_argument("buffer pool needs at least one frame");
  frames_.reserve(frame_count);
  for (std::size_t i = 0; i < frame_count; ++i) frames_.push_back(std::make_unique<BufferFrame>());
  table_.reserve(frame_count);
}

BufferPool::~BufferPool() = default;

bool BufferPool::gate_open(PageId page) const {
  const SegmentGate* gate = gate_.load(std::memory_order_acquire);
  return gate != nullptr && gate->is_restored(page);
}

void BufferPool::await_gate(PageId page) {
  SegmentGate* gate = gate_.load(std::memory_order_acquire);
  if (gate == nullptr) {
    throw MediaFailure("database device failed and no replacement is attached (page " +
                       std::to_string(page.value) + ")");
  }
  gate->await_restored(page);
}

FrameHandle BufferPool::fix(PageId page, LatchMode mode) {
  if (page.value >= geometry().page_count) {
    throw std::out_of_range("invalid page id " + std::to_string(page.value));
  }
  for (;;) {
    std::unique_lock lock(mutex_);
    if (auto it = table_.find(page); it != table_.end()) {
      BufferFrame& frame = *frames_[it->second];
      ++frame.pin_count;
      frame.referenced = true;
      lock.unlock();
      if (mode == LatchMode::Exclusive) {
        frame.latch.lock();
      } else {
        frame.latch.lock_shared();
      }
      if (!frame.valid) {
        // The loader gave up on this frame; start over.
        release(frame, mode, false);
        continue;
      }
      hits_.fetch_add(1, std::memory_order_relaxed);
      return FrameHandle(this, &frame, mode);
    }

    if (device_failed() && !gate_open(page)) {
      lock.unlock();
      await_gate(page);
      continue;
    }

    std::size_t index = 0;
    switch (pick_victim(index)) {
      case Pick::None:
        throw PoolExhausted("all " + std::to_string(frames_.size()) + " frames are pinned");
      case Pick::NeedsRestore: {
        const PageId blocked = frames_[index]->page_id;
        lock.unlock();
        await_gate(blocked);
        continue;
      }
      case Pick::NeedsFlush: {
        BufferFrame& victim = *frames_[index];
        ++victim.pin_count;
        lock.unlock();
        try {
          write_frame(victim);
        } catch (...) {
          std::lock_guard relock(mutex_);
          --victim.pin_count;
          throw;
        }
        std::lock_guard relock(mutex_);
        --victim.pin_count;
        continue;
      }
      case Pick::Found:
        break;
    }

    BufferFrame& frame = *frames_[index];
    if (frame.in_use) {
      table_.erase(frame.page_id);
      evictions_.fetch_add(1, std::memory_order_relaxed);
    }
    frame.in_use = true;
    frame.page_id = page;
    frame.valid = false;
    frame.referenced = true;
    frame.pin_count = 1;
    frame.dirty.store(false, std::memory_order_relaxed);
    table_.emplace(page, index);
    // Unpinned frames are never latched, so this cannot block.
    frame.latch.lock();
    lock.unlock();
    misses_.fetch_add(1, std::memory_order_relaxed);

    std::optional<Page> loaded;
    try {
      loaded = load(page);
    } catch (...) {
      std::lock_guard relock(mutex_);
      table_.erase(page);
      frame.in_use = false;
      --frame.pin_count;
      frame.latch.unlock();
      throw;
    }
    if (!loaded) {
      std::lock_guard relock(mutex_);
      table_.erase(page);
      frame.in_use = false;
      --frame.pin_count;
      frame.latch.unlock();
      continue;
    }
    frame.page = std::move(*loaded);
    frame.valid = true;
    if (mode == LatchMode::Shared) {
      frame.latch.unlock();
      frame.latch.lock_shared();
    }
    return FrameHandle(this, &frame, mode);
  }
}

// Returns nullopt when the device failed underneath us and the caller must
// go through the gate.
std::optional<Page> BufferPool::load(PageId page) {
  if (!device_failed()) {
    try {
      return database_.read_page(page);
    } catch (const MediaFailure&) {
      if (!device_failed()) throw;
      return std::nullopt;
    }
  }
  Volume* replacement = replacement_.load(std::memory_order_acquire);
  if (replacement == nullptr) {
    throw MediaFailure("database device failed and no replacement is attached");
  }
  if (!gate_open(page)) return std::nullopt;
  replacement_reads_.fetch_add(1, std::memory_order_relaxed);
  return replacement->read_page(page);
}

BufferPool::Pick BufferPool::pick_victim(std::size_t& index) {
  const std::size_t n = frames_.size();
  std::optional<std::size_t> blocked;
  for (std::size_t scan = 0; scan < 2 * n; ++scan) {
    const std::size_t i = hand_;
    hand_ = (hand_ + 1) % n;
    BufferFrame& frame = *frames_[i];
    if (frame.pin_count > 0) continue;
    if (!frame.in_use) {
      index = i;
      return Pick::Found;
    }
    if (frame.referenced) {
      frame.referenced = false;
      continue;
    }
    if (frame.dirty.load(std::memory_order_acquire)) {
      // Dirty pages of unrestored segments cannot be written anywhere yet.
      if (device_failed() && !gate_open(frame.page_id)) {
        if (!blocked) blocked = i;
        continue;
      }
      // leave the hand here so the retry takes this frame once it is clean
      hand_ = i;
      index = i;
      return Pick::NeedsFlush;
    }
    index = i;
    return Pick::Found;
  }
  if (blocked) {
    index = *blocked;
    return Pick::NeedsRestore;
  }
  return Pick::None;
}

void BufferPool::write_frame(BufferFrame& frame) {
  const PageId page = frame.page_id;
  if (device_failed() && !gate_open(page)) await_gate(page);

  std::shared_lock latch(frame.latch);
  if (!frame.valid || !frame.dirty.load(std::memory_order_acquire)) return;
  const Page& image = frame.page;
  if (image.lsn() >= log_.durable_lsn()) log_.flush(image.lsn());
  if (flush_observer_) flush_observer_(image, log_.durable_lsn());

  bool written = false;
  if (!device_failed()) {
    try {
      database_.write_page(image);
      written = true;
    } catch (const MediaFailure&) {
      if (!device_failed()) throw;
    }
  }
  if (!written) {
    Volume* replacement = replacement_.load(std::memory_order_acquire);
    if (replacement == nullptr) {
      throw MediaFailure("database device failed and no replacement is attached");
    }
    if (!gate_open(page)) {
      // Failure raced with this flush; retry through the gate.
      latch.unlock();
      write_frame(frame);
      return;
    }
    replacement->write_page(image);
    replacement_writes_.fetch_add(1, std::memory_order_relaxed);
  }
  frame.dirty.store(false, std::memory_order_release);
  flushes_.fetch_add(1, std::memory_order_relaxed);
}

void BufferPool::flush_page(PageId page) {
  BufferFrame* frame = nullptr;
  {
    std::lock_guard lock(mutex_);
    auto it = table_.find(page);
    if (it == table_.end()) return;
    frame = frames_[it->second].get();
    if (!frame->dirty.load(std::memory_order_acquire)) return;
    ++frame->pin_count;
  }
  try {
    write_frame(*frame);
  } catch (...) {
    std::lock_guard lock(mutex_);
    --frame->pin_count;
    throw;
  }
  std::lock_guard lock(mutex_);
  --frame->pin_count;
}

void BufferPool::flush_all() {
  std::vector<PageId> dirty;
  {
    std::lock_guard lock(mutex_);
    for (const auto& frame : frames_) {
      if (frame->in_use && frame->dirty.load(std::memory_order_acquire)) {
        dirty.push_back(frame->page_id);
      }
    }
  }
  for (PageId page : dirty) flush_page(page);
}

FailureToken BufferPool::fail_device() {
  if (device_failed()) throw Error("database device already failed");
  log_.flush(log_.end_lsn());
  const FailureToken token{log_.end_lsn()};
  failed_.store(true, std::memory_order_release);
  database_.device().fail();
  return token;
}

void BufferPool::attach_replacement(Volume& replacement, SegmentGate& gate) {
  if (!(replacement.geometry() == geometry())) {
    throw std::invalid_argument("replacement geometry differs from the database volume");
  }
  replacement_.store(&replacement, std::memory_order_release);
  gate_.store(&gate, std::memory_order_release);
}

bool BufferPool::resident(PageId page) const {
  std::lock_guard lock(mutex_);
  return table_.contains(page);
}

std::size_t BufferPool::resident_count() const {
  std::lock_guard lock(mutex_);
  return table_.size();
}

PoolStats BufferPool::stats() const {
  PoolStats s;
  s.hits = hits_.load(std::memory_order_relaxed);
  s.misses = misses_.load(std::memory_order_relaxed);
  s.evictions = evictions_.load(std::memory_order_relaxed);
  s.flushes = flushes_.load(std::memory_order_relaxed);
  s.replacement_reads = replacement_reads_.load(std::memory_order_relaxed);
  s.replacement_writes = replacement_writes_.load(std::memory_order_relaxed);
  return s;
}

void BufferPool::release(BufferFrame& frame, LatchMode mode, bool mark_dirty) {
  if (mark_dirty) frame.dirty.store(true, std::memory_order_release);
  if (mode == LatchMode::Exclusive) {
    frame.latch.unlock();
  } else {
    frame.latch.unlock_shared();
  }
  std::lock_guard lock(mutex_);
  --frame.pin_count;
}

}  // namespace segrest

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>

#include "segrest/common/types.hpp"

namespace segrest {

enum class SegmentState : std::uint8_t { NotRestored = 0, Restoring = 1, Restored = 2 };

// Restore progress per segment. Transitions are lock-free:
// NotRestored -> Restoring (one winner), Restoring -> Restored (terminal),
// and Restoring -> NotRestored when a restore attempt is abandoned.
class SegmentBitmap {
 public:
  explicit SegmentBitmap(std::uint64_t segments);

  std::uint64_t size() const { return size_; }
  SegmentState state(SegmentId seg) const;

  // True for exactly one caller per NotRestored period.
  bool try_begin(SegmentId seg);
  // Restoring -> Restored; throws std::logic_error from any other state.
  void mark_restored(SegmentId seg);
  // Restoring -> NotRestored.
  void revert(SegmentId seg);

  std::uint64_t restored_count() const { return restored_.load(std::memory_order_acquire); }
  bool complete() const { return restored_count() == size_; }

 private:
  std::atomic<std::uint8_t>& slot(SegmentId seg) const;

  std::uint64_t size_;
  std::unique_ptr<std::atomic<std::uint8_t>[]> states_;
  std::atomic<std::uint64_t> restored_{0};
};

}  // namespace segrest

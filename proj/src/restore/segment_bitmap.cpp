#include "segrest/restore/segment_bitmap.hpp"

#include <stdexcept>
#include <string>

namespace segrest {

SegmentBitmap::SegmentBitmap(std::uint64_t segments)
    : size_(segments), states_(std::make_unique<std::atomic<std::uint8_t>[]>(segments)) {
  for (std::uint64_t i = 0; i < segments; ++i) states_[i].store(0, std::memory_order_relaxed);
}

std::atomic<std::uint8_t>& SegmentBitmap::slot(SegmentId seg) const {
  if (seg.value >= size_) {
    throw std::out_of_range("segment " + std::to_string(seg.value) + " out of range");
  }
  return states_[seg.value];
}

SegmentState SegmentBitmap::state(SegmentId seg) const {
  return static_cast<SegmentState>(slot(seg).load(std::memory_order_acquire));
}

bool SegmentBitmap::try_begin(SegmentId seg) {
  auto expected = static_cast<std::uint8_t>(SegmentState::NotRestored);
  return slot(seg).compare_exchange_strong(expected, static_cast<std::uint8_t>(SegmentState::Restoring),
                                           std::memory_order_acq_rel);
}

void SegmentBitmap::mark_restored(SegmentId seg) {
  auto expected = static_cast<std::uint8_t>(SegmentState::Restoring);
  if (!slot(seg).compare_exchange_strong(expected, static_cast<std::uint8_t>(SegmentState::Restored),
                                         std::memory_order_acq_rel)) {
    throw std::logic_error("segment " + std::to_string(seg.value) + " marked restored from state " +
                           std::to_string(expected));
  }
  restored_.fetch_add(1, std::memory_order_acq_rel);
}

void SegmentBitmap::revert(SegmentId seg) {
  auto expected = static_cast<std::uint8_t>(SegmentState::Restoring);
  if (!slot(seg).compare_exchange_strong(expected, static_cast<std::uint8_t>(SegmentState::NotRestored),
                                         std::memory_order_acq_rel)) {
    throw std::logic_error("segment " + std::to_string(seg.value) + " reverted from state " +
                           std::to_string(expected));
  }
}

}  // namespace segrest

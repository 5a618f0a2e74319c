#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>

#include "segrest/restore/segment_bitmap.hpp"

namespace segrest {

enum class RestorePolicy {
  // Restore only what is asked for, one segment at a time, FIFO.
  OnDemandOnly,
  // Serve requests first; while the queue is empty, sweep forward restoring
  // growing contiguous batches.
  Preemptive,
  // Ignore requests and restore sequentially in fixed chunks.
  SinglePassOnly,
};

std::string_view to_string(RestorePolicy policy);
RestorePolicy parse_restore_policy(std::string_view name);

struct RestoreBatch {
  SegmentId first;
  std::uint64_t count = 0;
  bool on_demand = false;

  SegmentId last() const { return SegmentId{first.value + count - 1}; }
};

// Decides what to restore next. Not thread-safe; the restore manager
// serializes access. Every segment in a returned batch is in Restoring
// state and owned by the caller.
class RestoreScheduler {
 public:
  RestoreScheduler(RestorePolicy policy, SegmentBitmap& bitmap, std::uint64_t batch_cap);

  RestorePolicy policy() const { return policy_; }

  // `seg` must already be Restoring on behalf of the requester.
  void enqueue(SegmentId seg);
  // Puts a failed batch back so it is tried again next.
  void retry(const RestoreBatch& batch);

  std::optional<RestoreBatch> next();

  std::size_t queue_depth() const { return queue_.size(); }
  std::uint64_t current_batch_size() const { return batch_size_; }

 private:
  std::optional<RestoreBatch> sweep(std::uint64_t max_count);

  RestorePolicy policy_;
  SegmentBitmap& bitmap_;
  std::uint64_t batch_cap_;
  std::uint64_t batch_size_ = 1;
  std::uint64_t cursor_ = 0;
  std::deque<SegmentId> queue_;
};

}  // namespace segrest

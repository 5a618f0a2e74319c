#include "segrest/restore/scheduler.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace segrest {

std::string_view to_string(RestorePolicy policy) {
  switch (policy) {
    case RestorePolicy::OnDemandOnly: return "ondemand";
    case RestorePolicy::Preemptive: return "preemptive";
    case RestorePolicy::SinglePassOnly: return "singlepass";
  }
  return "?";
}

RestorePolicy parse_restore_policy(std::string_view name) {
  if (name == "ondemand") return RestorePolicy::OnDemandOnly;
  if (name == "preemptive") return RestorePolicy::Preemptive;
  if (name == "singlepass") return RestorePolicy::SinglePassOnly;
  throw std::invalid_argument("unknown restore policy: " + std::string(name));
}

RestoreScheduler::RestoreScheduler(RestorePolicy policy, SegmentBitmap& bitmap,
                                   std::uint64_t batch_cap)
    : policy_(policy), bitmap_(bitmap), batch_cap_(std::max<std::uint64_t>(1, batch_cap)) {}

void RestoreScheduler::enqueue(SegmentId seg) { queue_.push_back(seg); }

void RestoreScheduler::retry(const RestoreBatch& batch) {
  if (policy_ == RestorePolicy::SinglePassOnly) {
    for (std::uint64_t i = 0; i < batch.count; ++i) bitmap_.revert(SegmentId{batch.first.value + i});
    cursor_ = std::min(cursor_, batch.first.value);
    return;
  }
  for (std::uint64_t i = batch.count; i > 0; --i) queue_.push_front(SegmentId{batch.first.value + i - 1});
}

std::optional<RestoreBatch> RestoreScheduler::sweep(std::uint64_t max_count) {
  const std::uint64_t n = bitmap_.size();
  // wraps once, so segments left behind by a reverted attempt are found
  for (std::uint64_t step = 0; step < n; ++step) {
    const std::uint64_t s = (cursor_ + step) % n;
    if (!bitmap_.try_begin(SegmentId{s})) continue;
    std::uint64_t count = 1;
    while (count < max_count && s + count < n && bitmap_.try_begin(SegmentId{s + count})) ++count;
    cursor_ = (s + count) % n;
    return RestoreBatch{SegmentId{s}, count, false};
  }
  return std::nullopt;
}

std::optional<RestoreBatch> RestoreScheduler::next() {
  switch (policy_) {
    case RestorePolicy::OnDemandOnly:
      if (queue_.empty()) return std::nullopt;
      {
        const SegmentId seg = queue_.front();
        queue_.pop_front();
        return RestoreBatch{seg, 1, true};
      }
    case RestorePolicy::Preemptive:
      if (!queue_.empty()) {
        const SegmentId seg = queue_.front();
        queue_.pop_front();
        batch_size_ = 1;
        return RestoreBatch{seg, 1, true};
      } else {
        auto batch = sweep(batch_size_);
        if (batch) batch_size_ = std::min(batch_cap_, batch_size_ * 2);
        return batch;
      }
    case RestorePolicy::SinglePassOnly: {
      if (cursor_ >= bitmap_.size()) return std::nullopt;
      auto batch = sweep(batch_cap_);
      // no wrap-around for the single pass: stop at the end
      if (batch && batch->first.value + batch->count >= bitmap_.size()) cursor_ = bitmap_.size();
      return batch;
    }
  }
  return std::nullopt;
}

}  // namespace segrest

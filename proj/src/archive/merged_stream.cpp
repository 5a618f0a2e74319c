#include "segrest/archive/merged_stream.hpp"

#include <algorithm>

namespace segrest {

MergedLogStream::MergedLogStream(std::vector<RunCursor> inputs) : inputs_(std::move(inputs)) {
  heap_.reserve(inputs_.size());
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (auto rec = inputs_[i].next()) heap_.push_back({std::move(*rec), i});
  }
  std::make_heap(heap_.begin(), heap_.end(), HeadGreater{});
}

std::optional<LogRecord> MergedLogStream::next() {
  if (heap_.empty()) return std::nullopt;
  std::pop_heap(heap_.begin(), heap_.end(), HeadGreater{});
  Head head = std::move(heap_.back());
  heap_.pop_back();
  if (auto rec = inputs_[head.input].next()) {
    heap_.push_back({std::move(*rec), head.input});
    std::push_heap(heap_.begin(), heap_.end(), HeadGreater{});
  }
  return std::move(head.record);
}

std::uint64_t MergedLogStream::bytes_read() const {
  std::uint64_t total = 0;
  for (const auto& c : inputs_) total += c.bytes_read();
  return total;
}

}  // namespace segrest

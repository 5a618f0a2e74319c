#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "segrest/archive/run_file.hpp"

namespace segrest {

// K-way merge of run cursors into one stream ordered by (page_id, lsn),
// using a binary heap keyed on each input's current head.
class MergedLogStream {
 public:
  MergedLogStream() = default;
  explicit MergedLogStream(std::vector<RunCursor> inputs);

  std::optional<LogRecord> next();

  std::size_t input_count() const { return inputs_.size(); }
  std::uint64_t bytes_read() const;

 private:
  struct Head {
    LogRecord record;
    std::size_t input;
  };
  struct HeadGreater {
    bool operator()(const Head& a, const Head& b) const { return PageLsnLess{}(b.record, a.record); }
  };

  std::vector<RunCursor> inputs_;
  std::vector<Head> heap_;
};

}  // namespace segrest

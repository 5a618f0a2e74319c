#pragma once

// Shared bookkeeping for the two benchmark drivers.

#include <chrono>
#include <cstdint>
#include <vector>

#include "segrest/harness/metrics.hpp"

namespace segrest::detail {

struct TxnRecord {
  Nanos commit{0};
  Nanos latency{0};
  Nanos io{0};
  std::uint64_t txn_id = 0;
  bool post_failure = false;
};

// Cumulative counters observed at the end of each one-second bucket.
struct BoundarySample {
  std::uint64_t page_reads = 0;
  std::uint64_t queue_depth = 0;
};

inline double to_seconds(Nanos t) { return std::chrono::duration<double>(t).count(); }

void build_series(MetricsReport& report, const std::vector<TxnRecord>& txns,
                  const std::vector<BoundarySample>& samples, std::uint64_t buckets);

std::uint32_t file_crc(const std::filesystem::path& path);

}  // namespace segrest::detail

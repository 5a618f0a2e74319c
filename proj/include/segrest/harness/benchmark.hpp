#pragma once

#include <exception>
#include <string>
#include <vector>

#include "segrest/harness/engine.hpp"
#include "segrest/harness/metrics.hpp"
#include "segrest/harness/workload.hpp"

namespace segrest {

// Thrown by the simulation's segment gate instead of blocking. The request
// has been made; the worker resumes once the segment is restored.
struct WouldBlock : std::exception {
  explicit WouldBlock(SegmentId s) : segment(s) {}
  const char* what() const noexcept override { return "segment not restored"; }
  SegmentId segment;
};

struct RunResult {
  MetricsReport report;
  LogicalState state;  // filled when requested
};

// Deterministic discrete-event run on a virtual clock.
RunResult run_simulation(const WorkloadConfig& config, bool capture_state = false);
// Real threads on the wall clock.
RunResult run_threaded(const WorkloadConfig& config, bool capture_state = false);

// Dispatches on config.clock. Errors are caught and reported as an invalid
// report.
MetricsReport run_benchmark(const WorkloadConfig& config);

struct OverheadResult {
  double sorted_indexed_tps = 0;
  double plain_copy_tps = 0;
  // 1 - sorted / copy
  double overhead = 0;
  bool identical_wal = false;
  MetricsReport sorted;
  MetricsReport copy;
};

// Two failure-free runs that differ only in the archiving mode.
OverheadResult measure_archiving_overhead(WorkloadConfig config);

struct VerifyResult {
  bool ok = false;
  std::vector<std::string> problems;
  MetricsReport with_failure;
  MetricsReport shadow;
};

// Runs the config with a failure and again without one, same seed and a
// fixed transaction count, and compares final logical states; each run is
// also checked against the backup-plus-log oracle.
VerifyResult verify_shadow(WorkloadConfig config);

}  // namespace segrest

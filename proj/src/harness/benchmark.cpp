#include "segrest/harness/benchmark.hpp"

#include <cmath>

namespace segrest {

MetricsReport run_benchmark(const WorkloadConfig& config) {
  try {
    config.validate();
    return config.clock == ClockMode::Virtual ? run_simulation(config).report
                                              : run_threaded(config).report;
  } catch (const std::exception& e) {
    MetricsReport report;
    report.config = config;
    report.valid = false;
    report.error = e.what();
    return report;
  }
}

OverheadResult measure_archiving_overhead(WorkloadConfig config) {
  config.inject_failure = false;
  OverheadResult r;
  config.archive_mode = ArchiveMode::SortedIndexed;
  r.sorted = run_benchmark(config);
  config.archive_mode = ArchiveMode::PlainCopy;
  r.copy = run_benchmark(config);
  // skip the first second: it includes thread start-up
  const auto n = r.sorted.throughput.size();
  const std::uint64_t from = n > 2 ? 1 : 0;
  r.sorted_indexed_tps = median_throughput(r.sorted, from, n);
  r.plain_copy_tps = median_throughput(r.copy, from, r.copy.throughput.size());
  r.overhead = r.plain_copy_tps > 0 ? 1.0 - r.sorted_indexed_tps / r.plain_copy_tps : 0;
  r.identical_wal = r.sorted.wal_bytes == r.copy.wal_bytes && r.sorted.wal_crc == r.copy.wal_crc;
  return r;
}

VerifyResult verify_shadow(WorkloadConfig config) {
  VerifyResult v;
  if (config.txns_per_worker == 0) config.txns_per_worker = 200;
  if (config.fail_after_txns == 0) {
    config.fail_after_txns = std::max<std::uint64_t>(1, config.txns_per_worker * config.threads / 2);
  }
  auto run = [&](bool fail) {
    WorkloadConfig c = config;
    c.inject_failure = fail;
    return c.clock == ClockMode::Virtual ? run_simulation(c, true) : run_threaded(c, true);
  };
  RunResult failed, shadow;
  try {
    failed = run(true);
    shadow = run(false);
  } catch (const std::exception& e) {
    v.problems.push_back(e.what());
    return v;
  }
  for (const auto& p : failed.report.violations) v.problems.push_back("with failure: " + p);
  for (const auto& p : shadow.report.violations) v.problems.push_back("shadow: " + p);
  if (!failed.report.valid) v.problems.push_back("with failure: " + failed.report.error);
  if (!shadow.report.valid) v.problems.push_back("shadow: " + shadow.report.error);
  if (failed.state != shadow.state) {
    v.problems.push_back("final logical state differs from the shadow run (" +
                         std::to_string(failed.state.size()) + " vs " +
                         std::to_string(shadow.state.size()) + " keys)");
  }
  v.with_failure = std::move(failed.report);
  v.shadow = std::move(shadow.report);
  v.ok = v.problems.empty();
  return v;
}

}  // namespace segrest

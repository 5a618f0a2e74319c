#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segrest/harness/workload.hpp"
#include "segrest/restore/restore_manager.hpp"

namespace segrest {

struct ThroughputRow {
  std::uint64_t t_sec = 0;
  std::uint64_t txns = 0;
  double mean_latency_us = 0;
  double max_latency_us = 0;
  std::uint64_t page_reads = 0;
  bool operator==(const ThroughputRow&) const = default;
};

struct RestoreRow {
  std::uint64_t t_sec = 0;
  std::uint64_t bytes_restored = 0;
  double batch_size_mean = 0;
  std::uint64_t queue_depth = 0;
  bool operator==(const RestoreRow&) const = default;
};

struct LatencySample {
  std::uint64_t txn_id = 0;
  double latency_us = 0;
  bool post_failure = false;
  bool operator==(const LatencySample&) const = default;
};

struct MetricsReport {
  WorkloadConfig config;
  bool valid = true;
  std::string error;
  std::vector<std::string> violations;

  std::vector<ThroughputRow> throughput;
  std::vector<RestoreRow> restore;
  std::vector<LatencySample> samples;
  std::vector<RestoreEvent> restore_events;
  // Commit time of every transaction, ascending. Not part of the CSV output.
  std::vector<double> commit_s;

  std::optional<double> failure_s;
  std::optional<double> restore_start_s;
  std::optional<double> restore_end_s;
  std::uint64_t committed = 0;
  std::uint64_t bytes_restored = 0;
  std::uint64_t device_bytes = 0;
  std::uint64_t wal_bytes = 0;
  // crc32 of the whole log file, for reproducibility checks.
  std::uint32_t wal_crc = 0;
  bool oracle_checked = false;

  bool ok() const { return valid && violations.empty(); }
};

// Throughput of the buckets in [from, to), per second.
double mean_throughput(const MetricsReport& report, std::uint64_t from, std::uint64_t to);
double median_throughput(const MetricsReport& report, std::uint64_t from, std::uint64_t to);
// Latency quantile (0..1) of the samples matching `post_failure`.
double latency_quantile(const MetricsReport& report, bool post_failure, double q);

// Throughput measured over windows of `window_s` after the failure,
// relative to the mean rate in [1 s, failure).
struct RecoveryShape {
  double pre_failure_tps = 0;
  // Seconds from the failure to the end of the first window back at
  // `fraction` of the pre-failure rate; nullopt if it never gets there.
  std::optional<double> regain_s;
  // 1 - worst window / pre-failure rate.
  double dip = 0;
};
RecoveryShape recovery_shape(const MetricsReport& report, double window_s, double fraction);

// Writes throughput.csv, restore.csv and latency_samples.csv into `dir`.
void emit_csv(const MetricsReport& report, const std::filesystem::path& dir);

std::vector<ThroughputRow> read_throughput_csv(const std::filesystem::path& path);
std::vector<RestoreRow> read_restore_csv(const std::filesystem::path& path);
std::vector<LatencySample> read_latency_csv(const std::filesystem::path& path);

}  // namespace segrest

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "segrest/archive/log_archive.hpp"
#include "segrest/restore/scheduler.hpp"
#include "segrest/storage/device.hpp"
#include "segrest/wal/log_record.hpp"

namespace segrest {

enum class ClockMode { Virtual, Wall };

struct WorkloadConfig {
  std::uint64_t pages = 32768;
  std::uint32_t page_size = 8192;
  std::uint32_t segment_pages = 128;
  std::uint64_t pool_pages = 8192;
  unsigned threads = 4;
  double skew = 0.8;
  double duration_s = 20;
  double fail_at_s = 10;
  bool inject_failure = true;
  RestorePolicy policy = RestorePolicy::Preemptive;
  std::size_t run_limit = 4096;
  std::size_t merge_fan_in = 8;
  std::uint64_t batch_cap = 64;
  std::uint64_t seed = 1;
  unsigned min_ops = 1;
  unsigned max_ops = 8;
  // Distinct keys per page; worker w owns the keys k with k % threads == w.
  std::uint32_t keys_per_page = 64;
  double delete_ratio = 0.1;

  ClockMode clock = ClockMode::Virtual;
  ArchiveMode archive_mode = ArchiveMode::SortedIndexed;
  LatencyModel latency = LatencyModel::ssd();
  std::chrono::nanoseconds cpu_per_op{50'000};
  std::chrono::nanoseconds archive_interval{50'000'000};

  // When non-zero each worker runs exactly this many transactions and the
  // run ends when all are done; the failure then fires once
  // fail_after_txns transactions have committed (if non-zero) or at fail_at_s.
  std::uint64_t txns_per_worker = 0;
  std::uint64_t fail_after_txns = 0;

  // Decaying demand: after the failure each worker idles between
  // transactions so that its transaction rate halves every half-life.
  // 0 keeps the closed loop.
  double demand_half_life_s = 0;

  // Preload the hottest pages into the pool before the clock starts.
  bool warm_pool = true;

  std::filesystem::path workdir;  // empty: a fresh temp directory
  bool keep_files = false;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Zipf-distributed page ids. Rank r has weight 1 / (r+1)^theta; a seeded
// permutation scatters ranks over the page space so hot pages are not
// clustered in the first segments.
class ZipfGenerator {
 public:
  ZipfGenerator(std::uint64_t n, double theta, std::uint64_t seed);

  template <class Rng>
  PageId operator()(Rng& rng) const {
    return page_of_rank(rank(std::uniform_real_distribution<double>(0.0, 1.0)(rng)));
  }

  std::uint64_t rank(double u) const;
  PageId page_of_rank(std::uint64_t rank) const { return PageId{perm_[rank]}; }
  // Probability mass of rank r.
  double probability(std::uint64_t rank) const;
  std::uint64_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
  std::vector<std::uint64_t> perm_;
};

// Idle time after a transaction that took `txn_time`, finishing at `now`.
std::chrono::nanoseconds think_time(const WorkloadConfig& config, std::chrono::nanoseconds txn_time,
                                    std::optional<std::chrono::nanoseconds> failure_at,
                                    std::chrono::nanoseconds now);

PageId generate_access(std::mt19937_64& rng, const ZipfGenerator& zipf);

struct TxnOp {
  PageId page;
  Payload payload;
};

// Per-worker transaction source; the sequence depends only on the seed and
// the worker index.
class TxnGenerator {
 public:
  TxnGenerator(const WorkloadConfig& config, const ZipfGenerator& zipf, unsigned worker);
  std::vector<TxnOp> next();

 private:
  const WorkloadConfig& config_;
  const ZipfGenerator& zipf_;
  unsigned worker_;
  std::mt19937_64 rng_;
};

}  // namespace segrest

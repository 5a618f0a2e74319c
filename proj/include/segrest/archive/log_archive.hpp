#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "segrest/archive/merged_stream.hpp"
#include "segrest/archive/run_file.hpp"
#include "segrest/storage/device.hpp"
#include "segrest/wal/wal.hpp"

namespace segrest {

enum class ArchiveMode {
  // Sort the workspace by (page, lsn) and write indexed runs.
  SortedIndexed,
  // Append raw log bytes to a flat file; no probe support. Baseline for
  // measuring the cost of sorting and indexing.
  PlainCopy,
};

struct ArchiveOptions {
  std::size_t run_size_limit = 4096;
  std::uint32_t block_size = 4096;
  // Maintenance merge fan-in F; 0 disables maintenance merges.
  std::size_t merge_fan_in = 8;
  ArchiveMode mode = ArchiveMode::SortedIndexed;
  LatencyModel latency = LatencyModel::ssd();
};

struct ArchiveStats {
  std::uint64_t records_archived = 0;
  std::uint64_t runs_emitted = 0;
  std::uint64_t merges = 0;
  std::uint64_t probes = 0;
  std::uint64_t runs_skipped_by_lsn = 0;
  std::uint64_t runs_skipped_by_bloom = 0;
};

using RunSet = std::vector<std::shared_ptr<const IndexedRun>>;

// The indexed log archive: a directory of immutable run files whose LSN
// ranges partition [0, archived_upto). Run file names carry their ranges, so
// the directory listing is the manifest.
//
// One thread at a time drives archiving (archive_step, emit_run, merge_runs,
// maintain, archive_up_to are serialized internally). probe runs
// concurrently against an immutable snapshot of the run set.
class LogArchive {
 public:
  // Opens `dir`, creating it if needed. Leftover shadow files are removed and
  // runs made redundant by a completed merge are dropped. Archiving resumes
  // from the end of the last run; the volatile workspace starts empty.
  LogArchive(const std::filesystem::path& dir, Wal& wal, ArchiveOptions options,
             std::shared_ptr<Clock> clock);

  // Consumes up to `batch_budget` durable log records into the workspace,
  // emitting a run each time it reaches run_size_limit.
  Lsn archive_step(std::size_t batch_budget);

  // Writes the workspace as a run and publishes it. Returns nullptr when the
  // workspace is empty.
  std::shared_ptr<const IndexedRun> emit_run();

  // Replaces runs with adjacent ranges, identified by begin LSN, by one
  // merged run.
  std::shared_ptr<const IndexedRun> merge_runs(const std::vector<Lsn>& run_begins,
                                               std::size_t fan_in);

  // Runs one maintenance merge if the policy calls for it. Returns whether a
  // merge happened.
  bool maintain();

  // Records with page in [first, last] and lsn >= min_lsn, ordered by
  // (page, lsn).
  MergedLogStream probe(PageId first, PageId last, Lsn min_lsn) const;

  // Archives the log through `target`, force-emitting a final run.
  void archive_up_to(Lsn target);

  Lsn archived_upto() const;
  // Records consumed into the workspace (including already emitted ones).
  Lsn consumed_upto() const;
  std::size_t workspace_size() const;

  RunSet runs() const;
  ArchiveStats stats() const;
  const ArchiveOptions& options() const { return options_; }
  const std::filesystem::path& directory() const { return dir_; }
  IoChannel& channel() { return channel_; }

  // Test hook called at named points of a publish; throwing from it
  // simulates a crash at that point.
  using CrashHook = std::function<void(std::string_view point)>;
  void set_crash_hook(CrashHook hook) { crash_hook_ = std::move(hook); }

  // Tier of a run for the maintenance policy: floor(log_F(records / limit)).
  std::size_t tier_of(const IndexedRun& run) const;

 private:
  void load_directory();
  std::shared_ptr<const IndexedRun> emit_locked();
  std::shared_ptr<const IndexedRun> merge_locked(const std::vector<Lsn>& run_begins,
                                                 std::size_t fan_in);
  void consume_locked(std::size_t budget);
  void copy_locked(std::size_t budget);
  void crash_point(std::string_view point) const;
  void publish(RunSet runs);

  std::filesystem::path dir_;
  Wal& wal_;
  ArchiveOptions options_;
  IoChannel channel_;

  // Serializes the single archiving writer.
  mutable std::mutex work_mutex_;
  std::vector<LogRecord> workspace_;
  std::atomic<std::uint64_t> archived_upto_{0};
  std::atomic<std::uint64_t> consumed_upto_{0};
  std::atomic<std::size_t> workspace_size_{0};
  std::optional<File> copy_file_;
  std::uint64_t copy_offset_ = 0;

  mutable std::mutex manifest_mutex_;
  std::shared_ptr<const RunSet> manifest_;
  mutable ArchiveStats stats_;  // guarded by manifest_mutex_

  CrashHook crash_hook_;
};

}  // namespace segrest

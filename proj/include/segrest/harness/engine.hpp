#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segrest/archive/log_archive.hpp"
#include "segrest/backup/backup.hpp"
#include "segrest/harness/workload.hpp"
#include "segrest/restore/restore_manager.hpp"
#include "segrest/storage/buffer_pool.hpp"
#include "segrest/storage/volume.hpp"
#include "segrest/wal/wal.hpp"

namespace segrest {

// Owns a scratch directory and removes it unless asked to keep it.
class WorkDir {
 public:
  explicit WorkDir(const std::filesystem::path& requested, bool keep);
  ~WorkDir();
  WorkDir(const WorkDir&) = delete;
  WorkDir& operator=(const WorkDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool remove_;
};

// (page, key) -> value over the whole volume.
using LogicalState = std::map<std::pair<std::uint64_t, std::uint32_t>, Value>;

// The storage stack for one benchmark run: database volume, log, archive,
// buffer pool and a full backup taken right after formatting.
class Engine {
 public:
  Engine(const WorkloadConfig& config, std::shared_ptr<Clock> clock);
  ~Engine();

  const WorkloadConfig& config() const { return config_; }
  Clock& clock() { return *clock_; }
  const std::filesystem::path& dir() const { return dir_.path(); }

  Volume& database() { return *database_; }
  Wal& wal() { return *wal_; }
  LogArchive& archive() { return *archive_; }
  BufferPool& pool() { return *pool_; }
  const BackupImage& backup() const { return *backup_; }
  const ZipfGenerator& zipf() const { return zipf_; }

  // Loads the hottest pages until the pool is full.
  void warm_pool();

  // One update under the page's exclusive latch.
  Lsn apply(const TxnOp& op, TxnId txn);

  // Fails the database device and brings the archive up to the failure LSN.
  FailureToken fail_device();
  // Creates the replacement volume and the restore manager and routes the
  // pool through `gate` (the manager itself when null).
  RestoreManager& begin_restore(RestorePolicy policy, SegmentGate* gate = nullptr);
  RestoreManager* restore() { return restore_.get(); }
  bool failed() const { return restore_ != nullptr; }

  // The volume holding the current database: the replacement after a failure.
  Volume& current_volume();

  // Flushes the pool. After a failure the restore must be complete.
  void finish();

  // Compares the current volume against backup + replay of the whole log.
  // Returns a list of mismatches (empty on success).
  std::vector<std::string> check_oracle();
  LogicalState logical_state();

 private:
  WorkloadConfig config_;
  std::shared_ptr<Clock> clock_;
  WorkDir dir_;
  ZipfGenerator zipf_;
  std::unique_ptr<Volume> database_;
  std::unique_ptr<Wal> wal_;
  std::unique_ptr<LogArchive> archive_;
  std::unique_ptr<BufferPool> pool_;
  std::unique_ptr<BackupImage> backup_;
  std::unique_ptr<Volume> replacement_;
  std::unique_ptr<RestoreManager> restore_;
  std::optional<FailureToken> failure_;
  std::size_t max_records_;
};

// Backup + every logged update from min_lsn on, applied in log order.
std::vector<Page> oracle_volume(const BackupImage& backup, const Wal& wal);

}  // namespace segrest

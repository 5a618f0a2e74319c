#include "segrest/harness/engine.hpp"

#include <stdlib.h>

#include <algorithm>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "segrest/common/errors.hpp"

namespace segrest {

WorkDir::WorkDir(const std::filesystem::path& requested, bool keep) : remove_(!keep) {
  if (!requested.empty()) {
    std::filesystem::create_directories(requested);
    path_ = requested;
    return;
  }
  std::string tmpl = (std::filesystem::temp_directory_path() / "segrest-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw IoError("cannot create temp directory " + tmpl);
  path_ = tmpl;
}

WorkDir::~WorkDir() {
  if (!remove_) return;
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

namespace {

const WorkloadConfig& validated(const WorkloadConfig& c) {
  c.validate();
  return c;
}

Geometry geometry_of(const WorkloadConfig& c) {
  Geometry g;
  g.page_size = c.page_size;
  g.page_count = c.pages;
  g.pages_per_segment = c.segment_pages;
  return g;
}

}  // namespace

Engine::Engine(const WorkloadConfig& config, std::shared_ptr<Clock> clock)
    : config_(validated(config)),
      clock_(std::move(clock)),
      dir_(config.workdir, config.keep_files),
      zipf_(config.pages, config.skew, config.seed),
      max_records_(Page::capacity(config.page_size)) {
  const Geometry geo = geometry_of(config_);
  database_ = Volume::create(DeviceRole::Database, dir() / "database.vol", geo, config_.latency, clock_);
  // group commit: the workload flushes at transaction end
  wal_ = Wal::open(dir() / "wal.log", config_.latency, clock_,
                   WalOptions{0, std::numeric_limits<std::uint32_t>::max()});
  ArchiveOptions ao;
  ao.run_size_limit = config_.run_limit;
  ao.merge_fan_in = config_.merge_fan_in;
  ao.mode = config_.archive_mode;
  ao.latency = config_.latency;
  archive_ = std::make_unique<LogArchive>(dir() / "archive", *wal_, ao, clock_);
  pool_ = std::make_unique<BufferPool>(*database_, config_.pool_pages, *wal_);
  backup_ = BackupImage::take_full_backup(dir() / "backup", *pool_, *database_, *wal_,
                                          config_.latency, clock_);
}

Engine::~Engine() {
  // the manager's workers reference the volumes
  if (restore_) restore_->stop();
}

void Engine::warm_pool() {
  const std::uint64_t n = std::min<std::uint64_t>(config_.pool_pages, config_.pages);
  for (std::uint64_t r = 0; r < n; ++r) {
    pool_->fix(zipf_.page_of_rank(r), LatchMode::Shared).unfix();
  }
}

Lsn Engine::apply(const TxnOp& op, TxnId txn) {
  FrameHandle h = pool_->fix(op.page, LatchMode::Exclusive);
  LogRecord rec;
  rec.page_id = op.page;
  rec.txn_id = txn;
  rec.prev_page_lsn = h.page().lsn();
  rec.payload = op.payload;
  rec.lsn = wal_->append(op.page, txn, op.payload);
  apply_update(h.mutable_page(), rec, max_records_);
  h.unfix(true);
  return rec.lsn;
}

FailureToken Engine::fail_device() {
  const FailureToken token = pool_->fail_device();
  failure_ = token;
  archive_->archive_up_to(token.failure_lsn);
  return token;
}

RestoreManager& Engine::begin_restore(RestorePolicy policy, SegmentGate* gate) {
  if (!pool_->device_failed() || !failure_) throw std::logic_error("begin_restore before device failure");
  replacement_ = Volume::create(DeviceRole::Replacement, dir() / "replacement.vol",
                                database_->geometry(), config_.latency, clock_, false);
  RestoreContext ctx;
  ctx.backup = backup_.get();
  ctx.archive = archive_.get();
  ctx.replacement = replacement_.get();
  ctx.failed_device = &database_->device();
  // hits keep committing after the failure; the restore only needs the log
  // up to the failure point, newer versions are still in the pool
  ctx.failure_lsn = failure_->failure_lsn;
  ctx.clock = clock_;
  RestoreOptions opts;
  opts.policy = policy;
  opts.batch_cap = config_.batch_cap;
  restore_ = std::make_unique<RestoreManager>(ctx, opts);
  pool_->attach_replacement(*replacement_, gate ? *gate : *restore_);
  return *restore_;
}

Volume& Engine::current_volume() { return replacement_ ? *replacement_ : *database_; }

void Engine::finish() {
  if (restore_) {
    const RestoreStatus st = restore_->status();
    if (st.restored_count != st.total) throw std::logic_error("finish before restore completed");
  }
  pool_->flush_all();
}

std::vector<Page> oracle_volume(const BackupImage& backup, const Wal& wal) {
  const Geometry& geo = backup.geometry();
  std::vector<Page> pages = backup.fetch_pages(PageId{0}, geo.page_count);
  const std::size_t cap = Page::capacity(geo.page_size);
  auto scan = wal.scan(backup.min_lsn());
  while (auto rec = scan.next()) apply_update(pages.at(rec->page_id.value), *rec, cap);
  return pages;
}

std::vector<std::string> Engine::check_oracle() {
  std::vector<std::string> problems;
  const std::vector<Page> expected = oracle_volume(*backup_, *wal_);
  Volume& vol = current_volume();
  const Geometry& geo = vol.geometry();
  Bytes want(geo.page_size);
  Bytes got(geo.page_size);
  for (std::uint64_t p = 0; p < geo.page_count; ++p) {
    expected[p].serialize(want);
    vol.device().read(Volume::kHeaderSize + p * geo.page_size, got);
    if (std::memcmp(want.data(), got.data(), want.size()) != 0) {
      problems.push_back("page " + std::to_string(p) + " differs from the oracle");
      if (problems.size() >= 10) break;
    }
  }
  return problems;
}

LogicalState Engine::logical_state() {
  LogicalState state;
  Volume& vol = current_volume();
  const Geometry& geo = vol.geometry();
  for (std::uint64_t first = 0; first < geo.page_count; first += 1024) {
    const auto n = std::min<std::uint64_t>(1024, geo.page_count - first);
    for (const Page& page : vol.read_range(PageId{first}, n)) {
      for (const auto& r : page.records()) state[{page.id().value, r.key}] = r.value;
    }
  }
  return state;
}

}  // namespace segrest

#include "segrest/archive/log_archive.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "segrest/common/errors.hpp"

namespace segrest {

namespace {

constexpr std::string_view kCopyFileName = "copy.log";
constexpr std::string_view kShadowSuffix = ".tmp";
// Wider probes skip the per-page bloom check; testing every page costs more
// than it saves.
constexpr std::uint64_t kBloomProbeLimit = 4096;
constexpr std::size_t kCopyChunk = 1 << 20;

}  // namespace

LogArchive::LogArchive(const std::filesystem::path& dir, Wal& wal, ArchiveOptions options,
                       std::shared_ptr<Clock> clock)
    : dir_(dir),
      wal_(wal),
      options_(options),
      channel_(DeviceRole::Archive, options.latency, std::move(clock)),
      manifest_(std::make_shared<const RunSet>()) {
  if (options_.run_size_limit == 0) throw std::invalid_argument("run_size_limit must be positive");
  if (options_.block_size < 256) throw std::invalid_argument("block_size too small");
  std::filesystem::create_directories(dir_);
  load_directory();
  if (options_.mode == ArchiveMode::PlainCopy) {
    copy_file_.emplace(dir_ / kCopyFileName, File::Mode::Truncate);
  }
}

void LogArchive::load_directory() {
  struct Candidate {
    Lsn begin, end;
    std::filesystem::path path;
  };
  std::vector<Candidate> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with(kShadowSuffix)) {
      // Shadow file of an unfinished publish.
      std::filesystem::remove(entry.path());
      continue;
    }
    if (auto range = parse_run_file_name(name)) found.push_back({range->first, range->second, entry.path()});
  }
  // A crash after a merge's rename but before its inputs were deleted leaves
  // runs covered by the merged one; drop them.
  std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end > b.end;
  });
  RunSet runs;
  Lsn covered{0};
  for (const auto& c : found) {
    if (c.end <= covered) {
      std::filesystem::remove(c.path);
      continue;
    }
    if (c.begin != covered) {
      throw CorruptionError("archive " + dir_.string() + " has a gap or overlap at lsn " +
                            std::to_string(covered.value));
    }
    auto run = IndexedRun::open(c.path, channel_, true);
    if (run->meta().begin != c.begin || run->meta().end != c.end) {
      throw CorruptionError("run " + c.path.filename().string() + " header disagrees with its name");
    }
    runs.push_back(std::move(run));
    covered = c.end;
  }
  archived_upto_.store(covered.value);
  consumed_upto_.store(covered.value);
  publish(std::move(runs));
}

void LogArchive::publish(RunSet runs) {
  auto next = std::make_shared<const RunSet>(std::move(runs));
  std::lock_guard lock(manifest_mutex_);
  manifest_ = std::move(next);
}

RunSet LogArchive::runs() const {
  std::lock_guard lock(manifest_mutex_);
  return *manifest_;
}

ArchiveStats LogArchive::stats() const {
  std::lock_guard lock(manifest_mutex_);
  return stats_;
}

// Nothing lives below the first LSN, so an empty archive already covers it.
Lsn LogArchive::archived_upto() const {
  return Lsn{std::max(archived_upto_.load(std::memory_order_acquire), Wal::first_lsn().value)};
}
Lsn LogArchive::consumed_upto() const { return Lsn{consumed_upto_.load(std::memory_order_acquire)}; }
std::size_t LogArchive::workspace_size() const { return workspace_size_.load(std::memory_order_acquire); }

void LogArchive::crash_point(std::string_view point) const {
  if (crash_hook_) crash_hook_(point);
}

Lsn LogArchive::archive_step(std::size_t batch_budget) {
  std::lock_guard lock(work_mutex_);
  if (options_.mode == ArchiveMode::PlainCopy) {
    copy_locked(batch_budget);
  } else {
    consume_locked(batch_budget);
  }
  return archived_upto();
}

void LogArchive::consume_locked(std::size_t budget) {
  if (budget == 0) return;
  auto scanner = wal_.scan(consumed_upto());
  std::size_t taken = 0;
  while (taken < budget) {
    auto rec = scanner.next();
    if (!rec) break;
    workspace_.push_back(std::move(*rec));
    consumed_upto_.store(scanner.position().value, std::memory_order_release);
    workspace_size_.store(workspace_.size(), std::memory_order_release);
    ++taken;
    if (workspace_.size() >= options_.run_size_limit) emit_locked();
  }
}

// Plain copy ignores the record budget: it copies every durable byte, which
// always ends on a record boundary.
void LogArchive::copy_locked(std::size_t /*budget*/) {
  const std::uint64_t durable = wal_.durable_lsn().value;
  std::uint64_t from = std::max(consumed_upto().value, Wal::first_lsn().value);
  Bytes buf;
  while (from < durable) {
    buf.resize(static_cast<std::size_t>(std::min<std::uint64_t>(kCopyChunk, durable - from)));
    wal_.device().read(from, buf);
    channel_.write(*copy_file_, copy_offset_, buf);
    copy_offset_ += buf.size();
    from += buf.size();
  }
  consumed_upto_.store(std::max(consumed_upto().value, durable), std::memory_order_release);
  archived_upto_.store(consumed_upto().value, std::memory_order_release);
}

std::shared_ptr<const IndexedRun> LogArchive::emit_run() {
  std::lock_guard lock(work_mutex_);
  return emit_locked();
}

std::shared_ptr<const IndexedRun> LogArchive::emit_locked() {
  if (workspace_.empty()) return nullptr;
  const Lsn begin{archived_upto_.load(std::memory_order_acquire)};
  const Lsn end = consumed_upto();
  std::stable_sort(workspace_.begin(), workspace_.end(), PageLsnLess{});

  const auto final_path = dir_ / run_file_name(begin, end);
  auto shadow = final_path;
  shadow += kShadowSuffix;
  try {
    RunWriter writer(shadow, begin, end, workspace_.size(), options_.block_size, channel_);
    const std::size_t half = workspace_.size() / 2;
    for (std::size_t i = 0; i < workspace_.size(); ++i) {
      if (i == half) crash_point("emit.mid_write");
      writer.add(workspace_[i]);
    }
    writer.finish();
    crash_point("emit.before_rename");
    publish_file(shadow, final_path);
  } catch (const InjectedCrash&) {
    throw;
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(shadow, ec);
    throw;
  }
  crash_point("emit.after_rename");

  auto run = IndexedRun::open(final_path, channel_, false);
  RunSet next = runs();
  next.push_back(run);
  publish(std::move(next));
  {
    std::lock_guard lock(manifest_mutex_);
    stats_.records_archived += workspace_.size();
    ++stats_.runs_emitted;
  }
  archived_upto_.store(end.value, std::memory_order_release);
  workspace_.clear();
  workspace_size_.store(0, std::memory_order_release);
  return run;
}

std::shared_ptr<const IndexedRun> LogArchive::merge_runs(const std::vector<Lsn>& run_begins,
                                                         std::size_t fan_in) {
  std::lock_guard lock(work_mutex_);
  return merge_locked(run_begins, fan_in);
}

std::shared_ptr<const IndexedRun> LogArchive::merge_locked(const std::vector<Lsn>& run_begins,
                                                           std::size_t fan_in) {
  if (run_begins.empty()) throw std::invalid_argument("merge needs at least one run");
  if (fan_in != 0 && run_begins.size() > fan_in) {
    throw std::invalid_argument("merge of " + std::to_string(run_begins.size()) +
                                " runs exceeds fan-in " + std::to_string(fan_in));
  }
  const RunSet current = runs();
  RunSet inputs;
  for (Lsn b : run_begins) {
    auto it = std::find_if(current.begin(), current.end(),
                           [b](const auto& r) { return r->meta().begin == b; });
    if (it == current.end()) throw std::invalid_argument("no run begins at lsn " + std::to_string(b.value));
    inputs.push_back(*it);
  }
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    if (inputs[i - 1]->meta().end != inputs[i]->meta().begin) {
      throw std::invalid_argument("runs to merge are not adjacent");
    }
  }

  const Lsn begin = inputs.front()->meta().begin;
  const Lsn end = inputs.back()->meta().end;
  std::uint64_t total = 0;
  std::vector<RunCursor> cursors;
  for (const auto& r : inputs) {
    total += r->meta().record_count;
    cursors.push_back(r->cursor(PageId{0}, PageId{std::numeric_limits<std::uint64_t>::max()}, kNullLsn));
  }
  MergedLogStream merged(std::move(cursors));

  const auto final_path = dir_ / run_file_name(begin, end);
  auto shadow = final_path;
  shadow += kShadowSuffix;
  try {
    RunWriter writer(shadow, begin, end, total, options_.block_size, channel_);
    while (auto rec = merged.next()) writer.add(*rec);
    writer.finish();
    crash_point("merge.before_rename");
    publish_file(shadow, final_path);
  } catch (const InjectedCrash&) {
    throw;
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(shadow, ec);
    throw;
  }
  crash_point("merge.after_rename");

  auto output = IndexedRun::open(final_path, channel_, false);
  RunSet next;
  for (const auto& r : current) {
    const bool replaced = std::any_of(inputs.begin(), inputs.end(),
                                      [&](const auto& in) { return in.get() == r.get(); });
    if (!replaced) {
      next.push_back(r);
    } else if (r.get() == inputs.front().get()) {
      next.push_back(output);
    }
  }
  publish(std::move(next));
  for (const auto& in : inputs) {
    if (in->path() != final_path) std::filesystem::remove(in->path());
  }
  {
    std::lock_guard lock(manifest_mutex_);
    ++stats_.merges;
  }
  return output;
}

std::size_t LogArchive::tier_of(const IndexedRun& run) const {
  const std::size_t fan_in = std::max<std::size_t>(options_.merge_fan_in, 2);
  std::uint64_t units = run.meta().record_count / options_.run_size_limit;
  std::size_t tier = 0;
  while (units >= fan_in) {
    units /= fan_in;
    ++tier;
  }
  return tier;
}

bool LogArchive::maintain() {
  std::lock_guard lock(work_mutex_);
  const std::size_t fan_in = options_.merge_fan_in;
  if (fan_in < 2 || options_.mode != ArchiveMode::SortedIndexed) return false;
  const RunSet current = runs();
  if (current.size() <= 2 * fan_in) return false;
  for (std::size_t i = 0; i + fan_in <= current.size(); ++i) {
    const std::size_t tier = tier_of(*current[i]);
    bool same = true;
    for (std::size_t j = i + 1; j < i + fan_in && same; ++j) same = tier_of(*current[j]) == tier;
    if (!same) continue;
    std::vector<Lsn> begins;
    for (std::size_t j = i; j < i + fan_in; ++j) begins.push_back(current[j]->meta().begin);
    merge_locked(begins, fan_in);
    return true;
  }
  return false;
}

MergedLogStream LogArchive::probe(PageId first, PageId last, Lsn min_lsn) const {
  if (options_.mode != ArchiveMode::SortedIndexed) {
    throw std::logic_error("plain-copy archive cannot be probed");
  }
  std::shared_ptr<const RunSet> snapshot;
  {
    std::lock_guard lock(manifest_mutex_);
    snapshot = manifest_;
  }
  const bool use_bloom = last >= first && last.value - first.value < kBloomProbeLimit;
  std::vector<RunCursor> cursors;
  std::uint64_t skipped_lsn = 0;
  std::uint64_t skipped_bloom = 0;
  for (const auto& run : *snapshot) {
    if (run->meta().end <= min_lsn) {
      ++skipped_lsn;
      continue;
    }
    if (use_bloom) {
      bool any = false;
      for (std::uint64_t p = first.value; p <= last.value && !any; ++p) any = run->bloom().may_contain(PageId{p});
      if (!any) {
        ++skipped_bloom;
        continue;
      }
    }
    cursors.push_back(run->cursor(first, last, min_lsn));
  }
  {
    std::lock_guard lock(manifest_mutex_);
    ++stats_.probes;
    stats_.runs_skipped_by_lsn += skipped_lsn;
    stats_.runs_skipped_by_bloom += skipped_bloom;
  }
  return MergedLogStream(std::move(cursors));
}

void LogArchive::archive_up_to(Lsn target) {
  std::lock_guard lock(work_mutex_);
  if (archived_upto() >= target) return;
  if (wal_.durable_lsn() < target) wal_.flush(target);
  if (options_.mode == ArchiveMode::PlainCopy) {
    copy_locked(std::numeric_limits<std::size_t>::max());
    return;
  }
  consume_locked(std::numeric_limits<std::size_t>::max());
  emit_locked();
}

}  // namespace segrest

#include "segrest/restore/restore_manager.hpp"

#include <chrono>
#include <string>

#include "segrest/common/errors.hpp"
#include "segrest/restore/replay.hpp"

namespace segrest {

bool RestoreTicket::ready() const { return mgr_->state(seg_) == SegmentState::Restored; }

void RestoreTicket::wait() const {
  std::unique_lock lock(mgr_->wait_mutex_);
  mgr_->restored_cv_.wait(lock, [&] {
    return mgr_->bitmap_.state(seg_) == SegmentState::Restored ||
           mgr_->failure_generation_[seg_.value] != generation_;
  });
  if (mgr_->bitmap_.state(seg_) == SegmentState::Restored) return;
  throw RestoreError("restore of segment " + std::to_string(seg_.value) +
                     " failed: " + mgr_->failure_message_[seg_.value]);
}

namespace {

Geometry check_context(const RestoreContext& ctx) {
  if (!ctx.backup || !ctx.archive || !ctx.replacement || !ctx.clock) {
    throw std::invalid_argument("incomplete restore context");
  }
  if (ctx.failed_device && !ctx.failed_device->failed()) {
    throw RestoreError("database device has not failed");
  }
  if (ctx.archive->archived_upto() < ctx.failure_lsn) {
    throw RestoreError("archive covers the log only to " +
                       std::to_string(ctx.archive->archived_upto().value) + ", failure at " +
                       std::to_string(ctx.failure_lsn.value));
  }
  const Geometry& b = ctx.backup->geometry();
  const Geometry& r = ctx.replacement->geometry();
  if (b.page_size != r.page_size || b.page_count != r.page_count) {
    throw RestoreError("replacement volume does not match the backup geometry");
  }
  return r;
}

}  // namespace

RestoreManager::RestoreManager(RestoreContext ctx, RestoreOptions options)
    : ctx_(std::move(ctx)),
      options_(options),
      geo_(check_context(ctx_)),
      max_records_(Page::capacity(geo_.page_size)),
      bitmap_(geo_.segment_count()),
      scheduler_(options.policy, bitmap_, options.batch_cap),
      attempts_(geo_.segment_count(), 0),
      failure_generation_(geo_.segment_count(), 0),
      failure_message_(geo_.segment_count()),
      executions_(std::make_unique<std::atomic<std::uint64_t>[]>(geo_.segment_count())) {
  for (std::uint64_t i = 0; i < geo_.segment_count(); ++i) executions_[i].store(0);
  if (options_.max_attempts == 0) options_.max_attempts = 1;
}

RestoreManager::~RestoreManager() { stop(); }

void RestoreManager::start() {
  if (!workers_.empty()) return;
  stop_ = false;
  const unsigned n = std::max(1u, options_.workers);
  for (unsigned i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void RestoreManager::stop() {
  {
    std::lock_guard lock(sched_mutex_);
    stop_ = true;
  }
  sched_cv_.notify_all();
  for (auto& t : workers_) t.join();
  workers_.clear();
}

void RestoreManager::worker_loop() {
  while (!stop_) {
    std::optional<RestoreBatch> batch;
    {
      std::unique_lock lock(sched_mutex_);
      batch = scheduler_.next();
      if (!batch) {
        if (bitmap_.complete()) return;
        // a reverted sweep segment is only noticed on the next poll
        sched_cv_.wait_for(lock, std::chrono::milliseconds(20));
        continue;
      }
    }
    try {
      execute(*batch);
      complete(*batch);
    } catch (...) {
      fail(*batch, std::current_exception());
    }
  }
}

bool RestoreManager::is_restored(PageId page) const {
  return bitmap_.state(segment_of(page)) == SegmentState::Restored;
}

void RestoreManager::await_restored(PageId page) {
  request_segment(segment_of(page)).wait();
}

RestoreTicket RestoreManager::request_segment(SegmentId seg) {
  std::uint64_t generation;
  {
    std::lock_guard lock(wait_mutex_);
    generation = failure_generation_.at(seg.value);
  }
  if (options_.policy != RestorePolicy::SinglePassOnly && bitmap_.try_begin(seg)) {
    {
      std::lock_guard lock(sched_mutex_);
      scheduler_.enqueue(seg);
    }
    sched_cv_.notify_one();
  }
  return RestoreTicket(*this, seg, generation);
}

void RestoreManager::wait_until_complete() const {
  std::unique_lock lock(wait_mutex_);
  restored_cv_.wait(lock, [&] { return bitmap_.complete(); });
}

RestoreStatus RestoreManager::status() const {
  RestoreStatus s;
  s.restored_count = bitmap_.restored_count();
  s.total = bitmap_.size();
  s.bytes_restored = bytes_restored_.load();
  std::lock_guard lock(sched_mutex_);
  s.queue_depth = scheduler_.queue_depth();
  return s;
}

std::optional<RestoreBatch> RestoreManager::next_batch() {
  std::lock_guard lock(sched_mutex_);
  return scheduler_.next();
}

std::uint64_t RestoreManager::batch_pages(const RestoreBatch& batch) const {
  std::uint64_t pages = 0;
  for (std::uint64_t i = 0; i < batch.count; ++i) pages += geo_.pages_in(SegmentId{batch.first.value + i});
  return pages;
}

void RestoreManager::execute(const RestoreBatch& batch) {
  if (fault_injector_) fault_injector_(batch);
  const PageId first = geo_.first_page(batch.first);
  const std::uint64_t count = batch_pages(batch);
  const PageId last{first.value + count - 1};

  std::vector<Page> pages = ctx_.backup->fetch_pages(first, count);
  MergedLogStream stream = ctx_.archive->probe(first, last, ctx_.backup->min_lsn());
  while (auto r = stream.next()) {
    if (r->page_id < first || r->page_id > last) {
      throw std::logic_error("probe returned page " + std::to_string(r->page_id.value) +
                             " outside the requested range");
    }
    replay_record(pages[r->page_id.value - first.value], *r, max_records_);
  }
  ctx_.replacement->write_range(pages);
}

void RestoreManager::complete(const RestoreBatch& batch) {
  const std::uint64_t bytes = batch_pages(batch) * geo_.page_size;
  {
    std::lock_guard lock(sched_mutex_);
    for (std::uint64_t i = 0; i < batch.count; ++i) attempts_[batch.first.value + i] = 0;
  }
  {
    std::lock_guard lock(wait_mutex_);
    for (std::uint64_t i = 0; i < batch.count; ++i) {
      const SegmentId seg{batch.first.value + i};
      executions_[seg.value].fetch_add(1);
      bitmap_.mark_restored(seg);
    }
    bytes_restored_.fetch_add(bytes);
    events_.push_back(RestoreEvent{ctx_.clock->now(), batch.first, batch.count, batch.on_demand, bytes});
  }
  restored_cv_.notify_all();
}

void RestoreManager::fail(const RestoreBatch& batch, std::exception_ptr error) {
  std::string message = "unknown error";
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    message = e.what();
  } catch (...) {
  }
  failed_attempts_.fetch_add(1);

  // Segments with attempts left go back to the scheduler; the rest are
  // released to NotRestored and their waiters get the error.
  std::vector<SegmentId> given_up;
  {
    std::lock_guard lock(sched_mutex_);
    // backwards, since retry() pushes to the front of the queue
    for (std::uint64_t i = batch.count; i > 0; --i) {
      const SegmentId seg{batch.first.value + i - 1};
      if (++attempts_[seg.value] < options_.max_attempts) {
        scheduler_.retry(RestoreBatch{seg, 1, batch.on_demand});
        continue;
      }
      attempts_[seg.value] = 0;
      if (scheduler_.policy() == RestorePolicy::SinglePassOnly) {
        // the single pass sweeps it again; waiters still hear about it
        scheduler_.retry(RestoreBatch{seg, 1, false});
      } else {
        bitmap_.revert(seg);
      }
      given_up.push_back(seg);
    }
  }
  sched_cv_.notify_all();
  if (!given_up.empty()) {
    {
      std::lock_guard lock(wait_mutex_);
      for (SegmentId seg : given_up) {
        ++failure_generation_[seg.value];
        failure_message_[seg.value] = message;
      }
    }
    restored_cv_.notify_all();
  }
}

bool RestoreManager::run_one() {
  auto batch = next_batch();
  if (!batch) return false;
  try {
    execute(*batch);
    complete(*batch);
  } catch (...) {
    fail(*batch, std::current_exception());
  }
  return true;
}

std::uint64_t RestoreManager::executions(SegmentId seg) const {
  return executions_[seg.value].load();
}

std::vector<RestoreEvent> RestoreManager::events() const {
  std::lock_guard lock(wait_mutex_);
  return events_;
}

}  // namespace segrest

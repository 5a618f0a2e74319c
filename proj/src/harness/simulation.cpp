#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "segrest/common/errors.hpp"
#include "segrest/harness/benchmark.hpp"
#include "series.hpp"

namespace segrest {

namespace {

using namespace std::chrono_literals;
using detail::BoundarySample;
using detail::TxnRecord;
using detail::to_seconds;

// Never blocks: records the request and unwinds the caller.
class SimGate final : public SegmentGate {
 public:
  explicit SimGate(std::function<void()> on_request) : on_request_(std::move(on_request)) {}

  // The manager is created after the gate.
  void bind(RestoreManager& mgr) { mgr_ = &mgr; }

  bool is_restored(PageId page) const override { return mgr_->is_restored(page); }

  void await_restored(PageId page) override {
    if (mgr_->is_restored(page)) return;
    const SegmentId seg = mgr_->segment_of(page);
    mgr_->request_segment(seg);
    on_request_();
    throw WouldBlock(seg);
  }

 private:
  RestoreManager* mgr_ = nullptr;
  std::function<void()> on_request_;
};

class Simulation {
 public:
  explicit Simulation(const WorkloadConfig& config)
      : cfg_(config), clock_(std::make_shared<VirtualClock>()), engine_(config, clock_) {}

  RunResult run(bool capture_state);

 private:
  enum class Kind { Worker, Archiver, Restorer, RestoreDone, Failure };

  struct Event {
    Nanos at{0};
    std::uint64_t seq = 0;
    Kind kind = Kind::Worker;
    unsigned worker = 0;
    RestoreBatch batch;
    std::exception_ptr error;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  struct Worker {
    std::unique_ptr<TxnGenerator> gen;
    std::vector<TxnOp> ops;
    std::size_t next = 0;
    Nanos start{0};
    Nanos io{0};
    Nanos resume{0};
    std::uint64_t txn = 0;
    std::uint64_t done = 0;
    Lsn last_lsn;
    std::optional<SegmentId> blocked;
    bool active = true;
  };

  void push(Kind kind, Nanos at, unsigned worker = 0) {
    Event e;
    e.at = at;
    e.kind = kind;
    e.worker = worker;
    push(std::move(e));
  }
  void push(Event e) {
    e.seq = seq_++;
    queue_.push(std::move(e));
  }

  bool finished(const Worker& w, Nanos t) const {
    return cfg_.txns_per_worker ? w.done >= cfg_.txns_per_worker : t >= duration_;
  }

  void worker_step(unsigned i, Nanos t);
  void archiver_step(Nanos t);
  void restorer_step(Nanos t);
  void restore_done(Event& e);
  void failure(Nanos t);
  void poke();
  void sample_until(Nanos t);
  Nanos drain_restore(Nanos t);

  WorkloadConfig cfg_;
  std::shared_ptr<VirtualClock> clock_;
  Engine engine_;
  std::unique_ptr<SimGate> gate_;
  std::vector<Worker> workers_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;

  Nanos duration_{0};
  Nanos now_{0};
  Nanos next_boundary_{1s};
  std::size_t active_ = 0;
  std::size_t blocked_ = 0;
  std::uint64_t committed_ = 0;
  bool failure_pending_ = false;
  std::optional<Nanos> failure_at_;
  Nanos restore_start_{0};
  bool restorer_idle_ = true;

  std::vector<TxnRecord> txns_;
  std::vector<BoundarySample> samples_;
};

void Simulation::worker_step(unsigned i, Nanos t) {
  Worker& w = workers_[i];
  if (!w.active) return;
  if (w.ops.empty()) {
    if (finished(w, t)) {
      w.active = false;
      --active_;
      return;
    }
    w.ops = w.gen->next();
    w.next = 0;
    w.start = t;
    w.io = Nanos{0};
    w.txn = (static_cast<std::uint64_t>(i) << 40) | w.done;
  }
  clock_->set(t);
  IoAccount& io = io_account();
  io.reset();
  try {
    w.last_lsn = engine_.apply(w.ops[w.next], w.txn);
    ++w.next;
  } catch (const WouldBlock& b) {
    w.io += io.charged;
    w.blocked = b.segment;
    w.resume = t + io.charged;
    ++blocked_;
    return;
  }
  const bool commit = w.next == w.ops.size();
  if (commit) engine_.wal().flush(w.last_lsn);
  w.io += io.charged;
  const Nanos end = t + io.charged + cfg_.cpu_per_op;
  if (commit) {
    txns_.push_back({end, end - w.start, w.io, w.txn, failure_at_ && end > *failure_at_});
    ++w.done;
    ++committed_;
    w.ops.clear();
    if (cfg_.inject_failure && cfg_.fail_after_txns && !failure_pending_ && !failure_at_ &&
        committed_ >= cfg_.fail_after_txns) {
      failure_pending_ = true;
      push(Kind::Failure, end);
    }
    push(Kind::Worker, end + think_time(cfg_, end - w.start, failure_at_, end), i);
    return;
  }
  push(Kind::Worker, end, i);
}

void Simulation::archiver_step(Nanos t) {
  if (active_ == 0) return;
  clock_->set(t);
  IoAccount& io = io_account();
  io.reset();
  engine_.archive().archive_step(std::size_t{1} << 20);
  engine_.archive().maintain();
  push(Kind::Archiver, t + std::max<Nanos>(cfg_.archive_interval, io.charged));
}

void Simulation::poke() {
  if (!restorer_idle_ || !engine_.restore()) return;
  restorer_idle_ = false;
  push(Kind::Restorer, std::max(now_, restore_start_));
}

void Simulation::restorer_step(Nanos t) {
  RestoreManager& mgr = *engine_.restore();
  clock_->set(t);
  auto batch = mgr.next_batch();
  if (!batch) {
    restorer_idle_ = true;
    return;
  }
  IoAccount& io = io_account();
  io.reset();
  Event done;
  done.kind = Kind::RestoreDone;
  done.batch = *batch;
  try {
    mgr.execute(*batch);
  } catch (...) {
    done.error = std::current_exception();
  }
  done.at = t + io.charged;
  push(std::move(done));
}

void Simulation::restore_done(Event& e) {
  RestoreManager& mgr = *engine_.restore();
  clock_->set(e.at);
  if (e.error) {
    mgr.fail(e.batch, e.error);
  } else {
    mgr.complete(e.batch);
  }
  // failed segments wake their waiters too; they retry and request again
  const auto lo = e.batch.first.value, hi = lo + e.batch.count;
  for (unsigned i = 0; i < workers_.size(); ++i) {
    Worker& w = workers_[i];
    if (w.blocked && w.blocked->value >= lo && w.blocked->value < hi) {
      w.blocked.reset();
      --blocked_;
      push(Kind::Worker, std::max(e.at, w.resume), i);
    }
  }
  restorer_step(e.at);
}

void Simulation::failure(Nanos t) {
  failure_pending_ = false;
  clock_->set(t);
  IoAccount& io = io_account();
  io.reset();
  engine_.fail_device();
  restore_start_ = t + io.charged;
  failure_at_ = t;
  gate_ = std::make_unique<SimGate>([this] { poke(); });
  gate_->bind(engine_.begin_restore(cfg_.policy, gate_.get()));
  restorer_idle_ = true;
  poke();
}

void Simulation::sample_until(Nanos t) {
  while (next_boundary_ <= t) {
    BoundarySample s;
    s.page_reads = engine_.pool().stats().misses;
    if (engine_.restore()) s.queue_depth = engine_.restore()->status().queue_depth;
    samples_.push_back(s);
    next_boundary_ += 1s;
  }
}

Nanos Simulation::drain_restore(Nanos t) {
  RestoreManager& mgr = *engine_.restore();
  if (cfg_.policy == RestorePolicy::OnDemandOnly) {
    for (std::uint64_t s = 0; s < mgr.geometry().segment_count(); ++s) {
      mgr.request_segment(SegmentId{s});
    }
  }
  // a scheduled completion may still be queued
  while (!queue_.empty()) {
    Event e = queue_.top();
    queue_.pop();
    if (e.kind == Kind::RestoreDone) {
      now_ = e.at;
      clock_->set(e.at);
      if (e.error) {
        mgr.fail(e.batch, e.error);
      } else {
        mgr.complete(e.batch);
      }
      t = std::max(t, e.at);
    }
  }
  unsigned stalls = 0;
  while (mgr.status().restored_count < mgr.status().total) {
    clock_->set(t);
    auto batch = mgr.next_batch();
    if (!batch) {
      if (++stalls > 3) throw RestoreError("restore stalled with segments outstanding");
      continue;
    }
    IoAccount& io = io_account();
    io.reset();
    std::exception_ptr error;
    try {
      mgr.execute(*batch);
    } catch (...) {
      error = std::current_exception();
    }
    t += io.charged;
    clock_->set(t);
    if (error) {
      mgr.fail(*batch, error);
    } else {
      mgr.complete(*batch);
    }
  }
  return t;
}

RunResult Simulation::run(bool capture_state) {
  RunResult result;
  MetricsReport& report = result.report;
  report.config = cfg_;
  duration_ = std::chrono::duration_cast<Nanos>(std::chrono::duration<double>(cfg_.duration_s));

  if (cfg_.warm_pool) engine_.warm_pool();
  clock_->set(Nanos{0});
  workers_.resize(cfg_.threads);
  for (unsigned i = 0; i < cfg_.threads; ++i) {
    workers_[i].gen = std::make_unique<TxnGenerator>(cfg_, engine_.zipf(), i);
    push(Kind::Worker, Nanos{0}, i);
  }
  active_ = cfg_.threads;
  push(Kind::Archiver, cfg_.archive_interval);
  if (cfg_.inject_failure && cfg_.fail_after_txns == 0) {
    failure_pending_ = true;
    push(Kind::Failure,
         std::chrono::duration_cast<Nanos>(std::chrono::duration<double>(cfg_.fail_at_s)));
  }

  while (active_ > 0) {
    if (queue_.empty()) throw Error("simulation ran out of events");
    Event e = queue_.top();
    queue_.pop();
    sample_until(e.at);
    now_ = e.at;
    switch (e.kind) {
      case Kind::Worker: worker_step(e.worker, e.at); break;
      case Kind::Archiver: archiver_step(e.at); break;
      case Kind::Restorer: restorer_step(e.at); break;
      case Kind::RestoreDone: restore_done(e); break;
      case Kind::Failure: failure(e.at); break;
    }
    if (active_ > 0 && blocked_ == active_ && restorer_idle_) {
      throw RestoreError("simulation stalled: every worker waits and the restorer is idle");
    }
  }
  Nanos end = now_;
  const Nanos workload_end = end;

  if (cfg_.inject_failure && !failure_at_) {
    report.violations.push_back("run ended before the failure point");
  }
  if (failure_at_) {
    end = drain_restore(end);
    report.failure_s = to_seconds(*failure_at_);
    report.restore_start_s = to_seconds(restore_start_);
    report.restore_events = engine_.restore()->events();
    if (!report.restore_events.empty()) {
      report.restore_end_s = to_seconds(report.restore_events.back().completed_at);
    }
    RestoreManager& mgr = *engine_.restore();
    for (std::uint64_t s = 0; s < mgr.geometry().segment_count(); ++s) {
      if (mgr.executions(SegmentId{s}) != 1) {
        report.violations.push_back("segment " + std::to_string(s) + " restored " +
                                    std::to_string(mgr.executions(SegmentId{s})) + " times");
        break;
      }
    }
  }
  clock_->set(end);
  engine_.finish();
  for (auto& p : engine_.check_oracle()) report.violations.push_back(std::move(p));
  report.oracle_checked = true;
  if (capture_state) result.state = engine_.logical_state();

  for (const auto& t : txns_) {
    if (t.latency < t.io) {
      report.violations.push_back("transaction latency below its I/O time");
      break;
    }
  }
  const std::uint64_t buckets =
      cfg_.txns_per_worker
          ? std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(to_seconds(workload_end))))
          : static_cast<std::uint64_t>(std::ceil(cfg_.duration_s));
  sample_until(Nanos{static_cast<std::int64_t>(buckets) * 1'000'000'000});
  detail::build_series(report, txns_, samples_, buckets);
  report.device_bytes = engine_.current_volume().geometry().bytes();
  if (failure_at_ && report.bytes_restored != report.device_bytes) {
    report.violations.push_back("restored bytes differ from the device size");
  }
  report.wal_bytes = engine_.wal().end_lsn().value;
  report.wal_crc = detail::file_crc(engine_.dir() / "wal.log");
  return result;
}

}  // namespace

RunResult run_simulation(const WorkloadConfig& config, bool capture_state) {
  WorkloadConfig c = config;
  c.clock = ClockMode::Virtual;
  Simulation sim(c);
  return sim.run(capture_state);
}

}  // namespace segrest

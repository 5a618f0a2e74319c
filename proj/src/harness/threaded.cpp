#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "segrest/common/errors.hpp"
#include "segrest/harness/benchmark.hpp"
#include "series.hpp"

namespace segrest {

namespace {

using namespace std::chrono_literals;
using detail::BoundarySample;
using detail::TxnRecord;
using detail::to_seconds;

Nanos seconds_to_nanos(double s) {
  return std::chrono::duration_cast<Nanos>(std::chrono::duration<double>(s));
}

}  // namespace

RunResult run_threaded(const WorkloadConfig& config, bool capture_state) {
  WorkloadConfig cfg = config;
  cfg.clock = ClockMode::Wall;
  auto clock = std::make_shared<WallClock>();
  Engine engine(cfg, clock);
  if (cfg.warm_pool) engine.warm_pool();

  RunResult result;
  MetricsReport& report = result.report;
  report.config = cfg;

  const Nanos t0 = clock->now();
  auto now = [&] { return clock->now() - t0; };
  const Nanos duration = seconds_to_nanos(cfg.duration_s);

  std::atomic<bool> stop_workers{false};
  std::atomic<bool> stop_background{false};
  std::atomic<std::int64_t> failure_at{-1};
  std::mutex error_mutex;
  std::vector<std::string> errors;
  auto record_error = [&](const std::string& what) {
    std::lock_guard lock(error_mutex);
    errors.push_back(what);
  };

  // per-thread accumulators, merged after the run
  std::vector<std::vector<TxnRecord>> per_worker(cfg.threads);
  std::vector<std::thread> workers;
  for (unsigned i = 0; i < cfg.threads; ++i) {
    workers.emplace_back([&, i] {
      TxnGenerator gen(cfg, engine.zipf(), i);
      auto& out = per_worker[i];
      IoAccount& io = io_account();
      try {
        for (std::uint64_t done = 0; !stop_workers.load(std::memory_order_relaxed); ++done) {
          if (cfg.txns_per_worker && done >= cfg.txns_per_worker) break;
          const auto ops = gen.next();
          const std::uint64_t txn = (static_cast<std::uint64_t>(i) << 40) | done;
          const Nanos start = now();
          io.reset();
          Lsn last;
          for (const auto& op : ops) {
            for (;;) {
              try {
                last = engine.apply(op, txn);
                break;
              } catch (const MediaFailure&) {
                // between the failure and the replacement being attached
                if (stop_workers.load(std::memory_order_relaxed)) throw;
                std::this_thread::sleep_for(200us);
              }
            }
          }
          engine.wal().flush(last);
          const Nanos end = now();
          const std::int64_t f = failure_at.load();
          out.push_back({end, end - start, io.charged, txn, f >= 0 && end.count() > f});
          if (f >= 0) {
            const Nanos until = end + think_time(cfg, end - start, Nanos{f}, end);
            while (now() < until && !stop_workers.load(std::memory_order_relaxed)) {
              std::this_thread::sleep_for(std::min<Nanos>(until - now(), 10ms));
            }
          }
        }
      } catch (const std::exception& e) {
        record_error(std::string("worker: ") + e.what());
      }
    });
  }

  std::thread archiver([&] {
    try {
      while (!stop_background.load()) {
        engine.archive().archive_step(std::size_t{1} << 20);
        engine.archive().maintain();
        std::this_thread::sleep_for(cfg.archive_interval);
      }
    } catch (const std::exception& e) {
      record_error(std::string("archiver: ") + e.what());
    }
  });

  std::vector<BoundarySample> samples;
  std::atomic<RestoreManager*> manager{nullptr};
  std::thread sampler([&] {
    Nanos next = 1s;
    while (!stop_background.load()) {
      const Nanos t = now();
      if (t < next) {
        std::this_thread::sleep_for(std::min<Nanos>(next - t, 50ms));
        continue;
      }
      BoundarySample s;
      s.page_reads = engine.pool().stats().misses;
      if (auto* m = manager.load()) s.queue_depth = m->status().queue_depth;
      samples.push_back(s);
      next += 1s;
    }
  });

  auto sleep_until = [&](Nanos t) {
    while (now() < t) {
      std::this_thread::sleep_for(std::min<Nanos>(t - now(), 10ms));
    }
  };

  if (cfg.inject_failure) {
    sleep_until(seconds_to_nanos(cfg.fail_at_s));
    try {
      failure_at = now().count();
      engine.fail_device();
      RestoreManager& mgr = engine.begin_restore(cfg.policy);
      report.failure_s = to_seconds(Nanos{failure_at.load()});
      report.restore_start_s = to_seconds(now());
      mgr.start();
      manager = &mgr;
    } catch (const std::exception& e) {
      record_error(std::string("failure injection: ") + e.what());
    }
  }
  if (!cfg.txns_per_worker) sleep_until(duration);
  stop_workers = true;
  for (auto& w : workers) w.join();
  const Nanos workload_end = now();

  try {
    if (RestoreManager* mgr = manager.load()) {
      if (cfg.policy == RestorePolicy::OnDemandOnly) {
        for (std::uint64_t s = 0; s < mgr->geometry().segment_count(); ++s) {
          mgr->request_segment(SegmentId{s});
        }
      }
      mgr->wait_until_complete();
      mgr->stop();
      // event times are on the shared clock; rebase them onto the run
      report.restore_events = mgr->events();
      for (auto& e : report.restore_events) e.completed_at -= t0;
      if (!report.restore_events.empty()) {
        report.restore_end_s = to_seconds(report.restore_events.back().completed_at);
      }
      for (std::uint64_t s = 0; s < mgr->geometry().segment_count(); ++s) {
        if (mgr->executions(SegmentId{s}) != 1) {
          report.violations.push_back("segment " + std::to_string(s) + " restored " +
                                      std::to_string(mgr->executions(SegmentId{s})) + " times");
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    record_error(std::string("restore: ") + e.what());
  }
  stop_background = true;
  archiver.join();
  sampler.join();

  if (!errors.empty()) {
    report.valid = false;
    report.error = errors.front();
  }
  if (report.valid) {
    engine.finish();
    for (auto& p : engine.check_oracle()) report.violations.push_back(std::move(p));
    report.oracle_checked = true;
    if (capture_state) result.state = engine.logical_state();
  }

  std::vector<TxnRecord> txns;
  for (auto& w : per_worker) txns.insert(txns.end(), w.begin(), w.end());
  std::sort(txns.begin(), txns.end(), [](const TxnRecord& a, const TxnRecord& b) {
    return a.commit < b.commit;
  });
  for (const auto& t : txns) {
    if (t.latency < t.io) {
      report.violations.push_back("transaction latency below its I/O time");
      break;
    }
  }
  const std::uint64_t buckets =
      cfg.txns_per_worker
          ? std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(to_seconds(workload_end))))
          : static_cast<std::uint64_t>(std::ceil(cfg.duration_s));
  detail::build_series(report, txns, samples, buckets);
  report.device_bytes = engine.current_volume().geometry().bytes();
  if (manager.load() && report.bytes_restored != report.device_bytes) {
    report.violations.push_back("restored bytes differ from the device size");
  }
  report.wal_bytes = engine.wal().end_lsn().value;
  report.wal_crc = detail::file_crc(engine.dir() / "wal.log");
  return result;
}

}  // namespace segrest

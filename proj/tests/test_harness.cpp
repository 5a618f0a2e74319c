#include <cmath>
#include <fstream>
#include <map>

#include "doctest.h"
#include "segrest/harness/benchmark.hpp"
#include "support.hpp"

using namespace segrest;

namespace {

WorkloadConfig tiny(RestorePolicy policy = RestorePolicy::Preemptive) {
  WorkloadConfig c;
  c.pages = 256;
  c.page_size = 4096;
  c.segment_pages = 8;
  c.pool_pages = 64;
  c.threads = 2;
  c.duration_s = 2;
  c.fail_at_s = 1;
  c.policy = policy;
  c.run_limit = 512;
  return c;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("config validation names the field") {
  WorkloadConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = [](auto mutate, const char* field) {
    WorkloadConfig c;
    mutate(c);
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains(field), std::invalid_argument);
  };
  bad([](WorkloadConfig& c) { c.pages = 0; }, "pages");
  bad([](WorkloadConfig& c) { c.threads = 0; }, "threads");
  bad([](WorkloadConfig& c) { c.skew = -1; }, "skew");
  bad([](WorkloadConfig& c) { c.fail_at_s = 30; }, "failure time");
  bad([](WorkloadConfig& c) { c.pool_pages = 0; }, "pool");
  bad([](WorkloadConfig& c) { c.segment_pages = 0; }, "segment");
}

TEST_CASE("zipf with no skew is uniform") {
  ZipfGenerator z(2, 0.0, 1);
  std::mt19937_64 rng(2);
  int zero = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) zero += z(rng) == PageId{0};
  CHECK(std::abs(zero / double(n) - 0.5) < 0.02);
}

TEST_CASE("zipf is deterministic for a seed") {
  ZipfGenerator a(1000, 0.8, 7), b(1000, 0.8, 7);
  std::mt19937_64 r1(3), r2(3);
  for (int i = 0; i < 1000; ++i) REQUIRE(a(r1) == b(r2));
}

TEST_CASE("zipf head mass matches the distribution") {
  const std::uint64_t n = 10000;
  const double theta = 1.0;
  ZipfGenerator z(n, theta, 5);
  // direct computation of the top 1% mass
  double norm = 0;
  for (std::uint64_t r = 0; r < n; ++r) norm += 1.0 / std::pow(r + 1.0, theta);
  double top = 0;
  for (std::uint64_t r = 0; r < n / 100; ++r) top += 1.0 / std::pow(r + 1.0, theta) / norm;
  CHECK(z.probability(0) == doctest::Approx(1.0 / norm));
  CHECK(top > 0.2);

  std::map<std::uint64_t, int> seen;
  std::mt19937_64 rng(6);
  const int draws = 1000000;
  std::uniform_real_distribution<double> u(0, 1);
  int in_top = 0;
  for (int i = 0; i < draws; ++i) in_top += z.rank(u(rng)) < n / 100;
  CHECK(in_top / double(draws) == doctest::Approx(top).epsilon(0.01));
}

TEST_CASE("transactions stay inside the worker's key partition") {
  WorkloadConfig c = tiny();
  c.threads = 3;
  ZipfGenerator z(c.pages, c.skew, c.seed);
  for (unsigned w = 0; w < c.threads; ++w) {
    TxnGenerator g(c, z, w);
    for (int i = 0; i < 200; ++i) {
      const auto ops = g.next();
      REQUIRE(ops.size() >= c.min_ops);
      REQUIRE(ops.size() <= c.max_ops);
      for (const auto& op : ops) {
        REQUIRE(op.payload.key % c.threads == w);
        REQUIRE(op.payload.key < c.keys_per_page);
        REQUIRE(op.page.value < c.pages);
      }
    }
  }
}

TEST_CASE("csv of an empty report has headers only") {
  test::TempDir dir;
  MetricsReport r;
  emit_csv(r, dir.path);
  CHECK(line_count(dir / "throughput.csv") == 1);
  CHECK(line_count(dir / "restore.csv") == 1);
  CHECK(line_count(dir / "latency_samples.csv") == 1);
  CHECK(read_throughput_csv(dir / "throughput.csv").empty());
}

TEST_CASE("a simulated run fills one bucket per second and round trips through csv") {
  const MetricsReport r = run_benchmark(tiny());
  REQUIRE_MESSAGE(r.ok(), r.error);
  CHECK(r.oracle_checked);
  CHECK(r.throughput.size() == 2);
  CHECK(r.restore.size() == 2);
  REQUIRE(r.failure_s);
  CHECK(*r.failure_s == doctest::Approx(1.0).epsilon(0.01));
  REQUIRE(r.restore_end_s);
  CHECK(*r.restore_end_s >= *r.restore_start_s);
  CHECK(r.bytes_restored == 256u * 4096u);
  std::uint64_t txns = 0;
  for (const auto& row : r.throughput) txns += row.txns;
  // transactions in flight at the end still commit, after the last bucket
  CHECK(txns <= r.committed);
  CHECK(r.committed - txns <= 2);

  test::TempDir dir;
  emit_csv(r, dir.path);
  CHECK(read_throughput_csv(dir / "throughput.csv") == r.throughput);
  CHECK(read_restore_csv(dir / "restore.csv") == r.restore);
  CHECK(read_latency_csv(dir / "latency_samples.csv") == r.samples);
}

TEST_CASE("simulated runs are reproducible") {
  WorkloadConfig c = tiny(RestorePolicy::OnDemandOnly);
  const RunResult a = run_simulation(c, true);
  const RunResult b = run_simulation(c, true);
  REQUIRE(a.report.ok());
  CHECK(a.report.wal_crc == b.report.wal_crc);
  CHECK(a.report.committed == b.report.committed);
  CHECK(a.state == b.state);
  c.seed = 2;
  CHECK(run_simulation(c).report.wal_crc != a.report.wal_crc);
}

TEST_CASE("a run with a failure ends in the same state as one without") {
  for (auto policy : {RestorePolicy::OnDemandOnly, RestorePolicy::Preemptive,
                      RestorePolicy::SinglePassOnly}) {
    CAPTURE(to_string(policy));
    WorkloadConfig c = tiny(policy);
    c.txns_per_worker = 100;
    const VerifyResult v = verify_shadow(c);
    for (const auto& p : v.problems) MESSAGE(p);
    CHECK(v.ok);
  }
}

TEST_CASE("threaded run survives a failure") {
  WorkloadConfig c = tiny(RestorePolicy::Preemptive);
  c.clock = ClockMode::Wall;
  c.latency = LatencyModel::none();
  c.duration_s = 1;
  c.fail_at_s = 0.5;
  const MetricsReport r = run_benchmark(c);
  REQUIRE_MESSAGE(r.ok(), r.error);
  CHECK(r.oracle_checked);
  CHECK(r.committed > 0);
}

TEST_CASE("with the whole database cached the failure barely shows") {
  WorkloadConfig c = tiny(RestorePolicy::OnDemandOnly);
  c.pool_pages = c.pages;
  c.duration_s = 4;
  c.fail_at_s = 2;
  const MetricsReport r = run_benchmark(c);
  REQUIRE(r.ok());
  const double pre = latency_quantile(r, false, 0.99);
  const double post = latency_quantile(r, true, 0.99);
  CHECK(post <= 2 * pre);
}

TEST_CASE("archiving mode leaves the log unchanged") {
  WorkloadConfig c = tiny();
  c.duration_s = 3;
  const OverheadResult o = measure_archiving_overhead(c);
  CHECK(o.identical_wal);
  CHECK(o.sorted.ok());
  CHECK(o.copy.ok());
  CHECK(o.overhead == doctest::Approx(1 - o.sorted_indexed_tps / o.plain_copy_tps));
}

TEST_CASE("errors come back as an invalid report") {
  WorkloadConfig c = tiny();
  c.threads = 0;
  const MetricsReport r = run_benchmark(c);
  CHECK_FALSE(r.valid);
  CHECK_FALSE(r.error.empty());
}

TEST_CASE("think time halves the transaction rate every half-life") {
  using namespace std::chrono;
  WorkloadConfig c;
  const nanoseconds txn = milliseconds(2), fail = seconds(1);
  CHECK(think_time(c, txn, fail, seconds(3)) == nanoseconds{0});
  c.demand_half_life_s = 0.5;
  CHECK(think_time(c, txn, std::nullopt, seconds(3)) == nanoseconds{0});
  CHECK(think_time(c, txn, fail, fail) == nanoseconds{0});
  // two half-lives after the failure: 2^2 - 1 = 3 transaction times idle
  CHECK(think_time(c, txn, fail, seconds(2)) == milliseconds(6));
  c.txns_per_worker = 10;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("recovery shape over a synthetic commit series") {
  MetricsReport r;
  r.throughput.resize(10);
  r.failure_s = 4.0;
  // 100 tps, nothing in [4, 6), then 100 tps again
  for (int i = 0; i < 1000; ++i) {
    const double t = i / 100.0;
    if (t < 4 || t >= 6) r.commit_s.push_back(t);
  }
  const RecoveryShape s = recovery_shape(r, 1.0, 0.9);
  CHECK(s.pre_failure_tps == doctest::Approx(100));
  REQUIRE(s.regain_s);
  CHECK(*s.regain_s == doctest::Approx(3.0));
  CHECK(s.dip == doctest::Approx(1.0));
  r.failure_s.reset();
  CHECK_FALSE(recovery_shape(r, 1.0, 0.9).regain_s);
}

TEST_CASE("decaying demand lets the preemptive sweep grow its batches") {
  WorkloadConfig c = tiny(RestorePolicy::Preemptive);
  c.pages = 1024;
  c.pool_pages = 128;
  c.duration_s = 3;
  c.demand_half_life_s = 0.05;
  const MetricsReport r = run_benchmark(c);
  REQUIRE_MESSAGE(r.ok(), r.error);
  std::uint64_t largest = 0;
  for (const auto& e : r.restore_events) largest = std::max(largest, e.count);
  CHECK(largest > 1);
  CHECK(r.oracle_checked);
}

#include <atomic>
#include <thread>

#include "doctest.h"
#include "db_fixture.hpp"
#include "segrest/common/errors.hpp"
#include "segrest/restore/replay.hpp"
#include "segrest/restore/restore_manager.hpp"

using namespace segrest;

namespace {

// Updates, backup, more updates, failure. The replacement is left unattached.
struct Failed : test::Db {
  Lsn failure_lsn;

  explicit Failed(std::uint64_t seed = 1, Geometry g = test::small_geometry())
      : test::Db(g) {
    std::mt19937_64 rng(seed);
    random_updates(300, rng);
    take_backup();
    random_updates(600, rng);
    failure_lsn = fail();
    replacement = Volume::create(DeviceRole::Replacement, dir / "replacement.vol", geo,
                                 LatencyModel::none(), clock, false);
  }

  std::unique_ptr<RestoreManager> manager(RestorePolicy policy, std::uint64_t batch_cap = 4,
                                          unsigned workers = 1) {
    RestoreContext ctx;
    ctx.backup = backup.get();
    ctx.archive = archive.get();
    ctx.replacement = replacement.get();
    ctx.failed_device = &volume->device();
    ctx.failure_lsn = failure_lsn;
    ctx.clock = clock;
    RestoreOptions o;
    o.policy = policy;
    o.batch_cap = batch_cap;
    o.workers = workers;
    return std::make_unique<RestoreManager>(ctx, o);
  }

  void check_replacement() {
    const auto expect = oracle();
    for (std::uint64_t p = 0; p < geo.page_count; ++p) {
      REQUIRE(replacement->read_page(PageId{p}) == expect[p]);
    }
  }
};

std::vector<std::pair<std::uint64_t, std::uint64_t>> drain_batches(RestoreScheduler& s) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  while (auto b = s.next()) out.emplace_back(b->first.value, b->count);
  return out;
}

}  // namespace

TEST_CASE("segment bitmap transitions") {
  SegmentBitmap b(4);
  CHECK(b.state(SegmentId{0}) == SegmentState::NotRestored);
  CHECK_THROWS_AS(b.mark_restored(SegmentId{0}), std::logic_error);
  CHECK_THROWS_AS(b.revert(SegmentId{0}), std::logic_error);
  CHECK(b.try_begin(SegmentId{0}));
  CHECK_FALSE(b.try_begin(SegmentId{0}));
  b.revert(SegmentId{0});
  CHECK(b.try_begin(SegmentId{0}));
  b.mark_restored(SegmentId{0});
  CHECK(b.state(SegmentId{0}) == SegmentState::Restored);
  CHECK_FALSE(b.try_begin(SegmentId{0}));
  CHECK_THROWS_AS(b.revert(SegmentId{0}), std::logic_error);
  CHECK_THROWS_AS(b.mark_restored(SegmentId{0}), std::logic_error);
  CHECK(b.restored_count() == 1);
  CHECK_FALSE(b.complete());
  CHECK_THROWS(b.state(SegmentId{4}));
}

TEST_CASE("bitmap begin has one winner per segment under contention") {
  SegmentBitmap b(1000);
  std::atomic<int> wins{0};
  std::vector<std::thread> ts;
  for (int t = 0; t < 8; ++t) {
    ts.emplace_back([&] {
      for (std::uint64_t s = 0; s < 1000; ++s) {
        if (b.try_begin(SegmentId{s})) {
          ++wins;
          b.mark_restored(SegmentId{s});
        }
      }
    });
  }
  for (auto& t : ts) t.join();
  CHECK(wins == 1000);
  CHECK(b.complete());
}

TEST_CASE("policy names") {
  for (auto p : {RestorePolicy::OnDemandOnly, RestorePolicy::Preemptive, RestorePolicy::SinglePassOnly}) {
    CHECK(parse_restore_policy(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_restore_policy("eager"), std::invalid_argument);
}

TEST_CASE("on-demand scheduler serves requests in order and nothing else") {
  SegmentBitmap b(10);
  RestoreScheduler s(RestorePolicy::OnDemandOnly, b, 4);
  CHECK_FALSE(s.next());
  for (std::uint64_t seg : {7, 2, 5}) {
    REQUIRE(b.try_begin(SegmentId{seg}));
    s.enqueue(SegmentId{seg});
  }
  CHECK(s.queue_depth() == 3);
  const auto got = drain_batches(s);
  CHECK(got == std::vector<std::pair<std::uint64_t, std::uint64_t>>{{7, 1}, {2, 1}, {5, 1}});
}

TEST_CASE("preemptive scheduler doubles the sweep batch and resets on demand") {
  SegmentBitmap b(40);
  RestoreScheduler s(RestorePolicy::Preemptive, b, 8);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> got;
  for (int i = 0; i < 4; ++i) {
    auto batch = s.next();
    got.emplace_back(batch->first.value, batch->count);
    CHECK_FALSE(batch->on_demand);
  }
  CHECK(got == std::vector<std::pair<std::uint64_t, std::uint64_t>>{{0, 1}, {1, 2}, {3, 4}, {7, 8}});
  CHECK(s.current_batch_size() == 8);

  REQUIRE(b.try_begin(SegmentId{30}));
  s.enqueue(SegmentId{30});
  auto demand = s.next();
  CHECK(demand->first == SegmentId{30});
  CHECK(demand->on_demand);
  CHECK(s.current_batch_size() == 1);
  auto sweep = s.next();
  CHECK(sweep->first == SegmentId{15});
  CHECK(sweep->count == 1);
  // batches stop at segments someone else owns
  auto next = s.next();
  CHECK(next->first == SegmentId{16});
  CHECK(next->count == 2);
}

TEST_CASE("preemptive sweep wraps to pick up skipped segments") {
  SegmentBitmap b(6);
  RestoreScheduler s(RestorePolicy::Preemptive, b, 64);
  REQUIRE(b.try_begin(SegmentId{0}));
  auto all = drain_batches(s);
  std::uint64_t total = 0;
  for (auto [f, c] : all) total += c;
  CHECK(total == 5);
  b.revert(SegmentId{0});
  auto again = s.next();
  REQUIRE(again);
  CHECK(again->first == SegmentId{0});
}

TEST_CASE("single pass ignores the queue and sweeps in fixed chunks once") {
  SegmentBitmap b(10);
  RestoreScheduler s(RestorePolicy::SinglePassOnly, b, 4);
  const auto got = drain_batches(s);
  CHECK(got == std::vector<std::pair<std::uint64_t, std::uint64_t>>{{0, 4}, {4, 4}, {8, 2}});
  // a failed chunk is swept again
  s.retry(RestoreBatch{SegmentId{4}, 4, false});
  CHECK(b.state(SegmentId{5}) == SegmentState::NotRestored);
  auto again = s.next();
  REQUIRE(again);
  CHECK(again->first == SegmentId{4});
}

TEST_CASE("replay skips records the page already has") {
  Page p(PageId{3});
  p.set_lsn(Lsn{50});
  LogRecord old;
  old.page_id = PageId{3};
  old.lsn = Lsn{40};
  old.payload = Payload::set(1, test::value_of(1));
  LogRecord fresh = old;
  fresh.lsn = Lsn{60};
  fresh.payload = Payload::set(2, test::value_of(2));
  CHECK_FALSE(replay_record(p, old, 10));
  CHECK(replay_record(p, fresh, 10));
  CHECK(p.lsn() == Lsn{60});
  CHECK_FALSE(p.find(1));
  CHECK(p.find(2) == test::value_of(2));
  // idempotent
  const Page once = p;
  CHECK_FALSE(replay_record(p, fresh, 10));
  CHECK(p == once);

  LogRecord other = fresh;
  other.page_id = PageId{4};
  CHECK_THROWS_AS(replay_record(p, other, 10), std::logic_error);
}

TEST_CASE("replaying a random log twice gives the same page") {
  std::mt19937_64 rng(4);
  std::vector<LogRecord> recs;
  Page expect(PageId{1});
  for (std::uint64_t i = 1; i <= 200; ++i) {
    LogRecord r;
    r.page_id = PageId{1};
    r.lsn = Lsn{i * 10};
    r.payload = test::random_payload(rng, 20);
    recs.push_back(r);
    test::fold(expect, r);
  }
  const Page once = replay(Page(PageId{1}), recs, 100);
  CHECK(once == expect);
  CHECK(replay(once, recs, 100) == once);
}

TEST_CASE("restore refuses to start before the archive has caught up") {
  test::Db db;
  std::mt19937_64 rng(5);
  db.take_backup();
  db.random_updates(100, rng);
  const Lsn at = db.pool->fail_device().failure_lsn;
  auto replacement = Volume::create(DeviceRole::Replacement, db.dir / "r.vol", db.geo,
                                    LatencyModel::none(), db.clock, false);
  RestoreContext ctx{db.backup.get(), db.archive.get(), replacement.get(), &db.volume->device(),
                     at, db.clock};
  CHECK_THROWS_AS(RestoreManager(ctx, {}), RestoreError);
  db.archive->archive_up_to(at);
  CHECK_NOTHROW(RestoreManager(ctx, {}));

  auto wrong = Volume::create(DeviceRole::Replacement, db.dir / "w.vol", test::small_geometry(32),
                              LatencyModel::none(), db.clock, false);
  ctx.replacement = wrong.get();
  CHECK_THROWS_AS(RestoreManager(ctx, {}), RestoreError);
}

TEST_CASE("restore needs a failed device") {
  test::Db db;
  db.take_backup();
  auto replacement = Volume::create(DeviceRole::Replacement, db.dir / "r.vol", db.geo,
                                    LatencyModel::none(), db.clock, false);
  RestoreContext ctx{db.backup.get(), db.archive.get(), replacement.get(), &db.volume->device(),
                     db.wal->durable_lsn(), db.clock};
  CHECK_THROWS_AS(RestoreManager(ctx, {}), RestoreError);
}

TEST_CASE("every policy restores the same volume") {
  for (auto policy : {RestorePolicy::OnDemandOnly, RestorePolicy::Preemptive,
                      RestorePolicy::SinglePassOnly}) {
    CAPTURE(to_string(policy));
    Failed f(7);
    auto mgr = f.manager(policy);
    if (policy == RestorePolicy::OnDemandOnly) {
      for (std::uint64_t s = 0; s < f.geo.segment_count(); ++s) mgr->request_segment(SegmentId{s});
    }
    while (mgr->run_one()) {}
    const RestoreStatus st = mgr->status();
    CHECK(st.restored_count == st.total);
    CHECK(st.total == f.geo.segment_count());
    CHECK(st.bytes_restored == f.geo.page_count * f.geo.page_size);
    CHECK(st.queue_depth == 0);
    std::uint64_t event_bytes = 0;
    for (const auto& e : mgr->events()) event_bytes += e.bytes;
    CHECK(event_bytes == st.bytes_restored);
    f.check_replacement();
  }
}

TEST_CASE("status counts restored segments as they complete") {
  Failed f(8);
  auto mgr = f.manager(RestorePolicy::OnDemandOnly);
  auto t = mgr->request_segment(SegmentId{3});
  CHECK_FALSE(t.ready());
  CHECK(mgr->status().queue_depth == 1);
  CHECK(mgr->run_one());
  CHECK(t.ready());
  CHECK_NOTHROW(t.wait());
  CHECK(mgr->status().restored_count == 1);
  CHECK(mgr->status().bytes_restored == f.geo.pages_per_segment * f.geo.page_size);
  CHECK_FALSE(mgr->run_one());
  CHECK(mgr->request_segment(SegmentId{3}).ready());
}

TEST_CASE("16 threads requesting random segments restore each exactly once") {
  for (auto policy : {RestorePolicy::OnDemandOnly, RestorePolicy::Preemptive,
                      RestorePolicy::SinglePassOnly}) {
    CAPTURE(to_string(policy));
    Failed f(9, test::small_geometry(256, 2));
    auto mgr = f.manager(policy, 4, 2);
    mgr->start();
    std::vector<std::thread> ts;
    std::atomic<int> served{0};
    for (int t = 0; t < 16; ++t) {
      ts.emplace_back([&, t] {
        std::mt19937_64 rng(100 + t);
        for (int i = 0; i < 50; ++i) {
          mgr->request_segment(SegmentId{rng() % f.geo.segment_count()}).wait();
          ++served;
        }
      });
    }
    for (auto& t : ts) t.join();
    if (policy == RestorePolicy::OnDemandOnly) {
      for (std::uint64_t s = 0; s < f.geo.segment_count(); ++s) mgr->request_segment(SegmentId{s});
    }
    mgr->wait_until_complete();
    mgr->stop();
    CHECK(served == 16 * 50);
    for (std::uint64_t s = 0; s < f.geo.segment_count(); ++s) REQUIRE(mgr->executions(SegmentId{s}) == 1);
    f.check_replacement();
  }
}

TEST_CASE("a transient restore failure is retried") {
  Failed f(10);
  auto mgr = f.manager(RestorePolicy::OnDemandOnly);
  int calls = 0;
  mgr->set_fault_injector([&](const RestoreBatch&) {
    if (++calls <= 2) throw std::runtime_error("backup read failed");
  });
  auto t = mgr->request_segment(SegmentId{2});
  while (mgr->run_one()) {}
  CHECK(t.ready());
  CHECK(mgr->failed_attempts() == 2);
  CHECK(mgr->executions(SegmentId{2}) == 1);
}

TEST_CASE("waiters hear about a restore that keeps failing") {
  Failed f(11);
  auto mgr = f.manager(RestorePolicy::OnDemandOnly);
  mgr->set_fault_injector([](const RestoreBatch&) { throw std::runtime_error("backup unreadable"); });
  auto t = mgr->request_segment(SegmentId{1});
  while (mgr->run_one()) {}
  CHECK(mgr->failed_attempts() == 3);
  CHECK(mgr->state(SegmentId{1}) == SegmentState::NotRestored);
  CHECK_THROWS_WITH_AS(t.wait(), doctest::Contains("backup unreadable"), RestoreError);

  // a new request after the fault clears succeeds
  mgr->set_fault_injector({});
  auto again = mgr->request_segment(SegmentId{1});
  while (mgr->run_one()) {}
  CHECK_NOTHROW(again.wait());
}

TEST_CASE("single page repair matches the restored page") {
  Failed f(12);
  auto mgr = f.manager(RestorePolicy::SinglePassOnly);
  while (mgr->run_one()) {}
  for (std::uint64_t p = 0; p < f.geo.page_count; ++p) {
    REQUIRE(single_page_repair(*f.backup, *f.wal, PageId{p}) == f.replacement->read_page(PageId{p}));
  }
}

TEST_CASE("single page repair of a page never updated returns the backup image") {
  test::Db db;
  db.take_backup();
  db.update(PageId{1}, Payload::erase(3));
  CHECK(single_page_repair(*db.backup, *db.wal, PageId{5}) == db.backup->fetch_page(PageId{5}));
}

TEST_CASE("single page repair reports a broken chain") {
  test::Db db;
  db.take_backup();
  for (int i = 0; i < 10; ++i) db.update(PageId{1}, Payload::set(i, test::value_of(i)));
  db.wal->flush(db.wal->end_lsn());
  db.archive->archive_up_to(db.wal->durable_lsn());
  db.wal->truncate_before(db.wal->durable_lsn());
  CHECK_THROWS_AS(single_page_repair(*db.backup, *db.wal, PageId{1}), BrokenChainError);
}

TEST_CASE("the pool reads through the restore and keeps dirty pages") {
  Failed f(13);
  auto mgr = f.manager(RestorePolicy::Preemptive);
  f.pool->attach_replacement(*f.replacement, *mgr);
  mgr->start();
  // update pages while the restore is running
  std::mt19937_64 rng(14);
  for (int i = 0; i < 300; ++i) f.update(PageId{rng() % f.geo.page_count}, test::random_payload(rng));
  mgr->wait_until_complete();
  mgr->stop();
  f.pool->flush_all();
  f.wal->flush(f.wal->end_lsn());
  f.check_replacement();
  CHECK(f.pool->stats().replacement_reads > 0);
}

TEST_CASE("16 threads asking for one segment get one restoration") {
  Failed f(15);
  auto mgr = f.manager(RestorePolicy::OnDemandOnly);
  std::atomic<int> completions{0};
  std::vector<std::thread> ts;
  for (int t = 0; t < 16; ++t) {
    ts.emplace_back([&] {
      mgr->request_segment(SegmentId{5}).wait();
      ++completions;
    });
  }
  mgr->start();
  for (auto& t : ts) t.join();
  mgr->stop();
  CHECK(completions == 16);
  CHECK(mgr->executions(SegmentId{5}) == 1);
  CHECK(mgr->events().size() == 1);
}

TEST_CASE("restoring a database that was never updated gives the backup") {
  test::Db db;
  db.take_backup();
  const Lsn at = db.fail();
  db.replacement = Volume::create(DeviceRole::Replacement, db.dir / "r.vol", db.geo,
                                  LatencyModel::none(), db.clock, false);
  RestoreManager mgr({db.backup.get(), db.archive.get(), db.replacement.get(),
                      &db.volume->device(), at, db.clock},
                     {});
  CHECK(mgr.status().restored_count == 0);
  while (mgr.run_one()) {}
  CHECK(mgr.status().restored_count == db.geo.segment_count());
  for (std::uint64_t p = 0; p < db.geo.page_count; ++p) {
    REQUIRE(db.replacement->read_page(PageId{p}) == db.backup->fetch_page(PageId{p}));
  }
}

TEST_CASE("a segment without archived records equals its backup image") {
  test::Db db;
  std::mt19937_64 rng(16);
  db.random_updates(200, rng);
  db.take_backup();
  // only segment 0 changes after the backup
  for (int i = 0; i < 50; ++i) db.update(PageId{rng() % 4}, test::random_payload(rng));
  const Lsn at = db.fail();
  db.replacement = Volume::create(DeviceRole::Replacement, db.dir / "r.vol", db.geo,
                                  LatencyModel::none(), db.clock, false);
  RestoreOptions o;
  o.policy = RestorePolicy::SinglePassOnly;
  RestoreManager mgr({db.backup.get(), db.archive.get(), db.replacement.get(),
                      &db.volume->device(), at, db.clock},
                     o);
  while (mgr.run_one()) {}
  for (std::uint64_t p = 4; p < db.geo.page_count; ++p) {
    REQUIRE(db.replacement->read_page(PageId{p}) == db.backup->fetch_page(PageId{p}));
  }
  const auto expect = db.oracle();
  for (std::uint64_t p = 0; p < 4; ++p) CHECK(db.replacement->read_page(PageId{p}) == expect[p]);
}

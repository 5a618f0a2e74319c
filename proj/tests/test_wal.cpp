#include <algorithm>
#include <map>
#include <thread>

#include "doctest.h"
#include "segrest/common/errors.hpp"
#include "segrest/common/file.hpp"
#include "segrest/wal/wal.hpp"
#include "support.hpp"

using namespace segrest;
using test::TempDir;

namespace {

std::unique_ptr<Wal> open_log(const TempDir& dir, WalOptions opts = {}) {
  return Wal::open(dir / "log", LatencyModel::none(), test::vclock(), opts);
}

std::vector<LogRecord> scan_all(const Wal& wal, Lsn from = kNullLsn) {
  std::vector<LogRecord> out;
  auto s = wal.scan(from);
  while (auto r = s.next()) out.push_back(*r);
  return out;
}

}  // namespace

TEST_CASE("record encode/decode round trip") {
  LogRecord r;
  r.lsn = Lsn{100};
  r.page_id = PageId{7};
  r.txn_id = 55;
  r.prev_page_lsn = Lsn{40};
  r.payload = Payload::set(9, test::value_of(3));
  Bytes b;
  r.encode(b);
  CHECK(b.size() == r.encoded_size());
  CHECK(b.size() == 4 + 8 + 8 + 8 + 8 + 1 + 4 + 2 + 16 + 4);
  CHECK(LogRecord::peek_length(b) == b.size());
  CHECK(LogRecord::decode(b) == r);

  LogRecord d = r;
  d.payload = Payload::erase(9);
  Bytes bd;
  d.encode(bd);
  CHECK(bd.size() == LogRecord::kFixedSize);
  CHECK(LogRecord::decode(bd) == d);

  b[20] ^= std::byte{1};
  CHECK_THROWS_AS(LogRecord::decode(b), CorruptionError);
  CHECK_THROWS_AS(LogRecord::decode(std::span(b).first(10)), CorruptionError);
}

TEST_CASE("appends chain per page and advance by record size") {
  TempDir dir;
  auto wal = open_log(dir);
  CHECK(wal->end_lsn() == Wal::first_lsn());
  const Lsn a = wal->append(PageId{1}, 1, Payload::set(1, test::value_of(1)));
  const Lsn b = wal->append(PageId{2}, 1, Payload::erase(1));
  const Lsn c = wal->append(PageId{1}, 2, Payload::set(2, test::value_of(2)));
  CHECK(a == Wal::first_lsn());
  CHECK(b.value == a.value + LogRecord::kFixedSize + kValueSize);
  CHECK(c.value == b.value + LogRecord::kFixedSize);
  CHECK(wal->head(PageId{1}) == c);
  CHECK(wal->head(PageId{3}) == kNullLsn);

  auto recs = scan_all(*wal);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].prev_page_lsn == kNullLsn);
  CHECK(recs[1].prev_page_lsn == kNullLsn);
  CHECK(recs[2].prev_page_lsn == a);

  // P-chain skips the Q record
  auto chain = wal->page_chain(PageId{1});
  CHECK(chain.next()->lsn == c);
  CHECK(chain.next()->lsn == a);
  CHECK_FALSE(chain.next().has_value());
  CHECK_FALSE(wal->page_chain(PageId{9}).next().has_value());
}

TEST_CASE("scan from the middle yields the suffix") {
  TempDir dir;
  auto wal = open_log(dir);
  std::vector<Lsn> lsns;
  for (int i = 0; i < 5; ++i) lsns.push_back(wal->append(PageId{1}, 1, Payload::erase(1)));
  const auto tail = scan_all(*wal, lsns[2]);
  REQUIRE(tail.size() == 3);
  CHECK(tail.front().lsn == lsns[2]);
}

TEST_CASE("flush makes records durable and is clamped") {
  TempDir dir;
  auto wal = open_log(dir, WalOptions{0, 1000});
  wal->flush(kNullLsn);
  CHECK(wal->durable_lsn() == Wal::first_lsn());
  const Lsn a = wal->append(PageId{1}, 1, Payload::erase(1));
  CHECK(wal->durable_lsn() <= a);
  wal->flush(a);
  CHECK(wal->durable_lsn() > a);
  wal->flush(Lsn{1'000'000});
  CHECK(wal->durable_lsn() == wal->end_lsn());
  wal.reset();
  auto again = open_log(dir);
  CHECK(scan_all(*again).size() == 1);
  CHECK(again->head(PageId{1}) == a);
}

TEST_CASE("torn tail is dropped on reopen") {
  TempDir dir;
  Lsn last;
  {
    auto wal = open_log(dir);
    for (int i = 0; i < 10; ++i) last = wal->append(PageId{static_cast<std::uint64_t>(i % 3)}, 1, Payload::erase(1));
  }
  const auto good_size = std::filesystem::file_size(dir / "log");
  {
    File f(dir / "log", File::Mode::ReadWrite);
    Bytes junk(30, std::byte{0x33});
    f.write_at(good_size, junk);
  }
  auto wal = open_log(dir);
  CHECK(wal->end_lsn().value == good_size);
  CHECK(scan_all(*wal).size() == 10);
  CHECK(wal->head(PageId{0}) == last);
  // new appends continue at the recovered end
  CHECK(wal->append(PageId{0}, 1, Payload::erase(2)).value == good_size);
}

TEST_CASE("corrupt record in the middle names its offset") {
  TempDir dir;
  Lsn second;
  {
    auto wal = open_log(dir);
    wal->append(PageId{1}, 1, Payload::erase(1));
    second = wal->append(PageId{1}, 1, Payload::erase(1));
  }
  auto wal = open_log(dir);
  {
    File f(dir / "log", File::Mode::ReadWrite);
    Bytes bad(1, std::byte{0xff});
    f.write_at(second.value + 10, bad);
  }
  auto s = wal->scan(kNullLsn);
  CHECK(s.next().has_value());
  try {
    s.next();
    FAIL("expected corruption");
  } catch (const CorruptionError& e) {
    CHECK(std::string(e.what()).find(std::to_string(second.value)) != std::string::npos);
  }
}

TEST_CASE("log capacity is enforced") {
  TempDir dir;
  auto wal = open_log(dir, WalOptions{8 + 3 * LogRecord::kFixedSize, 0});
  for (int i = 0; i < 3; ++i) wal->append(PageId{1}, 1, Payload::erase(1));
  CHECK_THROWS_AS(wal->append(PageId{1}, 1, Payload::erase(1)), LogFullError);
}

TEST_CASE("page chains equal the filtered log scan over a random history") {
  TempDir dir;
  auto wal = open_log(dir, WalOptions{0, 64});
  std::mt19937_64 rng(17);
  std::map<PageId, Lsn> max_lsn;
  for (int i = 0; i < 12000; ++i) {
    const PageId p{rng() % 97};
    const Lsn l = wal->append(p, i, test::random_payload(rng));
    max_lsn[p] = l;
    if (i % 1000 == 0) {
      for (const auto& [page, lsn] : max_lsn) REQUIRE(wal->head(page) == lsn);
    }
  }
  wal->flush(wal->end_lsn());
  const auto all = scan_all(*wal);
  REQUIRE(all.size() == 12000);
  CHECK(std::is_sorted(all.begin(), all.end(),
                       [](const LogRecord& a, const LogRecord& b) { return a.lsn < b.lsn; }));
  std::map<PageId, std::vector<LogRecord>> by_page;
  for (const auto& r : all) by_page[r.page_id].push_back(r);
  for (const auto& [page, records] : by_page) {
    std::vector<LogRecord> chain;
    auto c = wal->page_chain(page);
    while (auto r = c.next()) chain.push_back(*r);
    std::reverse(chain.begin(), chain.end());
    REQUIRE(chain == records);
  }
  CHECK(wal->recovery_index() == std::unordered_map<PageId, Lsn>(max_lsn.begin(), max_lsn.end()));
}

TEST_CASE("chain walk stops below a bound and respects truncation") {
  TempDir dir;
  auto wal = open_log(dir);
  std::vector<Lsn> l;
  for (int i = 0; i < 6; ++i) l.push_back(wal->append(PageId{4}, 1, Payload::erase(1)));
  auto c = wal->page_chain(PageId{4}, std::nullopt, l[3]);
  int n = 0;
  while (c.next()) ++n;
  CHECK(n == 3);

  wal->truncate_before(l[2]);
  CHECK_THROWS_AS(wal->read_at(l[1]), BrokenChainError);
  auto broken = wal->page_chain(PageId{4});
  CHECK_THROWS_AS([&] { while (broken.next()) {} }(), BrokenChainError);
  CHECK_THROWS_AS(wal->scan(l[0]), BrokenChainError);
}

TEST_CASE("concurrent appends get unique increasing LSNs") {
  TempDir dir;
  auto wal = open_log(dir, WalOptions{0, 32});
  std::vector<std::vector<Lsn>> got(8);
  std::vector<std::thread> ts;
  for (int t = 0; t < 8; ++t) {
    ts.emplace_back([&, t] {
      for (int i = 0; i < 500; ++i) got[t].push_back(wal->append(PageId{static_cast<std::uint64_t>(t)}, t, Payload::erase(1)));
    });
  }
  for (auto& th : ts) th.join();
  std::vector<Lsn> all;
  for (auto& g : got) {
    CHECK(std::is_sorted(g.begin(), g.end()));
    all.insert(all.end(), g.begin(), g.end());
  }
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  wal->flush(wal->end_lsn());
  CHECK(scan_all(*wal).size() == 4000);
}

#include "segrest/common/clock.hpp"

#include <thread>

namespace segrest {

IoAccount& io_account() {
  thread_local IoAccount account;
  return account;
}

WallClock::WallClock() : origin_(std::chrono::steady_clock::now()) {}

Nanos WallClock::now() const {
  return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now() - origin_);
}

void WallClock::io_delay(Nanos d) {
  auto& acct = io_account();
  acct.charged += d;
  ++acct.ops;
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

void VirtualClock::io_delay(Nanos d) {
  auto& acct = io_account();
  acct.charged += d;
  ++acct.ops;
}

}  // namespace segrest

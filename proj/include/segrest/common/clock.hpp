#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace segrest {

using Nanos = std::chrono::nanoseconds;

// Per-thread tally of simulated I/O time. Devices add to it on every
// operation regardless of clock kind, so callers can attribute I/O cost to
// whatever unit of work they are measuring.
struct IoAccount {
  Nanos charged{0};
  std::uint64_t ops = 0;

  void reset() { *this = IoAccount{}; }
};

IoAccount& io_account();

// Source of time plus the policy for what a simulated I/O delay means.
class Clock {
 public:
  virtual ~Clock() = default;

  virtual Nanos now() const = 0;

  // Called by devices with the modelled service time of one operation.
  virtual void io_delay(Nanos d) = 0;

  virtual bool is_virtual() const = 0;
};

// Real time; simulated I/O delays are slept.
class WallClock final : public Clock {
 public:
  WallClock();

  Nanos now() const override;
  void io_delay(Nanos d) override;
  bool is_virtual() const override { return false; }

 private:
  std::chrono::steady_clock::time_point origin_;
};

// Time advances only when a driver moves it. I/O delays are recorded in the
// calling thread's IoAccount and never block.
class VirtualClock final : public Clock {
 public:
  Nanos now() const override { return Nanos(now_.load(std::memory_order_relaxed)); }
  void io_delay(Nanos d) override;
  bool is_virtual() const override { return true; }

  void set(Nanos t) { now_.store(t.count(), std::memory_order_relaxed); }

 private:
  std::atomic<std::int64_t> now_{0};
};

}  // namespace segrest

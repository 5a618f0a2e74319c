#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>

#include "segrest/common/clock.hpp"
#include "segrest/common/file.hpp"

namespace segrest {

enum class DeviceRole { Database, Replacement, Log, Archive, Backup };

std::string_view to_string(DeviceRole role);

// Service time of one operation: a fixed per-request delay plus a per-byte
// transfer delay. A contiguous multi-page transfer pays the fixed part once.
struct LatencyModel {
  Nanos fixed{0};
  double ns_per_byte = 0.0;

  Nanos cost(std::size_t bytes) const {
    return fixed + Nanos(static_cast<std::int64_t>(ns_per_byte * static_cast<double>(bytes)));
  }

  // 100 us per request, 500 MB/s: a flash-like device.
  static LatencyModel ssd() { return {Nanos(100'000), 2.0}; }
  static LatencyModel none() { return {}; }
};

struct DeviceCounters {
  std::atomic<std::uint64_t> reads{0};
  std::atomic<std::uint64_t> writes{0};
  std::atomic<std::uint64_t> bytes_read{0};
  std::atomic<std::uint64_t> bytes_written{0};
  // Requests refused because the device had failed.
  std::atomic<std::uint64_t> rejected{0};
};

// Latency model, clock and counters shared by everything that performs I/O
// against one simulated device. Requests on one channel are serialized.
class IoChannel {
 public:
  IoChannel(DeviceRole role, LatencyModel latency, std::shared_ptr<Clock> clock)
      : role_(role), latency_(latency), clock_(std::move(clock)) {}

  DeviceRole role() const { return role_; }
  const LatencyModel& latency() const { return latency_; }
  Clock& clock() const { return *clock_; }
  const std::shared_ptr<Clock>& clock_ptr() const { return clock_; }
  const DeviceCounters& counters() const { return counters_; }

  void read(const File& file, std::uint64_t offset, std::span<std::byte> out);
  void write(File& file, std::uint64_t offset, std::span<const std::byte> in);
  void note_rejected() { counters_.rejected.fetch_add(1, std::memory_order_relaxed); }

 private:
  DeviceRole role_;
  LatencyModel latency_;
  std::shared_ptr<Clock> clock_;
  std::mutex io_mutex_;
  DeviceCounters counters_;
};

// A simulated block device backed by an ordinary file. Only the database
// device can be failed; once failed it rejects every request.
class Device {
 public:
  Device(DeviceRole role, const std::filesystem::path& path, File::Mode mode,
         LatencyModel latency, std::shared_ptr<Clock> clock);

  DeviceRole role() const { return channel_.role(); }
  const std::filesystem::path& path() const { return file_.path(); }

  void read(std::uint64_t offset, std::span<std::byte> out);
  void write(std::uint64_t offset, std::span<const std::byte> in);
  void sync() { file_.sync(); }
  void resize(std::uint64_t size) { file_.resize(size); }
  std::uint64_t size() const { return file_.size(); }

  void fail();
  bool failed() const { return failed_.load(std::memory_order_acquire); }

  IoChannel& channel() { return channel_; }
  const DeviceCounters& counters() const { return channel_.counters(); }

 private:
  void reject();

  IoChannel channel_;
  File file_;
  std::atomic<bool> failed_{false};
};

}  // namespace segrest

#include "segrest/storage/device.hpp"

#include <string>

#include "segrest/common/errors.hpp"

namespace segrest {

std::string_view to_string(DeviceRole role) {
  switch (role) {
    case DeviceRole::Database: return "database";
    case DeviceRole::Replacement: return "replacement";
    case DeviceRole::Log: return "log";
    case DeviceRole::Archive: return "archive";
    case DeviceRole::Backup: return "backup";
  }
  return "unknown";
}

void IoChannel::read(const File& file, std::uint64_t offset, std::span<std::byte> out) {
  std::lock_guard lock(io_mutex_);
  file.read_at(offset, out);
  counters_.reads.fetch_add(1, std::memory_order_relaxed);
  counters_.bytes_read.fetch_add(out.size(), std::memory_order_relaxed);
  clock_->io_delay(latency_.cost(out.size()));
}

void IoChannel::write(File& file, std::uint64_t offset, std::span<const std::byte> in) {
  std::lock_guard lock(io_mutex_);
  file.write_at(offset, in);
  counters_.writes.fetch_add(1, std::memory_order_relaxed);
  counters_.bytes_written.fetch_add(in.size(), std::memory_order_relaxed);
  clock_->io_delay(latency_.cost(in.size()));
}

Device::Device(DeviceRole role, const std::filesystem::path& path, File::Mode mode,
               LatencyModel latency, std::shared_ptr<Clock> clock)
    : channel_(role, latency, std::move(clock)), file_(path, mode) {}

void Device::read(std::uint64_t offset, std::span<std::byte> out) {
  if (failed()) reject();
  channel_.read(file_, offset, out);
}

void Device::write(std::uint64_t offset, std::span<const std::byte> in) {
  if (failed()) reject();
  channel_.write(file_, offset, in);
}

void Device::fail() {
  if (role() != DeviceRole::Database) {
    throw Error(std::string("only the database device can fail, not ") +
                std::string(to_string(role())));
  }
  bool expected = false;
  if (!failed_.compare_exchange_strong(expected, true, std::memory_order_acq_rel)) {
    throw Error("device already failed");
  }
}

void Device::reject() {
  channel_.note_rejected();
  throw MediaFailure("media failure on " + file_.path().string());
}

}  // namespace segrest

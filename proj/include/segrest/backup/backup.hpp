#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "segrest/storage/buffer_pool.hpp"
#include "segrest/storage/volume.hpp"

namespace segrest {

// A full backup of the database volume on a random-access device.
//
// File `backup_<min_lsn>.img`:
//   magic "SGBK1" | u64 min_lsn | u32 page_size | u64 page_count |
//   u32 pages_per_segment, followed by page_count page images.
//
// Every update with lsn >= min_lsn is missing from the image, and every page
// in it has page_lsn < min_lsn.
class BackupImage {
 public:
  static constexpr std::size_t kHeaderSize = 5 + 8 + 4 + 8 + 4;

  using CrashHook = std::function<void(std::string_view point)>;

  // Copies the database volume into `dir` at a quiescent point: flushes the
  // log and all dirty pages, then streams the volume into a shadow file that
  // is renamed into place once complete.
  static std::unique_ptr<BackupImage> take_full_backup(const std::filesystem::path& dir,
                                                       BufferPool& pool, Volume& database,
                                                       LogFlusher& log, LatencyModel latency,
                                                       std::shared_ptr<Clock> clock,
                                                       const CrashHook& crash_hook = {});

  static std::unique_ptr<BackupImage> open(const std::filesystem::path& path, LatencyModel latency,
                                           std::shared_ptr<Clock> clock);

  static std::string file_name(Lsn min_lsn);

  Lsn min_lsn() const { return min_lsn_; }
  const Geometry& geometry() const { return pages_.geometry(); }
  const std::filesystem::path& path() const { return device_->path(); }
  Device& device() { return *device_; }

  // One contiguous read per call.
  std::vector<Page> fetch_segment(SegmentId seg) const;
  std::vector<Page> fetch_pages(PageId first, std::uint64_t count) const {
    return pages_.read_range(first, count);
  }
  Page fetch_page(PageId page) const { return pages_.read_page(page); }

 private:
  BackupImage(std::unique_ptr<Device> device, Lsn min_lsn, const Geometry& geometry)
      : device_(std::move(device)), pages_(*device_, kHeaderSize, geometry), min_lsn_(min_lsn) {}

  std::unique_ptr<Device> device_;
  PageArray pages_;
  Lsn min_lsn_;
};

}  // namespace segrest

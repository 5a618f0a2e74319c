#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "segrest/common/types.hpp"
#include "segrest/storage/device.hpp"
#include "segrest/storage/page.hpp"

namespace segrest {

struct Geometry {
  std::uint32_t page_size = kDefaultPageSize;
  std::uint64_t page_count = 0;
  std::uint32_t pages_per_segment = 128;

  std::uint64_t segment_count() const {
    return (page_count + pages_per_segment - 1) / pages_per_segment;
  }
  SegmentId segment_of(PageId page) const { return SegmentId{page.value / pages_per_segment}; }
  PageId first_page(SegmentId seg) const { return PageId{seg.value * pages_per_segment}; }
  // The final segment may be short.
  std::uint64_t pages_in(SegmentId seg) const;
  std::uint64_t bytes() const { return page_count * page_size; }

  // Throws std::invalid_argument when a size is zero or a page cannot hold
  // even one record.
  void validate() const;

  bool operator==(const Geometry&) const = default;
};

// A contiguous array of page images at a fixed offset inside a device.
// Ranges of pages move as one request, so the latency model charges one
// fixed delay per call.
class PageArray {
 public:
  PageArray(Device& device, std::uint64_t base_offset, Geometry geometry)
      : device_(&device), base_(base_offset), geo_(geometry) {}

  const Geometry& geometry() const { return geo_; }
  Device& device() const { return *device_; }

  Page read_page(PageId page) const;
  void write_page(const Page& page);

  std::vector<Page> read_range(PageId first, std::uint64_t count) const;
  void write_range(std::span<const Page> pages);

  void check(PageId page) const;

 private:
  Device* device_;
  std::uint64_t base_;
  Geometry geo_;
};

// A database (or replacement) volume file:
//   magic "SGRV1" | u32 page_size | u64 page_count | u32 pages_per_segment
//   followed by page_count page images.
class Volume {
 public:
  static constexpr std::size_t kHeaderSize = 5 + 4 + 8 + 4;

  // Creates the file. With `format`, every page is written as an empty page;
  // otherwise page images are left unallocated (replacement devices).
  static std::unique_ptr<Volume> create(DeviceRole role, const std::filesystem::path& path,
                                        const Geometry& geometry, LatencyModel latency,
                                        std::shared_ptr<Clock> clock, bool format = true);
  static std::unique_ptr<Volume> open(DeviceRole role, const std::filesystem::path& path,
                                      LatencyModel latency, std::shared_ptr<Clock> clock);

  const Geometry& geometry() const { return pages_.geometry(); }
  Device& device() { return *device_; }
  const Device& device() const { return *device_; }

  Page read_page(PageId page) const { return pages_.read_page(page); }
  void write_page(const Page& page) { pages_.write_page(page); }

  std::vector<Page> read_segment(SegmentId seg) const;
  void write_segment(SegmentId seg, std::span<const Page> pages);

  std::vector<Page> read_range(PageId first, std::uint64_t count) const {
    return pages_.read_range(first, count);
  }
  void write_range(std::span<const Page> pages) { pages_.write_range(pages); }

 private:
  Volume(std::unique_ptr<Device> device, const Geometry& geometry);

  std::unique_ptr<Device> device_;
  PageArray pages_;
};

}  // namespace segrest

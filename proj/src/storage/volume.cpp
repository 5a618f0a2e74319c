#include "segrest/storage/volume.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "segrest/common/codec.hpp"
#include "segrest/common/errors.hpp"

namespace segrest {

namespace {

constexpr std::string_view kVolumeMagic = "SGRV1";

// Format in slices so huge volumes do not need one giant buffer.
constexpr std::uint64_t kFormatChunkPages = 256;

}  // namespace

std::uint64_t Geometry::pages_in(SegmentId seg) const {
  const std::uint64_t first = seg.value * pages_per_segment;
  if (first >= page_count) return 0;
  return std::min<std::uint64_t>(pages_per_segment, page_count - first);
}

void Geometry::validate() const {
  if (page_count == 0 || pages_per_segment == 0) {
    throw std::invalid_argument("page count and segment size must be positive");
  }
  if (page_size < Page::kHeaderSize + Page::kRecordSize) {
    throw std::invalid_argument("page size " + std::to_string(page_size) + " too small");
  }
}

void PageArray::check(PageId page) const {
  if (page.value >= geo_.page_count) {
    throw std::out_of_range("page " + std::to_string(page.value) + " outside volume of " +
                            std::to_string(geo_.page_count) + " pages");
  }
}

Page PageArray::read_page(PageId page) const {
  check(page);
  Bytes buf(geo_.page_size);
  device_->read(base_ + page.value * geo_.page_size, buf);
  return Page::deserialize(buf, page);
}

void PageArray::write_page(const Page& page) {
  check(page.id());
  Bytes buf(geo_.page_size);
  page.serialize(buf);
  device_->write(base_ + page.id().value * geo_.page_size, buf);
}

std::vector<Page> PageArray::read_range(PageId first, std::uint64_t count) const {
  if (count == 0) return {};
  check(first);
  check(PageId{first.value + count - 1});
  Bytes buf(count * geo_.page_size);
  device_->read(base_ + first.value * geo_.page_size, buf);
  std::vector<Page> pages;
  pages.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    pages.push_back(Page::deserialize(
        std::span<const std::byte>(buf).subspan(i * geo_.page_size, geo_.page_size),
        PageId{first.value + i}));
  }
  return pages;
}

void PageArray::write_range(std::span<const Page> pages) {
  if (pages.empty()) return;
  const PageId first = pages.front().id();
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (pages[i].id().value != first.value + i) {
      throw std::invalid_argument("write_range needs contiguous pages");
    }
  }
  check(PageId{first.value + pages.size() - 1});
  Bytes buf(pages.size() * geo_.page_size);
  for (std::size_t i = 0; i < pages.size(); ++i) {
    pages[i].serialize(std::span<std::byte>(buf).subspan(i * geo_.page_size, geo_.page_size));
  }
  device_->write(base_ + first.value * geo_.page_size, buf);
}

Volume::Volume(std::unique_ptr<Device> device, const Geometry& geometry)
    : device_(std::move(device)), pages_(*device_, kHeaderSize, geometry) {}

std::unique_ptr<Volume> Volume::create(DeviceRole role, const std::filesystem::path& path,
                                       const Geometry& geometry, LatencyModel latency,
                                       std::shared_ptr<Clock> clock, bool format) {
  geometry.validate();
  auto device = std::make_unique<Device>(role, path, File::Mode::Truncate, latency, std::move(clock));
  Bytes header;
  Writer w(header);
  w.raw(kVolumeMagic);
  w.u32(geometry.page_size);
  w.u64(geometry.page_count);
  w.u32(geometry.pages_per_segment);
  device->write(0, header);
  device->resize(kHeaderSize + geometry.bytes());

  std::unique_ptr<Volume> vol(new Volume(std::move(device), geometry));
  if (format) {
    std::vector<Page> chunk;
    for (std::uint64_t first = 0; first < geometry.page_count; first += kFormatChunkPages) {
      const auto n = std::min(kFormatChunkPages, geometry.page_count - first);
      chunk.clear();
      for (std::uint64_t i = 0; i < n; ++i) chunk.emplace_back(PageId{first + i});
      vol->write_range(chunk);
    }
  }
  return vol;
}

std::unique_ptr<Volume> Volume::open(DeviceRole role, const std::filesystem::path& path,
                                     LatencyModel latency, std::shared_ptr<Clock> clock) {
  auto device = std::make_unique<Device>(role, path, File::Mode::ReadWrite, latency, std::move(clock));
  Bytes header(kHeaderSize);
  device->read(0, header);
  Reader r(header);
  auto magic = r.raw(kVolumeMagic.size());
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::byte*>(kVolumeMagic.data()))) {
    throw CorruptionError("bad volume magic in " + path.string());
  }
  Geometry geo;
  geo.page_size = r.u32();
  geo.page_count = r.u64();
  geo.pages_per_segment = r.u32();
  geo.validate();
  return std::unique_ptr<Volume>(new Volume(std::move(device), geo));
}

std::vector<Page> Volume::read_segment(SegmentId seg) const {
  const auto& geo = geometry();
  if (seg.value >= geo.segment_count()) {
    throw std::out_of_range("segment " + std::to_string(seg.value) + " out of range");
  }
  return read_range(geo.first_page(seg), geo.pages_in(seg));
}

void Volume::write_segment(SegmentId seg, std::span<const Page> pages) {
  const auto& geo = geometry();
  if (seg.value >= geo.segment_count() || pages.size() != geo.pages_in(seg) ||
      pages.front().id() != geo.first_page(seg)) {
    throw std::invalid_argument("pages do not form segment " + std::to_string(seg.value));
  }
  write_range(pages);
}

}  // namespace segrest

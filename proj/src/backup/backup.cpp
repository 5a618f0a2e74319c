#include "segrest/backup/backup.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "segrest/common/codec.hpp"
#include "segrest/common/errors.hpp"

namespace segrest {

namespace {

constexpr std::string_view kBackupMagic = "SGBK1";
constexpr std::uint64_t kCopyChunkPages = 256;

}  // namespace

std::string BackupImage::file_name(Lsn min_lsn) {
  return "backup_" + std::to_string(min_lsn.value) + ".img";
}

std::unique_ptr<BackupImage> BackupImage::take_full_backup(const std::filesystem::path& dir,
                                                           BufferPool& pool, Volume& database,
                                                           LogFlusher& log, LatencyModel latency,
                                                           std::shared_ptr<Clock> clock,
                                                           const CrashHook& crash_hook) {
  log.flush(log.end_lsn());
  pool.flush_all();
  const Lsn min_lsn = log.durable_lsn();
  const Geometry& geo = database.geometry();

  std::filesystem::create_directories(dir);
  const auto final_path = dir / file_name(min_lsn);
  auto shadow = final_path;
  shadow += ".tmp";
  {
    auto device = std::make_unique<Device>(DeviceRole::Backup, shadow, File::Mode::Truncate,
                                           latency, clock);
    Bytes header;
    Writer w(header);
    w.raw(kBackupMagic);
    w.u64(min_lsn.value);
    w.u32(geo.page_size);
    w.u64(geo.page_count);
    w.u32(geo.pages_per_segment);
    device->write(0, header);
    PageArray out(*device, kHeaderSize, geo);
    for (std::uint64_t first = 0; first < geo.page_count; first += kCopyChunkPages) {
      const auto n = std::min(kCopyChunkPages, geo.page_count - first);
      auto pages = database.read_range(PageId{first}, n);
      for (const auto& p : pages) {
        if (p.lsn() >= min_lsn) {
          throw std::logic_error("page " + std::to_string(p.id().value) +
                                 " changed during backup; backups need a quiescent database");
        }
      }
      out.write_range(pages);
      if (crash_hook && first == 0) crash_hook("backup.mid_copy");
    }
    device->sync();
  }
  if (crash_hook) crash_hook("backup.before_rename");
  publish_file(shadow, final_path);
  return open(final_path, latency, std::move(clock));
}

std::unique_ptr<BackupImage> BackupImage::open(const std::filesystem::path& path,
                                               LatencyModel latency, std::shared_ptr<Clock> clock) {
  auto device = std::make_unique<Device>(DeviceRole::Backup, path, File::Mode::ReadOnly, latency,
                                         std::move(clock));
  Bytes header(kHeaderSize);
  device->read(0, header);
  Reader r(header);
  auto magic = r.raw(kBackupMagic.size());
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::byte*>(kBackupMagic.data()))) {
    throw CorruptionError("bad backup magic in " + path.string());
  }
  const Lsn min_lsn{r.u64()};
  Geometry geo;
  geo.page_size = r.u32();
  geo.page_count = r.u64();
  geo.pages_per_segment = r.u32();
  geo.validate();
  if (device->size() < kHeaderSize + geo.bytes()) {
    throw CorruptionError("backup " + path.string() + " is truncated");
  }
  return std::unique_ptr<BackupImage>(new BackupImage(std::move(device), min_lsn, geo));
}

std::vector<Page> BackupImage::fetch_segment(SegmentId seg) const {
  const auto& geo = geometry();
  if (seg.value >= geo.segment_count()) {
    throw std::out_of_range("segment " + std::to_string(seg.value) + " out of range");
  }
  return fetch_pages(geo.first_page(seg), geo.pages_in(seg));
}

}  // namespace segrest

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "segrest/archive/bloom.hpp"
#include "segrest/common/codec.hpp"
#include "segrest/common/file.hpp"
#include "segrest/storage/device.hpp"
#include "segrest/wal/log_record.hpp"

namespace segrest {

// One immutable archive partition. File layout, little-endian:
//
//   header  magic "SGAR1" | u64 begin_lsn | u64 end_lsn | u64 record_count |
//           u32 block_size
//   blocks  log records in WAL wire format, sorted by (page_id, lsn); a
//           record never straddles a block and blocks are not padded
//   index   per block: u64 first_page_id | u64 offset
//   bloom   u32 bit_len | bits
//   footer  u64 index_offset | u64 bloom_offset | u32 crc
//
// The crc covers every byte of the file before it.
struct RunMeta {
  Lsn begin;
  Lsn end;
  std::uint64_t record_count = 0;
  std::uint32_t block_size = 0;

  bool operator==(const RunMeta&) const = default;
};

struct BlockIndexEntry {
  PageId first_page;
  std::uint64_t offset = 0;
};

std::string run_file_name(Lsn begin, Lsn end);
// Parses `archive_<begin>_<end>.run`.
std::optional<std::pair<Lsn, Lsn>> parse_run_file_name(const std::string& name);

// Streams sorted records into a new run file. Input must arrive in
// (page_id, lsn) order with every lsn inside [begin, end).
class RunWriter {
 public:
  RunWriter(const std::filesystem::path& path, Lsn begin, Lsn end, std::uint64_t record_count,
            std::uint32_t block_size, IoChannel& channel);

  void add(const LogRecord& record);

  // Writes index, bloom and footer and syncs the file.
  RunMeta finish();

  // Bytes buffered or written so far; lets tests crash mid-write.
  std::uint64_t bytes_written() const { return file_offset_ + buffer_.size(); }

 private:
  void write_out();

  File file_;
  IoChannel& channel_;
  RunMeta meta_;
  std::uint64_t expected_count_;
  Bytes buffer_;
  std::uint64_t file_offset_ = 0;
  std::uint32_t crc_ = 0;
  std::uint64_t block_used_ = 0;
  std::vector<BlockIndexEntry> index_;
  std::vector<PageId> distinct_pages_;
  std::optional<LogRecord> last_;
};

class RunCursor;

class IndexedRun : public std::enable_shared_from_this<IndexedRun> {
 public:
  // Loads header, index and bloom filter. With `verify`, the whole file is
  // read once to check the crc.
  static std::shared_ptr<IndexedRun> open(const std::filesystem::path& path, IoChannel& channel,
                                          bool verify);

  const RunMeta& meta() const { return meta_; }
  const std::filesystem::path& path() const { return file_.path(); }
  const BloomFilter& bloom() const { return bloom_; }
  const std::vector<BlockIndexEntry>& block_index() const { return index_; }
  std::uint64_t records_end() const { return index_offset_; }
  std::uint64_t file_size() const { return file_size_; }

  // Records with page in [first, last] and lsn >= min_lsn, in run order.
  // Seeks with the block index so only the relevant blocks are read.
  RunCursor cursor(PageId first, PageId last, Lsn min_lsn) const;

  // Linear decode of every record, for verification.
  std::vector<LogRecord> read_all() const;

 private:
  friend class RunCursor;
  IndexedRun(File file, IoChannel& channel) : file_(std::move(file)), channel_(&channel) {}

  File file_;
  IoChannel* channel_;
  RunMeta meta_;
  std::vector<BlockIndexEntry> index_;
  BloomFilter bloom_;
  std::uint64_t index_offset_ = 0;
  std::uint64_t file_size_ = 0;
};

class RunCursor {
 public:
  std::optional<LogRecord> next();
  std::uint64_t bytes_read() const { return bytes_read_; }

 private:
  friend class IndexedRun;
  RunCursor(std::shared_ptr<const IndexedRun> run, std::uint64_t start, std::uint64_t end,
            PageId first, PageId last, Lsn min_lsn);

  bool refill();

  std::shared_ptr<const IndexedRun> run_;
  std::uint64_t offset_;
  std::uint64_t end_;
  PageId first_;
  PageId last_;
  Lsn min_lsn_;
  Bytes buffer_;
  std::uint64_t buffer_start_ = 0;
  std::uint64_t bytes_read_ = 0;
  bool done_ = false;
};

}  // namespace segrest

#include "segrest/archive/run_file.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

#include "segrest/common/errors.hpp"

namespace segrest {

namespace {

constexpr std::string_view kRunMagic = "SGAR1";
constexpr std::size_t kHeaderSize = 5 + 8 + 8 + 8 + 4;
constexpr std::size_t kFooterSize = 8 + 8 + 4;
constexpr std::size_t kWriteChunk = 1 << 20;
constexpr std::size_t kReadChunk = 64 * 1024;

}  // namespace

std::string run_file_name(Lsn begin, Lsn end) {
  return "archive_" + std::to_string(begin.value) + "_" + std::to_string(end.value) + ".run";
}

std::optional<std::pair<Lsn, Lsn>> parse_run_file_name(const std::string& name) {
  constexpr std::string_view prefix = "archive_";
  constexpr std::string_view suffix = ".run";
  if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) ||
      !name.ends_with(suffix)) {
    return std::nullopt;
  }
  const std::string_view body(name.data() + prefix.size(), name.size() - prefix.size() - suffix.size());
  const auto sep = body.find('_');
  if (sep == std::string_view::npos) return std::nullopt;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  auto r1 = std::from_chars(body.data(), body.data() + sep, begin);
  auto r2 = std::from_chars(body.data() + sep + 1, body.data() + body.size(), end);
  if (r1.ec != std::errc{} || r1.ptr != body.data() + sep || r2.ec != std::errc{} ||
      r2.ptr != body.data() + body.size() || begin >= end) {
    return std::nullopt;
  }
  return std::pair{Lsn{begin}, Lsn{end}};
}

RunWriter::RunWriter(const std::filesystem::path& path, Lsn begin, Lsn end,
                     std::uint64_t record_count, std::uint32_t block_size, IoChannel& channel)
    : file_(path, File::Mode::Truncate), channel_(channel), expected_count_(record_count) {
  meta_.begin = begin;
  meta_.end = end;
  meta_.block_size = block_size;
  Writer w(buffer_);
  w.raw(kRunMagic);
  w.u64(begin.value);
  w.u64(end.value);
  w.u64(record_count);
  w.u32(block_size);
}

void RunWriter::add(const LogRecord& record) {
  if (last_ && !PageLsnLess{}(*last_, record)) {
    throw std::logic_error("run records out of (page, lsn) order");
  }
  if (record.lsn < meta_.begin || record.lsn >= meta_.end) {
    throw std::logic_error("record lsn outside run range");
  }
  const std::size_t size = record.encoded_size();
  if (block_used_ == 0 || block_used_ + size > meta_.block_size) {
    index_.push_back({record.page_id, bytes_written()});
    block_used_ = 0;
  }
  record.encode(buffer_);
  block_used_ += size;
  if (distinct_pages_.empty() || distinct_pages_.back() != record.page_id) {
    distinct_pages_.push_back(record.page_id);
  }
  ++meta_.record_count;
  last_ = record;
  if (buffer_.size() >= kWriteChunk) write_out();
}

void RunWriter::write_out() {
  if (buffer_.empty()) return;
  crc_ = crc32(buffer_, crc_);
  channel_.write(file_, file_offset_, buffer_);
  file_offset_ += buffer_.size();
  buffer_.clear();
}

RunMeta RunWriter::finish() {
  if (meta_.record_count != expected_count_) {
    throw std::logic_error("run received " + std::to_string(meta_.record_count) + " records, expected " +
                           std::to_string(expected_count_));
  }
  const std::uint64_t index_offset = bytes_written();
  Writer w(buffer_);
  for (const auto& e : index_) {
    w.u64(e.first_page.value);
    w.u64(e.offset);
  }
  const std::uint64_t bloom_offset = bytes_written();
  BloomFilter bloom(distinct_pages_.size());
  for (PageId p : distinct_pages_) bloom.add(p);
  bloom.serialize(w);
  w.u64(index_offset);
  w.u64(bloom_offset);
  write_out();
  Bytes crc;
  Writer(crc).u32(crc_);
  channel_.write(file_, file_offset_, crc);
  file_offset_ += crc.size();
  file_.sync();
  return meta_;
}

std::shared_ptr<IndexedRun> IndexedRun::open(const std::filesystem::path& path, IoChannel& channel,
                                             bool verify) {
  File file(path, File::Mode::ReadOnly);
  std::shared_ptr<IndexedRun> run(new IndexedRun(std::move(file), channel));
  const std::string name = path.filename().string();
  const std::uint64_t size = run->file_.size();
  if (size < kHeaderSize + kFooterSize) throw CorruptionError("run " + name + " truncated");
  run->file_size_ = size;

  Bytes header(kHeaderSize);
  channel.read(run->file_, 0, header);
  Reader hr(header);
  auto magic = hr.raw(kRunMagic.size());
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::byte*>(kRunMagic.data()))) {
    throw CorruptionError("run " + name + " has bad magic");
  }
  run->meta_.begin = Lsn{hr.u64()};
  run->meta_.end = Lsn{hr.u64()};
  run->meta_.record_count = hr.u64();
  run->meta_.block_size = hr.u32();

  Bytes footer(kFooterSize);
  channel.read(run->file_, size - kFooterSize, footer);
  Reader fr(footer);
  const std::uint64_t index_offset = fr.u64();
  const std::uint64_t bloom_offset = fr.u64();
  const std::uint32_t stored_crc = fr.u32();
  if (index_offset < kHeaderSize || bloom_offset < index_offset ||
      bloom_offset > size - kFooterSize || (bloom_offset - index_offset) % 16 != 0) {
    throw CorruptionError("run " + name + " has a bad footer");
  }
  run->index_offset_ = index_offset;

  Bytes tail(size - kFooterSize - index_offset);
  channel.read(run->file_, index_offset, tail);
  Reader tr(tail);
  const std::uint64_t blocks = (bloom_offset - index_offset) / 16;
  run->index_.reserve(blocks);
  for (std::uint64_t i = 0; i < blocks; ++i) {
    BlockIndexEntry e;
    e.first_page = PageId{tr.u64()};
    e.offset = tr.u64();
    run->index_.push_back(e);
  }
  run->bloom_ = BloomFilter::deserialize(tr);

  if (verify) {
    std::uint32_t crc = 0;
    Bytes chunk;
    for (std::uint64_t off = 0; off < size - 4; off += kWriteChunk) {
      chunk.resize(static_cast<std::size_t>(std::min<std::uint64_t>(kWriteChunk, size - 4 - off)));
      channel.read(run->file_, off, chunk);
      crc = crc32(chunk, crc);
    }
    if (crc != stored_crc) throw CorruptionError("run " + name + " fails its checksum");
  }
  return run;
}

RunCursor IndexedRun::cursor(PageId first, PageId last, Lsn min_lsn) const {
  // Records of `first` may begin in the last block that starts below it.
  auto it = std::lower_bound(index_.begin(), index_.end(), first,
                             [](const BlockIndexEntry& e, PageId p) { return e.first_page < p; });
  std::uint64_t start = index_offset_;
  if (!index_.empty()) start = (it == index_.begin()) ? index_.front().offset : std::prev(it)->offset;
  // blocks starting past `last` hold nothing in range
  auto stop = std::upper_bound(it, index_.end(), last,
                               [](PageId p, const BlockIndexEntry& e) { return p < e.first_page; });
  const std::uint64_t end = stop == index_.end() ? index_offset_ : stop->offset;
  return RunCursor(shared_from_this(), start, end, first, last, min_lsn);
}

std::vector<LogRecord> IndexedRun::read_all() const {
  std::vector<LogRecord> out;
  out.reserve(meta_.record_count);
  auto c = cursor(PageId{0}, PageId{std::numeric_limits<std::uint64_t>::max()}, kNullLsn);
  while (auto rec = c.next()) out.push_back(*rec);
  return out;
}

RunCursor::RunCursor(std::shared_ptr<const IndexedRun> run, std::uint64_t start, std::uint64_t end,
                     PageId first, PageId last, Lsn min_lsn)
    : run_(std::move(run)), offset_(start), end_(end), first_(first), last_(last), min_lsn_(min_lsn) {}

bool RunCursor::refill() {
  const std::uint64_t end = end_;
  if (offset_ >= end) return false;
  buffer_.resize(static_cast<std::size_t>(std::min<std::uint64_t>(kReadChunk, end - offset_)));
  run_->channel_->read(run_->file_, offset_, buffer_);
  buffer_start_ = offset_;
  bytes_read_ += buffer_.size();
  return true;
}

std::optional<LogRecord> RunCursor::next() {
  while (!done_) {
    const std::uint64_t end = end_;
    if (offset_ >= end) {
      done_ = true;
      break;
    }
    auto view = [&] {
      if (offset_ < buffer_start_ || offset_ >= buffer_start_ + buffer_.size()) {
        return std::span<const std::byte>{};
      }
      return std::span<const std::byte>(buffer_).subspan(offset_ - buffer_start_);
    };
    auto avail = view();
    std::uint32_t len = LogRecord::peek_length(avail);
    if (len == 0 || len > avail.size()) {
      refill();
      avail = view();
      len = LogRecord::peek_length(avail);
    }
    LogRecord rec;
    try {
      if (len < LogRecord::kFixedSize || len > avail.size()) throw CorruptionError("bad record length");
      rec = LogRecord::decode(avail.first(len));
    } catch (const CorruptionError& e) {
      throw CorruptionError("corrupt block in run " + run_->path().filename().string() +
                            " at offset " + std::to_string(offset_) + ": " + e.what());
    }
    offset_ += len;
    if (rec.page_id > last_) {
      done_ = true;
      break;
    }
    if (rec.page_id < first_ || rec.lsn < min_lsn_) continue;
    return rec;
  }
  return std::nullopt;
}

}  // namespace segrest

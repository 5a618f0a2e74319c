#include "series.hpp"

#include <algorithm>

#include "segrest/common/codec.hpp"
#include "segrest/common/file.hpp"

namespace segrest::detail {

void build_series(MetricsReport& report, const std::vector<TxnRecord>& txns,
                  const std::vector<BoundarySample>& samples, std::uint64_t buckets) {
  report.throughput.assign(buckets, {});
  report.restore.assign(buckets, {});
  std::vector<double> latency_sum(buckets, 0);
  std::vector<std::uint64_t> batch_count(buckets, 0), batch_segments(buckets, 0);
  for (std::uint64_t b = 0; b < buckets; ++b) {
    report.throughput[b].t_sec = b;
    report.restore[b].t_sec = b;
  }
  for (const auto& t : txns) {
    report.samples.push_back({t.txn_id, std::chrono::duration<double, std::micro>(t.latency).count(),
                              t.post_failure});
    const auto b = static_cast<std::uint64_t>(t.commit / std::chrono::seconds(1));
    if (b >= buckets) continue;
    auto& row = report.throughput[b];
    const double us = report.samples.back().latency_us;
    ++row.txns;
    latency_sum[b] += us;
    row.max_latency_us = std::max(row.max_latency_us, us);
  }
  report.committed = txns.size();
  report.commit_s.reserve(txns.size());
  for (const auto& t : txns) report.commit_s.push_back(to_seconds(t.commit));
  std::sort(report.commit_s.begin(), report.commit_s.end());
  for (std::uint64_t b = 0; b < buckets; ++b) {
    auto& row = report.throughput[b];
    if (row.txns) row.mean_latency_us = latency_sum[b] / static_cast<double>(row.txns);
    if (b < samples.size()) {
      row.page_reads = samples[b].page_reads - (b ? samples[b - 1].page_reads : 0);
      report.restore[b].queue_depth = samples[b].queue_depth;
    }
  }
  for (const auto& e : report.restore_events) {
    report.bytes_restored += e.bytes;
    const auto b = static_cast<std::uint64_t>(e.completed_at / std::chrono::seconds(1));
    if (b >= buckets) continue;
    report.restore[b].bytes_restored += e.bytes;
    ++batch_count[b];
    batch_segments[b] += e.count;
  }
  for (std::uint64_t b = 0; b < buckets; ++b) {
    if (batch_count[b]) {
      report.restore[b].batch_size_mean =
          static_cast<double>(batch_segments[b]) / static_cast<double>(batch_count[b]);
    }
  }
}

std::uint32_t file_crc(const std::filesystem::path& path) {
  File f(path, File::Mode::ReadOnly);
  const std::uint64_t size = f.size();
  Bytes buf(1 << 20);
  std::uint32_t crc = 0;
  for (std::uint64_t off = 0; off < size; off += buf.size()) {
    const auto n = std::min<std::uint64_t>(buf.size(), size - off);
    std::span<std::byte> chunk(buf.data(), n);
    f.read_at(off, chunk);
    crc = crc32(chunk, crc);
  }
  return crc;
}

}  // namespace segrest::detail

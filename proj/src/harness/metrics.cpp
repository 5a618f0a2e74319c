#include "segrest/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "segrest/common/errors.hpp"

namespace segrest {

double mean_throughput(const MetricsReport& report, std::uint64_t from, std::uint64_t to) {
  to = std::min<std::uint64_t>(to, report.throughput.size());
  if (from >= to) return 0;
  double sum = 0;
  for (std::uint64_t t = from; t < to; ++t) sum += static_cast<double>(report.throughput[t].txns);
  return sum / static_cast<double>(to - from);
}

double median_throughput(const MetricsReport& report, std::uint64_t from, std::uint64_t to) {
  to = std::min<std::uint64_t>(to, report.throughput.size());
  if (from >= to) return 0;
  std::vector<double> v;
  for (std::uint64_t t = from; t < to; ++t) v.push_back(static_cast<double>(report.throughput[t].txns));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

double latency_quantile(const MetricsReport& report, bool post_failure, double q) {
  std::vector<double> v;
  for (const auto& s : report.samples) {
    if (s.post_failure == post_failure) v.push_back(s.latency_us);
  }
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  return out;
}

void check(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) throw CorruptionError("bad row in " + path.string() + ": " + line);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

RecoveryShape recovery_shape(const MetricsReport& report, double window_s, double fraction) {
  RecoveryShape shape;
  if (!report.failure_s || window_s <= 0) return shape;
  const double fail = *report.failure_s;
  const auto& c = report.commit_s;
  auto count = [&](double from, double to) {
    return static_cast<double>(std::lower_bound(c.begin(), c.end(), to) -
                               std::lower_bound(c.begin(), c.end(), from));
  };
  if (fail > 1) shape.pre_failure_tps = count(1, fail) / (fail - 1);
  if (shape.pre_failure_tps <= 0) return shape;
  const double end = static_cast<double>(report.throughput.size());
  double worst = shape.pre_failure_tps;
  for (double t = fail; t + window_s <= end; t += window_s) {
    const double tps = count(t, t + window_s) / window_s;
    worst = std::min(worst, tps);
    if (!shape.regain_s && tps >= fraction * shape.pre_failure_tps) shape.regain_s = t + window_s - fail;
  }
  shape.dip = 1 - worst / shape.pre_failure_tps;
  return shape;
}

void emit_csv(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    const auto path = dir / "throughput.csv";
    auto out = open_out(path);
    out << "t_sec,txns,mean_latency_us,max_latency_us,page_reads\n";
    for (const auto& r : report.throughput) {
      out << r.t_sec << ',' << r.txns << ',' << r.mean_latency_us << ',' << r.max_latency_us << ','
          << r.page_reads << '\n';
    }
    check(out, path);
  }
  {
    const auto path = dir / "restore.csv";
    auto out = open_out(path);
    out << "t_sec,bytes_restored,batch_size_mean,queue_depth\n";
    for (const auto& r : report.restore) {
      out << r.t_sec << ',' << r.bytes_restored << ',' << r.batch_size_mean << ',' << r.queue_depth
          << '\n';
    }
    check(out, path);
  }
  {
    const auto path = dir / "latency_samples.csv";
    auto out = open_out(path);
    out << "txn_id,latency_us,post_failure\n";
    for (const auto& s : report.samples) {
      out << s.txn_id << ',' << s.latency_us << ',' << (s.post_failure ? 1 : 0) << '\n';
    }
    check(out, path);
  }
}

std::vector<ThroughputRow> read_throughput_csv(const std::filesystem::path& path) {
  std::vector<ThroughputRow> rows;
  for (const auto& c : read_rows(path, 5)) {
    rows.push_back({std::stoull(c[0]), std::stoull(c[1]), std::stod(c[2]), std::stod(c[3]),
                    std::stoull(c[4])});
  }
  return rows;
}

std::vector<RestoreRow> read_restore_csv(const std::filesystem::path& path) {
  std::vector<RestoreRow> rows;
  for (const auto& c : read_rows(path, 4)) {
    rows.push_back({std::stoull(c[0]), std::stoull(c[1]), std::stod(c[2]), std::stoull(c[3])});
  }
  return rows;
}

std::vector<LatencySample> read_latency_csv(const std::filesystem::path& path) {
  std::vector<LatencySample> rows;
  for (const auto& c : read_rows(path, 3)) {
    rows.push_back({std::stoull(c[0]), std::stod(c[1]), c[2] == "1"});
  }
  return rows;
}

}  // namespace segrest

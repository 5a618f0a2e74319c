#include "segrest/harness/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "segrest/storage/page.hpp"

namespace segrest {

void WorkloadConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid workload config: ") + what);
  };
  require(pages > 0, "pages must be positive");
  require(page_size >= 512, "page size must be at least 512");
  require(segment_pages > 0, "segment pages must be positive");
  require(threads > 0, "threads must be positive");
  require(pool_pages > threads, "pool needs more frames than worker threads");
  require(skew >= 0, "skew must be non-negative");
  require(duration_s > 0, "duration must be positive");
  require(!inject_failure || txns_per_worker > 0 || fail_at_s < duration_s,
          "failure time must precede the end of the run");
  require(fail_at_s >= 0, "failure time must be non-negative");
  require(run_limit > 0, "run limit must be positive");
  require(batch_cap > 0, "batch cap must be positive");
  require(min_ops > 0 && min_ops <= max_ops, "ops per transaction must be 1 <= min <= max");
  require(keys_per_page >= threads, "every worker needs a key on each page");
  require(keys_per_page <= Page::capacity(page_size), "keys per page exceed page capacity");
  require(demand_half_life_s >= 0, "demand half-life must be non-negative");
  require(demand_half_life_s == 0 || txns_per_worker == 0, "demand decay needs a time-bound run");
  require(delete_ratio >= 0 && delete_ratio <= 1, "delete ratio must be in [0, 1]");
}

ZipfGenerator::ZipfGenerator(std::uint64_t n, double theta, std::uint64_t seed)
    : cdf_(n), perm_(n) {
  if (n == 0) throw std::invalid_argument("zipf over zero pages");
  double sum = 0;
  for (std::uint64_t r = 0; r < n; ++r) {
    sum += 1.0 / std::pow(static_cast<double>(r + 1), theta);
    cdf_[r] = sum;
  }
  for (auto& c : cdf_) c /= sum;
  cdf_.back() = 1.0;
  std::iota(perm_.begin(), perm_.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  std::shuffle(perm_.begin(), perm_.end(), rng);
}

std::uint64_t ZipfGenerator::rank(double u) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::uint64_t>(it - cdf_.begin());
}

double ZipfGenerator::probability(std::uint64_t r) const {
  return r == 0 ? cdf_[0] : cdf_[r] - cdf_[r - 1];
}

std::chrono::nanoseconds think_time(const WorkloadConfig& config, std::chrono::nanoseconds txn_time,
                                    std::optional<std::chrono::nanoseconds> failure_at,
                                    std::chrono::nanoseconds now) {
  if (config.demand_half_life_s <= 0 || !failure_at || now <= *failure_at) return {};
  const double since = std::chrono::duration<double>(now - *failure_at).count();
  // rate 1/(txn_time * 2^x); capped so the product stays finite
  const double factor = std::exp2(std::min(since / config.demand_half_life_s, 30.0)) - 1;
  return std::chrono::nanoseconds(static_cast<std::int64_t>(static_cast<double>(txn_time.count()) * factor));
}

PageId generate_access(std::mt19937_64& rng, const ZipfGenerator& zipf) { return zipf(rng); }

TxnGenerator::TxnGenerator(const WorkloadConfig& config, const ZipfGenerator& zipf, unsigned worker)
    : config_(config), zipf_(zipf), worker_(worker),
      rng_(config.seed * 0x9e3779b97f4a7c15ULL + worker + 1) {}

std::vector<TxnOp> TxnGenerator::next() {
  const unsigned n = std::uniform_int_distribution<unsigned>(config_.min_ops, config_.max_ops)(rng_);
  const std::uint32_t owned = (config_.keys_per_page - worker_ + config_.threads - 1) / config_.threads;
  std::vector<TxnOp> ops;
  ops.reserve(n);
  for (unsigned i = 0; i < n; ++i) {
    TxnOp op;
    op.page = zipf_(rng_);
    const std::uint32_t key =
        worker_ + config_.threads * std::uniform_int_distribution<std::uint32_t>(0, owned - 1)(rng_);
    if (std::uniform_real_distribution<double>(0, 1)(rng_) < config_.delete_ratio) {
      op.payload = Payload::erase(key);
    } else {
      Value v;
      std::uint64_t a = rng_(), b = rng_();
      for (int j = 0; j < 8; ++j) {
        v[j] = static_cast<std::byte>(a >> (8 * j));
        v[8 + j] = static_cast<std::byte>(b >> (8 * j));
      }
      op.payload = Payload::set(key, v);
    }
    ops.push_back(op);
  }
  return ops;
}

}  // namespace segrest

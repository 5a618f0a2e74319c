// bench: instant-restore benchmark driver.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "segrest/harness/benchmark.hpp"

using namespace segrest;

namespace {

struct Flags {
  WorkloadConfig cfg;
  std::string policy = "preemptive";
  std::string clock = "virtual";
  std::string out = "bench_out";
};

void add_workload_flags(CLI::App& app, Flags& f) {
  auto& c = f.cfg;
  app.add_option("--pages", c.pages, "pages in the volume")->capture_default_str();
  app.add_option("--page-size", c.page_size, "page size in bytes")->capture_default_str();
  app.add_option("--segment-pages", c.segment_pages, "pages per restore segment")->capture_default_str();
  app.add_option("--pool-pages", c.pool_pages, "buffer pool frames")->capture_default_str();
  app.add_option("--threads", c.threads, "worker threads")->capture_default_str();
  app.add_option("--skew", c.skew, "zipf theta; 0 is uniform")->capture_default_str();
  app.add_option("--duration", c.duration_s, "run length in seconds")->capture_default_str();
  app.add_option("--fail-at", c.fail_at_s, "failure time in seconds")->capture_default_str();
  app.add_option("--policy", f.policy, "restore policy")
      ->check(CLI::IsMember({"ondemand", "preemptive", "singlepass"}))
      ->capture_default_str();
  app.add_option("--run-limit", c.run_limit, "log records per archive run")->capture_default_str();
  app.add_option("--seed", c.seed, "rng seed")->capture_default_str();
  app.add_option("--out", f.out, "output directory for CSV files")->capture_default_str();
  app.add_option("--clock", f.clock, "virtual (simulated) or wall")
      ->check(CLI::IsMember({"virtual", "wall"}))
      ->capture_default_str();
  app.add_option("--batch-cap", c.batch_cap, "max segments per preemptive batch")->capture_default_str();
  app.add_option("--fan-in", c.merge_fan_in, "archive merge fan-in, 0 disables merging")
      ->capture_default_str();
  app.add_option("--txns", c.txns_per_worker, "fixed transactions per worker (0: time bound)")
      ->capture_default_str();
  app.add_option("--demand-half-life", c.demand_half_life_s,
                 "after the failure, halve each worker's transaction rate every this many seconds")
      ->capture_default_str();
  app.add_option("--workdir", c.workdir, "keep data files here instead of a temp dir");
}

void finalize(Flags& f) {
  f.cfg.policy = parse_restore_policy(f.policy);
  f.cfg.clock = f.clock == "wall" ? ClockMode::Wall : ClockMode::Virtual;
  if (!f.cfg.workdir.empty()) f.cfg.keep_files = true;
}

void print_summary(const MetricsReport& r) {
  std::printf("committed %llu txns, pre-failure median %.0f tps\n",
              static_cast<unsigned long long>(r.committed),
              median_throughput(r, 0, r.failure_s ? static_cast<std::uint64_t>(*r.failure_s)
                                                  : r.throughput.size()));
  if (r.failure_s) {
    std::printf("failure at %.3f s, restore %.3f .. %.3f s, %llu bytes restored\n", *r.failure_s,
                r.restore_start_s.value_or(0), r.restore_end_s.value_or(0),
                static_cast<unsigned long long>(r.bytes_restored));
    std::printf("latency p50/p99/max post-failure: %.0f / %.0f / %.0f us\n",
                latency_quantile(r, true, 0.5), latency_quantile(r, true, 0.99),
                latency_quantile(r, true, 1.0));
  }
  std::printf("oracle %s\n", r.oracle_checked ? (r.violations.empty() ? "ok" : "MISMATCH") : "skipped");
  for (const auto& v : r.violations) std::printf("violation: %s\n", v.c_str());
  if (!r.valid) std::printf("invalid run: %s\n", r.error.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"instant restore benchmark"};
  app.require_subcommand(1);

  Flags run_flags, overhead_flags, verify_flags;
  overhead_flags.cfg.inject_failure = false;
  verify_flags.cfg.pages = 64;
  verify_flags.cfg.pool_pages = 16;
  verify_flags.cfg.segment_pages = 8;
  verify_flags.cfg.threads = 1;

  auto* run = app.add_subcommand("run", "workload with a mid-run media failure");
  add_workload_flags(*run, run_flags);
  auto* overhead = app.add_subcommand("overhead", "sorted+indexed vs plain-copy archiving");
  add_workload_flags(*overhead, overhead_flags);
  auto* verify = app.add_subcommand("verify", "compare a failure run against a failure-free shadow");
  add_workload_flags(*verify, verify_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      finalize(run_flags);
      const MetricsReport r = run_benchmark(run_flags.cfg);
      if (r.valid) emit_csv(r, run_flags.out);
      print_summary(r);
      return r.ok() ? 0 : 1;
    }
    if (*overhead) {
      finalize(overhead_flags);
      const OverheadResult r = measure_archiving_overhead(overhead_flags.cfg);
      std::printf("sorted+indexed %.1f tps, plain copy %.1f tps, overhead %.2f%%\n",
                  r.sorted_indexed_tps, r.plain_copy_tps, 100 * r.overhead);
      std::printf("identical log: %s\n", r.identical_wal ? "yes" : "no");
      if (r.sorted.valid) emit_csv(r.sorted, std::filesystem::path(overhead_flags.out) / "sorted");
      if (r.copy.valid) emit_csv(r.copy, std::filesystem::path(overhead_flags.out) / "copy");
      return r.sorted.ok() && r.copy.ok() ? 0 : 1;
    }
    if (*verify) {
      finalize(verify_flags);
      const VerifyResult v = verify_shadow(verify_flags.cfg);
      for (const auto& p : v.problems) std::printf("problem: %s\n", p.c_str());
      std::printf("shadow equivalence: %s\n", v.ok ? "ok" : "FAILED");
      return v.ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bench: %s\n", e.what());
    return 2;
  }
  return 0;
}

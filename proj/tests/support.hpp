#pragma once

#include <stdlib.h>

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "segrest/common/clock.hpp"
#include "segrest/storage/page.hpp"
#include "segrest/wal/log_record.hpp"

namespace segrest::test {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::string t = (std::filesystem::temp_directory_path() / "segrest-test-XXXXXX").string();
    if (!mkdtemp(t.data())) throw std::runtime_error("mkdtemp");
    path = t;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::shared_ptr<VirtualClock> vclock() { return std::make_shared<VirtualClock>(); }

inline Value value_of(std::uint64_t x) {
  Value v{};
  for (int i = 0; i < 8; ++i) {
    v[i] = static_cast<std::byte>(x >> (8 * i));
    v[8 + i] = static_cast<std::byte>(~x >> (8 * i));
  }
  return v;
}

inline Payload random_payload(std::mt19937_64& rng, std::uint32_t keys = 32) {
  const std::uint32_t key = static_cast<std::uint32_t>(rng() % keys);
  if (rng() % 5 == 0) return Payload::erase(key);
  return Payload::set(key, value_of(rng()));
}

// Brute-force page model: a fold of the updates in log order.
inline void fold(Page& page, const LogRecord& r) {
  if (r.payload.op == LogOp::Set) {
    page.set(r.payload.key, r.payload.value, 1u << 20);
  } else {
    page.erase(r.payload.key);
  }
  page.set_lsn(r.lsn);
}

}  // namespace segrest::test

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace segrest {

// Thin ordinal wrappers so page ids, segment ids and LSNs cannot be mixed up
// at call sites. All three are plain 64-bit values on the wire.
template <typename Tag>
struct Ordinal {
  std::uint64_t value = 0;

  constexpr Ordinal() = default;
  constexpr explicit Ordinal(std::uint64_t v) : value(v) {}

  constexpr auto operator<=>(const Ordinal&) const = default;

  friend std::ostream& operator<<(std::ostream& os, Ordinal o) { return os << o.value; }
};

struct PageIdTag {};
struct SegmentIdTag {};
struct LsnTag {};

using PageId = Ordinal<PageIdTag>;
using SegmentId = Ordinal<SegmentIdTag>;

// Log sequence number: byte offset of a record in the log file. Zero is the
// null LSN and never names a record.
using Lsn = Ordinal<LsnTag>;

inline constexpr Lsn kNullLsn{0};

using TxnId = std::uint64_t;

inline constexpr std::uint32_t kDefaultPageSize = 8192;

}  // namespace segrest

template <typename Tag>
struct std::hash<segrest::Ordinal<Tag>> {
  std::size_t operator()(segrest::Ordinal<Tag> o) const noexcept {
    return std::hash<std::uint64_t>{}(o.value);
  }
};

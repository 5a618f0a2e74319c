#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace segrest {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A read or write reached (or would have reached) a failed device.
class MediaFailure : public Error {
 public:
  using Error::Error;
};

// Checksum or structural validation failed on persistent data.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LogFullError : public Error {
 public:
  using Error::Error;
};

// A per-page log chain could not be followed to its end.
class BrokenChainError : public Error {
 public:
  using Error::Error;
};

class RestoreError : public Error {
 public:
  using Error::Error;
};

class PoolExhausted : public Error {
 public:
  using Error::Error;
};

// Thrown by crash-point hooks in tests to abandon an operation midway.
class InjectedCrash : public Error {
 public:
  using Error::Error;
};

}  // namespace segrest

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

namespace segrest {

// Owning POSIX file descriptor with positional I/O. Errors throw IoError.
class File {
 public:
  enum class Mode { ReadOnly, ReadWrite, Create, Truncate };

  File() = default;
  File(const std::filesystem::path& path, Mode mode);
  ~File();

  File(File&& other) noexcept;
  File& operator=(File&& other) noexcept;
  File(const File&) = delete;
  File& operator=(const File&) = delete;

  void read_at(std::uint64_t offset, std::span<std::byte> out) const;
  void write_at(std::uint64_t offset, std::span<const std::byte> in);
  void sync();
  void resize(std::uint64_t size);
  std::uint64_t size() const;

  bool is_open() const { return fd_ >= 0; }
  const std::filesystem::path& path() const { return path_; }

 private:
  int fd_ = -1;
  std::filesystem::path path_;
};

// Rename `from` over `to` and sync the containing directory.
void publish_file(const std::filesystem::path& from, const std::filesystem::path& to);

}  // namespace segrest

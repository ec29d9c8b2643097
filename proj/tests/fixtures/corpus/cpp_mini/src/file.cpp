#include "io/file.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <vector>

namespace io {

int g_open_files = 0;
static const char* const kModeNames[] = {"read", "write", "append"};
std::vector<int> g_fd_history, g_fd_errors;

File::~File() {
  if (fd_ >= 0) {
    ::close(fd_);
    --g_open_files;
  }
}

bool File::open(const std::string& path, OpenMode mode) {
  int flags = O_RDONLY;
  if (mode == OpenMode::Write) flags = O_WRONLY | O_CREAT | O_TRUNC;
  if (mode == OpenMode::Append) flags = O_WRONLY | O_CREAT | O_APPEND;
  fd_ = ::open(path.c_str(), flags, 0644);
  IO_CHECK(fd_ >= 0);
  ++g_open_files;
  g_fd_history.push_back(fd_);
  return true;
}

std::size_t File::read(char* out, std::size_t n) {
  if (fd_ < 0) return 0;
  ssize_t got = ::read(fd_, out, clamp_size<std::size_t>(n, 1 << 20));
  if (got < 0) {
    g_fd_errors.push_back(fd_);
    return 0;
  }
  size_ += static_cast<std::size_t>(got);
  return static_cast<std::size_t>(got);
}

File::Stat File::stat() const {
  return Stat{size_, fd_ >= 0 ? 1 : 0};
}

const char* mode_name(OpenMode mode) {
  return kModeNames[static_cast<int>(mode)];
}

}  // namespace io

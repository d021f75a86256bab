#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include <fmt/format.h>

#include "wmadv/error.hpp"
#include "wmadv/oracle.hpp"

extern char** environ;

namespace wmadv {
namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

class SubprocessTransport final : public Transport {
 public:
  SubprocessTransport(std::string command, int timeout_ms) : command_(std::move(command)), timeout_ms_(timeout_ms) {
    ignore_sigpipe_once();
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw OracleError(fmt::format("pipe: {}", std::strerror(errno)));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw OracleError(fmt::format("pipe: {}", std::strerror(errno)));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw OracleError(fmt::format("cannot spawn oracle '{}': {}", command_, std::strerror(rc)));
    }
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  ~SubprocessTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      // Closing stdin asks a well-behaved server to exit; give it a moment.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) return;
        ::usleep(10000);
      }
      ::kill(pid_, SIGTERM);
      ::waitpid(pid_, &status, 0);
    }
  }

  std::string round_trip(const std::string& request) override {
    std::lock_guard lock(mutex_);
    if (dead_) throw OracleError(fmt::format("oracle process '{}' is no longer running", command_));
    std::string line = request;
    line += '\n';
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::write(write_fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        dead_ = true;
        throw OracleError(fmt::format("writing to oracle '{}': {}", command_, std::strerror(errno)));
      }
      written += static_cast<std::size_t>(n);
    }
    return read_line();
  }

 private:
  std::string read_line() {
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, timeout_ms_);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw OracleError(fmt::format("poll on oracle '{}': {}", command_, std::strerror(errno)));
      }
      if (ready == 0) {
        throw OracleError(fmt::format("oracle '{}' did not answer within {} ms", command_, timeout_ms_));
      }
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        dead_ = true;
        throw OracleError(fmt::format("reading from oracle '{}': {}", command_, std::strerror(errno)));
      }
      if (n == 0) {
        dead_ = true;
        throw OracleError(fmt::format("oracle '{}' closed its output", command_));
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  int timeout_ms_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  bool dead_ = false;
  std::string buffer_;
  std::mutex mutex_;
};

}  // namespace

std::unique_ptr<Transport> make_subprocess_transport(const std::string& command, int timeout_ms) {
  return std::make_unique<SubprocessTransport>(command, timeout_ms);
}

}  // namespace wmadv

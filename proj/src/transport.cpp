// Copyright 2026 The Clusterscope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "clusterscope/transport.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "clusterscope/error.hpp"
#include "clusterscope/sim_cluster.hpp"

extern char** environ;

namespace clusterscope {

namespace {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct Pipe {
  Fd read, write;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0)
    throw Error(Errc::TransportError, std::string("pipe: ") + std::strerror(errno));
  return {Fd(fds[0]), Fd(fds[1])};
}

/// mkdtemp directory holding one key file; removed on destruction.
class TempKeyFile {
 public:
  explicit TempKeyFile(const std::string& contents) {
    std::string tmpl = (std::filesystem::temp_directory_path() / "clusterscope-XXXXXX").string();
    if (!::mkdtemp(tmpl.data()))
      throw Error(Errc::TransportError, "cannot create private key directory");
    dir_ = tmpl;
    path_ = dir_ / "id";
    int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0600);
    if (fd < 0) throw Error(Errc::TransportError, "cannot create private key file");
    Fd guard(fd);
    std::size_t off = 0;
    while (off < contents.size()) {
      auto n = ::write(fd, contents.data() + off, contents.size() - off);
      if (n <= 0) throw Error(Errc::TransportError, "cannot write private key file");
      off += static_cast<std::size_t>(n);
    }
  }
  ~TempKeyFile() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path dir_;
  std::filesystem::path path_;
};

}  // namespace

std::string shell_quote(std::string_view word) {
  if (!word.empty() &&
      word.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
                             "_@%+=:,./-") == std::string_view::npos)
    return std::string(word);
  std::string out = "'";
  for (char c : word) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += '\'';
  return out;
}

std::string shell_join(const CommandLine& argv) {
  std::string out;
  for (const auto& token : argv) {
    if (!out.empty()) out += ' ';
    out += shell_quote(token);
  }
  return out;
}

ExecResult ExecTransport::run(const CommandLine& argv, Seconds timeout) {
  if (argv.empty()) throw Error(Errc::TransportError, "empty command line");
  const auto started = std::chrono::steady_clock::now();

  Pipe out = make_pipe();
  Pipe err = make_pipe();
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, out.write.get(), STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err.write.get(), STDERR_FILENO);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw Error(Errc::TransportError, "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }
  out.write.reset();
  err.write.reset();

  ExecResult result;
  std::array<pollfd, 2> fds{{{out.read.get(), POLLIN, 0}, {err.read.get(), POLLIN, 0}}};
  std::array<std::string*, 2> sinks{&result.stdout_text, &result.stderr_text};
  int open_streams = 2;
  bool timed_out = false;
  const auto deadline = started + timeout;
  char buf[4096];
  while (open_streams > 0) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      timed_out = true;
      break;
    }
    int n = ::poll(fds.data(), fds.size(), static_cast<int>(remaining.count()));
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) break;
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      auto got = ::read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        sinks[i]->append(buf, static_cast<std::size_t>(got));
      } else {
        fds[i].fd = -1;
        --open_streams;
      }
    }
  }

  int status = 0;
  if (timed_out) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    throw Error(Errc::Timeout, "'" + argv[0] + "' exceeded " + std::to_string(timeout.count()) +
                                   "s");
  }
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return result;
}

ExecResult SimTransport::run(const CommandLine& argv, Seconds timeout) {
  if (argv.empty()) throw Error(Errc::TransportError, "empty command line");
  ExecResult result = sim_.handle_command(argv, user_);
  if (result.elapsed > timeout) {
    throw Error(Errc::Timeout, "'" + argv[0] + "' exceeded " + std::to_string(timeout.count()) +
                                   "s");
  }
  return result;
}

SshTransport::~SshTransport() {
  // Best effort scrub of the in-memory copy.
  std::fill(private_key_.begin(), private_key_.end(), '\0');
}

CommandLine SshTransport::ssh_argv(const CommandLine& remote, const std::string& identity,
                                   Seconds timeout) const {
  CommandLine argv{"ssh",
                   "-i",
                   identity,
                   "-p",
                   std::to_string(target_.port),
                   "-o",
                   "BatchMode=yes",
                   "-o",
                   "IdentitiesOnly=yes",
                   "-o",
                   "StrictHostKeyChecking=yes",
                   "-o",
                   "ConnectTimeout=" + std::to_string(std::max<long long>(1, timeout.count()))};
  if (!target_.known_hosts.empty()) {
    argv.insert(argv.end(), {"-o", "UserKnownHostsFile=" + target_.known_hosts.string()});
  }
  argv.push_back(target_.user + "@" + target_.host);
  argv.push_back("--");
  argv.push_back(shell_join(remote));
  return argv;
}

ExecResult SshTransport::run(const CommandLine& argv, Seconds timeout) {
  if (argv.empty()) throw Error(Errc::TransportError, "empty command line");
  TempKeyFile key(private_key_);
  ExecTransport local;
  ExecResult result = local.run(ssh_argv(argv, key.path().string(), timeout), timeout);
  // ssh reserves 255 for its own failures.
  if (result.exit_code == 255) {
    const auto& err = result.stderr_text;
    if (err.find("Permission denied") != std::string::npos ||
        err.find("Host key verification failed") != std::string::npos)
      throw Error(Errc::AuthFailure, "ssh authentication to " + target_.host + " failed");
    throw Error(Errc::ConnectFailure, "ssh connection to " + target_.host + ":" +
                                          std::to_string(target_.port) + " failed");
  }
  return result;
}

}  // namespace clusterscope

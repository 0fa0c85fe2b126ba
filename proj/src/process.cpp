// Copyright 2026 The automan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "automan/process.hpp"

#include <array>
#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "automan/error.hpp"

extern char** environ;

namespace automan {

namespace {

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_.data(), O_CLOEXEC) != 0) {
      throw Error(fmt::format("pipe: {}", std::strerror(errno)));
    }
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;

  int read_end() const { return fds_[0]; }
  int write_end() const { return fds_[1]; }
  void close_read() {
    if (fds_[0] >= 0) ::close(fds_[0]);
    fds_[0] = -1;
  }
  void close_write() {
    if (fds_[1] >= 0) ::close(fds_[1]);
    fds_[1] = -1;
  }

 private:
  std::array<int, 2> fds_{-1, -1};
};

class FileActions {
 public:
  FileActions() { ::posix_spawn_file_actions_init(&actions_); }
  ~FileActions() { ::posix_spawn_file_actions_destroy(&actions_); }
  FileActions(const FileActions&) = delete;
  FileActions& operator=(const FileActions&) = delete;

  posix_spawn_file_actions_t* get() { return &actions_; }

  void open(int fd, const std::filesystem::path& path, int flags) {
    check(::posix_spawn_file_actions_addopen(&actions_, fd, path.c_str(), flags, 0644));
  }
  void dup2(int from, int to) { check(::posix_spawn_file_actions_adddup2(&actions_, from, to)); }

 private:
  static void check(int rc) {
    if (rc != 0) throw Error(fmt::format("posix_spawn setup: {}", std::strerror(rc)));
  }
  posix_spawn_file_actions_t actions_;
};

std::vector<std::string> build_environment(const std::map<std::string, std::string>& extra) {
  std::vector<std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    std::string key(entry.substr(0, eq));
    if (!extra.contains(key)) env.emplace_back(entry);
  }
  for (const auto& [k, v] : extra) env.push_back(k + "=" + v);
  return env;
}

void drain(int out_fd, std::string* out, int err_fd, std::string* err) {
  std::array<pollfd, 2> fds{};
  std::array<std::string*, 2> sinks{out, err};
  int n = 0;
  if (out_fd >= 0) fds[n++] = {out_fd, POLLIN, 0};
  if (err_fd >= 0) fds[n++] = {err_fd, POLLIN, 0};
  if (out_fd < 0) sinks[0] = err;
  char buf[8192];
  int open_count = n;
  while (open_count > 0) {
    if (::poll(fds.data(), static_cast<nfds_t>(n), -1) < 0) {
      if (errno == EINTR) continue;
      throw Error(fmt::format("poll: {}", std::strerror(errno)));
    }
    for (int i = 0; i < n; ++i) {
      if (fds[i].fd < 0 || fds[i].revents == 0) continue;
      ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        sinks[i]->append(buf, static_cast<std::size_t>(got));
      } else if (got == 0 || errno != EINTR) {
        fds[i].fd = -1;
        --open_count;
      }
    }
  }
}

}  // namespace

ProcessResult run_process(const ProcessSpec& spec) {
  if (spec.argv.empty()) throw Error("run_process: empty argv");

  FileActions actions;
  std::optional<Pipe> out_pipe;
  std::optional<Pipe> err_pipe;

  actions.open(STDIN_FILENO, spec.stdin_path ? *spec.stdin_path : "/dev/null", O_RDONLY);
  if (spec.capture_stdout) {
    out_pipe.emplace();
    actions.dup2(out_pipe->write_end(), STDOUT_FILENO);
  } else if (spec.stdout_path) {
    actions.open(STDOUT_FILENO, *spec.stdout_path, O_WRONLY | O_CREAT | O_TRUNC);
  }
  if (spec.capture_stderr) {
    err_pipe.emplace();
    actions.dup2(err_pipe->write_end(), STDERR_FILENO);
  } else if (spec.stderr_path) {
    actions.open(STDERR_FILENO, *spec.stderr_path, O_WRONLY | O_CREAT | O_TRUNC);
  }

  std::vector<char*> argv;
  for (const auto& a : spec.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  std::vector<std::string> env_storage = build_environment(spec.env);
  std::vector<char*> envp;
  for (auto& e : env_storage) envp.push_back(e.data());
  envp.push_back(nullptr);

  pid_t pid = 0;
  int rc = ::posix_spawnp(&pid, argv[0], actions.get(), nullptr, argv.data(), envp.data());
  if (out_pipe) out_pipe->close_write();
  if (err_pipe) err_pipe->close_write();
  if (rc != 0) {
    throw Error(fmt::format("cannot start '{}': {}", spec.argv[0], std::strerror(rc)));
  }

  ProcessResult result;
  if (out_pipe || err_pipe) {
    drain(out_pipe ? out_pipe->read_end() : -1, &result.out,
          err_pipe ? err_pipe->read_end() : -1, &result.err);
  }

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error(fmt::format("waitpid: {}", std::strerror(errno)));
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.signaled = true;
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace automan

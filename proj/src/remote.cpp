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

#include "automan/remote.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <fmt/format.h>

#include "automan/error.hpp"
#include "automan/util.hpp"

namespace automan {

namespace fs = std::filesystem;

std::string ssh_program() {
  const char* env = std::getenv("AUTOMAN_SSH");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("ssh");
}

RemoteShell::RemoteShell(WorkerConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.host.empty()) throw InvalidArgument(fmt::format("worker '{}' has no host", cfg_.name));
}

std::string RemoteShell::destination() const {
  return cfg_.user.empty() ? cfg_.host : cfg_.user + "@" + cfg_.host;
}

std::vector<std::string> RemoteShell::argv(const std::string& remote_command) const {
  return {ssh_program(), "-o", "BatchMode=yes", destination(), remote_command};
}

std::string RemoteShell::command_line(const std::string& remote_command) const {
  return shell_join(argv(remote_command));
}

ProcessResult RemoteShell::run(const std::string& remote_command,
                               const std::optional<fs::path>& stdin_path) const {
  ProcessSpec spec;
  spec.argv = argv(remote_command);
  spec.stdin_path = stdin_path;
  spec.capture_stdout = true;
  spec.capture_stderr = true;
  return run_process(spec);
}

namespace {

// A file in the temporary directory, removed on destruction.
class TempFile {
 public:
  TempFile() {
    std::string templ = (fs::temp_directory_path() / "automan-XXXXXX").string();
    int fd = ::mkstemp(templ.data());
    if (fd < 0) throw Error("cannot create a temporary file");
    ::close(fd);
    path_ = templ;
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct FileStamp {
  std::uintmax_t size = 0;
  long long mtime = 0;
};

bool is_excluded(const fs::path& rel, const std::vector<fs::path>& excludes) {
  for (const auto& ex : excludes) {
    const fs::path norm = ex.lexically_normal();
    auto r = rel.begin();
    auto e = norm.begin();
    for (; r != rel.end() && e != norm.end() && *r == *e; ++r, ++e) {
    }
    if (e == norm.end() || (e != norm.end() && e->empty())) return true;
  }
  return false;
}

std::map<std::string, FileStamp> local_manifest(const fs::path& root,
                                                const std::vector<fs::path>& excludes) {
  std::map<std::string, FileStamp> out;
  auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied);
  for (; it != fs::recursive_directory_iterator(); ++it) {
    const fs::path rel = it->path().lexically_relative(root);
    if (is_excluded(rel, excludes)) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file() || it->is_symlink()) continue;
    struct stat st {};
    if (::stat(it->path().c_str(), &st) != 0) continue;
    out[rel.generic_string()] = {static_cast<std::uintmax_t>(st.st_size),
                                 static_cast<long long>(st.st_mtime)};
  }
  return out;
}

std::map<std::string, FileStamp> remote_manifest(const RemoteShell& shell,
                                                 const std::string& remote_root) {
  auto res = shell.run(fmt::format("if cd {} 2>/dev/null; then find . -type f -printf '%P\\t%s\\t%T@\\n'; fi",
                                   shell_quote(remote_root)));
  if (!res.ok()) {
    throw RemoteError(fmt::format("listing {}:{} failed ({}): {}", shell.destination(), remote_root,
                                  res.exit_code, res.err));
  }
  std::map<std::string, FileStamp> out;
  std::istringstream in(res.out);
  std::string line;
  while (std::getline(in, line)) {
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) continue;
    FileStamp stamp;
    stamp.size = std::strtoull(line.c_str() + t1 + 1, nullptr, 10);
    stamp.mtime = static_cast<long long>(std::floor(std::strtod(line.c_str() + t2 + 1, nullptr)));
    out[line.substr(0, t1)] = stamp;
  }
  return out;
}

ProcessResult run_pipeline(const std::string& pipeline) {
  ProcessSpec spec;
  spec.argv = {"/bin/sh", "-c", pipeline};
  spec.capture_stdout = true;
  spec.capture_stderr = true;
  return run_process(spec);
}

}  // namespace

std::size_t push_sources(const RemoteShell& shell, const fs::path& local_root,
                         const std::string& remote_root, const std::vector<fs::path>& excludes) {
  const auto local = local_manifest(local_root, excludes);
  const auto remote = remote_manifest(shell, remote_root);
  std::string list;
  std::size_t count = 0;
  for (const auto& [path, stamp] : local) {
    auto it = remote.find(path);
    if (it != remote.end() && it->second.size == stamp.size && it->second.mtime == stamp.mtime) {
      continue;
    }
    list += path + "\n";
    ++count;
  }
  if (count == 0) return 0;

  TempFile list_file;
  write_file_atomic(list_file.path(), list);
  const std::string receiver =
      fmt::format("mkdir -p {0} && tar -C {0} -xf -", shell_quote(remote_root));
  const std::string pipeline =
      fmt::format("tar -C {} -cf - -T {} | {}", shell_quote(local_root.string()),
                  shell_quote(list_file.path().string()), shell.command_line(receiver));
  auto res = run_pipeline(pipeline);
  if (!res.ok()) {
    throw RemoteError(fmt::format("pushing sources to {} failed: {}\n{}", shell.destination(),
                                  pipeline, res.err));
  }
  return count;
}

void pull_directory(const RemoteShell& shell, const std::string& remote_dir,
                    const fs::path& local_dir) {
  fs::create_directories(local_dir);
  const std::string pipeline =
      fmt::format("{} | tar -C {} -xf -",
                  shell.command_line(fmt::format("tar -C {} -cf - .", shell_quote(remote_dir))),
                  shell_quote(local_dir.string()));
  auto res = run_pipeline(pipeline);
  if (!res.ok()) {
    throw RemoteError(fmt::format("copying {}:{} back failed: {}", shell.destination(), remote_dir,
                                  res.err));
  }
}

RemoteWorker::RemoteWorker(WorkerConfig cfg, fs::path project_root)
    : shell_(std::move(cfg)), project_root_(fs::absolute(project_root).lexically_normal()) {
  if (shell_.config().remote_root.empty()) {
    throw InvalidArgument(fmt::format("worker '{}' has no remote_root", shell_.config().name));
  }
}

std::optional<fs::path> RemoteWorker::relative_output(const Job& job) const {
  const fs::path abs = fs::absolute(job.output_dir).lexically_normal();
  const fs::path rel = abs.lexically_relative(project_root_);
  if (!is_contained_relative(rel)) return std::nullopt;
  return rel;
}

bool RemoteWorker::can_run(const Job& job) const { return relative_output(job).has_value(); }

std::optional<double> RemoteWorker::load_average() const {
  std::lock_guard lock(load_mutex_);
  const auto now = std::chrono::steady_clock::now();
  if (cached_load_ && now - load_time_ < std::chrono::seconds(5)) return cached_load_;
  try {
    auto res = shell_.run("cat /proc/loadavg");
    if (!res.ok()) return std::nullopt;
    cached_load_ = std::strtod(res.out.c_str(), nullptr);
    load_time_ = now;
  } catch (const Error&) {
    return std::nullopt;
  }
  return cached_load_;
}

JobStatus RemoteWorker::execute(const Job& job) {
  JobStatus status;
  status.state = JobState::Running;
  status.start = iso_timestamp_now();
  status.command = job.command.size() == 3 && job.command[1] == "-c" ? job.command[2]
                                                                     : shell_join(job.command);
  status.worker = config().name;

  const fs::path local_dir = job.output_dir;
  const fs::path stderr_path = local_dir / kStderrFile;
  auto note = [&](const std::string& msg) {
    std::ofstream err(stderr_path, std::ios::app);
    err << "automan: " << msg << '\n';
  };
  auto finish = [&](int exit_code) {
    status.exit_code = exit_code;
    status.state = exit_code == 0 ? JobState::Done : JobState::Failed;
    status.end = iso_timestamp_now();
    try {
      write_job_status(local_dir, status);
    } catch (const std::exception&) {
    }
    return status;
  };

  std::string remote_dir;
  try {
    fs::create_directories(local_dir);
    write_job_status(local_dir, status);
    auto rel = relative_output(job);
    if (!rel) {
      note("output directory is outside the project root");
      return finish(127);
    }
    const std::string root = config().remote_root;
    const std::string rel_dir = rel->generic_string();
    remote_dir = root + "/" + rel_dir;

    std::string env;
    for (const auto& [k, v] : job.env) env += " " + shell_quote(k + "=" + v);
    const std::string script = fmt::format(
        "cd {0} && mkdir -p {1} && rm -f {1}/{2} && env{3} {4} > {1}/{5} 2> {1}/{6}",
        shell_quote(root), shell_quote(rel_dir), kStatusFile, env, shell_join(job.command),
        kStdoutFile, kStderrFile);
    const ProcessResult res = shell_.run(script);
    if (res.exit_code == kSshConnectionError) {
      note(fmt::format("connection lost ({}): {}", shell_.destination(), res.err));
      return finish(kSshConnectionError);
    }

    bool copied = false;
    std::string copy_error;
    for (int attempt = 0; attempt < 2 && !copied; ++attempt) {
      try {
        pull_directory(shell_, remote_dir, local_dir);
        copied = true;
      } catch (const Error& e) {
        copy_error = e.what();
      }
    }
    if (!copied) {
      note(copy_error);
      return finish(res.exit_code == 0 ? 1 : res.exit_code);
    }
    finish(res.exit_code);
  } catch (const std::exception& e) {
    note(e.what());
    return finish(127);
  }

  // Mirror the final record so both trees hold identical files.
  try {
    auto res = shell_.run(fmt::format("cat > {}", shell_quote(remote_dir + "/" + std::string(kStatusFile))),
                          local_dir / kStatusFile);
    if (!res.ok()) note(fmt::format("could not mirror the status record: {}", res.err));
  } catch (const std::exception& e) {
    note(e.what());
  }
  return status;
}

std::vector<std::unique_ptr<Worker>> make_workers(const ClusterConfig& cfg,
                                                  const fs::path& project_root) {
  validate(cfg);
  std::vector<std::unique_ptr<Worker>> out;
  for (const auto& w : cfg.workers) {
    if (w.kind == WorkerKind::Local) {
      out.push_back(std::make_unique<LocalWorker>(w));
    } else {
      out.push_back(std::make_unique<RemoteWorker>(w, project_root));
    }
  }
  return out;
}

namespace {

constexpr std::string_view kBootstrapTemplate = R"(#!/bin/sh
# Prepares a remote worker. Runs on the remote host with
#   AUTOMAN_REMOTE_ROOT        the directory mirroring the project
#   AUTOMAN_REQUIRED_COMMANDS  commands the simulations need
# Edit freely: install packages, build the solver, etc.
set -e
mkdir -p "$AUTOMAN_REMOTE_ROOT"
cd "$AUTOMAN_REMOTE_ROOT"
for cmd in $AUTOMAN_REQUIRED_COMMANDS; do
  if ! command -v "$cmd" >/dev/null 2>&1; then
    echo "required command not found: $cmd" >&2
    exit 1
  fi
done
)";

constexpr std::string_view kUpdateTemplate = R"(#!/bin/sh
# Runs on each remote worker after the sources were pushed (automan -u).
# Add rebuild steps here.
set -e
cd "$AUTOMAN_REMOTE_ROOT"
)";

// Exclusive advisory lock on `<config>.lock`, held for the object's lifetime.
class ConfigLock {
 public:
  explicit ConfigLock(const fs::path& config_path) {
    fs::path lock_path = config_path;
    lock_path += ".lock";
    if (lock_path.has_parent_path()) fs::create_directories(lock_path.parent_path());
    fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0 || ::flock(fd_, LOCK_EX) != 0) {
      throw Error(fmt::format("cannot lock {}", lock_path.string()));
    }
  }
  ~ConfigLock() {
    if (fd_ >= 0) ::close(fd_);
  }
  ConfigLock(const ConfigLock&) = delete;
  ConfigLock& operator=(const ConfigLock&) = delete;

 private:
  int fd_ = -1;
};

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

ProcessResult run_script(const RemoteShell& shell, const fs::path& script,
                         const RemoteSetup& setup) {
  const std::string cmd = fmt::format(
      "AUTOMAN_REMOTE_ROOT={} AUTOMAN_REQUIRED_COMMANDS={} sh -s",
      shell_quote(shell.config().remote_root), shell_quote(join_words(setup.required_commands)));
  return shell.run(cmd, script);
}

}  // namespace

void ensure_bootstrap_scripts(const fs::path& dir) {
  fs::create_directories(dir);
  for (auto [name, body] : {std::pair{kBootstrapScript, kBootstrapTemplate},
                            std::pair{kUpdateScript, kUpdateTemplate}}) {
    const fs::path path = dir / name;
    if (fs::exists(path)) continue;
    write_file_atomic(path, body);
    fs::permissions(path, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                    fs::perm_options::add);
  }
}

WorkerConfig add_host(const std::string& host, const fs::path& config_path,
                      const AddHostOptions& options) {
  if (host.empty()) throw InvalidArgument("empty host name");
  WorkerConfig w;
  w.name = host;
  w.kind = WorkerKind::Ssh;
  if (auto at = host.find('@'); at != std::string::npos) {
    w.user = host.substr(0, at);
    w.host = host.substr(at + 1);
  } else {
    w.host = host;
  }
  const fs::path project_root = fs::absolute(options.setup.project_root);
  w.remote_root = options.remote_root.empty()
                      ? "automan/" + project_root.lexically_normal().filename().string()
                      : options.remote_root;

  ConfigLock lock(config_path);
  ClusterConfig cfg = load_cluster_config(config_path);
  for (const auto& existing : cfg.workers) {
    if (existing.name == w.name ||
        (existing.kind == WorkerKind::Ssh && existing.host == w.host && existing.user == w.user)) {
      throw InvalidArgument(fmt::format("host '{}' is already configured", host));
    }
  }

  RemoteShell shell(w);
  auto probe = shell.run("true");
  if (!probe.ok()) {
    throw RemoteError(fmt::format("cannot reach {} without a password prompt: `{}` exited {}\n{}",
                                  host, shell.command_line("true"), probe.exit_code, probe.err));
  }

  const fs::path scripts = options.setup.bootstrap_dir.is_absolute()
                               ? options.setup.bootstrap_dir
                               : project_root / options.setup.bootstrap_dir;
  ensure_bootstrap_scripts(scripts);
  push_sources(shell, project_root, w.remote_root, options.setup.excludes);

  auto boot = run_script(shell, scripts / kBootstrapScript, options.setup);
  if (!boot.ok()) {
    throw RemoteError(fmt::format("bootstrap on {} failed with status {}\n--- stdout\n{}--- stderr\n{}",
                                  host, boot.exit_code, boot.out, boot.err));
  }

  if (options.cores) {
    w.cores = *options.cores;
  } else {
    auto res = shell.run("getconf _NPROCESSORS_ONLN 2>/dev/null || nproc");
    int cores = res.ok() ? std::atoi(res.out.c_str()) : 0;
    if (cores < 1) throw RemoteError(fmt::format("cannot read the processor count of {}", host));
    w.cores = cores;
  }

  cfg.workers.push_back(w);
  save_cluster_config(config_path, cfg);
  return w;
}

std::vector<HostUpdate> update_sources(const std::vector<WorkerConfig>& workers,
                                       const RemoteSetup& setup) {
  const fs::path project_root = fs::absolute(setup.project_root);
  const fs::path scripts = setup.bootstrap_dir.is_absolute() ? setup.bootstrap_dir
                                                             : project_root / setup.bootstrap_dir;
  std::vector<HostUpdate> out;
  for (const auto& w : workers) {
    if (w.kind != WorkerKind::Ssh || !w.enabled) continue;
    HostUpdate result;
    result.worker = w.name;
    try {
      ensure_bootstrap_scripts(scripts);
      RemoteShell shell(w);
      result.files_sent = push_sources(shell, project_root, w.remote_root, setup.excludes);
      auto res = run_script(shell, scripts / kUpdateScript, setup);
      if (res.ok()) {
        result.ok = true;
        result.message = fmt::format("{} file(s) sent", result.files_sent);
      } else {
        result.message = fmt::format("update script exited {}: {}", res.exit_code, res.err);
      }
    } catch (const std::exception& e) {
      result.message = e.what();
    }
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace automan

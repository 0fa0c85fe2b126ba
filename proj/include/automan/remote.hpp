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

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "automan/process.hpp"
#include "automan/scheduler.hpp"

namespace automan {

/// The ssh client to use: $AUTOMAN_SSH if set, otherwise "ssh".
std::string ssh_program();

/// Runs commands on one ssh worker. Connections use BatchMode, so hosts
/// must accept key-based logins without prompting.
class RemoteShell {
 public:
  explicit RemoteShell(WorkerConfig cfg);

  /// "user@host", or "host" when no user is configured.
  std::string destination() const;
  std::vector<std::string> argv(const std::string& remote_command) const;
  /// argv() quoted for use inside a local shell pipeline.
  std::string command_line(const std::string& remote_command) const;
  /// Runs `remote_command`, capturing both output streams.
  ProcessResult run(const std::string& remote_command,
                    const std::optional<std::filesystem::path>& stdin_path = std::nullopt) const;

  const WorkerConfig& config() const { return cfg_; }

 private:
  WorkerConfig cfg_;
};

/// ssh reserves this exit status for its own errors.
inline constexpr int kSshConnectionError = 255;

/// Copies files under `local_root` that are missing or differ (size or
/// whole-second mtime) on the remote side. Paths in `excludes` are relative
/// to `local_root` and skipped with everything below them. Modification times
/// are preserved. Returns the number of files sent.
std::size_t push_sources(const RemoteShell& shell, const std::filesystem::path& local_root,
                         const std::string& remote_root,
                         const std::vector<std::filesystem::path>& excludes);

/// Copies the remote directory's contents into `local_dir`.
void pull_directory(const RemoteShell& shell, const std::string& remote_dir,
                    const std::filesystem::path& local_dir);

/// Runs jobs on an ssh worker inside its remote_root, which mirrors the
/// local project root. Outputs are copied back when the job ends.
class RemoteWorker final : public Worker {
 public:
  RemoteWorker(WorkerConfig cfg, std::filesystem::path project_root);

  const WorkerConfig& config() const override { return shell_.config(); }
  /// Only jobs whose output directory lies inside the project root.
  bool can_run(const Job& job) const override;
  std::optional<double> load_average() const override;
  JobStatus execute(const Job& job) override;

 private:
  std::optional<std::filesystem::path> relative_output(const Job& job) const;

  RemoteShell shell_;
  std::filesystem::path project_root_;
  mutable std::mutex load_mutex_;
  mutable std::optional<double> cached_load_;
  mutable std::chrono::steady_clock::time_point load_time_{};
};

/// Worker objects for every entry of `cfg`.
std::vector<std::unique_ptr<Worker>> make_workers(const ClusterConfig& cfg,
                                                  const std::filesystem::path& project_root);

inline constexpr std::string_view kBootstrapDir = ".automan";
inline constexpr std::string_view kBootstrapScript = "bootstrap.sh";
inline constexpr std::string_view kUpdateScript = "update.sh";

/// Writes the default bootstrap/update scripts unless they already exist.
void ensure_bootstrap_scripts(const std::filesystem::path& dir);

struct RemoteSetup {
  std::filesystem::path project_root = std::filesystem::current_path();
  /// Relative to project_root; never pushed.
  std::vector<std::filesystem::path> excludes;
  std::filesystem::path bootstrap_dir = std::string(kBootstrapDir);
  /// Commands the bootstrap script checks for on the remote host.
  std::vector<std::string> required_commands;
};

struct AddHostOptions {
  RemoteSetup setup;
  /// Defaults to automan/<project directory name> under the remote home.
  std::string remote_root;
  /// Defaults to the remote processor count.
  std::optional<int> cores;
};

/// Registers `host` ("host" or "user@host") as an ssh worker: checks the
/// connection, pushes the project, runs the bootstrap script and appends the
/// worker to the config file. The config file is untouched on failure.
WorkerConfig add_host(const std::string& host, const std::filesystem::path& config_path,
                      const AddHostOptions& options = {});

struct HostUpdate {
  std::string worker;
  bool ok = false;
  std::size_t files_sent = 0;
  std::string message;
};

/// Pushes sources to and runs the update script on every enabled ssh worker.
/// A failing host does not stop the others.
std::vector<HostUpdate> update_sources(const std::vector<WorkerConfig>& workers,
                                       const RemoteSetup& setup = {});

}  // namespace automan

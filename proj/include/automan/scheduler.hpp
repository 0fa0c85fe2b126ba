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
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "automan/case.hpp"

namespace automan {

inline constexpr std::string_view kStatusFile = "job_status.json";
inline constexpr std::string_view kStdoutFile = "stdout.txt";
inline constexpr std::string_view kStderrFile = "stderr.txt";

/// A rendered command plus the resources it needs.
struct Job {
  std::string id;
  std::vector<std::string> command;
  std::filesystem::path output_dir;
  std::map<std::string, std::string> env;
  int n_core = 1;
  int n_thread = 1;
};

/// Wraps a shell command line as a Job. Sets OMP_NUM_THREADS from
/// `info.n_thread`; `extra_env` is merged on top.
Job make_shell_job(std::string id, const std::string& command_line,
                   std::filesystem::path output_dir, JobInfo info,
                   const std::map<std::string, std::string>& extra_env = {});

/// Queued exists only in memory: it is never written to disk.
enum class JobState { Queued, Running, Done, Failed };

std::string_view to_string(JobState s);

struct JobStatus {
  JobState state = JobState::Queued;
  std::optional<int> exit_code;
  std::string start;
  std::optional<std::string> end;
  std::string command;
  std::string worker;
};

std::string status_to_json(const JobStatus& s);
JobStatus status_from_json(std::string_view text);
void write_job_status(const std::filesystem::path& output_dir, const JobStatus& s);
/// nullopt when there is no record; ParseError on a corrupt one.
std::optional<JobStatus> read_job_status(const std::filesystem::path& output_dir);

enum class WorkerKind { Local, Ssh };

struct WorkerConfig {
  std::string name;
  WorkerKind kind = WorkerKind::Local;
  std::string host;
  std::string user;
  std::string remote_root;
  int cores = 1;
  bool enabled = true;

  friend bool operator==(const WorkerConfig&, const WorkerConfig&) = default;
};

/// Contents of config.json.
struct ClusterConfig {
  std::vector<WorkerConfig> workers;
};

/// One enabled local worker using every hardware thread.
ClusterConfig default_cluster_config();
std::string cluster_config_to_json(const ClusterConfig& cfg);
ClusterConfig cluster_config_from_json(std::string_view text);
/// Falls back to default_cluster_config() when the file does not exist.
ClusterConfig load_cluster_config(const std::filesystem::path& path);
void save_cluster_config(const std::filesystem::path& path, const ClusterConfig& cfg);
/// Throws InvalidArgument unless there is exactly one local worker and all
/// names are unique.
void validate(const ClusterConfig& cfg);

/// A machine that executes jobs.
class Worker {
 public:
  virtual ~Worker() = default;

  virtual const WorkerConfig& config() const = 0;
  virtual bool can_run(const Job&) const { return true; }
  /// 1-minute load average, when the worker can report one.
  virtual std::optional<double> load_average() const { return std::nullopt; }
  /// Runs `job` to completion, writing status records to job.output_dir on
  /// start and on exit. Never throws; failures become a failed status.
  virtual JobStatus execute(const Job& job) = 0;
};

/// Runs jobs as child processes of this process.
class LocalWorker final : public Worker {
 public:
  explicit LocalWorker(WorkerConfig cfg);

  const WorkerConfig& config() const override { return cfg_; }
  std::optional<double> load_average() const override;
  JobStatus execute(const Job& job) override;

 private:
  WorkerConfig cfg_;
};

struct JobHandle {
  std::string id;
  std::filesystem::path output_dir;
};

struct SchedulerEvent {
  enum class Kind { Submit, Start, Finish };
  Kind kind;
  std::string job_id;
  std::string worker;
  int n_core = 0;
  std::string timestamp;
  std::optional<JobState> result;
};

/// Events and per-worker free cores taken atomically.
struct SchedulerSnapshot {
  std::vector<SchedulerEvent> events;
  std::map<std::string, int> free_cores;
};

struct SchedulerOptions {
  std::chrono::milliseconds tick{1000};
  /// Also require the worker's load average to be below
  /// cores - n_core + 1 before placing a job there.
  bool use_load_average = false;
};

/// FIFO dispatcher over a fixed set of workers. Jobs go to the first worker
/// (local first, then configuration order) whose free cores fit the job.
class Scheduler {
 public:
  Scheduler(std::vector<std::unique_ptr<Worker>> workers, SchedulerOptions options = {});
  ~Scheduler();
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  /// Queues `job`. Removes any previous status record of the job so that
  /// stale results are not mistaken for this run's. Throws Unschedulable
  /// when no enabled worker has enough cores, Error after shutdown().
  JobHandle submit(Job job);

  /// Persistent status of the job; Queued until the record appears.
  JobStatus poll(const JobHandle& handle) const;

  int free_cores(std::string_view worker) const;
  int max_capacity() const;

  /// Blocks until the queue is empty and nothing runs, then stops the
  /// dispatch thread.
  void shutdown();

  std::vector<SchedulerEvent> events() const;
  SchedulerSnapshot snapshot() const;
  /// Line-oriented rendering of events().
  std::string event_log() const;

  std::vector<std::string> worker_names() const;

 private:
  struct Slot {
    std::unique_ptr<Worker> worker;
    int used = 0;
  };

  void dispatch_loop();
  // Requires mutex_ held. Returns true if a job was started.
  bool dispatch_one();
  void record(SchedulerEvent::Kind kind, const Job& job, const std::string& worker,
              std::optional<JobState> result = std::nullopt);

  SchedulerOptions options_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::vector<Slot> slots_;
  std::deque<Job> queue_;
  int running_ = 0;
  bool stop_ = false;
  std::vector<SchedulerEvent> events_;
  std::vector<std::thread> watchers_;
  std::thread dispatcher_;
};

}  // namespace automan

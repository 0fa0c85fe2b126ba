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

#include "automan/scheduler.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "automan/error.hpp"
#include "automan/process.hpp"
#include "automan/util.hpp"

namespace automan {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

Job make_shell_job(std::string id, const std::string& command_line, fs::path output_dir,
                   JobInfo info, const std::map<std::string, std::string>& extra_env) {
  Job job;
  job.id = std::move(id);
  job.command = {"/bin/sh", "-c", command_line};
  job.output_dir = std::move(output_dir);
  job.n_core = info.n_core;
  job.n_thread = info.n_thread;
  job.env["OMP_NUM_THREADS"] = std::to_string(info.n_thread);
  for (const auto& [k, v] : extra_env) job.env[k] = v;
  return job;
}

namespace {

std::string display_command(const Job& job) {
  if (job.command.size() == 3 && job.command[0] == "/bin/sh" && job.command[1] == "-c") {
    return job.command[2];
  }
  return shell_join(job.command);
}

}  // namespace

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "unknown";
}

std::string status_to_json(const JobStatus& s) {
  if (s.state == JobState::Queued) throw InvalidArgument("queued jobs have no status record");
  ojson j;
  j["status"] = to_string(s.state);
  j["exit_code"] = s.exit_code ? ojson(*s.exit_code) : ojson(nullptr);
  j["start"] = s.start;
  j["end"] = s.end ? ojson(*s.end) : ojson(nullptr);
  j["command"] = s.command;
  j["worker"] = s.worker;
  return j.dump(2) + "\n";
}

JobStatus status_from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(fmt::format("job status: {}", e.what()));
  }
  JobStatus s;
  try {
    const std::string status = j.at("status").get<std::string>();
    if (status == "running") {
      s.state = JobState::Running;
    } else if (status == "done") {
      s.state = JobState::Done;
    } else if (status == "failed") {
      s.state = JobState::Failed;
    } else {
      throw ParseError(fmt::format("job status: unknown status '{}'", status));
    }
    if (!j.at("exit_code").is_null()) s.exit_code = j.at("exit_code").get<int>();
    s.start = j.at("start").get<std::string>();
    if (!j.at("end").is_null()) s.end = j.at("end").get<std::string>();
    s.command = j.at("command").get<std::string>();
    s.worker = j.at("worker").get<std::string>();
  } catch (const ojson::exception& e) {
    throw ParseError(fmt::format("job status: {}", e.what()));
  }
  return s;
}

void write_job_status(const fs::path& output_dir, const JobStatus& s) {
  write_file_atomic(output_dir / kStatusFile, status_to_json(s));
}

std::optional<JobStatus> read_job_status(const fs::path& output_dir) {
  const fs::path path = output_dir / kStatusFile;
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  return status_from_json(read_file(path));
}

ClusterConfig default_cluster_config() {
  const unsigned hw = std::thread::hardware_concurrency();
  WorkerConfig local;
  local.name = "local";
  local.kind = WorkerKind::Local;
  local.cores = hw == 0 ? 1 : static_cast<int>(hw);
  return ClusterConfig{{local}};
}

std::string cluster_config_to_json(const ClusterConfig& cfg) {
  ojson workers = ojson::array();
  for (const auto& w : cfg.workers) {
    ojson j;
    j["name"] = w.name;
    j["kind"] = w.kind == WorkerKind::Local ? "local" : "ssh";
    j["host"] = w.host;
    j["user"] = w.user;
    j["remote_root"] = w.remote_root;
    j["cores"] = w.cores;
    j["enabled"] = w.enabled;
    workers.push_back(std::move(j));
  }
  ojson root;
  root["workers"] = std::move(workers);
  return root.dump(2) + "\n";
}

ClusterConfig cluster_config_from_json(std::string_view text) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(fmt::format("config: {}", e.what()));
  }
  ClusterConfig cfg;
  try {
    for (const auto& j : root.at("workers")) {
      WorkerConfig w;
      w.name = j.at("name").get<std::string>();
      const std::string kind = j.value("kind", std::string("local"));
      if (kind == "local") {
        w.kind = WorkerKind::Local;
      } else if (kind == "ssh") {
        w.kind = WorkerKind::Ssh;
      } else {
        throw ParseError(fmt::format("config: worker '{}' has unknown kind '{}'", w.name, kind));
      }
      w.host = j.value("host", std::string());
      w.user = j.value("user", std::string());
      w.remote_root = j.value("remote_root", std::string());
      w.cores = j.at("cores").get<int>();
      w.enabled = j.value("enabled", true);
      cfg.workers.push_back(std::move(w));
    }
  } catch (const ojson::exception& e) {
    throw ParseError(fmt::format("config: {}", e.what()));
  }
  validate(cfg);
  return cfg;
}

ClusterConfig load_cluster_config(const fs::path& path) {
  if (!fs::exists(path)) return default_cluster_config();
  try {
    return cluster_config_from_json(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_cluster_config(const fs::path& path, const ClusterConfig& cfg) {
  validate(cfg);
  write_file_atomic(path, cluster_config_to_json(cfg));
}

void validate(const ClusterConfig& cfg) {
  int locals = 0;
  std::vector<std::string> names;
  for (const auto& w : cfg.workers) {
    if (w.name.empty()) throw InvalidArgument("config: worker without a name");
    if (w.cores < 1) throw InvalidArgument(fmt::format("config: worker '{}' needs cores >= 1", w.name));
    if (std::find(names.begin(), names.end(), w.name) != names.end()) {
      throw InvalidArgument(fmt::format("config: duplicate worker name '{}'", w.name));
    }
    names.push_back(w.name);
    if (w.kind == WorkerKind::Local) {
      ++locals;
    } else if (w.host.empty()) {
      throw InvalidArgument(fmt::format("config: ssh worker '{}' has no host", w.name));
    }
  }
  if (locals != 1) throw InvalidArgument("config: exactly one local worker is required");
}

LocalWorker::LocalWorker(WorkerConfig cfg) : cfg_(std::move(cfg)) {}

std::optional<double> LocalWorker::load_average() const {
  double load[1];
  if (::getloadavg(load, 1) != 1) return std::nullopt;
  return load[0];
}

JobStatus LocalWorker::execute(const Job& job) {
  JobStatus status;
  status.state = JobState::Running;
  status.start = iso_timestamp_now();
  status.command = display_command(job);
  status.worker = cfg_.name;

  auto finish = [&](int exit_code) {
    status.exit_code = exit_code;
    status.state = exit_code == 0 ? JobState::Done : JobState::Failed;
    status.end = iso_timestamp_now();
    try {
      write_job_status(job.output_dir, status);
    } catch (const std::exception&) {
      // The directory vanished; the runner will see no record and fail.
    }
    return status;
  };

  try {
    fs::create_directories(job.output_dir);
    write_job_status(job.output_dir, status);
  } catch (const std::exception&) {
    return finish(127);
  }

  ProcessSpec spec;
  spec.argv = job.command;
  spec.env = job.env;
  spec.stdout_path = job.output_dir / kStdoutFile;
  spec.stderr_path = job.output_dir / kStderrFile;
  try {
    return finish(run_process(spec).exit_code);
  } catch (const std::exception& e) {
    std::ofstream err(job.output_dir / kStderrFile, std::ios::app);
    err << "automan: " << e.what() << '\n';
    return finish(127);
  }
}

Scheduler::Scheduler(std::vector<std::unique_ptr<Worker>> workers, SchedulerOptions options)
    : options_(options) {
  std::stable_partition(workers.begin(), workers.end(), [](const auto& w) {
    return w->config().kind == WorkerKind::Local;
  });
  for (auto& w : workers) slots_.push_back({std::move(w), 0});
  dispatcher_ = std::thread([this] { dispatch_loop(); });
}

Scheduler::~Scheduler() { shutdown(); }

JobHandle Scheduler::submit(Job job) {
  if (job.n_core < 1 || job.n_thread < 1) {
    throw InvalidArgument(fmt::format("job '{}': n_core and n_thread must be >= 1", job.id));
  }
  {
    std::lock_guard lock(mutex_);
    if (stop_) throw Error(fmt::format("job '{}' submitted after shutdown", job.id));
    const bool placeable = std::any_of(slots_.begin(), slots_.end(), [&](const Slot& s) {
      const auto& cfg = s.worker->config();
      return cfg.enabled && cfg.cores >= job.n_core && s.worker->can_run(job);
    });
    if (!placeable) {
      throw Unschedulable(fmt::format("job '{}' needs {} cores; no enabled worker can take it",
                                      job.id, job.n_core));
    }
  }
  fs::create_directories(job.output_dir);
  std::error_code ec;
  fs::remove(job.output_dir / kStatusFile, ec);

  JobHandle handle{job.id, job.output_dir};
  {
    std::lock_guard lock(mutex_);
    record(SchedulerEvent::Kind::Submit, job, "");
    queue_.push_back(std::move(job));
  }
  wake_.notify_all();
  return handle;
}

JobStatus Scheduler::poll(const JobHandle& handle) const {
  auto s = read_job_status(handle.output_dir);
  if (!s) return JobStatus{};
  return *s;
}

int Scheduler::free_cores(std::string_view worker) const {
  std::lock_guard lock(mutex_);
  for (const auto& s : slots_) {
    if (s.worker->config().name == worker) return std::max(0, s.worker->config().cores - s.used);
  }
  throw InvalidArgument(fmt::format("unknown worker '{}'", worker));
}

int Scheduler::max_capacity() const {
  std::lock_guard lock(mutex_);
  int best = 0;
  for (const auto& s : slots_) {
    if (s.worker->config().enabled) best = std::max(best, s.worker->config().cores);
  }
  return best;
}

std::vector<std::string> Scheduler::worker_names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& s : slots_) out.push_back(s.worker->config().name);
  return out;
}

void Scheduler::record(SchedulerEvent::Kind kind, const Job& job, const std::string& worker,
                       std::optional<JobState> result) {
  events_.push_back({kind, job.id, worker, job.n_core, iso_timestamp_now(), result});
}

bool Scheduler::dispatch_one() {
  for (auto it = queue_.begin(); it != queue_.end(); ++it) {
    for (auto& slot : slots_) {
      const auto& cfg = slot.worker->config();
      if (!cfg.enabled || cfg.cores - slot.used < it->n_core || !slot.worker->can_run(*it)) {
        continue;
      }
      if (options_.use_load_average) {
        auto load = slot.worker->load_average();
        if (load && *load >= static_cast<double>(cfg.cores - it->n_core + 1)) continue;
      }
      Job job = std::move(*it);
      queue_.erase(it);
      slot.used += job.n_core;
      ++running_;
      record(SchedulerEvent::Kind::Start, job, cfg.name);
      Worker* worker = slot.worker.get();
      Slot* target = &slot;
      watchers_.emplace_back([this, worker, target, job = std::move(job)] {
        JobStatus status = worker->execute(job);
        {
          std::lock_guard lock(mutex_);
          record(SchedulerEvent::Kind::Finish, job, worker->config().name, status.state);
          target->used -= job.n_core;
          --running_;
        }
        wake_.notify_all();
      });
      return true;
    }
  }
  return false;
}

void Scheduler::dispatch_loop() {
  std::unique_lock lock(mutex_);
  for (;;) {
    while (dispatch_one()) {
    }
    if (stop_ && queue_.empty() && running_ == 0) break;
    wake_.wait_for(lock, options_.tick);
  }
}

void Scheduler::shutdown() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  if (dispatcher_.joinable()) dispatcher_.join();
  std::vector<std::thread> watchers;
  {
    std::lock_guard lock(mutex_);
    watchers.swap(watchers_);
  }
  for (auto& t : watchers) {
    if (t.joinable()) t.join();
  }
}

std::vector<SchedulerEvent> Scheduler::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

SchedulerSnapshot Scheduler::snapshot() const {
  std::lock_guard lock(mutex_);
  SchedulerSnapshot snap{events_, {}};
  for (const auto& s : slots_) {
    snap.free_cores[s.worker->config().name] = std::max(0, s.worker->config().cores - s.used);
  }
  return snap;
}

std::string Scheduler::event_log() const {
  std::string out;
  for (const auto& e : events()) {
    switch (e.kind) {
      case SchedulerEvent::Kind::Submit:
        out += fmt::format("{} submit {} {}\n", e.timestamp, e.job_id, e.n_core);
        break;
      case SchedulerEvent::Kind::Start:
        out += fmt::format("{} start {} {} {}\n", e.timestamp, e.job_id, e.worker, e.n_core);
        break;
      case SchedulerEvent::Kind::Finish:
        out += fmt::format("{} finish {} {} {} {}\n", e.timestamp, e.job_id, e.worker, e.n_core,
                           to_string(e.result.value_or(JobState::Failed)));
        break;
    }
  }
  return out;
}

}  // namespace automan

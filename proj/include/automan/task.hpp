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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "automan/problem.hpp"
#include "automan/scheduler.hpp"

namespace automan {

class Task;
using TaskPtr = std::shared_ptr<Task>;

/// A unit of work in the dependency graph.
///
/// complete() must be side-effect free and may be called any number of
/// times. It raises TaskFailed when the work was attempted and failed.
/// requirements() may build its tasks lazily; the runner calls it at most
/// once per task.
class Task {
 public:
  virtual ~Task() = default;

  /// Stable identifier; two tasks with the same id are the same node.
  virtual std::string id() const = 0;
  virtual bool complete() const = 0;
  virtual void run() = 0;
  virtual std::vector<TaskPtr> requirements() { return {}; }
  /// True when run() only starts the work and completion must be polled.
  virtual bool asynchronous() const { return false; }
};

/// Runs one Job through the scheduler. Completion evidence is the
/// job_status.json record in the job's output directory.
class CommandTask : public Task {
 public:
  CommandTask(Job job, Scheduler& scheduler, std::vector<TaskPtr> depends = {});

  std::string id() const override { return job_.id; }
  /// Before submission: true iff a `done` record exists (failed, stale or
  /// missing records mean "run it"). After submission: polls the job and
  /// raises TaskFailed if it failed.
  bool complete() const override;
  void run() override;
  std::vector<TaskPtr> requirements() override { return depends_; }
  bool asynchronous() const override { return true; }

  const Job& job() const { return job_; }

 private:
  Job job_;
  Scheduler& scheduler_;
  std::vector<TaskPtr> depends_;
  std::optional<JobHandle> handle_;
};

/// Complete when all of its required tasks are complete; run() does nothing.
class WrapperTask : public Task {
 public:
  WrapperTask(std::string id, std::vector<TaskPtr> requires_list);

  std::string id() const override { return id_; }
  bool complete() const override;
  void run() override {}
  std::vector<TaskPtr> requirements() override { return requires_; }

 private:
  std::string id_;
  std::vector<TaskPtr> requires_;
};

struct SolveOptions {
  /// Re-run post-processing even when the outputs already exist.
  bool force = false;
  /// Extra environment given to every job.
  std::map<std::string, std::string> job_env;
};

/// Task id of a case: "case:<problem>/<case>".
std::string case_task_id(std::string_view problem, std::string_view case_name);
/// Task id of a problem's post-processing: "problem:<name>".
std::string problem_task_id(std::string_view problem);

/// One CommandTask per entry of problem.get_commands().
std::vector<TaskPtr> make_case_tasks(const Problem& problem, Scheduler& scheduler,
                                     const std::map<std::string, std::string>& job_env = {});

/// Requires one CommandTask per case and runs the problem's post-processing
/// once all of them are complete. Complete when the output directory holds
/// the recipe success marker.
class SolveProblemTask : public Task {
 public:
  SolveProblemTask(std::shared_ptr<Problem> problem, Scheduler& scheduler, SolveOptions options = {});

  std::string id() const override;
  bool complete() const override;
  void run() override;
  std::vector<TaskPtr> requirements() override;

  const Problem& problem() const { return *problem_; }

 private:
  std::shared_ptr<Problem> problem_;
  Scheduler& scheduler_;
  SolveOptions options_;
  std::optional<std::vector<TaskPtr>> cases_;
  bool ran_ = false;
};

/// Solves every given problem.
class RunAllTask : public WrapperTask {
 public:
  RunAllTask(const std::vector<std::shared_ptr<Problem>>& problems, Scheduler& scheduler,
             SolveOptions options = {});
};

enum class TaskEventKind { Skip, Submit, Done, Fail, Blocked };

std::string_view to_string(TaskEventKind kind);

struct TaskEvent {
  std::string timestamp;
  TaskEventKind kind;
  std::string task_id;
  /// Failure reason for Fail/Blocked events.
  std::string detail;
};

struct RunReport {
  int executed = 0;
  int skipped = 0;
  int failed = 0;
  int blocked = 0;
  std::vector<TaskEvent> events;

  bool ok() const { return failed == 0 && blocked == 0; }
  /// Number of events of `kind` whose task id starts with `id_prefix`.
  int count(TaskEventKind kind, std::string_view id_prefix = "") const;
  /// One `<timestamp> <event> <task-id>` line per event.
  std::string log() const;
};

struct RunOptions {
  std::chrono::milliseconds poll_interval{1000};
  std::function<void(const TaskEvent&)> on_event;
};

/// Executes the graph reachable from `root`. Tasks already complete are
/// skipped together with everything below them; every other task is run
/// once all of its requirements are complete. A failure blocks the tasks
/// that depend on it but not unrelated branches. Throws CycleError.
RunReport run_graph(const TaskPtr& root, const RunOptions& options = {});

}  // namespace automan

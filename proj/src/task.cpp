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

#include "automan/task.hpp"

#include <algorithm>
#include <set>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "automan/error.hpp"
#include "automan/util.hpp"

namespace automan {

namespace fs = std::filesystem;

CommandTask::CommandTask(Job job, Scheduler& scheduler, std::vector<TaskPtr> depends)
    : job_(std::move(job)), scheduler_(scheduler), depends_(std::move(depends)) {}

bool CommandTask::complete() const {
  if (!handle_) {
    try {
      auto status = read_job_status(job_.output_dir);
      return status && status->state == JobState::Done;
    } catch (const ParseError&) {
      return false;
    }
  }
  const JobStatus status = scheduler_.poll(*handle_);
  if (status.state == JobState::Failed) {
    throw TaskFailed(fmt::format("job '{}' failed with exit code {}; see {}", job_.id,
                                 status.exit_code.value_or(-1),
                                 (job_.output_dir / kStderrFile).string()));
  }
  return status.state == JobState::Done;
}

void CommandTask::run() { handle_ = scheduler_.submit(job_); }

WrapperTask::WrapperTask(std::string id, std::vector<TaskPtr> requires_list)
    : id_(std::move(id)), requires_(std::move(requires_list)) {}

bool WrapperTask::complete() const {
  return std::all_of(requires_.begin(), requires_.end(), [](const TaskPtr& t) { return t->complete(); });
}

std::string case_task_id(std::string_view problem, std::string_view case_name) {
  return fmt::format("case:{}/{}", problem, case_name);
}

std::string problem_task_id(std::string_view problem) { return fmt::format("problem:{}", problem); }

std::vector<TaskPtr> make_case_tasks(const Problem& problem, Scheduler& scheduler,
                                     const std::map<std::string, std::string>& job_env) {
  std::vector<TaskPtr> out;
  const std::string name = problem.name();
  for (const auto& entry : problem.get_commands()) {
    Job job = make_shell_job(case_task_id(name, entry.case_name), entry.command, entry.output_dir,
                             entry.job_info, job_env);
    out.push_back(std::make_shared<CommandTask>(std::move(job), scheduler));
  }
  return out;
}

SolveProblemTask::SolveProblemTask(std::shared_ptr<Problem> problem, Scheduler& scheduler,
                                   SolveOptions options)
    : problem_(std::move(problem)), scheduler_(scheduler), options_(std::move(options)) {}

std::string SolveProblemTask::id() const { return problem_task_id(problem_->name()); }

bool SolveProblemTask::complete() const {
  if (options_.force && !ran_) return false;
  std::error_code ec;
  const fs::path out = problem_->output_path();
  return fs::is_directory(out, ec) && fs::exists(out / kRecipesDoneMarker, ec);
}

void SolveProblemTask::run() {
  const fs::path marker = problem_->output_path() / kRecipesDoneMarker;
  std::error_code ec;
  fs::remove(marker, ec);
  problem_->run();
  problem_->make_output_directory();
  write_file_atomic(marker, iso_timestamp_now() + "\n");
  ran_ = true;
}

std::vector<TaskPtr> SolveProblemTask::requirements() {
  if (!cases_) cases_ = make_case_tasks(*problem_, scheduler_, options_.job_env);
  return *cases_;
}

namespace {

std::vector<TaskPtr> make_solve_tasks(const std::vector<std::shared_ptr<Problem>>& problems,
                                      Scheduler& scheduler, const SolveOptions& options) {
  std::set<std::string> names;
  std::vector<TaskPtr> out;
  for (const auto& p : problems) {
    if (!names.insert(p->name()).second) {
      throw InvalidArgument(fmt::format("problem name '{}' is used twice", p->name()));
    }
    out.push_back(std::make_shared<SolveProblemTask>(p, scheduler, options));
  }
  return out;
}

}  // namespace

RunAllTask::RunAllTask(const std::vector<std::shared_ptr<Problem>>& problems, Scheduler& scheduler,
                       SolveOptions options)
    : WrapperTask("all", make_solve_tasks(problems, scheduler, options)) {}

std::string_view to_string(TaskEventKind kind) {
  switch (kind) {
    case TaskEventKind::Skip: return "skip";
    case TaskEventKind::Submit: return "submit";
    case TaskEventKind::Done: return "done";
    case TaskEventKind::Fail: return "fail";
    case TaskEventKind::Blocked: return "blocked";
  }
  return "unknown";
}

int RunReport::count(TaskEventKind kind, std::string_view id_prefix) const {
  return static_cast<int>(std::count_if(events.begin(), events.end(), [&](const TaskEvent& e) {
    return e.kind == kind && e.task_id.starts_with(id_prefix);
  }));
}

std::string RunReport::log() const {
  std::string out;
  for (const auto& e : events) {
    out += fmt::format("{} {} {}\n", e.timestamp, to_string(e.kind), e.task_id);
  }
  return out;
}

namespace {

enum class NodeState { Pending, Submitted, Done, Skipped, Failed, Blocked };

struct Node {
  TaskPtr task;
  std::string id;
  std::vector<Node*> deps;
  NodeState state = NodeState::Pending;
};

bool terminal(NodeState s) { return s != NodeState::Pending && s != NodeState::Submitted; }

class GraphRunner {
 public:
  explicit GraphRunner(const RunOptions& options) : options_(options) {}

  RunReport run(const TaskPtr& root) {
    expand(root, false);
    std::vector<Node*> frontier;
    for (Node* n : order_) {
      if (n->state == NodeState::Skipped) frontier.push_back(n);
    }
    for (Node* n : frontier) {
      for (const auto& req : n->task->requirements()) expand(req, true);
    }
    for (Node* n : order_) {
      if (n->state == NodeState::Skipped) emit(TaskEventKind::Skip, *n);
    }
    execute();
    return std::move(report_);
  }

 private:
  Node* expand(const TaskPtr& task, bool skipping) {
    std::string id = task->id();
    if (std::find(stack_.begin(), stack_.end(), id) != stack_.end()) {
      std::string cycle;
      auto it = std::find(stack_.begin(), stack_.end(), id);
      for (; it != stack_.end(); ++it) cycle += *it + " -> ";
      throw CycleError(fmt::format("dependency cycle: {}{}", cycle, id));
    }
    if (auto it = nodes_.find(id); it != nodes_.end()) return it->second.get();

    auto owned = std::make_unique<Node>();
    Node* node = owned.get();
    node->task = task;
    node->id = id;
    nodes_.emplace(id, std::move(owned));
    stack_.push_back(id);

    bool done = skipping;
    if (!done) {
      try {
        done = task->complete();
      } catch (const std::exception&) {
        done = false;
      }
    }
    if (done) {
      node->state = NodeState::Skipped;
      if (skipping) {
        for (const auto& req : task->requirements()) expand(req, true);
      }
    } else {
      for (const auto& req : task->requirements()) node->deps.push_back(expand(req, false));
    }
    stack_.pop_back();
    order_.push_back(node);
    return node;
  }

  void emit(TaskEventKind kind, const Node& node, std::string detail = {}) {
    TaskEvent ev{iso_timestamp_now(), kind, node.id, std::move(detail)};
    switch (kind) {
      case TaskEventKind::Skip: ++report_.skipped; break;
      case TaskEventKind::Submit: ++report_.executed; break;
      case TaskEventKind::Fail: ++report_.failed; break;
      case TaskEventKind::Blocked: ++report_.blocked; break;
      case TaskEventKind::Done: break;
    }
    if (options_.on_event) options_.on_event(ev);
    report_.events.push_back(std::move(ev));
  }

  // Returns true if the node changed state.
  bool check(Node& node) {
    try {
      if (node.task->complete()) {
        node.state = NodeState::Done;
        emit(TaskEventKind::Done, node);
        return true;
      }
    } catch (const std::exception& e) {
      node.state = NodeState::Failed;
      emit(TaskEventKind::Fail, node, e.what());
      return true;
    }
    if (!node.task->asynchronous()) {
      node.state = NodeState::Failed;
      emit(TaskEventKind::Fail, node, "task did not complete after running");
      return true;
    }
    return false;
  }

  bool step(Node& node) {
    if (node.state == NodeState::Submitted) return check(node);
    if (node.state != NodeState::Pending) return false;

    const Node* broken = nullptr;
    bool ready = true;
    for (const Node* d : node.deps) {
      if (d->state == NodeState::Failed || d->state == NodeState::Blocked) {
        broken = d;
        break;
      }
      if (d->state != NodeState::Done && d->state != NodeState::Skipped) ready = false;
    }
    if (broken != nullptr) {
      node.state = NodeState::Blocked;
      emit(TaskEventKind::Blocked, node, fmt::format("requirement '{}' did not succeed", broken->id));
      return true;
    }
    if (!ready) return false;

    try {
      node.task->run();
    } catch (const std::exception& e) {
      node.state = NodeState::Failed;
      emit(TaskEventKind::Submit, node);
      emit(TaskEventKind::Fail, node, e.what());
      return true;
    }
    node.state = NodeState::Submitted;
    emit(TaskEventKind::Submit, node);
    if (!node.task->asynchronous()) check(node);
    return true;
  }

  void execute() {
    for (;;) {
      bool progress = false;
      bool all_terminal = true;
      for (Node* n : order_) {
        if (step(*n)) progress = true;
        if (!terminal(n->state)) all_terminal = false;
      }
      if (all_terminal) return;
      if (!progress) std::this_thread::sleep_for(options_.poll_interval);
    }
  }

  const RunOptions& options_;
  std::unordered_map<std::string, std::unique_ptr<Node>> nodes_;
  std::vector<Node*> order_;
  std::vector<std::string> stack_;
  RunReport report_;
};

}  // namespace

RunReport run_graph(const TaskPtr& root, const RunOptions& options) {
  if (!root) throw InvalidArgument("run_graph: null root task");
  GraphRunner runner(options);
  return runner.run(root);
}

}  // namespace automan

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

#include "automan/cli.hpp"

#include <cstdlib>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <unistd.h>

#include "automan/campaign.hpp"
#include "automan/demo.hpp"
#include "automan/error.hpp"
#include "automan/remote.hpp"
#include "automan/scheduler.hpp"
#include "automan/util.hpp"

namespace automan {

namespace fs = std::filesystem;

namespace {

std::string normalize_problem_name(std::string_view name) {
  std::string out;
  for (char ch : to_lower(name)) {
    if (ch != '_' && ch != '-') out += ch;
  }
  return out;
}

std::string self_executable() {
  if (const char* env = std::getenv("AUTOMAN_EXE"); env != nullptr && *env != '\0') return env;
  std::error_code ec;
  fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string("automan") : exe.string();
}

struct Options {
  std::vector<std::string> problems;
  bool force_post = false;
  std::string match;
  std::string add_worker;
  bool update = false;
  std::string config = "config.json";
  std::string campaign = "campaign.toml";
  std::string directory;
  double poll_interval = 1.0;
  bool load_aware = false;
  std::string remote_root;
  int cores = 0;
  DemoParams demo;
};

std::vector<fs::path> sync_excludes(const std::optional<CampaignFile>& campaign,
                                    const Options& opts) {
  std::vector<fs::path> ex{".git", std::string(kBootstrapDir), opts.config + ".lock"};
  if (campaign) {
    ex.push_back(campaign->simulation_dir);
    ex.push_back(campaign->output_dir);
  }
  return ex;
}

std::vector<std::string> required_commands(const CampaignFile& campaign) {
  std::vector<std::string> out;
  for (const auto& p : campaign.problems) {
    for (const auto& c : p.cases) {
      std::string first = c.base_command().substr(0, c.base_command().find(' '));
      if (first.empty() || first.front() == '$') continue;
      if (std::find(out.begin(), out.end(), first) == out.end()) out.push_back(first);
    }
  }
  return out;
}

int add_worker(const Options& opts, CliSession& s) {
  AddHostOptions add;
  std::optional<CampaignFile> campaign;
  if (fs::exists(opts.campaign)) campaign = load_campaign(opts.campaign);
  add.setup.excludes = sync_excludes(campaign, opts);
  if (campaign) add.setup.required_commands = required_commands(*campaign);
  add.remote_root = opts.remote_root;
  if (opts.cores > 0) add.cores = opts.cores;
  try {
    WorkerConfig w = add_host(opts.add_worker, opts.config, add);
    s.out << fmt::format("added worker {} ({} cores, root {})\n", w.name, w.cores, w.remote_root);
    return kExitOk;
  } catch (const InvalidArgument& e) {
    s.err << "automan: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    s.err << "automan: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_campaign(const Options& opts, CliSession& s) {
  CampaignFile campaign = load_campaign(opts.campaign);

  std::vector<ProblemSpec> selected;
  if (opts.problems.empty()) {
    selected = campaign.problems;
  } else {
    for (const auto& requested : opts.problems) {
      auto it = std::find_if(campaign.problems.begin(), campaign.problems.end(),
                             [&](const ProblemSpec& p) { return problem_name_matches(requested, p.name); });
      if (it == campaign.problems.end()) {
        std::string names;
        for (const auto& p : campaign.problems) names += "\n  " + p.name;
        s.err << fmt::format("automan: unknown problem '{}'; available problems:{}\n", requested, names);
        return kExitUsage;
      }
      if (std::none_of(selected.begin(), selected.end(),
                       [&](const ProblemSpec& p) { return p.name == it->name; })) {
        selected.push_back(*it);
      }
    }
  }

  const ClusterConfig cluster = load_cluster_config(opts.config);
  const auto poll = std::chrono::milliseconds(
      std::max<long long>(1, std::llround(opts.poll_interval * 1000.0)));

  bool update_failed = false;
  if (opts.update) {
    RemoteSetup setup;
    setup.excludes = sync_excludes(campaign, opts);
    setup.required_commands = required_commands(campaign);
    for (const auto& u : update_sources(cluster.workers, setup)) {
      s.out << fmt::format("update {}: {}\n", u.worker, u.ok ? u.message : "FAILED: " + u.message);
      if (!u.ok) update_failed = true;
    }
  }

  Scheduler scheduler(make_workers(cluster, fs::current_path()),
                      SchedulerOptions{poll, opts.load_aware});
  SolveOptions solve;
  solve.force = opts.force_post;
  solve.job_env["AUTOMAN_EXE"] = self_executable();

  std::vector<std::shared_ptr<Problem>> problems;
  for (auto& p : selected) problems.push_back(std::make_shared<SpecProblem>(std::move(p)));

  TaskPtr root;
  if (!opts.match.empty()) {
    std::vector<TaskPtr> cases;
    for (const auto& p : problems) {
      for (auto& t : make_case_tasks(*p, scheduler, solve.job_env)) {
        const std::string& id = t->id();
        if (name_matches(opts.match, id.substr(id.rfind('/') + 1))) cases.push_back(std::move(t));
      }
    }
    root = std::make_shared<WrapperTask>("match", std::move(cases));
  } else {
    root = std::make_shared<RunAllTask>(problems, scheduler, solve);
  }

  RunOptions run;
  run.poll_interval = poll;
  run.on_event = [&s](const TaskEvent& e) {
    s.out << fmt::format("{} {} {}\n", e.timestamp, to_string(e.kind), e.task_id);
    if (!e.detail.empty()) s.err << fmt::format("automan: {}: {}\n", e.task_id, e.detail);
  };
  RunReport report = run_graph(root, run);
  scheduler.shutdown();

  s.out << fmt::format("{} executed, {} skipped, {} failed, {} blocked\n", report.executed,
                       report.skipped, report.failed, report.blocked);
  s.scheduler_log = scheduler.event_log();
  const bool ok = report.ok() && !update_failed;
  s.report = std::move(report);
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

bool problem_name_matches(std::string_view requested, std::string_view name) {
  return normalize_problem_name(requested) == normalize_problem_name(name);
}

int run_cli(const std::vector<std::string>& args, CliSession& s) {
  Options opts;
  CLI::App app{"Automates simulation campaigns: runs every case, then post-processes.", "automan"};
  app.add_option("problems", opts.problems, "Problems to run (default: all; case-insensitive)");
  auto* force = app.add_flag("-f,--force-post", opts.force_post,
                             "Re-run post-processing without re-running finished simulations");
  auto* match = app.add_option("-m,--match", opts.match,
                               "Run only cases whose names match this pattern; skips post-processing");
  auto* add = app.add_option("-a,--add-worker", opts.add_worker, "Add a remote ssh worker and exit");
  auto* update = app.add_flag("-u,--update", opts.update,
                              "Push sources to all remote workers, then run");
  add->excludes(match)->excludes(force)->excludes(update);
  app.add_option("--config", opts.config, "Worker configuration file")->capture_default_str();
  app.add_option("--campaign", opts.campaign, "Campaign file")->capture_default_str();
  app.add_option("-C,--directory", opts.directory, "Change to this directory first");
  app.add_option("--poll-interval", opts.poll_interval, "Seconds between completion checks")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--load-aware", opts.load_aware,
               "Also require a low load average before placing jobs on a worker");
  app.add_option("--remote-root", opts.remote_root, "Remote directory for -a")->needs(add);
  app.add_option("--cores", opts.cores, "Core count for -a (default: detected)")
      ->needs(add)
      ->check(CLI::PositiveNumber);

  auto* demo = app.add_subcommand("demo-simulate", "Built-in demo workload");
  demo->group("");
  demo->add_option("--decay-rate", opts.demo.decay_rate)->capture_default_str();
  demo->add_option("--dt", opts.demo.dt)->capture_default_str();
  demo->add_option("--t-final", opts.demo.t_final)->capture_default_str();
  demo->add_option("--scheme", opts.demo.scheme)->capture_default_str();
  demo->add_option("--output-dir", opts.demo.output_dir)->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, s.out, s.err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*demo) return demo_simulate(opts.demo, s.out, s.err) == 0 ? kExitOk : kExitFailure;

  try {
    if (!opts.directory.empty()) fs::current_path(opts.directory);
    if (!opts.add_worker.empty()) return add_worker(opts, s);
    return run_campaign(opts, s);
  } catch (const ParseError& e) {
    s.err << "automan: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    s.err << "automan: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    s.err << "automan: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace automan

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "automan/error.hpp"
#include "automan/scheduler.hpp"
#include "test_support.hpp"

using namespace automan;
using namespace std::chrono_literals;
using automan::testing::read_text;
using automan::testing::TempDir;
using automan::testing::write_text;
namespace fs = std::filesystem;

namespace {

WorkerConfig local_config(int cores, std::string name = "local") {
  WorkerConfig c;
  c.name = std::move(name);
  c.kind = WorkerKind::Local;
  c.cores = cores;
  return c;
}

// A worker that sleeps instead of running a command, with a settable load.
class FakeWorker final : public Worker {
 public:
  FakeWorker(WorkerConfig cfg, std::chrono::milliseconds duration)
      : cfg_(std::move(cfg)), duration_(duration) {}
  const WorkerConfig& config() const override { return cfg_; }
  std::optional<double> load_average() const override { return load.load(); }
  JobStatus execute(const Job& job) override {
    ++executed;
    std::this_thread::sleep_for(duration_);
    JobStatus s;
    s.state = JobState::Done;
    s.exit_code = 0;
    s.command = job.command.empty() ? "" : job.command.back();
    s.worker = cfg_.name;
    s.start = "x";
    s.end = "y";
    write_job_status(job.output_dir, s);
    return s;
  }
  std::atomic<double> load{0.0};
  std::atomic<int> executed{0};

 private:
  WorkerConfig cfg_;
  std::chrono::milliseconds duration_;
};

// Replays start/finish events and returns the peak cores in use per worker.
std::map<std::string, int> replay_peak(const std::vector<SchedulerEvent>& events,
                                       std::map<std::string, int>* final_use = nullptr) {
  std::map<std::string, int> use, peak;
  for (const auto& e : events) {
    if (e.kind == SchedulerEvent::Kind::Start) {
      use[e.worker] += e.n_core;
      peak[e.worker] = std::max(peak[e.worker], use[e.worker]);
    } else if (e.kind == SchedulerEvent::Kind::Finish) {
      use[e.worker] -= e.n_core;
    }
  }
  if (final_use) *final_use = use;
  return peak;
}

void wait_done(const Scheduler& s, const JobHandle& h) {
  for (int i = 0; i < 2000; ++i) {
    auto st = s.poll(h).state;
    if (st == JobState::Done || st == JobState::Failed) return;
    std::this_thread::sleep_for(5ms);
  }
  FAIL("job did not finish");
}

}  // namespace

TEST_CASE("status records") {
  TempDir tmp;
  JobStatus s;
  s.state = JobState::Done;
  s.exit_code = 0;
  s.start = "2024-01-01T00:00:00.000Z";
  s.end = "2024-01-01T00:00:01.000Z";
  s.command = "echo hi";
  s.worker = "local";
  const std::string text = status_to_json(s);
  auto j = nlohmann::ordered_json::parse(text);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"status", "exit_code", "start", "end", "command", "worker"});
  CHECK(j["status"] == "done");

  write_job_status(tmp.path(), s);
  auto back = read_job_status(tmp.path());
  REQUIRE(back);
  CHECK(back->state == JobState::Done);
  CHECK(back->exit_code == 0);
  CHECK(back->end == s.end);
  CHECK(back->command == s.command);

  JobStatus running;
  running.state = JobState::Running;
  running.start = "t";
  auto jr = nlohmann::json::parse(status_to_json(running));
  CHECK(jr["exit_code"].is_null());
  CHECK(jr["end"].is_null());

  CHECK_FALSE(read_job_status(tmp / "nothing").has_value());
  write_text(tmp / "bad" / std::string(kStatusFile), "{not json");
  CHECK_THROWS_AS(read_job_status(tmp / "bad"), ParseError);
  CHECK_THROWS_AS(status_to_json(JobStatus{}), InvalidArgument);
}

TEST_CASE("cluster configuration") {
  TempDir tmp;
  auto def = default_cluster_config();
  REQUIRE(def.workers.size() == 1);
  CHECK(def.workers[0].kind == WorkerKind::Local);
  CHECK(def.workers[0].cores >= 1);
  CHECK(load_cluster_config(tmp / "missing.json").workers == def.workers);

  ClusterConfig cfg{{local_config(4)}};
  WorkerConfig remote;
  remote.name = "hpc";
  remote.kind = WorkerKind::Ssh;
  remote.host = "hpc.example.org";
  remote.user = "me";
  remote.remote_root = "automan/proj";
  remote.cores = 16;
  cfg.workers.push_back(remote);
  save_cluster_config(tmp / "config.json", cfg);
  CHECK(load_cluster_config(tmp / "config.json").workers == cfg.workers);

  ClusterConfig two_local{{local_config(1), local_config(2, "other")}};
  CHECK_THROWS_AS(validate(two_local), InvalidArgument);
  ClusterConfig no_local{{remote}};
  CHECK_THROWS_AS(validate(no_local), InvalidArgument);
  ClusterConfig dup{{local_config(1), remote, remote}};
  CHECK_THROWS_AS(validate(dup), InvalidArgument);
  ClusterConfig zero{{local_config(0)}};
  CHECK_THROWS_AS(validate(zero), InvalidArgument);
  write_text(tmp / "bad.json", "{\"workers\": [{\"name\": 3}]}");
  CHECK_THROWS_AS(load_cluster_config(tmp / "bad.json"), ParseError);
}

TEST_CASE("local jobs: output capture, environment and exit codes") {
  TempDir tmp;
  std::vector<std::unique_ptr<Worker>> workers;
  workers.push_back(std::make_unique<LocalWorker>(local_config(2)));
  Scheduler sched(std::move(workers), {.tick = 10ms});

  auto h1 = sched.submit(make_shell_job("omp", "echo $OMP_NUM_THREADS", tmp / "omp", {1, 2}));
  auto h2 = sched.submit(make_shell_job("bytes", "head -c 12345 /dev/zero; echo oops >&2", tmp / "bytes", {}));
  auto h3 = sched.submit(make_shell_job("fail", "exit 7", tmp / "fail", {}));
  auto h4 = sched.submit(make_shell_job("extra", "echo $FOO", tmp / "extra", {}, {{"FOO", "bar"}}));
  for (const auto& h : {h1, h2, h3, h4}) wait_done(sched, h);

  CHECK(read_text(tmp / "omp" / std::string(kStdoutFile)) == "2\n");
  CHECK(fs::file_size(tmp / "bytes" / std::string(kStdoutFile)) == 12345);
  CHECK(read_text(tmp / "bytes" / std::string(kStderrFile)) == "oops\n");
  CHECK(read_text(tmp / "extra" / std::string(kStdoutFile)) == "bar\n");

  auto ok = sched.poll(h2);
  CHECK(ok.state == JobState::Done);
  CHECK(ok.exit_code == 0);
  CHECK(ok.worker == "local");
  CHECK(ok.end.has_value());
  auto bad = sched.poll(h3);
  CHECK(bad.state == JobState::Failed);
  CHECK(bad.exit_code == 7);

  sched.shutdown();
  CHECK_THROWS_AS(sched.submit(make_shell_job("late", "true", tmp / "late", {})), Error);
}

TEST_CASE("free cores") {
  TempDir tmp;
  std::vector<std::unique_ptr<Worker>> workers;
  workers.push_back(std::make_unique<LocalWorker>(local_config(4)));
  Scheduler sched(std::move(workers), {.tick = 10ms});
  CHECK(sched.free_cores("local") == 4);
  CHECK(sched.max_capacity() == 4);
  CHECK_THROWS_AS(sched.free_cores("nope"), InvalidArgument);

  write_text(tmp / "gate", "");
  auto h = sched.submit(make_shell_job("hold", "while [ -e " + (tmp / "gate").string() + " ]; do sleep 0.01; done",
                                       tmp / "hold", {3, 1}));
  for (int i = 0; i < 500 && sched.poll(h).state != JobState::Running; ++i) std::this_thread::sleep_for(5ms);
  CHECK(sched.poll(h).state == JobState::Running);
  CHECK(sched.free_cores("local") == 1);
  fs::remove(tmp / "gate");
  wait_done(sched, h);
  sched.shutdown();
  CHECK(sched.free_cores("local") == 4);
}

TEST_CASE("capacity is never exceeded") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    TempDir tmp;
    std::vector<std::unique_ptr<Worker>> workers;
    workers.push_back(std::make_unique<FakeWorker>(local_config(4), 5ms));
    WorkerConfig other = local_config(3, "remote");
    other.kind = WorkerKind::Ssh;
    workers.push_back(std::make_unique<FakeWorker>(other, 7ms));
    Scheduler sched(std::move(workers), {.tick = 5ms});
    std::vector<JobHandle> handles;
    for (int i = 0; i < 40; ++i) {
      Job job;
      job.id = "j" + std::to_string(i);
      job.output_dir = tmp / job.id;
      job.n_core = 1 + static_cast<int>(rng() % 3);
      handles.push_back(sched.submit(job));
      if (rng() % 5 == 0) {
        auto snap = sched.snapshot();
        std::map<std::string, int> use;
        replay_peak(snap.events, &use);
        CHECK(snap.free_cores["local"] == 4 - use["local"]);
        CHECK(snap.free_cores["remote"] == 3 - use["remote"]);
      }
    }
    sched.shutdown();
    auto events = sched.events();
    std::map<std::string, int> final_use;
    auto peak = replay_peak(events, &final_use);
    CHECK(peak["local"] <= 4);
    CHECK(peak["remote"] <= 3);
    CHECK(final_use["local"] == 0);
    CHECK(final_use["remote"] == 0);
    for (const auto& h : handles) CHECK(sched.poll(h).state == JobState::Done);
    int finishes = 0;
    for (const auto& e : events) finishes += e.kind == SchedulerEvent::Kind::Finish;
    CHECK(finishes == 40);
  }
}

TEST_CASE("placement rules") {
  TempDir tmp;
  SUBCASE("oversized jobs are rejected") {
    std::vector<std::unique_ptr<Worker>> workers;
    workers.push_back(std::make_unique<FakeWorker>(local_config(2), 1ms));
    Scheduler sched(std::move(workers), {.tick = 5ms});
    Job job;
    job.id = "big";
    job.output_dir = tmp / "big";
    job.n_core = 3;
    CHECK_THROWS_AS(sched.submit(job), Unschedulable);
  }
  SUBCASE("local wins ties and disabled workers get nothing") {
    std::vector<std::unique_ptr<Worker>> workers;
    WorkerConfig r1 = local_config(8, "r1");
    r1.kind = WorkerKind::Ssh;
    WorkerConfig r2 = local_config(8, "r2");
    r2.kind = WorkerKind::Ssh;
    r2.enabled = false;
    auto* off = new FakeWorker(r2, 1ms);
    workers.emplace_back(new FakeWorker(r1, 1ms));
    workers.emplace_back(off);
    workers.push_back(std::make_unique<FakeWorker>(local_config(8), 1ms));
    Scheduler sched(std::move(workers), {.tick = 5ms});
    CHECK(sched.worker_names().front() == "local");
    Job job;
    job.id = "one";
    job.output_dir = tmp / "one";
    auto h = sched.submit(job);
    sched.shutdown();
    CHECK(sched.poll(h).worker == "local");
    CHECK(off->executed == 0);
  }
  SUBCASE("a disabled worker cannot make a job schedulable") {
    std::vector<std::unique_ptr<Worker>> workers;
    workers.push_back(std::make_unique<FakeWorker>(local_config(1), 1ms));
    WorkerConfig r = local_config(8, "r");
    r.kind = WorkerKind::Ssh;
    r.enabled = false;
    workers.push_back(std::make_unique<FakeWorker>(r, 1ms));
    Scheduler sched(std::move(workers), {.tick = 5ms});
    Job job;
    job.id = "wide";
    job.output_dir = tmp / "wide";
    job.n_core = 4;
    CHECK_THROWS_AS(sched.submit(job), Unschedulable);
  }
}

TEST_CASE("load-aware placement waits for the load to drop") {
  TempDir tmp;
  auto* fake = new FakeWorker(local_config(4), 1ms);
  fake->load = 3.5;
  std::vector<std::unique_ptr<Worker>> workers;
  workers.emplace_back(fake);
  Scheduler sched(std::move(workers), {.tick = 5ms, .use_load_average = true});

  Job small;
  small.id = "small";
  small.output_dir = tmp / "small";
  auto hs = sched.submit(small);
  wait_done(sched, hs);

  Job wide;
  wide.id = "wide";
  wide.output_dir = tmp / "wide";
  wide.n_core = 2;
  auto hw = sched.submit(wide);
  std::this_thread::sleep_for(100ms);
  CHECK(sched.poll(hw).state == JobState::Queued);
  fake->load = 0.5;
  wait_done(sched, hw);
  CHECK(sched.poll(hw).state == JobState::Done);
}

TEST_CASE("resubmission clears the previous record") {
  TempDir tmp;
  JobStatus old;
  old.state = JobState::Done;
  old.exit_code = 0;
  old.start = "t";
  write_job_status(tmp / "j", old);
  auto* fake = new FakeWorker(local_config(1), 300ms);
  std::vector<std::unique_ptr<Worker>> workers;
  workers.emplace_back(fake);
  Scheduler sched(std::move(workers), {.tick = 5ms});
  Job job;
  job.id = "j";
  job.output_dir = tmp / "j";
  auto h = sched.submit(job);
  CHECK(sched.poll(h).state == JobState::Queued);
  sched.shutdown();
  CHECK(sched.poll(h).state == JobState::Done);
}

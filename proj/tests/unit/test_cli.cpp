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

#include <cmath>
#include <sstream>

#include "automan/cli.hpp"
#include "automan/error.hpp"
#include "automan/remote.hpp"
#include "test_support.hpp"

using namespace automan;
using namespace automan::testing;
namespace fs = std::filesystem;

namespace {

constexpr const char* kCampaign = R"(
simulation_dir = "outputs"
output_dir = "manuscript/figures"

[[problems]]
name = "taylor_green"
[[problems.cases]]
name = "wcsph"
command = "$AUTOMAN_EXE demo-simulate"
params = { scheme = "euler", dt = 0.1 }
[[problems.cases]]
name = "edac"
command = "$AUTOMAN_EXE demo-simulate"
params = { scheme = "heun", dt = 0.1 }
[[problems.recipes]]
type = "compare"
metric = "l1"
labels = ["scheme"]
output = "l1.csv"

[[problems]]
name = "elliptical_drop"
[[problems.cases]]
name = "std_sph"
command = "$AUTOMAN_EXE demo-simulate"
params = { dt = 0.2 }
[[problems.cases]]
name = "std_sph_tensile_correction"
command = "$AUTOMAN_EXE demo-simulate"
params = { dt = 0.25 }
[[problems.recipes]]
type = "compare"
metric = "u"
output = "u.csv"
)";

struct Project {
  TempDir tmp;
  ScopedEnv exe{"AUTOMAN_EXE", std::string(AUTOMAN_EXE_PATH)};
  ScopedCwd cwd{tmp.path()};

  explicit Project(const std::string& campaign = kCampaign) {
    write_text(tmp / "campaign.toml", campaign);
    ClusterConfig cfg = default_cluster_config();
    cfg.workers[0].cores = 2;
    save_cluster_config(tmp / "config.json", cfg);
  }
};

struct Run {
  int rc = -1;
  std::string out, err;
  std::optional<RunReport> report;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "automan");
  args.push_back("--poll-interval");
  args.push_back("0.02");
  std::ostringstream out, err;
  CliSession s{out, err, std::nullopt, {}};
  Run r;
  r.rc = run_cli(args, s);
  r.out = out.str();
  r.err = err.str();
  r.report = s.report;
  return r;
}

int jobs(const Run& r) { return r.report->count(TaskEventKind::Submit, "case:"); }
int recipes(const Run& r) { return r.report->count(TaskEventKind::Submit, "problem:"); }

// Reference decay computed with many classical RK4 steps; independent of the solver.
double rk4_reference(double k, double t, int steps = 20000) {
  double u = 1.0;
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    const double k1 = -k * u;
    const double k2 = -k * (u + h * k1 / 2);
    const double k3 = -k * (u + h * k2 / 2);
    const double k4 = -k * (u + h * k3);
    u += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
  }
  return u;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

TEST_CASE("problem names match loosely") {
  CHECK(problem_name_matches("TaylorGreen", "taylor_green"));
  CHECK(problem_name_matches("TAYLORGREEN", "taylor_green"));
  CHECK(problem_name_matches("taylor-green", "taylor_green"));
  CHECK_FALSE(problem_name_matches("Taylor", "taylor_green"));
}

TEST_CASE("full run, then idempotent rerun") {
  Project proj;
  auto first = cli({});
  CHECK(first.rc == 0);
  CHECK(jobs(first) == 4);
  CHECK(recipes(first) == 2);
  CHECK(first.out.find("0 failed, 0 blocked") != std::string::npos);
  CHECK(fs::exists("manuscript/figures/taylor_green/l1.csv"));
  CHECK(fs::exists("manuscript/figures/elliptical_drop/u.csv"));
  CHECK(fs::exists("outputs/taylor_green/wcsph/results.csv"));

  const auto before = snapshot_tree("manuscript");
  auto second = cli({});
  CHECK(second.rc == 0);
  CHECK(second.report->executed == 0);
  CHECK(jobs(second) == 0);
  CHECK(recipes(second) == 0);
  CHECK(snapshot_tree("manuscript") == before);

  SUBCASE("forcing post-processing for named problems") {
    auto forced = cli({"-f", "TaylorGreen", "EllipticalDrop"});
    CHECK(forced.rc == 0);
    CHECK(jobs(forced) == 0);
    CHECK(recipes(forced) == 2);
  }
  SUBCASE("one problem, any capitalisation") {
    auto one = cli({"-f", "TAYLORGREEN"});
    CHECK(one.rc == 0);
    CHECK(recipes(one) == 1);
    CHECK(one.report->count(TaskEventKind::Submit, "problem:taylor_green") == 1);
  }
}

TEST_CASE("match runs only the selected cases") {
  Project proj;
  auto r = cli({"-m", "*tensile*"});
  CHECK(r.rc == 0);
  CHECK(jobs(r) == 1);
  CHECK(recipes(r) == 0);
  CHECK(r.report->count(TaskEventKind::Submit, "case:elliptical_drop/std_sph_tensile_correction") == 1);
  CHECK_FALSE(fs::exists("outputs/elliptical_drop/std_sph/results.csv"));
  CHECK_FALSE(fs::exists("manuscript"));
}

TEST_CASE("usage errors") {
  Project proj;
  auto unknown = cli({"NoSuchProblem"});
  CHECK(unknown.rc == 2);
  CHECK(unknown.err.find("taylor_green") != std::string::npos);
  CHECK(unknown.err.find("elliptical_drop") != std::string::npos);
  CHECK_FALSE(fs::exists("outputs"));

  CHECK(cli({"-a", "host", "-m", "*"}).rc == 2);
  CHECK(cli({"-a", "host", "-f"}).rc == 2);
  CHECK(cli({"--cores", "2"}).rc == 2);
  CHECK(cli({"--bogus"}).rc == 2);

  write_text("campaign.toml", "simulation_dir = \n");
  auto bad = cli({});
  CHECK(bad.rc == 2);
  CHECK(bad.err.find("campaign.toml:1:") != std::string::npos);
}

TEST_CASE("failures exit 1 and are retried once fixed") {
  Project proj(R"(
simulation_dir = "outputs"
output_dir = "figures"
[[problems]]
name = "p"
[[problems.cases]]
name = "good"
command = "$AUTOMAN_EXE demo-simulate"
[[problems.cases]]
name = "bad"
command = "$AUTOMAN_EXE demo-simulate"
params = { scheme = "rk9" }
)");
  auto r = cli({});
  CHECK(r.rc == 1);
  CHECK(r.report->count(TaskEventKind::Fail, "case:p/bad") == 1);
  CHECK(r.report->count(TaskEventKind::Done, "case:p/good") == 1);
  CHECK(r.report->count(TaskEventKind::Blocked, "problem:p") == 1);
  CHECK(read_text("outputs/p/bad/stderr.txt").find("rk9") != std::string::npos);

  write_text("campaign.toml", read_text("campaign.toml").replace(read_text("campaign.toml").find("rk9"), 3, "heun"));
  auto again = cli({});
  CHECK(again.rc == 0);
  CHECK(jobs(again) == 1);
  CHECK(recipes(again) == 1);
}

TEST_CASE("demo campaign converges at the expected rates") {
  TempDir tmp;
  ScopedEnv exe("AUTOMAN_EXE", std::string(AUTOMAN_EXE_PATH));
  ScopedCwd cwd(tmp.path());
  fs::copy_file(AUTOMAN_DEMO_CAMPAIGN, "campaign.toml");
  auto r = cli({});
  REQUIRE(r.rc == 0);
  CHECK(jobs(r) == 8);
  CHECK(recipes(r) == 1);

  for (auto [scheme, order] : {std::pair{"euler", 1.0}, std::pair{"heun", 2.0}}) {
    std::istringstream in(read_text(fs::path("figures/decay") / (std::string("l1_") + scheme + ".csv")));
    std::string line;
    std::getline(in, line);
    auto header = split(line);
    REQUIRE(header.size() == 5);
    CHECK(header[0] == "t");
    std::vector<double> dts;
    for (std::size_t j = 1; j < header.size(); ++j) dts.push_back(std::stod(header[j].substr(3)));
    std::vector<double> at_one(dts.size(), std::nan(""));
    while (std::getline(in, line)) {
      auto cells = split(line);
      const double t = std::stod(cells[0]);
      for (std::size_t j = 1; j < cells.size(); ++j) {
        if (cells[j].empty()) continue;
        const double dt = dts[j - 1];
        // Independent solver output at this time.
        const auto n = static_cast<int>(std::llround(t / dt));
        const double z = dt;
        const double g = std::string(scheme) == "euler" ? 1 - z : 1 - z + z * z / 2;
        const double expected = std::fabs(std::pow(g, n) - rk4_reference(1.0, t));
        CHECK(std::stod(cells[j]) == doctest::Approx(expected).epsilon(1e-6));
        if (std::fabs(t - 1.0) < 1e-12) at_one[j - 1] = std::stod(cells[j]);
      }
    }
    for (std::size_t j = 1; j < dts.size(); ++j) {
      const double rate = std::log2(at_one[j - 1] / at_one[j]);
      INFO(scheme, " dt=", dts[j]);
      CHECK(rate == doctest::Approx(order).epsilon(0.1));
    }
  }
}

TEST_CASE("-u pushes to remote workers before running") {
  Project proj;
  TempDir remote;
  ScopedEnv ssh("AUTOMAN_SSH", install_fake_ssh(remote.path(), remote / "home").string());
  ClusterConfig cfg = load_cluster_config("config.json");
  WorkerConfig w;
  w.name = w.host = "fakehost";
  w.kind = WorkerKind::Ssh;
  w.remote_root = "mirror";
  w.cores = 1;
  cfg.workers.push_back(w);
  save_cluster_config("config.json", cfg);

  auto ok = cli({"-u", "-m", "wcsph"});
  CHECK(ok.rc == 0);
  CHECK(ok.out.find("update fakehost:") != std::string::npos);
  CHECK(fs::exists(remote / "home" / "mirror" / "campaign.toml"));
  CHECK_FALSE(fs::exists(remote / "home" / "mirror" / "config.json.lock"));

  WorkerConfig dead = w;
  dead.name = dead.host = "unreachable";
  cfg.workers.push_back(dead);
  save_cluster_config("config.json", cfg);
  auto partial = cli({"-u", "-m", "wcsph"});
  CHECK(partial.rc == 1);
  CHECK(partial.out.find("update unreachable: FAILED") != std::string::npos);
  CHECK(partial.out.find("update fakehost:") != std::string::npos);
}

TEST_CASE("-a registers a host through the CLI") {
  Project proj;
  TempDir remote;
  ScopedEnv ssh("AUTOMAN_SSH", install_fake_ssh(remote.path(), remote / "home").string());
  auto r = cli({"-a", "me@fakehost", "--cores", "3"});
  CHECK(r.rc == 0);
  auto cfg = load_cluster_config("config.json");
  REQUIRE(cfg.workers.size() == 2);
  CHECK(cfg.workers[1].cores == 3);
  auto dup = cli({"-a", "me@fakehost", "--cores", "3"});
  CHECK(dup.rc == 2);
  auto dead = cli({"-a", "unreachable"});
  CHECK(dead.rc == 1);
  CHECK(load_cluster_config("config.json").workers.size() == 2);
}

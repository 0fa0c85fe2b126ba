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

#include <filesystem>
#include <iosfwd>
#include <string>

#include "automan/problem.hpp"

namespace automan {

/// Settings of the built-in demo workload: du/dt = -k u with u(0) = 1.
struct DemoParams {
  double decay_rate = 1.0;
  double dt = 0.1;
  double t_final = 1.0;
  /// "euler" (explicit Euler) or "heun" (explicit trapezoidal rule).
  std::string scheme = "euler";
  std::filesystem::path output_dir;
};

/// Series t, u and l1 = |u - exp(-k t)| at t = 0, dt, 2 dt, ... until
/// t_final is reached.
ResultTable demo_solution(const DemoParams& params);

/// Writes results.csv into params.output_dir and echoes the same rows as CSV
/// to `audit`. Returns a process exit code.
int demo_simulate(const DemoParams& params, std::ostream& audit, std::ostream& err);

}  // namespace automan

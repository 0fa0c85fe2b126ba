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

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "automan/task.hpp"

namespace automan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Streams and results of one CLI invocation. Tests read `report` and
/// `scheduler_log` after run_cli() returns.
struct CliSession {
  std::ostream& out;
  std::ostream& err;
  std::optional<RunReport> report;
  std::string scheduler_log;
};

/// `automan [PROBLEM ...] [-f] [-m PATTERN] [-a HOST] [-u] [--config PATH]
/// [--campaign PATH]`, plus the hidden `demo-simulate` subcommand.
/// `args[0]` is the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, CliSession& session);

/// Case-insensitive problem-name comparison that also ignores '_' and '-',
/// so "TaylorGreen" selects "taylor_green".
bool problem_name_matches(std::string_view requested, std::string_view name);

}  // namespace automan

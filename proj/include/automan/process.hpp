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
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace automan {

struct ProcessSpec {
  std::vector<std::string> argv;
  /// Added to (or overriding) the parent's environment.
  std::map<std::string, std::string> env;
  std::optional<std::filesystem::path> stdin_path;
  /// Redirect targets; truncated. Ignored for a stream that is captured.
  std::optional<std::filesystem::path> stdout_path;
  std::optional<std::filesystem::path> stderr_path;
  bool capture_stdout = false;
  bool capture_stderr = false;
};

struct ProcessResult {
  /// Exit status, or 128 + signal number for a signalled child.
  int exit_code = -1;
  bool signaled = false;
  std::string out;
  std::string err;

  bool ok() const { return exit_code == 0; }
};

/// Spawns `spec.argv` (PATH lookup applies) and blocks until it exits.
/// Throws Error if the process cannot be started.
ProcessResult run_process(const ProcessSpec& spec);

}  // namespace automan

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
#include <string>
#include <string_view>
#include <vector>

#include "automan/problem.hpp"

namespace automan {

/// Declarative campaign: the problems to solve and where their simulation
/// outputs and post-processed results go.
///
///     simulation_dir = "outputs"
///     output_dir = "manuscript/figures"
///
///     [[problems]]
///     name = "taylor_green"
///     labels = { scheme = "Scheme" }        # optional display names
///     output_flag = "--output-dir=$output_dir"   # optional
///
///     [[problems.cases]]
///     name = "std_sph"
///     command = "pysph run taylor_green"
///     n_core = 1
///     n_thread = 2
///     params = { scheme = "wcsph", nx = 50 }   # true means a bare --flag
///
///     [[problems.sweeps]]                  # cartesian product of `vary`
///     name = "{scheme}_nx_{nx}"
///     command = "pysph run taylor_green"
///     params = { perturb = 0.2 }
///     vary = { scheme = ["wcsph", "edac"], nx = [25, 50] }
///
///     [[problems.recipes]]
///     type = "compare"                     # or "command"
///     metric = "l1"
///     where = { nx = 50 }                  # or match = "*_nx_50"
///     labels = ["scheme"]
///     output = "l1_error_all.csv"
///
/// Parameters keep the order in which they are written.
struct CampaignFile {
  std::filesystem::path simulation_dir;
  std::filesystem::path output_dir;
  std::vector<ProblemSpec> problems;
};

/// Throws ParseError with `file:line:column` context.
CampaignFile parse_campaign(std::string_view text, std::string_view source_name = "campaign.toml");
CampaignFile load_campaign(const std::filesystem::path& path);

}  // namespace automan

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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "automan/case.hpp"

namespace automan {

/// Name of the per-case results file read by load_results().
inline constexpr std::string_view kResultsFile = "results.csv";

/// Marker written into a problem's output directory once all of its
/// recipes succeeded.
inline constexpr std::string_view kRecipesDoneMarker = ".automan_recipes_done";

/// External command run after all cases of a problem finished. It receives
/// AUTOMAN_SIM_DIR and AUTOMAN_OUTPUT_DIR in its environment.
struct CommandRecipe {
  std::vector<std::string> argv;
};

/// Writes a CSV comparing one series across a selection of cases.
struct SeriesComparison {
  std::string metric;
  std::string x = "t";
  /// Either parameter criteria or a case-name pattern.
  std::variant<Criteria, std::string> filter = Criteria{};
  std::vector<std::string> label_keys;
  /// Relative to the problem's output directory.
  std::filesystem::path output_file;
  /// Optional reference results, relative to the problem's simulation
  /// directory; appended as the "exact" column.
  std::optional<std::filesystem::path> exact;
};

using Recipe = std::variant<CommandRecipe, SeriesComparison>;

/// A named group of cases plus the post-processing that compares them.
/// Case roots live under `sim_root/name`, recipe outputs under
/// `output_root/name`.
struct ProblemSpec {
  std::string name;
  std::filesystem::path sim_root;
  std::filesystem::path output_root;
  std::vector<CaseSpec> cases;
  std::vector<Recipe> recipes;
  LabelMap labels;
  std::string output_flag = std::string(kDefaultOutputFlag);
};

/// Throws InvalidArgument when `p` breaks a ProblemSpec invariant.
void validate(const ProblemSpec& p);

std::filesystem::path problem_input_path(const ProblemSpec& p,
                                         std::span<const std::string> segments = {});
std::filesystem::path problem_output_path(const ProblemSpec& p,
                                          std::span<const std::string> segments = {});

/// Builds a case rooted at `sim_root/name/case_name`.
CaseSpec make_case(const ProblemSpec& p, std::string_view case_name, std::string base_command,
                   JobInfo job_info = {}, ParamList params = {});

struct CommandEntry {
  std::string case_name;
  std::string command;
  JobInfo job_info;
  std::filesystem::path output_dir;

  friend bool operator==(const CommandEntry&, const CommandEntry&) = default;
};

/// One fully rendered command per case, in declaration order.
std::vector<CommandEntry> get_commands(const ProblemSpec& p);

/// Named numeric series, in file column order.
class ResultTable {
 public:
  ResultTable() = default;
  explicit ResultTable(std::vector<std::pair<std::string, std::vector<double>>> series,
                       std::filesystem::path source = {});

  const std::vector<std::pair<std::string, std::vector<double>>>& series() const { return series_; }
  const std::filesystem::path& source() const { return source_; }

  bool has(std::string_view name) const;
  /// Throws InvalidArgument if absent.
  const std::vector<double>& at(std::string_view name) const;
  std::size_t rows() const { return series_.empty() ? 0 : series_.front().second.size(); }

  friend bool operator==(const ResultTable& a, const ResultTable& b) { return a.series_ == b.series_; }

 private:
  std::vector<std::pair<std::string, std::vector<double>>> series_;
  std::filesystem::path source_;
};

ResultTable parse_results_csv(std::string_view text, const std::filesystem::path& source = {});
ResultTable read_results_csv(const std::filesystem::path& path);
/// Values are written with round-trip precision.
void write_results_csv(const std::filesystem::path& path, const ResultTable& table);

/// Reads `results.csv` under the case root. Throws ResultsMissing or
/// ParseError.
ResultTable load_results(const CaseSpec& c);

/// A comparison of one metric across cases. Rows are aligned on the union of
/// the x values of every input; a cell is empty when that input has no sample
/// at the row's x.
struct ComparisonTable {
  std::string x_name;
  std::vector<double> x;
  std::vector<std::string> labels;
  std::vector<std::vector<std::optional<double>>> columns;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

ComparisonTable compare_runs(const ProblemSpec& p, std::span<const CaseSpec> cases,
                             std::string_view metric, std::span<const std::string> label_keys,
                             const ResultTable* exact = nullptr, std::string_view x = "t");

/// Selects the cases a SeriesComparison recipe refers to.
std::vector<CaseSpec> select_cases(const ProblemSpec& p, const SeriesComparison& recipe);

/// Creates the output directory and executes the recipes in order. Throws
/// RecipeFailed on the first failing recipe; outputs written so far stay.
void run_recipes(const ProblemSpec& p);

/// Library-level problem contract: subclasses declare cases and arbitrary
/// post-processing in code. ProblemSpec-based problems use SpecProblem.
class Problem {
 public:
  Problem(std::filesystem::path sim_root, std::filesystem::path output_root)
      : sim_root_(std::move(sim_root)), output_root_(std::move(output_root)) {}
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::vector<CaseSpec> cases() const = 0;
  /// Post-processing; runs once every case is complete.
  virtual void run() = 0;
  virtual std::string output_flag() const { return std::string(kDefaultOutputFlag); }
  virtual std::vector<CommandEntry> get_commands() const;

  std::filesystem::path input_path(std::span<const std::string> segments = {}) const;
  std::filesystem::path output_path(std::span<const std::string> segments = {}) const;
  void make_output_directory() const;

  const std::filesystem::path& sim_root() const { return sim_root_; }
  const std::filesystem::path& output_root() const { return output_root_; }

 private:
  std::filesystem::path sim_root_;
  std::filesystem::path output_root_;
};

class SpecProblem final : public Problem {
 public:
  explicit SpecProblem(ProblemSpec spec);

  std::string name() const override { return spec_.name; }
  std::vector<CaseSpec> cases() const override { return spec_.cases; }
  void run() override { run_recipes(spec_); }
  std::string output_flag() const override { return spec_.output_flag; }
  std::vector<CommandEntry> get_commands() const override { return automan::get_commands(spec_); }

  const ProblemSpec& spec() const { return spec_; }

 private:
  ProblemSpec spec_;
};

}  // namespace automan

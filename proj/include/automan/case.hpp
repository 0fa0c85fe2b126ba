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
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace automan {

/// Marker for a parameter that is rendered as a bare `--flag`.
struct FlagOnly {
  friend bool operator==(FlagOnly, FlagOnly) { return true; }
};

/// Renders a finite double with the shortest representation that round-trips.
/// Plain decimal notation is used for magnitudes in [1e-4, 1e15) and zero,
/// scientific notation otherwise.
std::string format_number(double value);

/// Value of one case parameter: a number, a verbatim string or a flag.
class ParamValue {
 public:
  ParamValue(double number);
  ParamValue(int number) : ParamValue(static_cast<double>(number)) {}
  ParamValue(long number) : ParamValue(static_cast<double>(number)) {}
  ParamValue(long long number) : ParamValue(static_cast<double>(number)) {}
  ParamValue(std::string text) : value_(std::move(text)) {}
  ParamValue(const char* text) : value_(std::string(text)) {}
  ParamValue(FlagOnly) : value_(FlagOnly{}) {}

  static ParamValue flag() { return ParamValue(FlagOnly{}); }

  bool is_number() const { return std::holds_alternative<double>(value_); }
  bool is_text() const { return std::holds_alternative<std::string>(value_); }
  bool is_flag() const { return std::holds_alternative<FlagOnly>(value_); }

  double number() const { return std::get<double>(value_); }
  const std::string& text() const { return std::get<std::string>(value_); }

  /// Canonical string of the value; empty for flags.
  std::string render() const;

  /// Same kind and same canonical rendering.
  friend bool operator==(const ParamValue& a, const ParamValue& b);

 private:
  std::variant<double, std::string, FlagOnly> value_;
};

using Param = std::pair<std::string, ParamValue>;
using ParamList = std::vector<Param>;

struct JobInfo {
  int n_core = 1;
  int n_thread = 1;

  friend bool operator==(const JobInfo&, const JobInfo&) = default;
};

/// True when `key` matches `[A-Za-z_][A-Za-z0-9_]*`.
bool is_identifier(std::string_view key);

/// One parametrized simulation invocation writing into its own directory.
/// Immutable once constructed; the constructor enforces the invariants.
class CaseSpec {
 public:
  CaseSpec(std::filesystem::path root, std::string base_command,
           JobInfo job_info = {}, ParamList params = {});

  const std::filesystem::path& root() const { return root_; }
  const std::string& base_command() const { return base_command_; }
  const JobInfo& job_info() const { return job_info_; }
  const ParamList& params() const { return params_; }
  const std::string& name() const { return name_; }

  /// Value for `key`, or nullptr.
  const ParamValue* find(std::string_view key) const;

 private:
  std::filesystem::path root_;
  std::string base_command_;
  JobInfo job_info_;
  ParamList params_;
  std::string name_;
};

/// Display-name overrides for parameter keys (e.g. alpha -> "$\alpha$").
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::map<std::string, std::string, std::less<>> overrides)
      : overrides_(std::move(overrides)) {}
  LabelMap(std::initializer_list<std::pair<const std::string, std::string>> overrides)
      : overrides_(overrides) {}

  void set(std::string key, std::string label) { overrides_[std::move(key)] = std::move(label); }
  const std::map<std::string, std::string, std::less<>>& overrides() const { return overrides_; }

 private:
  std::map<std::string, std::string, std::less<>> overrides_;
};

inline constexpr std::string_view kOutputDirPlaceholder = "$output_dir";
inline constexpr std::string_view kDefaultOutputFlag = "--output-dir=$output_dir";

std::string render_args(const CaseSpec& c);

/// Full command line for `c`. `$output_dir` in the base command is replaced
/// by `output_dir`; when the base command has no placeholder, `output_flag`
/// (itself expanded the same way) is appended after the arguments.
std::string render_command(const CaseSpec& c, const std::filesystem::path& output_dir,
                           std::string_view output_flag = kDefaultOutputFlag);

std::string case_name(const CaseSpec& c);

std::filesystem::path input_path(const CaseSpec& c,
                                 std::span<const std::string> segments = {});

template <typename... Segments>
  requires(sizeof...(Segments) > 0 &&
           (std::is_constructible_v<std::filesystem::path, const Segments&> && ...))
std::filesystem::path input_path(const CaseSpec& c, const Segments&... segments) {
  std::filesystem::path out = c.root();
  ((out /= segments), ...);
  return out;
}

std::string render_parameter(const LabelMap& labels, std::string_view key);

/// Legend text such as "nx=50, scheme=wcsph". Throws InvalidArgument for a
/// key the case does not carry.
std::string get_labels(const CaseSpec& c, const LabelMap& labels,
                       std::span<const std::string> keys);

using Criteria = ParamList;

std::vector<CaseSpec> filter_cases(std::span<const CaseSpec> cases, const Criteria& criteria);

/// One entry per mention in `names`, in that order. Throws InvalidArgument
/// when a name matches no case.
std::vector<CaseSpec> filter_by_name(std::span<const CaseSpec> cases,
                                     std::span<const std::string> names);

/// Shell-style wildcard match (`*`, `?`, `[seq]`), case-sensitive.
bool name_matches(std::string_view pattern, std::string_view name);

std::vector<CaseSpec> match_pattern(std::span<const CaseSpec> cases, std::string_view pattern);

}  // namespace automan

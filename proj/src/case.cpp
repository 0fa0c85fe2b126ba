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

#include "automan/case.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <fnmatch.h>

#include "automan/error.hpp"
#include "automan/util.hpp"

namespace automan {

namespace fs = std::filesystem;

std::string format_number(double value) {
  if (!std::isfinite(value)) {
    throw InvalidArgument("non-finite number cannot be rendered");
  }
  if (value == 0.0) return "0";
  const double mag = std::fabs(value);
  const auto fmt = (mag >= 1e-4 && mag < 1e15) ? std::chars_format::fixed
                                               : std::chars_format::scientific;
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, fmt);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf, end);
}

ParamValue::ParamValue(double number) : value_(number) {
  if (!std::isfinite(number)) {
    throw InvalidArgument("parameter values must be finite numbers");
  }
  // -0 and 0 share one canonical form.
  if (number == 0.0) value_ = 0.0;
}

std::string ParamValue::render() const {
  if (is_number()) return format_number(number());
  if (is_text()) return text();
  return {};
}

bool operator==(const ParamValue& a, const ParamValue& b) {
  if (a.value_.index() != b.value_.index()) return false;
  return a.render() == b.render();
}

bool is_identifier(std::string_view key) {
  if (key.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(key.front())) return false;
  for (char c : key.substr(1)) {
    if (!alpha(c) && !digit(c)) return false;
  }
  return true;
}

namespace {

std::string final_component(const fs::path& root) {
  std::string generic = root.generic_string();
  while (generic.size() > 1 && generic.back() == '/') generic.pop_back();
  return fs::path(generic).filename().string();
}

}  // namespace

CaseSpec::CaseSpec(fs::path root, std::string base_command, JobInfo job_info, ParamList params)
    : root_(std::move(root)),
      base_command_(std::move(base_command)),
      job_info_(job_info),
      params_(std::move(params)),
      name_(final_component(root_)) {
  if (name_.empty() || name_ == "." || name_ == ".." || name_ == "/") {
    throw InvalidArgument(fmt::format("case root '{}' has no usable final component",
                                      root_.string()));
  }
  if (job_info_.n_core < 1 || job_info_.n_thread < 1) {
    throw InvalidArgument(fmt::format("case '{}': n_core and n_thread must be >= 1", name_));
  }
  std::set<std::string_view> seen;
  for (const auto& [key, value] : params_) {
    if (!is_identifier(key)) {
      throw InvalidArgument(fmt::format("case '{}': '{}' is not a valid parameter name", name_, key));
    }
    if (!seen.insert(key).second) {
      throw InvalidArgument(fmt::format("case '{}': duplicate parameter '{}'", name_, key));
    }
  }
}

const ParamValue* CaseSpec::find(std::string_view key) const {
  for (const auto& [k, v] : params_) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string render_args(const CaseSpec& c) {
  std::string out;
  for (const auto& [key, value] : c.params()) {
    if (!out.empty()) out += ' ';
    out += "--";
    out += replace_all(key, "_", "-");
    if (!value.is_flag()) {
      out += '=';
      out += value.render();
    }
  }
  return out;
}

std::string render_command(const CaseSpec& c, const fs::path& output_dir,
                           std::string_view output_flag) {
  const std::string dir = output_dir.string();
  const bool has_placeholder = c.base_command().find(kOutputDirPlaceholder) != std::string::npos;
  std::string out = replace_all(c.base_command(), kOutputDirPlaceholder, dir);
  auto append = [&out](const std::string& piece) {
    if (piece.empty()) return;
    if (!out.empty()) out += ' ';
    out += piece;
  };
  append(render_args(c));
  if (!has_placeholder) append(replace_all(std::string(output_flag), kOutputDirPlaceholder, dir));
  return out;
}

std::string case_name(const CaseSpec& c) { return c.name(); }

fs::path input_path(const CaseSpec& c, std::span<const std::string> segments) {
  fs::path out = c.root();
  for (const auto& s : segments) out /= s;
  return out;
}

std::string render_parameter(const LabelMap& labels, std::string_view key) {
  const auto& o = labels.overrides();
  if (auto it = o.find(key); it != o.end()) return it->second;
  return std::string(key);
}

std::string get_labels(const CaseSpec& c, const LabelMap& labels,
                       std::span<const std::string> keys) {
  std::string out;
  for (const auto& key : keys) {
    const ParamValue* value = c.find(key);
    if (value == nullptr) {
      throw InvalidArgument(fmt::format("case '{}' has no parameter '{}'", c.name(), key));
    }
    if (!out.empty()) out += ", ";
    out += render_parameter(labels, key);
    if (!value->is_flag()) {
      out += '=';
      out += value->render();
    }
  }
  return out;
}

std::vector<CaseSpec> filter_cases(std::span<const CaseSpec> cases, const Criteria& criteria) {
  std::vector<CaseSpec> out;
  for (const auto& c : cases) {
    bool keep = true;
    for (const auto& [key, wanted] : criteria) {
      const ParamValue* have = c.find(key);
      if (have == nullptr || !(*have == wanted)) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(c);
  }
  return out;
}

std::vector<CaseSpec> filter_by_name(std::span<const CaseSpec> cases,
                                     std::span<const std::string> names) {
  std::vector<CaseSpec> out;
  for (const auto& name : names) {
    bool found = false;
    for (const auto& c : cases) {
      if (c.name() == name) {
        out.push_back(c);
        found = true;
      }
    }
    if (!found) throw InvalidArgument(fmt::format("no case named '{}'", name));
  }
  return out;
}

bool name_matches(std::string_view pattern, std::string_view name) {
  return ::fnmatch(std::string(pattern).c_str(), std::string(name).c_str(), 0) == 0;
}

std::vector<CaseSpec> match_pattern(std::span<const CaseSpec> cases, std::string_view pattern) {
  std::vector<CaseSpec> out;
  for (const auto& c : cases) {
    if (name_matches(pattern, c.name())) out.push_back(c);
  }
  return out;
}

}  // namespace automan

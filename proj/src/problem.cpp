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

#include "automan/problem.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "automan/error.hpp"
#include "automan/process.hpp"
#include "automan/util.hpp"

namespace automan {

namespace fs = std::filesystem;

namespace {

bool is_directory_safe(std::string_view name) {
  return !name.empty() && name != "." && name != ".." &&
         name.find_first_of("/\\") == std::string_view::npos;
}

fs::path join(fs::path base, std::span<const std::string> segments) {
  for (const auto& s : segments) base /= s;
  return base;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record; double quotes delimit fields that contain commas.
std::vector<std::string> split_record(std::string_view line, std::size_t line_no,
                                      const fs::path& source) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else {
      field += ch;
    }
  }
  if (quoted) {
    throw ParseError(fmt::format("{}: row {}: unterminated quote", source.string(), line_no));
  }
  fields.push_back(was_quoted ? field : std::string(trim(field)));
  return fields;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos &&
      trim(text).size() == text.size()) {
    return std::string(text);
  }
  return "\"" + replace_all(std::string(text), "\"", "\"\"") + "\"";
}

std::string round_trip(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

void validate(const ProblemSpec& p) {
  if (!is_directory_safe(p.name)) {
    throw InvalidArgument(fmt::format("problem name '{}' is not a valid directory name", p.name));
  }
  const fs::path base = (p.sim_root / p.name).lexically_normal();
  std::set<std::string> roots;
  for (const auto& c : p.cases) {
    const fs::path expected = (base / c.name()).lexically_normal();
    if (c.root().lexically_normal() != expected) {
      throw InvalidArgument(fmt::format("problem '{}': case root '{}' is not '{}'", p.name,
                                        c.root().string(), expected.string()));
    }
    if (!roots.insert(expected.generic_string()).second) {
      throw InvalidArgument(
          fmt::format("problem '{}': duplicate case root '{}'", p.name, c.root().string()));
    }
  }
  for (const auto& r : p.recipes) {
    if (const auto* cmp = std::get_if<SeriesComparison>(&r)) {
      if (!is_contained_relative(cmp->output_file)) {
        throw InvalidArgument(fmt::format(
            "problem '{}': recipe output '{}' must stay inside the output directory", p.name,
            cmp->output_file.string()));
      }
      if (cmp->exact && !is_contained_relative(*cmp->exact)) {
        throw InvalidArgument(fmt::format(
            "problem '{}': exact results '{}' must stay inside the simulation directory", p.name,
            cmp->exact->string()));
      }
      if (cmp->metric.empty()) {
        throw InvalidArgument(fmt::format("problem '{}': comparison without a metric", p.name));
      }
    } else if (std::get<CommandRecipe>(r).argv.empty()) {
      throw InvalidArgument(fmt::format("problem '{}': empty recipe command", p.name));
    }
  }
}

fs::path problem_input_path(const ProblemSpec& p, std::span<const std::string> segments) {
  return join(p.sim_root / p.name, segments);
}

fs::path problem_output_path(const ProblemSpec& p, std::span<const std::string> segments) {
  return join(p.output_root / p.name, segments);
}

CaseSpec make_case(const ProblemSpec& p, std::string_view case_name, std::string base_command,
                   JobInfo job_info, ParamList params) {
  if (!is_directory_safe(case_name)) {
    throw InvalidArgument(fmt::format("case name '{}' is not a valid directory name", case_name));
  }
  return CaseSpec(p.sim_root / p.name / std::string(case_name), std::move(base_command), job_info,
                  std::move(params));
}

std::vector<CommandEntry> get_commands(const ProblemSpec& p) {
  std::vector<CommandEntry> out;
  out.reserve(p.cases.size());
  for (const auto& c : p.cases) {
    out.push_back({c.name(), render_command(c, c.root(), p.output_flag), c.job_info(), c.root()});
  }
  return out;
}

ResultTable::ResultTable(std::vector<std::pair<std::string, std::vector<double>>> series,
                         fs::path source)
    : series_(std::move(series)), source_(std::move(source)) {
  std::set<std::string_view> names;
  for (const auto& [name, values] : series_) {
    if (!names.insert(name).second) {
      throw InvalidArgument(fmt::format("duplicate series '{}'", name));
    }
    if (values.size() != series_.front().second.size()) {
      throw InvalidArgument(fmt::format("series '{}' has {} values, expected {}", name,
                                        values.size(), series_.front().second.size()));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw InvalidArgument(fmt::format("series '{}' has a non-finite value", name));
    }
  }
}

bool ResultTable::has(std::string_view name) const {
  return std::any_of(series_.begin(), series_.end(), [&](const auto& s) { return s.first == name; });
}

const std::vector<double>& ResultTable::at(std::string_view name) const {
  for (const auto& [n, values] : series_) {
    if (n == name) return values;
  }
  throw InvalidArgument(fmt::format("{}: no series named '{}'", source_.string(), name));
}

ResultTable parse_results_csv(std::string_view text, const fs::path& source) {
  std::vector<std::pair<std::string, std::vector<double>>> series;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no, source);
    if (!have_header) {
      std::set<std::string> seen;
      for (auto& f : fields) {
        if (f.empty()) throw ParseError(fmt::format("{}: row {}: empty column name", source.string(), line_no));
        if (!seen.insert(f).second) {
          throw ParseError(fmt::format("{}: row {}: duplicate column '{}'", source.string(), line_no, f));
        }
        series.emplace_back(std::move(f), std::vector<double>{});
      }
      have_header = true;
      continue;
    }
    if (fields.size() != series.size()) {
      throw ParseError(fmt::format("{}: row {}: expected {} fields, found {}", source.string(),
                                   line_no, series.size(), fields.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(fmt::format("{}: row {}: '{}' is not a finite number", source.string(),
                                     line_no, f));
      }
      series[i].second.push_back(v);
    }
  }
  if (!have_header) throw ParseError(fmt::format("{}: empty results file", source.string()));
  return ResultTable(std::move(series), source);
}

ResultTable read_results_csv(const fs::path& path) {
  return parse_results_csv(read_file(path), path);
}

void write_results_csv(const fs::path& path, const ResultTable& table) {
  std::string out;
  const auto& series = table.series();
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i) out += ',';
    out += csv_field(series[i].first);
  }
  out += '\n';
  for (std::size_t row = 0; row < table.rows(); ++row) {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (i) out += ',';
      out += round_trip(series[i].second[row]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

ResultTable load_results(const CaseSpec& c) {
  const fs::path path = input_path(c, std::string(kResultsFile));
  if (!fs::exists(path)) {
    throw ResultsMissing(fmt::format("results missing for case '{}' ({})", c.name(), path.string()));
  }
  return read_results_csv(path);
}

std::string ComparisonTable::to_csv() const {
  std::string out = csv_field(x_name);
  for (const auto& l : labels) out += "," + csv_field(l);
  out += '\n';
  for (std::size_t row = 0; row < x.size(); ++row) {
    out += round_trip(x[row]);
    for (const auto& col : columns) {
      out += ',';
      if (col[row]) out += round_trip(*col[row]);
    }
    out += '\n';
  }
  return out;
}

void ComparisonTable::write_csv(const fs::path& path) const { write_file_atomic(path, to_csv()); }

namespace {

struct Curve {
  std::string label;
  const std::vector<double>* x;
  const std::vector<double>* y;
};

void check_increasing(const std::vector<double>& x, std::string_view who, std::string_view x_name) {
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) {
      throw InvalidArgument(
          fmt::format("{}: series '{}' must be strictly increasing (row {})", who, x_name, i + 1));
    }
  }
}

}  // namespace

ComparisonTable compare_runs(const ProblemSpec& p, std::span<const CaseSpec> cases,
                             std::string_view metric, std::span<const std::string> label_keys,
                             const ResultTable* exact, std::string_view x) {
  std::vector<ResultTable> tables;
  tables.reserve(cases.size());
  std::vector<Curve> curves;
  std::set<std::string> seen_labels;
  for (const auto& c : cases) {
    tables.push_back(load_results(c));
    const ResultTable& t = tables.back();
    for (std::string_view needed : {x, metric}) {
      if (!t.has(needed)) {
        throw InvalidArgument(
            fmt::format("case '{}' has no series '{}' in its results", c.name(), needed));
      }
    }
    check_increasing(t.at(x), c.name(), x);
    std::string label = label_keys.empty() ? c.name() : get_labels(c, p.labels, label_keys);
    if (!seen_labels.insert(label).second) {
      throw InvalidArgument(fmt::format("comparison column '{}' is not unique", label));
    }
  }
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::string label = label_keys.empty() ? cases[i].name() : get_labels(cases[i], p.labels, label_keys);
    curves.push_back({std::move(label), &tables[i].at(x), &tables[i].at(metric)});
  }
  if (exact != nullptr) {
    for (std::string_view needed : {x, metric}) {
      if (!exact->has(needed)) {
        throw InvalidArgument(fmt::format("exact results have no series '{}'", needed));
      }
    }
    check_increasing(exact->at(x), "exact", x);
    curves.push_back({"exact", &exact->at(x), &exact->at(metric)});
  }

  ComparisonTable out;
  out.x_name = std::string(x);
  for (const auto& c : curves) out.x.insert(out.x.end(), c.x->begin(), c.x->end());
  std::sort(out.x.begin(), out.x.end());
  out.x.erase(std::unique(out.x.begin(), out.x.end()), out.x.end());
  for (const auto& c : curves) {
    out.labels.push_back(c.label);
    std::vector<std::optional<double>> column(out.x.size());
    for (std::size_t i = 0; i < c.x->size(); ++i) {
      auto it = std::lower_bound(out.x.begin(), out.x.end(), (*c.x)[i]);
      column[static_cast<std::size_t>(it - out.x.begin())] = (*c.y)[i];
    }
    out.columns.push_back(std::move(column));
  }
  return out;
}

std::vector<CaseSpec> select_cases(const ProblemSpec& p, const SeriesComparison& recipe) {
  if (const auto* criteria = std::get_if<Criteria>(&recipe.filter)) {
    return filter_cases(p.cases, *criteria);
  }
  return match_pattern(p.cases, std::get<std::string>(recipe.filter));
}

void run_recipes(const ProblemSpec& p) {
  validate(p);
  const fs::path out_dir = problem_output_path(p);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < p.recipes.size(); ++i) {
    const Recipe& recipe = p.recipes[i];
    if (const auto* cmd = std::get_if<CommandRecipe>(&recipe)) {
      ProcessSpec spec;
      spec.argv = cmd->argv;
      spec.env = {{"AUTOMAN_SIM_DIR", problem_input_path(p).string()},
                  {"AUTOMAN_OUTPUT_DIR", out_dir.string()}};
      ProcessResult res;
      try {
        res = run_process(spec);
      } catch (const Error& e) {
        throw RecipeFailed(fmt::format("problem '{}': recipe {}: {}", p.name, i + 1, e.what()));
      }
      if (!res.ok()) {
        throw RecipeFailed(fmt::format("problem '{}': recipe {} ({}) exited with status {}", p.name,
                                       i + 1, shell_join(cmd->argv), res.exit_code));
      }
      continue;
    }
    const auto& cmp = std::get<SeriesComparison>(recipe);
    try {
      std::optional<ResultTable> exact;
      if (cmp.exact) exact = read_results_csv(problem_input_path(p) / *cmp.exact);
      auto cases = select_cases(p, cmp);
      auto table = compare_runs(p, cases, cmp.metric, cmp.label_keys,
                                exact ? &*exact : nullptr, cmp.x);
      table.write_csv(out_dir / cmp.output_file);
    } catch (const RecipeFailed&) {
      throw;
    } catch (const Error& e) {
      throw RecipeFailed(fmt::format("problem '{}': comparison '{}': {}", p.name,
                                     cmp.output_file.string(), e.what()));
    }
  }
}

std::vector<CommandEntry> Problem::get_commands() const {
  std::vector<CommandEntry> out;
  for (const auto& c : cases()) {
    out.push_back({c.name(), render_command(c, c.root(), output_flag()), c.job_info(), c.root()});
  }
  return out;
}

fs::path Problem::input_path(std::span<const std::string> segments) const {
  return join(sim_root_ / name(), segments);
}

fs::path Problem::output_path(std::span<const std::string> segments) const {
  return join(output_root_ / name(), segments);
}

void Problem::make_output_directory() const { fs::create_directories(output_path()); }

SpecProblem::SpecProblem(ProblemSpec spec)
    : Problem(spec.sim_root, spec.output_root), spec_(std::move(spec)) {
  validate(spec_);
}

}  // namespace automan

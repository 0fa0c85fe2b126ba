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

#include "automan/campaign.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <toml.hpp>

#include "automan/error.hpp"
#include "automan/util.hpp"

namespace automan {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  explicit Reader(std::string_view source) : source_(source) {}

  [[noreturn]] void fail(const toml::node* node, std::string_view message) const {
    if (node != nullptr && node->source().begin) {
      throw ParseError(fmt::format("{}:{}:{}: {}", source_, node->source().begin.line,
                                   node->source().begin.column, message));
    }
    throw ParseError(fmt::format("{}: {}", source_, message));
  }

  void only_keys(const toml::table& t, std::initializer_list<std::string_view> allowed,
                 std::string_view where) const {
    for (const auto& [key, node] : t) {
      if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
        fail(&node, fmt::format("unknown key '{}' in {}", key.str(), where));
      }
    }
  }

  std::string string(const toml::table& t, std::string_view key, std::string_view where) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) fail(&t, fmt::format("{} needs '{}'", where, key));
    if (!n->is_string()) fail(n, fmt::format("'{}' must be a string", key));
    return n->value<std::string>().value();
  }

  std::optional<std::string> opt_string(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) return std::nullopt;
    if (!n->is_string()) fail(n, fmt::format("'{}' must be a string", key));
    return n->value<std::string>();
  }

  int positive(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) return 1;
    if (!n->is_integer() || n->value<int64_t>().value() < 1) {
      fail(n, fmt::format("'{}' must be a positive integer", key));
    }
    return static_cast<int>(n->value<int64_t>().value());
  }

  const toml::table* opt_table(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) return nullptr;
    if (!n->is_table()) fail(n, fmt::format("'{}' must be a table", key));
    return n->as_table();
  }

  std::vector<const toml::table*> tables(const toml::table& t, std::string_view key) const {
    std::vector<const toml::table*> out;
    const toml::node* n = t.get(key);
    if (n == nullptr) return out;
    const toml::array* arr = n->as_array();
    if (arr == nullptr) fail(n, fmt::format("'{}' must be an array of tables", key));
    for (const auto& item : *arr) {
      if (!item.is_table()) fail(&item, fmt::format("entries of '{}' must be tables", key));
      out.push_back(item.as_table());
    }
    return out;
  }

  std::vector<std::string> strings(const toml::table& t, std::string_view key) const {
    std::vector<std::string> out;
    const toml::node* n = t.get(key);
    if (n == nullptr) return out;
    const toml::array* arr = n->as_array();
    if (arr == nullptr) fail(n, fmt::format("'{}' must be an array of strings", key));
    for (const auto& item : *arr) {
      if (!item.is_string()) fail(&item, fmt::format("entries of '{}' must be strings", key));
      out.push_back(item.value<std::string>().value());
    }
    return out;
  }

  // Table entries in the order they appear in the file.
  static std::vector<std::pair<std::string, const toml::node*>> ordered(const toml::table& t) {
    std::vector<std::pair<std::string, const toml::node*>> out;
    for (const auto& [key, node] : t) out.emplace_back(std::string(key.str()), &node);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      const auto& pa = a.second->source().begin;
      const auto& pb = b.second->source().begin;
      return std::pair(pa.line, pa.column) < std::pair(pb.line, pb.column);
    });
    return out;
  }

  ParamValue value(const toml::node& n, std::string_view key) const {
    if (n.is_integer()) return ParamValue(static_cast<double>(n.value<int64_t>().value()));
    if (n.is_floating_point()) {
      double v = n.value<double>().value();
      if (!std::isfinite(v)) fail(&n, fmt::format("'{}' must be finite", key));
      return ParamValue(v);
    }
    if (n.is_string()) return ParamValue(n.value<std::string>().value());
    if (n.is_boolean()) {
      if (!n.value<bool>().value()) {
        fail(&n, fmt::format("'{}' = false: omit the parameter instead; true renders a bare flag", key));
      }
      return ParamValue::flag();
    }
    fail(&n, fmt::format("'{}' must be a number, string or true", key));
  }

  ParamList params(const toml::table* t) const {
    ParamList out;
    if (t == nullptr) return out;
    for (const auto& [key, node] : ordered(*t)) {
      if (!is_identifier(key)) fail(node, fmt::format("'{}' is not a valid parameter name", key));
      out.emplace_back(key, value(*node, key));
    }
    return out;
  }

 private:
  std::string source_;
};

void read_case(const Reader& r, ProblemSpec& p, const toml::table& t) {
  r.only_keys(t, {"name", "command", "n_core", "n_thread", "params"}, "a case");
  const std::string name = r.string(t, "name", "a case");
  try {
    p.cases.push_back(make_case(p, name, r.string(t, "command", "a case"),
                                {r.positive(t, "n_core"), r.positive(t, "n_thread")},
                                r.params(r.opt_table(t, "params"))));
  } catch (const InvalidArgument& e) {
    r.fail(&t, e.what());
  }
}

void read_sweep(const Reader& r, ProblemSpec& p, const toml::table& t) {
  r.only_keys(t, {"name", "command", "n_core", "n_thread", "params", "vary"}, "a sweep");
  const std::string name_template = r.string(t, "name", "a sweep");
  const std::string command = r.string(t, "command", "a sweep");
  const JobInfo info{r.positive(t, "n_core"), r.positive(t, "n_thread")};
  const ParamList fixed = r.params(r.opt_table(t, "params"));
  const toml::table* vary = r.opt_table(t, "vary");
  if (vary == nullptr || vary->empty()) r.fail(&t, "a sweep needs a non-empty 'vary' table");

  std::vector<std::pair<std::string, std::vector<ParamValue>>> axes;
  for (const auto& [key, node] : Reader::ordered(*vary)) {
    if (!is_identifier(key)) r.fail(node, fmt::format("'{}' is not a valid parameter name", key));
    const toml::array* arr = node->as_array();
    if (arr == nullptr || arr->empty()) r.fail(node, fmt::format("'{}' must be a non-empty array", key));
    std::vector<ParamValue> values;
    for (const auto& item : *arr) values.push_back(r.value(item, key));
    axes.emplace_back(key, std::move(values));
  }

  // First axis varies slowest.
  std::vector<std::size_t> index(axes.size(), 0);
  for (;;) {
    ParamList params = fixed;
    std::string name = name_template;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const ParamValue& v = axes[a].second[index[a]];
      params.emplace_back(axes[a].first, v);
      name = replace_all(name, "{" + axes[a].first + "}", v.is_flag() ? axes[a].first : v.render());
    }
    try {
      p.cases.push_back(make_case(p, name, command, info, std::move(params)));
    } catch (const InvalidArgument& e) {
      r.fail(&t, e.what());
    }
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++index[a] < axes[a].second.size()) break;
      index[a] = 0;
      if (a == 0) return;
    }
  }
}

Recipe read_recipe(const Reader& r, const toml::table& t) {
  const std::string type = r.string(t, "type", "a recipe");
  if (type == "command") {
    r.only_keys(t, {"type", "command"}, "a command recipe");
    CommandRecipe cmd{r.strings(t, "command")};
    if (cmd.argv.empty()) r.fail(&t, "a command recipe needs a non-empty 'command' array");
    return cmd;
  }
  if (type != "compare") r.fail(t.get("type"), fmt::format("unknown recipe type '{}'", type));
  r.only_keys(t, {"type", "metric", "x", "where", "match", "labels", "output", "exact"},
              "a compare recipe");
  SeriesComparison cmp;
  cmp.metric = r.string(t, "metric", "a compare recipe");
  cmp.x = r.opt_string(t, "x").value_or("t");
  const toml::table* where = r.opt_table(t, "where");
  auto match = r.opt_string(t, "match");
  if (where != nullptr && match) r.fail(&t, "use either 'where' or 'match', not both");
  if (match) {
    cmp.filter = *match;
  } else {
    cmp.filter = r.params(where);
  }
  cmp.label_keys = r.strings(t, "labels");
  cmp.output_file = r.string(t, "output", "a compare recipe");
  if (auto exact = r.opt_string(t, "exact")) cmp.exact = *exact;
  return cmp;
}

}  // namespace

CampaignFile parse_campaign(std::string_view text, std::string_view source_name) {
  Reader r(source_name);
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ParseError(fmt::format("{}:{}:{}: {}", source_name, e.source().begin.line,
                                 e.source().begin.column, e.description()));
  }
  r.only_keys(root, {"simulation_dir", "output_dir", "problems"}, "the campaign");

  CampaignFile c;
  c.simulation_dir = r.string(root, "simulation_dir", "the campaign");
  c.output_dir = r.string(root, "output_dir", "the campaign");
  if (c.simulation_dir.lexically_normal() == c.output_dir.lexically_normal()) {
    r.fail(root.get("output_dir"), "simulation_dir and output_dir must differ");
  }

  std::set<std::string> names;
  for (const toml::table* t : r.tables(root, "problems")) {
    r.only_keys(*t, {"name", "output_flag", "labels", "cases", "sweeps", "recipes"}, "a problem");
    ProblemSpec p;
    p.name = r.string(*t, "name", "a problem");
    p.sim_root = c.simulation_dir;
    p.output_root = c.output_dir;
    if (!names.insert(p.name).second) r.fail(t, fmt::format("duplicate problem '{}'", p.name));
    if (auto flag = r.opt_string(*t, "output_flag")) p.output_flag = *flag;
    if (const toml::table* labels = r.opt_table(*t, "labels")) {
      for (const auto& [key, node] : *labels) {
        if (!node.is_string()) r.fail(&node, "labels must be strings");
        p.labels.set(std::string(key.str()), node.value<std::string>().value());
      }
    }
    for (const toml::table* ct : r.tables(*t, "cases")) read_case(r, p, *ct);
    for (const toml::table* st : r.tables(*t, "sweeps")) read_sweep(r, p, *st);
    for (const toml::table* rt : r.tables(*t, "recipes")) p.recipes.push_back(read_recipe(r, *rt));
    try {
      validate(p);
    } catch (const InvalidArgument& e) {
      r.fail(t, e.what());
    }
    c.problems.push_back(std::move(p));
  }
  return c;
}

CampaignFile load_campaign(const fs::path& path) {
  if (!fs::exists(path)) throw ParseError(fmt::format("{}: campaign file not found", path.string()));
  return parse_campaign(read_file(path), path.string());
}

}  // namespace automan

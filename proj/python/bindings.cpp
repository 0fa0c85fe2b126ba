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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "automan/campaign.hpp"
#include "automan/cli.hpp"
#include "automan/demo.hpp"
#include "automan/error.hpp"
#include "automan/problem.hpp"

namespace py = pybind11;
using namespace automan;

namespace {

ParamValue to_param(const std::string& key, const py::handle& value) {
  if (py::isinstance<py::bool_>(value)) {
    if (!value.cast<bool>()) {
      throw InvalidArgument("parameter '" + key + "': False is not allowed; omit the parameter instead");
    }
    return ParamValue(FlagOnly{});
  }
  if (py::isinstance<py::int_>(value) || py::isinstance<py::float_>(value)) {
    return ParamValue(value.cast<double>());
  }
  if (py::isinstance<py::str>(value)) return ParamValue(value.cast<std::string>());
  throw InvalidArgument("parameter '" + key + "' must be a number, a string or True");
}

ParamList to_params(const py::dict& params) {
  ParamList out;
  for (const auto& [k, v] : params) {
    const auto key = py::cast<std::string>(k);
    out.emplace_back(key, to_param(key, v));
  }
  return out;
}

py::object from_param(const ParamValue& v) {
  if (v.is_flag()) return py::bool_(true);
  if (v.is_number()) return py::float_(v.number());
  return py::str(v.text());
}

py::dict params_dict(const CaseSpec& c) {
  py::dict d;
  for (const auto& [k, v] : c.params()) d[py::str(k)] = from_param(v);
  return d;
}

py::dict table_dict(const ResultTable& t) {
  py::dict d;
  for (const auto& [name, values] : t.series()) d[py::str(name)] = values;
  return d;
}

py::dict command_dict(const CommandEntry& e) {
  py::dict d;
  d["case"] = e.case_name;
  d["command"] = e.command;
  d["n_core"] = e.job_info.n_core;
  d["n_thread"] = e.job_info.n_thread;
  d["output_dir"] = e.output_dir;
  return d;
}

}  // namespace

PYBIND11_MODULE(_automan, m) {
  m.doc() = "Bindings for the automan core library";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<ResultsMissing>(m, "ResultsMissing", error.ptr());
  py::register_exception<Unschedulable>(m, "Unschedulable", error.ptr());
  py::register_exception<TaskFailed>(m, "TaskFailed", error.ptr());
  py::register_exception<CycleError>(m, "CycleError", error.ptr());
  py::register_exception<RecipeFailed>(m, "RecipeFailed", error.ptr());
  py::register_exception<RemoteError>(m, "RemoteError", error.ptr());

  m.def("format_number", &format_number, py::arg("value"));

  py::class_<CaseSpec>(m, "Case")
      .def(py::init([](std::filesystem::path root, std::string command, py::dict params, int n_core,
                       int n_thread) {
             return CaseSpec(std::move(root), std::move(command), JobInfo{n_core, n_thread},
                             to_params(params));
           }),
           py::arg("root"), py::arg("command"), py::arg("params") = py::dict(), py::arg("n_core") = 1,
           py::arg("n_thread") = 1)
      .def_property_readonly("name", &CaseSpec::name)
      .def_property_readonly("root", &CaseSpec::root)
      .def_property_readonly("base_command", &CaseSpec::base_command)
      .def_property_readonly("n_core", [](const CaseSpec& c) { return c.job_info().n_core; })
      .def_property_readonly("n_thread", [](const CaseSpec& c) { return c.job_info().n_thread; })
      .def_property_readonly("params", &params_dict)
      .def("render_args", [](const CaseSpec& c) { return render_args(c); })
      .def("render_command",
           [](const CaseSpec& c, const std::filesystem::path& output_dir, const std::string& flag) {
             return render_command(c, output_dir, flag);
           },
           py::arg("output_dir"), py::arg("output_flag") = std::string(kDefaultOutputFlag))
      .def("input_path",
           [](const CaseSpec& c, py::args segments) {
             std::vector<std::string> segs;
             for (const auto& s : segments) segs.push_back(py::cast<std::string>(py::str(s)));
             return input_path(c, std::span<const std::string>(segs));
           })
      .def("__repr__", [](const CaseSpec& c) { return "<Case " + c.name() + ">"; });

  m.def("get_labels",
        [](const CaseSpec& c, const std::vector<std::string>& keys,
           const std::map<std::string, std::string>& labels) {
          LabelMap lm;
          for (const auto& [k, v] : labels) lm.set(k, v);
          return get_labels(c, lm, keys);
        },
        py::arg("case"), py::arg("keys"), py::arg("labels") = std::map<std::string, std::string>{});
  m.def("filter_cases",
        [](const std::vector<CaseSpec>& cases, py::dict criteria) {
          return filter_cases(cases, to_params(criteria));
        },
        py::arg("cases"), py::arg("criteria"));
  m.def("filter_by_name",
        [](const std::vector<CaseSpec>& cases, const std::vector<std::string>& names) {
          return filter_by_name(cases, names);
        },
        py::arg("cases"), py::arg("names"));
  m.def("match_pattern",
        [](const std::vector<CaseSpec>& cases, const std::string& pattern) {
          return match_pattern(cases, pattern);
        },
        py::arg("cases"), py::arg("pattern"));

  m.def("read_results", [](const std::filesystem::path& path) { return table_dict(read_results_csv(path)); },
        py::arg("path"));
  m.def("load_results", [](const CaseSpec& c) { return table_dict(load_results(c)); }, py::arg("case"));

  m.def("load_campaign",
        [](const std::filesystem::path& path) {
          CampaignFile camp = load_campaign(path);
          py::dict out;
          out["simulation_dir"] = camp.simulation_dir;
          out["output_dir"] = camp.output_dir;
          py::list problems;
          for (const auto& p : camp.problems) {
            py::dict d;
            d["name"] = p.name;
            d["cases"] = p.cases;
            py::list commands;
            for (const auto& e : get_commands(p)) commands.append(command_dict(e));
            d["commands"] = commands;
            d["output_path"] = problem_output_path(p);
            problems.append(d);
          }
          out["problems"] = problems;
          return out;
        },
        py::arg("path"));

  m.def("demo_solution",
        [](double decay_rate, double dt, double t_final, const std::string& scheme) {
          DemoParams p;
          p.decay_rate = decay_rate;
          p.dt = dt;
          p.t_final = t_final;
          p.scheme = scheme;
          return table_dict(demo_solution(p));
        },
        py::arg("decay_rate") = 1.0, py::arg("dt") = 0.1, py::arg("t_final") = 1.0,
        py::arg("scheme") = "euler");

  m.def("run_cli",
        [](std::vector<std::string> args) {
          std::ostringstream out, err;
          int rc = 0;
          py::dict summary;
          {
            py::gil_scoped_release release;
            args.insert(args.begin(), "automan");
            CliSession s{out, err, std::nullopt, {}};
            rc = run_cli(args, s);
            if (s.report) {
              py::gil_scoped_acquire acquire;
              summary["executed"] = s.report->executed;
              summary["skipped"] = s.report->skipped;
              summary["failed"] = s.report->failed;
              summary["blocked"] = s.report->blocked;
              summary["jobs"] = s.report->count(TaskEventKind::Submit, "case:");
              summary["recipes"] = s.report->count(TaskEventKind::Submit, "problem:");
            }
          }
          return py::make_tuple(rc, out.str(), err.str(), summary);
        },
        py::arg("args"),
        "Runs the command line with `args` (without the program name). Returns "
        "(exit_code, stdout, stderr, summary).");
}

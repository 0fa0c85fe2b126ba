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

#include "automan/demo.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "automan/error.hpp"

namespace automan {

ResultTable demo_solution(const DemoParams& params) {
  const double k = params.decay_rate;
  const double dt = params.dt;
  if (!std::isfinite(k) || !std::isfinite(dt) || !std::isfinite(params.t_final)) {
    throw InvalidArgument("demo: parameters must be finite");
  }
  if (dt <= 0.0) throw InvalidArgument("demo: dt must be positive");
  if (params.t_final < 0.0) throw InvalidArgument("demo: t_final must be non-negative");

  double growth = 0.0;
  if (params.scheme == "euler") {
    growth = 1.0 - k * dt;
  } else if (params.scheme == "heun") {
    growth = 1.0 - k * dt + 0.5 * (k * dt) * (k * dt);
  } else {
    throw InvalidArgument(fmt::format("demo: unknown scheme '{}'", params.scheme));
  }

  const auto steps = static_cast<long>(std::ceil(params.t_final / dt - 1e-9));
  std::vector<double> t, u, l1;
  double value = 1.0;
  for (long i = 0; i <= steps; ++i) {
    const double time = static_cast<double>(i) * dt;
    t.push_back(time);
    u.push_back(value);
    l1.push_back(std::fabs(value - std::exp(-k * time)));
    value *= growth;
  }
  return ResultTable({{"t", t}, {"u", u}, {"l1", l1}});
}

int demo_simulate(const DemoParams& params, std::ostream& audit, std::ostream& err) {
  try {
    if (params.output_dir.empty()) throw InvalidArgument("demo: --output-dir is required");
    ResultTable table = demo_solution(params);
    write_results_csv(params.output_dir / kResultsFile, table);
    auto put = [&audit](double v) {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
      audit.write(buf, end - buf);
    };
    audit << "t,u,l1\n";
    const auto& t = table.at("t");
    const auto& u = table.at("u");
    const auto& l1 = table.at("l1");
    for (std::size_t i = 0; i < t.size(); ++i) {
      put(t[i]);
      audit << ',';
      put(u[i]);
      audit << ',';
      put(l1[i]);
      audit << '\n';
    }
    audit.flush();
    return 0;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 1;
  }
}

}  // namespace automan

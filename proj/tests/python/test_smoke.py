# Copyright 2026 The automan Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import math
import os
import shutil
from pathlib import Path

import pytest

import automan

DEMO = Path(__file__).resolve().parents[2] / "campaigns" / "demo" / "campaign.toml"


def test_sph_case_renders():
    case = automan.Case(
        "outputs/sph",
        "pysph run elliptical_drop",
        {"timestep": 0.005, "tensile_correction": True},
    )
    assert case.name == "sph"
    assert case.render_args() == "--timestep=0.005 --tensile-correction"
    assert case.render_command("outputs/sph").endswith("--output-dir=outputs/sph")
    assert str(case.input_path("results.npz")) == "outputs/sph/results.npz"
    assert list(case.params) == ["timestep", "tensile_correction"]


def test_format_number():
    assert automan.format_number(0.1 + 0.2) == "0.30000000000000004"
    assert automan.format_number(-0.0) == "0"


def test_false_flag_rejected():
    with pytest.raises(automan.InvalidArgument):
        automan.Case("o/x", "cmd", {"flag": False})


def test_selection():
    cases = [
        automan.Case("o/std_sph", "c", {"nx": 50}),
        automan.Case("o/std_sph_tensile_correction", "c", {"nx": 100}),
    ]
    assert [c.name for c in automan.match_pattern(cases, "*tensile*")] == ["std_sph_tensile_correction"]
    assert [c.name for c in automan.filter_cases(cases, {"nx": 50})] == ["std_sph"]
    assert automan.get_labels(cases[0], ["nx"]) == "nx=50"
    with pytest.raises(automan.InvalidArgument):
        automan.filter_by_name(cases, ["missing"])


def test_demo_solution_matches_closed_form():
    table = automan.demo_solution(decay_rate=2.0, dt=0.05, scheme="euler")
    for t, u in zip(table["t"], table["u"]):
        n = round(t / 0.05)
        assert u == pytest.approx((1 - 2.0 * 0.05) ** n, rel=1e-12)
        assert math.isfinite(u)


def test_cli_runs_demo_campaign(tmp_path, monkeypatch):
    assert os.environ.get("AUTOMAN_EXE"), "AUTOMAN_EXE must point to the automan binary"
    shutil.copy(DEMO, tmp_path / "campaign.toml")
    monkeypatch.chdir(tmp_path)
    code, out, err, summary = automan.run_cli(["--poll-interval", "0.02"])
    assert code == 0, err
    assert summary["jobs"] == 8
    code, out, err, summary = automan.run_cli(["--poll-interval", "0.02"])
    assert code == 0
    assert summary["jobs"] == 0 and summary["recipes"] == 0

    camp = automan.load_campaign("campaign.toml")
    case = camp["problems"][0]["cases"][0]
    results = automan.load_results(case)
    assert set(results) == {"t", "u", "l1"}
    assert (tmp_path / "figures" / "decay" / "l1_euler.csv").exists()


def test_results_missing(tmp_path):
    with pytest.raises(automan.ResultsMissing):
        automan.load_results(automan.Case(str(tmp_path / "nothing"), "cmd"))

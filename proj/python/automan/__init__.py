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
"""Simulation campaign automation: case rendering, selection, results and the CLI."""

import os
from pathlib import Path

from ._automan import (
    Case,
    CycleError,
    Error,
    InvalidArgument,
    ParseError,
    RecipeFailed,
    RemoteError,
    ResultsMissing,
    TaskFailed,
    Unschedulable,
    demo_solution,
    filter_by_name,
    filter_cases,
    format_number,
    get_labels,
    load_campaign,
    load_results,
    match_pattern,
    read_results,
    run_cli,
)

_bundled = Path(__file__).with_name("_bin") / "automan"
if _bundled.exists():
    os.environ.setdefault("AUTOMAN_EXE", str(_bundled))

__all__ = [
    "Case",
    "CycleError",
    "Error",
    "InvalidArgument",
    "ParseError",
    "RecipeFailed",
    "RemoteError",
    "ResultsMissing",
    "TaskFailed",
    "Unschedulable",
    "demo_solution",
    "filter_by_name",
    "filter_cases",
    "format_number",
    "get_labels",
    "load_campaign",
    "load_results",
    "match_pattern",
    "read_results",
    "run_cli",
]

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

namespace automan {

/// Current UTC time as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
std::string iso_timestamp_now();

/// Quotes `word` for a POSIX shell so that it is passed through verbatim.
std::string shell_quote(std::string_view word);

/// Joins words with single spaces after quoting each one.
std::string shell_join(const std::vector<std::string>& words);

/// Replaces every occurrence of `from` in `text`.
std::string replace_all(std::string text, std::string_view from, std::string_view to);

std::string to_lower(std::string_view text);

/// Writes `content` to `path` through a temporary sibling and a rename, so
/// readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// True when `relative` is a relative path that does not climb out of its
/// base directory once normalized.
bool is_contained_relative(const std::filesystem::path& relative);

}  // namespace automan

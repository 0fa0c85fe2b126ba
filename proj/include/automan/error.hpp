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

#include <stdexcept>
#include <string>

namespace automan {

/// Base class of every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a construction-time invariant (bad key, empty name, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A results or campaign file could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The per-case results file does not exist.
class ResultsMissing : public Error {
 public:
  using Error::Error;
};

/// A job requests more cores than any enabled worker provides.
class Unschedulable : public Error {
 public:
  using Error::Error;
};

/// A task finished unsuccessfully. Raised from Task::complete().
class TaskFailed : public Error {
 public:
  using Error::Error;
};

/// The task graph contains a dependency cycle.
class CycleError : public Error {
 public:
  using Error::Error;
};

/// A post-processing recipe failed.
class RecipeFailed : public Error {
 public:
  using Error::Error;
};

/// An ssh or file-transfer command failed.
class RemoteError : public Error {
 public:
  using Error::Error;
};

}  // namespace automan

// Copyright 2026 The LCNN Authors. All Rights Reserved.
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

// Command drivers behind the CLI: train, eval, convert, fewshot, transfer,
// bench. Each returns a process exit code:
//   0 ok, 2 config/usage, 3 data, 4 numeric failure.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "lcnn/error.hpp"

namespace lcnn {

struct CommandOptions {
  std::string config;
  std::string model;
  std::string out;
  std::string csv;
  std::optional<std::uint64_t> seed;
};

int exit_code_for(ErrorKind kind);

// Runs `command`, reporting errors on `err` as "error: <message>".
int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err);

}  // namespace lcnn

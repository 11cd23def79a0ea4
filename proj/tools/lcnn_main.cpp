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

// lcnn command-line tool. Thin wrapper over the C API.

#include <CLI11.hpp>
#include <string>

#include "lcnn/lcnn.h"

int main(int argc, char** argv) {
  CLI::App app{"Lookup-based CNN engine"};
  app.require_subcommand(1);

  std::string config, model, out, csv;
  std::uint64_t seed = 0;
  for (const char* name : {"train", "eval", "convert", "fewshot", "transfer", "bench"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment config file");
    sub->add_option("--model", model, "input model file");
    sub->add_option("--out", out, "output path");
    sub->add_option("--csv", csv, "CSV output path (bench)");
    sub->add_option("--seed", seed, "overrides the config seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  lcnn_command_args args{};
  args.config = config.empty() ? nullptr : config.c_str();
  args.model = model.empty() ? nullptr : model.c_str();
  args.out = out.empty() ? nullptr : out.c_str();
  args.csv = csv.empty() ? nullptr : csv.c_str();
  args.has_seed = sub->count("--seed") > 0;
  args.seed = seed;
  return lcnn_run_command(sub->get_name().c_str(), &args);
}

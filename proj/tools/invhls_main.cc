// Copyright 2026 The invhls Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command line front end: run, baseline-random, eval, plot.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "invhls/experiment.h"

int main(int argc, char** argv) {
  invhls::ConfigureAllocator();
  CLI::App app{"Pragma design-space exploration over HLS kernels"};
  app.require_subcommand(1);

  std::string config;
  std::int64_t seed = -1;
  auto* run = app.add_subcommand("run", "Run the optimization loop for one or all seeds");
  run->add_option("-c,--config", config, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Run only this seed");

  auto* baseline = app.add_subcommand("baseline-random", "Random-search baseline");
  baseline->add_option("-c,--config", config, "Experiment config (JSON)")->required();
  baseline->add_option("--seed", seed, "Run only this seed");

  std::vector<std::string> dirs;
  std::string report = "report.csv";
  auto* eval = app.add_subcommand("eval", "ADRS of each run against the union reference front");
  eval->add_option("dirs", dirs, "Run directories")->required();
  eval->add_option("-o,--output", report, "Report CSV path");

  std::string svg;
  auto* plot = app.add_subcommand("plot", "Scatter plot of run fronts (SVG + CSV)");
  plot->add_option("dirs", dirs, "Run directories")->required();
  plot->add_option("-o,--output", svg, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::optional<std::uint64_t> only =
      seed >= 0 ? std::optional<std::uint64_t>(std::uint64_t(seed)) : std::nullopt;
  if (run->parsed()) return invhls::CmdRun(config, only, invhls::Method::kInverse, std::cout, std::cerr);
  if (baseline->parsed()) {
    return invhls::CmdRun(config, only, invhls::Method::kRandom, std::cout, std::cerr);
  }
  if (eval->parsed()) return invhls::CmdEval(dirs, report, std::cout, std::cerr);
  return invhls::CmdPlot(dirs, svg, std::cout, std::cerr);
}

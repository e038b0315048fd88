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

#ifndef INVHLS_EXPERIMENT_H_
#define INVHLS_EXPERIMENT_H_

// Experiment driver behind the command line: run directories, resumption,
// evaluation tables and plots.
//
// A run directory holds
//   LOCK            owner pid while a process works in it
//   config.json     snapshot of the effective configuration
//   dataset.jsonl   one line per synthesis (append-only; drives resumption)
//   run_log.jsonl   per-synthesis and per-iteration records
//   front.csv       key,latency,area of the final front
//   theta/NNN.json  distributions entering iteration NNN
//   models/NNN-<name>.json  checkpoints trained in iteration NNN
//   summary.json    method, kernel and counts

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "invhls/backend.h"
#include "invhls/inverse_loop.h"

namespace invhls {

// Missing input files; the command line maps it to exit status 2.
class MissingFileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ExperimentConfig {
  std::string kernel_path;  // required for the mini-hls backend
  std::string space_path;
  std::string backend = "mini-hls";
  std::optional<ExternalConfig> external;
  RunConfig run;
  std::string output_dir = "runs";
  std::vector<std::uint64_t> seeds = {0};
};

// Relative paths resolve against the config file's directory.
ExperimentConfig LoadExperimentConfig(const std::string& path);
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& doc, const std::string& base_dir);

enum class Method { kInverse, kRandom };

std::string RunDirName(Method method, std::uint64_t seed);

// Runs one seed into output_dir/RunDirName(method, seed), resuming from an
// existing dataset.jsonl. Returns the run result.
RunResult RunExperiment(const ExperimentConfig& cfg, Method method, std::uint64_t seed,
                        std::ostream& log);

// Command line entry points; return the process exit status.
int CmdRun(const std::string& config_path, std::optional<std::uint64_t> seed, Method method,
           std::ostream& out, std::ostream& err);
int CmdEval(const std::vector<std::string>& dirs, const std::string& report_path,
            std::ostream& out, std::ostream& err);
int CmdPlot(const std::vector<std::string>& dirs, const std::string& svg_path, std::ostream& out,
            std::ostream& err);

struct LabeledFront {
  std::string label;
  std::vector<ObjectivePoint> points;
};

// Reads front.csv and the method label of a run directory.
LabeledFront LoadRunFront(const std::string& dir);

// SVG scatter on log-log axes: reference points as circles, each front with
// its own marker shape.
std::string RenderFrontsSvg(const std::vector<ObjectivePoint>& reference,
                            const std::vector<LabeledFront>& fronts);

// Keeps large tape buffers on the heap instead of mapping and unmapping them
// on every training step. No-op outside glibc.
void ConfigureAllocator();

}  // namespace invhls

#endif  // INVHLS_EXPERIMENT_H_

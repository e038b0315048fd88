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

#ifndef INVHLS_BACKEND_H_
#define INVHLS_BACKEND_H_

// Synthesis backends: the built-in mini-HLS flow and a shell-command adapter
// for external tools.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "invhls/design_space.h"
#include "invhls/mini_hls.h"
#include "json.hpp"

namespace invhls {

enum class SynthesisStatus { kOk, kTimeout, kToolFailure, kParseFailure };

const char* SynthesisStatusName(SynthesisStatus status);
SynthesisStatus ParseSynthesisStatus(const std::string& name);

struct SynthesisOutcome {
  SynthesisStatus status = SynthesisStatus::kOk;
  std::optional<SynthesisResult> result;
  int exit_code = 0;  // kToolFailure
  std::string message;

  bool ok() const { return status == SynthesisStatus::kOk; }
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Must be safe to call concurrently.
  virtual SynthesisOutcome Synthesize(const PragmaConfig& config) = 0;
  virtual bool deterministic() const = 0;
  virtual std::string name() const = 0;
};

class MiniHlsBackend : public Backend {
 public:
  MiniHlsBackend(KernelModel kernel, DesignSpace space, CostModel cost = {});

  SynthesisOutcome Synthesize(const PragmaConfig& config) override;
  bool deterministic() const override { return true; }
  std::string name() const override { return "mini-hls"; }

 private:
  KernelModel kernel_;
  DesignSpace space_;
  CostModel cost_;
};

// Reads the tool's output file. Throws on malformed content.
using ReportParser = std::function<SynthesisResult(const std::string& out_path)>;

// "json" is built in: {"graph": <cdfg>, "latency": n, "area": {FF, LUT, ...}}.
void RegisterReportParser(const std::string& name, ReportParser parser);
ReportParser FindReportParser(const std::string& name);

struct ExternalConfig {
  std::string command;  // holds {design} and {out}
  double timeout_s = 300.0;
  std::string parser = "json";
  std::string work_dir = ".";

  void Validate() const;
};

ExternalConfig ExternalConfigFromJson(const nlohmann::json& doc);

// Runs the command with {design}/{out} substituted (shell-quoted); a run
// over timeout_s is killed with its process group.
SynthesisOutcome RunExternal(const std::string& command_template, const std::string& design_path,
                             const std::string& out_path, double timeout_s,
                             const ReportParser& parser);

class ExternalBackend : public Backend {
 public:
  ExternalBackend(DesignSpace space, ExternalConfig config);

  // Writes {"key", "config"} to a fresh design file in work_dir.
  SynthesisOutcome Synthesize(const PragmaConfig& config) override;
  bool deterministic() const override { return false; }
  std::string name() const override { return "external"; }

 private:
  DesignSpace space_;
  ExternalConfig config_;
  ReportParser parser_;
  std::mutex mu_;
  long counter_ = 0;
};

// Serves previously recorded outcomes by canonical key before falling back
// to the wrapped backend.
class CachedBackend : public Backend {
 public:
  CachedBackend(Backend& inner, const DesignSpace& space,
                std::map<std::string, SynthesisOutcome> cache);

  SynthesisOutcome Synthesize(const PragmaConfig& config) override;
  bool deterministic() const override { return inner_.deterministic(); }
  std::string name() const override { return inner_.name(); }
  long hits() const;

 private:
  Backend& inner_;
  const DesignSpace& space_;
  std::map<std::string, SynthesisOutcome> cache_;
  mutable std::mutex mu_;
  long hits_ = 0;
};

}  // namespace invhls

#endif  // INVHLS_BACKEND_H_

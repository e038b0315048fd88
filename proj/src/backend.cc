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

#include "invhls/backend.h"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "invhls/errors.h"

namespace invhls {
namespace {

std::mutex& ParserMutex() {
  static std::mutex mu;
  return mu;
}

std::map<std::string, ReportParser>& Parsers() {
  static std::map<std::string, ReportParser> parsers = {
      {"json", [](const std::string& path) {
         std::ifstream in(path);
         if (!in) throw ValidationError("no report at " + path);
         const nlohmann::json doc = nlohmann::json::parse(in);
         SynthesisResult r;
         r.graph = GraphFromJson(doc.at("graph"));
         r.latency = doc.at("latency").get<std::int64_t>();
         if (r.latency < 0) throw ValidationError("negative latency");
         r.area = AreaFromJson(doc.at("area"));
         return r;
       }}};
  return parsers;
}

std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string Substitute(std::string text, const std::string& token, const std::string& value) {
  for (std::size_t pos = 0; (pos = text.find(token, pos)) != std::string::npos;) {
    text.replace(pos, token.size(), value);
    pos += value.size();
  }
  return text;
}

}  // namespace

const char* SynthesisStatusName(SynthesisStatus status) {
  switch (status) {
    case SynthesisStatus::kOk: return "ok";
    case SynthesisStatus::kTimeout: return "timeout";
    case SynthesisStatus::kToolFailure: return "tool_failure";
    case SynthesisStatus::kParseFailure: return "parse_failure";
  }
  return "?";
}

SynthesisStatus ParseSynthesisStatus(const std::string& name) {
  for (SynthesisStatus s : {SynthesisStatus::kOk, SynthesisStatus::kTimeout,
                            SynthesisStatus::kToolFailure, SynthesisStatus::kParseFailure}) {
    if (name == SynthesisStatusName(s)) return s;
  }
  throw ValidationError("unknown synthesis status '" + name + "'");
}

MiniHlsBackend::MiniHlsBackend(KernelModel kernel, DesignSpace space, CostModel cost)
    : kernel_(std::move(kernel)), space_(std::move(space)), cost_(cost) {
  kernel_.Validate(space_);
}

SynthesisOutcome MiniHlsBackend::Synthesize(const PragmaConfig& config) {
  SynthesisOutcome out;
  out.result = invhls::Synthesize(kernel_, space_, config, cost_);
  return out;
}

void RegisterReportParser(const std::string& name, ReportParser parser) {
  std::lock_guard lock(ParserMutex());
  Parsers()[name] = std::move(parser);
}

ReportParser FindReportParser(const std::string& name) {
  std::lock_guard lock(ParserMutex());
  const auto it = Parsers().find(name);
  if (it == Parsers().end()) throw ValidationError("unknown report parser '" + name + "'");
  return it->second;
}

void ExternalConfig::Validate() const {
  if (command.empty()) throw ValidationError("external backend: empty command template");
  if (!(timeout_s > 0.0)) throw ValidationError("external backend: timeout must be positive");
  FindReportParser(parser);
}

ExternalConfig ExternalConfigFromJson(const nlohmann::json& doc) {
  ExternalConfig c;
  try {
    c.command = doc.at("command").get<std::string>();
    c.timeout_s = doc.value("timeout_s", 300.0);
    c.parser = doc.value("parser", "json");
    c.work_dir = doc.value("work_dir", ".");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("external backend: ") + e.what());
  }
  c.Validate();
  return c;
}

SynthesisOutcome RunExternal(const std::string& command_template, const std::string& design_path,
                             const std::string& out_path, double timeout_s,
                             const ReportParser& parser) {
  const std::string cmd = Substitute(Substitute(command_template, "{design}", ShellQuote(design_path)),
                                     "{out}", ShellQuote(out_path));
  SynthesisOutcome out;
  const pid_t pid = fork();
  if (pid < 0) {
    out.status = SynthesisStatus::kToolFailure;
    out.exit_code = -1;
    out.message = "fork failed";
    return out;
  }
  if (pid == 0) {
    setpgid(0, 0);
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s));
  int status = 0;
  while (true) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      out.status = SynthesisStatus::kTimeout;
      out.message = "timed out after " + std::to_string(timeout_s) + " s";
      return out;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    out.status = SynthesisStatus::kToolFailure;
    out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    out.message = "tool exited with status " + std::to_string(out.exit_code);
    return out;
  }
  try {
    out.result = parser(out_path);
  } catch (const std::exception& e) {
    out.status = SynthesisStatus::kParseFailure;
    out.message = e.what();
  }
  return out;
}

ExternalBackend::ExternalBackend(DesignSpace space, ExternalConfig config)
    : space_(std::move(space)), config_(std::move(config)) {
  config_.Validate();
  parser_ = FindReportParser(config_.parser);
  std::filesystem::create_directories(config_.work_dir);
}

SynthesisOutcome ExternalBackend::Synthesize(const PragmaConfig& config) {
  std::string design, out;
  {
    std::lock_guard lock(mu_);
    const long n = counter_++;
    design = config_.work_dir + "/design-" + std::to_string(n) + ".json";
    out = config_.work_dir + "/out-" + std::to_string(n) + ".json";
    std::ofstream f(design);
    f << nlohmann::json{{"key", CanonicalKey(space_, config)},
                        {"config", PragmaConfigToJson(space_, config)}}
             .dump(2)
      << '\n';
  }
  return RunExternal(config_.command, design, out, config_.timeout_s, parser_);
}

CachedBackend::CachedBackend(Backend& inner, const DesignSpace& space,
                             std::map<std::string, SynthesisOutcome> cache)
    : inner_(inner), space_(space), cache_(std::move(cache)) {}

SynthesisOutcome CachedBackend::Synthesize(const PragmaConfig& config) {
  const std::string key = CanonicalKey(space_, config);
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  return inner_.Synthesize(config);
}

long CachedBackend::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

}  // namespace invhls

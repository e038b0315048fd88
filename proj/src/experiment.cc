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

#include "invhls/experiment.h"

#include <fcntl.h>
#ifdef __GLIBC__
#include <malloc.h>
#endif
#include <signal.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "invhls/errors.h"

namespace invhls {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::string Resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

std::string Padded(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", n);
  return buf;
}

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / "LOCK") {
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd >= 0) {
        const std::string pid = std::to_string(::getpid()) + "\n";
        if (::write(fd, pid.data(), pid.size()) < 0) {
          ::close(fd);
          throw std::runtime_error("cannot write " + path_.string());
        }
        ::close(fd);
        return;
      }
      long owner = 0;
      {
        std::ifstream in(path_);
        in >> owner;
      }
      if (owner > 0 && ::kill(pid_t(owner), 0) == 0) {
        throw std::runtime_error(dir.string() + " is locked by running process " +
                                 std::to_string(owner));
      }
      fs::remove(path_);
    }
    throw std::runtime_error("cannot lock " + dir.string());
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

json OutcomeLine(const std::string& key, int iteration, int k, const std::vector<double>& theta,
                 const json& config, const SynthesisOutcome& o) {
  json line = {{"key", key},
               {"iter", iteration},
               {"k", k},
               {"status", SynthesisStatusName(o.status)},
               {"theta", theta},
               {"config", config}};
  if (o.ok()) {
    line["latency"] = o.result->latency;
    line["area"] = AreaToJson(o.result->area);
    line["graph"] = GraphToJson(o.result->graph);
  } else {
    line["exit_code"] = o.exit_code;
    line["message"] = o.message;
  }
  return line;
}

SynthesisOutcome OutcomeFromLine(const json& line) {
  SynthesisOutcome o;
  o.status = ParseSynthesisStatus(line.at("status").get<std::string>());
  if (o.ok()) {
    SynthesisResult r;
    r.latency = line.at("latency").get<std::int64_t>();
    r.area = AreaFromJson(line.at("area"));
    r.graph = GraphFromJson(line.at("graph"));
    o.result = std::move(r);
  } else {
    o.exit_code = line.value("exit_code", 0);
    o.message = line.value("message", "");
  }
  return o;
}

// Valid dataset lines of a previous attempt; a torn final line is dropped.
std::map<std::string, SynthesisOutcome> LoadDatasetCache(const fs::path& path,
                                                         std::string& valid_text) {
  std::map<std::string, SynthesisOutcome> cache;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json doc = json::parse(line);
      cache.emplace(doc.at("key").get<std::string>(), OutcomeFromLine(doc));
      valid_text += line + "\n";
    } catch (const std::exception&) {
      break;
    }
  }
  return cache;
}

const char* MethodName(Method m) { return m == Method::kInverse ? "did" : "random"; }

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfigFromJson(const json& doc, const std::string& base_dir) {
  ExperimentConfig c;
  try {
    c.kernel_path = Resolve(base_dir, doc.value("kernel", ""));
    c.space_path = Resolve(base_dir, doc.at("space").get<std::string>());
    c.output_dir = Resolve(base_dir, doc.value("output_dir", "runs"));
    c.seeds = doc.value("seeds", c.seeds);
    if (doc.contains("backend")) {
      const json& b = doc["backend"];
      if (b.is_string()) {
        c.backend = b.get<std::string>();
      } else {
        c.backend = b.value("type", "external");
        if (c.backend == "external") {
          ExternalConfig e = ExternalConfigFromJson(b);
          e.work_dir = Resolve(base_dir, e.work_dir);
          c.external = e;
        }
      }
    }
    c.run = RunConfigFromJson(doc.value("run", json::object()));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  if (c.backend != "mini-hls" && c.backend != "external") {
    throw ValidationError("experiment config: unknown backend '" + c.backend + "'");
  }
  if (c.backend == "external" && !c.external) {
    throw ValidationError("experiment config: external backend needs a command");
  }
  if (c.backend == "mini-hls" && c.kernel_path.empty()) {
    throw ValidationError("experiment config: mini-hls backend needs a kernel file");
  }
  if (c.seeds.empty()) throw ValidationError("experiment config: empty seed list");
  if (!c.kernel_path.empty() && !fs::exists(c.kernel_path)) {
    throw MissingFileError("kernel file not found: " + c.kernel_path);
  }
  if (!fs::exists(c.space_path)) throw MissingFileError("design space not found: " + c.space_path);
  c.run.workers = WorkersFromEnv(c.run.workers);
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  const std::string text = ReadFile(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return ExperimentConfigFromJson(doc, fs::path(path).parent_path().string());
}

std::string RunDirName(Method method, std::uint64_t seed) {
  return std::string(MethodName(method)) + "-s" + std::to_string(seed);
}

RunResult RunExperiment(const ExperimentConfig& cfg, Method method, std::uint64_t seed,
                        std::ostream& log) {
  const DesignSpace space = LoadDesignSpace(cfg.space_path);
  std::unique_ptr<Backend> backend;
  std::string kernel_name = "external";
  if (cfg.backend == "mini-hls") {
    KernelModel kernel = LoadKernel(cfg.kernel_path);
    kernel_name = kernel.name;
    backend = std::make_unique<MiniHlsBackend>(std::move(kernel), space);
  } else {
    backend = std::make_unique<ExternalBackend>(space, *cfg.external);
  }
  const fs::path dir = fs::path(cfg.output_dir) / RunDirName(method, seed);
  fs::create_directories(dir / "theta");
  fs::create_directories(dir / "models");
  DirLock lock(dir);

  RunConfig rc = cfg.run;
  rc.seed = seed;
  WriteFile(dir / "config.json", json{{"method", MethodName(method)},
                                      {"kernel", kernel_name},
                                      {"backend", cfg.backend},
                                      {"run", RunConfigToJson(rc)}}
                                     .dump(2) +
                                     "\n");

  std::string valid;
  std::map<std::string, SynthesisOutcome> cache = LoadDatasetCache(dir / "dataset.jsonl", valid);
  WriteFile(dir / "dataset.jsonl", valid);
  const std::set<std::string> known = [&] {
    std::set<std::string> s;
    for (const auto& [k, _] : cache) s.insert(k);
    return s;
  }();
  if (!known.empty()) log << "resuming " << dir.string() << " with " << known.size()
                          << " recorded syntheses\n";
  CachedBackend cached(*backend, space, std::move(cache));

  std::ofstream dataset(dir / "dataset.jsonl", std::ios::app);
  std::ofstream run_log(dir / "run_log.jsonl", std::ios::trunc);
  RunEvents events;
  events.on_log = [&](const json& line) { run_log << line.dump() << '\n' << std::flush; };
  events.on_synthesis = [&](const std::string& key, int iteration, int k,
                            const std::vector<double>& theta, const PragmaConfig& config,
                            const SynthesisOutcome& o) {
    if (known.count(key)) return;
    dataset << OutcomeLine(key, iteration, k, theta, PragmaConfigToJson(space, config), o).dump()
            << '\n'
            << std::flush;
  };
  events.on_thetas = [&](int iteration, const std::vector<ThetaDistribution>& thetas) {
    json doc = json::array();
    for (const ThetaDistribution& t : thetas) doc.push_back(ThetaToJson(t));
    WriteFile(dir / "theta" / (Padded(iteration) + ".json"), doc.dump(1) + "\n");
  };
  events.on_checkpoint = [&](int iteration, const std::string& name, const json& ckpt) {
    WriteFile(dir / "models" / (Padded(iteration) + "-" + name + ".json"), ckpt.dump() + "\n");
  };

  RunResult result = method == Method::kInverse ? Run(space, cached, rc, events)
                                                : RunRandomBaseline(space, cached, rc, events);
  WriteFile(dir / "front.csv", FrontToCsv(result.front));
  WriteFile(dir / "summary.json", json{{"method", MethodName(method)},
                                       {"kernel", kernel_name},
                                       {"seed", seed},
                                       {"syntheses", result.syntheses},
                                       {"failures", result.failures},
                                       {"iterations", result.iterations},
                                       {"front_size", result.front.size()},
                                       {"stalled", result.stalled},
                                       {"resumed_from", known.size()}}
                                      .dump(2) +
                                      "\n");
  return result;
}

int CmdRun(const std::string& config_path, std::optional<std::uint64_t> seed, Method method,
           std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = LoadExperimentConfig(config_path);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  const std::vector<std::uint64_t> seeds = seed ? std::vector<std::uint64_t>{*seed} : cfg.seeds;
  try {
    for (std::uint64_t s : seeds) {
      const RunResult r = RunExperiment(cfg, method, s, err);
      out << (fs::path(cfg.output_dir) / RunDirName(method, s)).string() << ": " << r.syntheses
          << " syntheses, " << r.failures << " failed, front of " << r.front.size()
          << " points\n";
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

LabeledFront LoadRunFront(const std::string& dir) {
  LabeledFront f;
  f.points = FrontFromCsv(ReadFile((fs::path(dir) / "front.csv").string()));
  const fs::path p = fs::path(dir).lexically_normal();
  const fs::path name = p.filename().empty() ? p.parent_path().filename() : p.filename();
  const fs::path parent = p.filename().empty() ? p.parent_path().parent_path() : p.parent_path();
  f.label = parent.filename().empty() ? name.string() : (parent.filename() / name).string();
  return f;
}

int CmdEval(const std::vector<std::string>& dirs, const std::string& report_path,
            std::ostream& out, std::ostream& err) {
  std::vector<LabeledFront> fronts;
  for (const std::string& d : dirs) {
    try {
      LabeledFront f = LoadRunFront(d);
      if (f.points.empty()) {
        err << "warning: " << d << " has an empty front\n";
        continue;
      }
      fronts.push_back(std::move(f));
    } catch (const std::exception& e) {
      err << "warning: skipping " << d << ": " << e.what() << '\n';
    }
  }
  if (fronts.empty()) {
    err << "error: no valid runs\n";
    return 1;
  }
  std::vector<std::vector<ObjectivePoint>> sets;
  for (const LabeledFront& f : fronts) sets.push_back(f.points);
  const std::vector<ObjectivePoint> reference = ReferenceFront(sets);
  std::ostringstream csv;
  csv.precision(17);
  csv << "run,front_size,adrs\n";
  out << "reference front: " << reference.size() << " points\n";
  char row[512];
  std::snprintf(row, sizeof row, "%-40s %6s %12s\n", "run", "front", "adrs");
  out << row;
  for (const LabeledFront& f : fronts) {
    const double a = Adrs(reference, f.points);
    std::snprintf(row, sizeof row, "%-40s %6zu %12.6f\n", f.label.c_str(), f.points.size(), a);
    out << row;
    csv << f.label << ',' << f.points.size() << ',' << a << '\n';
  }
  if (!report_path.empty()) WriteFile(report_path, csv.str());
  return 0;
}

std::string RenderFrontsSvg(const std::vector<ObjectivePoint>& reference,
                            const std::vector<LabeledFront>& fronts) {
  const double width = 760, height = 560, left = 90, right = 200, top = 30, bottom = 70;
  double lx0 = INFINITY, lx1 = -INFINITY, ly0 = INFINITY, ly1 = -INFINITY;
  auto extend = [&](const ObjectivePoint& p) {
    lx0 = std::min(lx0, std::log10(p.latency));
    lx1 = std::max(lx1, std::log10(p.latency));
    ly0 = std::min(ly0, std::log10(p.area));
    ly1 = std::max(ly1, std::log10(p.area));
  };
  for (const ObjectivePoint& p : reference) extend(p);
  for (const LabeledFront& f : fronts) {
    for (const ObjectivePoint& p : f.points) extend(p);
  }
  auto pad = [](double& lo, double& hi) {
    const double span = std::max(hi - lo, 0.2);
    const double mid = 0.5 * (lo + hi);
    lo = mid - 0.55 * span;
    hi = mid + 0.55 * span;
  };
  pad(lx0, lx1);
  pad(ly0, ly1);
  const double pw = width - left - right, ph = height - top - bottom;
  auto sx = [&](double v) { return left + (std::log10(v) - lx0) / (lx1 - lx0) * pw; };
  auto sy = [&](double v) { return top + ph - (std::log10(v) - ly0) / (ly1 - ly0) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
    << "\" fill=\"white\"/>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto ticks = [](double lo, double hi) {
    std::vector<double> out;
    const bool fine = hi - lo < 1.5;
    for (int e = int(std::floor(lo)); e <= int(std::ceil(hi)); ++e) {
      for (double m : fine ? std::vector<double>{1, 2, 5} : std::vector<double>{1}) {
        const double v = m * std::pow(10.0, e);
        if (std::log10(v) >= lo && std::log10(v) <= hi) out.push_back(v);
      }
    }
    return out;
  };
  auto label = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  for (double v : ticks(lx0, lx1)) {
    s << "<line x1=\"" << Fmt(sx(v)) << "\" y1=\"" << top + ph << "\" x2=\"" << Fmt(sx(v))
      << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << Fmt(sx(v)) << "\" y=\"" << top + ph + 18
      << "\" text-anchor=\"middle\">" << label(v) << "</text>\n";
  }
  for (double v : ticks(ly0, ly1)) {
    s << "<line x1=\"" << left - 5 << "\" y1=\"" << Fmt(sy(v)) << "\" x2=\"" << left
      << "\" y2=\"" << Fmt(sy(v)) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << left - 8 << "\" y=\"" << Fmt(sy(v) + 4) << "\" text-anchor=\"end\">"
      << label(v) << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 25
    << "\" text-anchor=\"middle\">latency (cycles, log scale)</text>\n";
  s << "<text transform=\"translate(25," << top + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">area (weighted resource units, log scale)</text>\n";

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  auto marker = [&](int shape, double x, double y, const char* color) {
    const std::string X = Fmt(x), Y = Fmt(y);
    switch (shape % 5) {
      case 0:
        return "<rect class=\"marker\" x=\"" + Fmt(x - 4) + "\" y=\"" + Fmt(y - 4) +
               "\" width=\"8\" height=\"8\" fill=\"" + color + "\"/>";
      case 1:
        return "<polygon class=\"marker\" points=\"" + X + "," + Fmt(y - 5) + " " + Fmt(x + 5) +
               "," + Fmt(y + 4) + " " + Fmt(x - 5) + "," + Fmt(y + 4) + "\" fill=\"" + color +
               "\"/>";
      case 2:
        return "<polygon class=\"marker\" points=\"" + X + "," + Fmt(y - 5) + " " + Fmt(x + 5) +
               "," + Y + " " + X + "," + Fmt(y + 5) + " " + Fmt(x - 5) + "," + Y + "\" fill=\"" +
               color + "\"/>";
      case 3:
        return "<path class=\"marker\" d=\"M" + Fmt(x - 4) + "," + Fmt(y - 4) + " L" +
               Fmt(x + 4) + "," + Fmt(y + 4) + " M" + Fmt(x - 4) + "," + Fmt(y + 4) + " L" +
               Fmt(x + 4) + "," + Fmt(y - 4) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>";
      default:
        return "<path class=\"marker\" d=\"M" + X + "," + Fmt(y - 5) + " L" + X + "," +
               Fmt(y + 5) + " M" + Fmt(x - 5) + "," + Y + " L" + Fmt(x + 5) + "," + Y +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>";
    }
  };
  for (std::size_t i = 0; i < fronts.size(); ++i) {
    const char* color = kColors[i % 8];
    for (const ObjectivePoint& p : fronts[i].points) {
      s << marker(int(i), sx(p.latency), sy(p.area), color) << '\n';
    }
  }
  for (const ObjectivePoint& p : reference) {
    s << "<circle class=\"marker\" cx=\"" << Fmt(sx(p.latency)) << "\" cy=\""
      << Fmt(sy(p.area)) << "\" r=\"7\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  double ly = top + 10;
  const double lx = width - right + 20;
  s << "<circle cx=\"" << lx << "\" cy=\"" << ly << "\" r=\"6\" fill=\"none\" stroke=\"black\"/>"
    << "<text x=\"" << lx + 14 << "\" y=\"" << ly + 4 << "\">reference front</text>\n";
  for (std::size_t i = 0; i < fronts.size(); ++i) {
    ly += 20;
    std::string m = marker(int(i), lx, ly, kColors[i % 8]);
    m.replace(m.find(" class=\"marker\""), 15, "");
    s << m << "<text x=\"" << lx + 14 << "\" y=\"" << ly + 4 << "\">" << fronts[i].label
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

int CmdPlot(const std::vector<std::string>& dirs, const std::string& svg_path, std::ostream& out,
            std::ostream& err) {
  std::vector<LabeledFront> fronts;
  for (const std::string& d : dirs) {
    try {
      LabeledFront f = LoadRunFront(d);
      if (!f.points.empty()) fronts.push_back(std::move(f));
    } catch (const std::exception& e) {
      err << "warning: skipping " << d << ": " << e.what() << '\n';
    }
  }
  if (fronts.empty()) {
    err << "error: no nonempty fronts to plot\n";
    return 1;
  }
  std::vector<std::vector<ObjectivePoint>> sets;
  for (const LabeledFront& f : fronts) sets.push_back(f.points);
  const std::vector<ObjectivePoint> reference = ReferenceFront(sets);
  try {
    WriteFile(svg_path, RenderFrontsSvg(reference, fronts));
    std::ostringstream csv;
    csv.precision(17);
    csv << "series,key,latency,area\n";
    for (const ObjectivePoint& p : reference) {
      csv << "reference," << p.key << ',' << p.latency << ',' << p.area << '\n';
    }
    for (const LabeledFront& f : fronts) {
      for (const ObjectivePoint& p : f.points) {
        csv << f.label << ',' << p.key << ',' << p.latency << ',' << p.area << '\n';
      }
    }
    const std::string csv_path = fs::path(svg_path).replace_extension(".csv").string();
    WriteFile(csv_path, csv.str());
    out << "wrote " << svg_path << " and " << csv_path << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

void ConfigureAllocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace invhls

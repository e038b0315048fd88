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

#include "invhls/design_space.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "invhls/errors.h"

namespace invhls {
namespace {

using nlohmann::json;

std::string LoopName(int i) { return "loop " + std::to_string(i); }

PartitionType ParsePartitionType(const std::string& s) {
  if (s == "block") return PartitionType::kBlock;
  if (s == "cyclic") return PartitionType::kCyclic;
  throw ValidationError("unknown partition type '" + s + "'");
}

double UnitDraw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Draws an index from probs restricted to allowed[] (renormalized).
int DrawMasked(const std::vector<double>& probs, const std::vector<bool>& allowed,
               std::mt19937_64& rng, const std::string& site_name) {
  double total = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (allowed[i]) {
      total += probs[i];
      last = static_cast<int>(i);
    }
  }
  if (last < 0 || !(total > 0.0)) {
    throw InfeasibleError("all options masked at site " + site_name);
  }
  const double target = UnitDraw(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!allowed[i]) continue;
    acc += probs[i];
    if (target < acc) return static_cast<int>(i);
  }
  return last;
}

bool PipelineFeasible(const DesignSpace& space, int loop) {
  if (space.has_variable_descendant(loop)) return false;
  const LoopDecl& decl = space.loops()[loop];
  return std::any_of(decl.unroll_options.begin(), decl.unroll_options.end(),
                     [&](int u) { return !space.is_full_unroll(loop, u); });
}

}  // namespace

const char* PartitionTypeName(PartitionType type) {
  return type == PartitionType::kBlock ? "block" : "cyclic";
}

DesignSpace::DesignSpace(std::vector<LoopDecl> loops,
                         std::vector<ArrayDecl> arrays,
                         std::vector<FuncDecl> functions)
    : loops_(std::move(loops)),
      arrays_(std::move(arrays)),
      functions_(std::move(functions)) {
  Validate();
  BuildDerived();
}

void DesignSpace::Validate() const {
  for (std::size_t i = 0; i < loops_.size(); ++i) {
    const LoopDecl& l = loops_[i];
    const std::string name = LoopName(static_cast<int>(i));
    if (l.id != static_cast<int>(i)) {
      throw ValidationError(name + ": loop ids must be 0..n-1 in order");
    }
    if (l.parent != -1 && (l.parent < 0 || l.parent >= l.id)) {
      throw ValidationError(name + ": parent index must be -1 or < id");
    }
    if (l.bound != kVariableBound && l.bound < 1) {
      throw ValidationError(name + ": bound must be positive or VARIABLE");
    }
    if (l.unroll_options.empty()) {
      throw ValidationError(name + ": empty unroll options");
    }
    if (!std::is_sorted(l.unroll_options.begin(), l.unroll_options.end()) ||
        std::adjacent_find(l.unroll_options.begin(), l.unroll_options.end()) !=
            l.unroll_options.end()) {
      throw ValidationError(name + ": unroll options must be strictly ascending");
    }
    if (l.unroll_options.front() != 1) {
      throw ValidationError(name + ": unroll options must contain 1");
    }
    for (int u : l.unroll_options) {
      if (u < 1) throw ValidationError(name + ": unroll factor must be >= 1");
      if (!l.variable_bound() && l.bound % u != 0) {
        throw ValidationError(name + ": unroll factor " + std::to_string(u) +
                              " does not divide bound " +
                              std::to_string(l.bound));
      }
    }
    if (l.ii_options.empty()) throw ValidationError(name + ": empty II options");
    for (int ii : l.ii_options) {
      if (ii < 1) throw ValidationError(name + ": II must be >= 1");
    }
    if (l.pipeline_prior &&
        !(*l.pipeline_prior > 0.0 && *l.pipeline_prior < 1.0)) {
      throw ValidationError(name + ": pipeline prior must lie in (0, 1)");
    }
  }
  std::set<std::string> names;
  for (const ArrayDecl& a : arrays_) {
    if (a.name.empty()) throw ValidationError("array with empty name");
    if (!names.insert(a.name).second) {
      throw ValidationError("duplicate array '" + a.name + "'");
    }
    if (a.size < 0) throw ValidationError("array '" + a.name + "': negative size");
    std::set<PartitionType> types(a.partition_types.begin(),
                                  a.partition_types.end());
    if (types.size() != a.partition_types.size()) {
      throw ValidationError("array '" + a.name + "': duplicate partition type");
    }
    if (a.partition_factors.empty() ||
        std::find(a.partition_factors.begin(), a.partition_factors.end(), 1) ==
            a.partition_factors.end()) {
      throw ValidationError("array '" + a.name +
                            "': partition factors must contain 1");
    }
    std::set<int> seen;
    for (int f : a.partition_factors) {
      if (f < 1) throw ValidationError("array '" + a.name + "': factor < 1");
      if (!seen.insert(f).second) {
        throw ValidationError("array '" + a.name + "': duplicate factor");
      }
      if (f > 1 && a.size > 0 && a.size % f != 0) {
        throw ValidationError("array '" + a.name + "': factor " +
                              std::to_string(f) + " does not divide size " +
                              std::to_string(a.size));
      }
      if (f > 1 && a.partition_types.empty()) {
        throw ValidationError("array '" + a.name +
                              "': factors > 1 need a partition type");
      }
    }
  }
  std::set<std::string> fnames;
  for (const FuncDecl& f : functions_) {
    if (f.name.empty()) throw ValidationError("function with empty name");
    if (!fnames.insert(f.name).second) {
      throw ValidationError("duplicate function '" + f.name + "'");
    }
    if (f.inline_prior && !(*f.inline_prior > 0.0 && *f.inline_prior < 1.0)) {
      throw ValidationError("function '" + f.name +
                            "': inline prior must lie in (0, 1)");
    }
  }
}

void DesignSpace::BuildDerived() {
  const std::size_t n = loops_.size();
  children_.assign(n, {});
  variable_below_.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (loops_[i].parent >= 0) children_[loops_[i].parent].push_back(int(i));
  }
  // Children have larger indices, so a reverse sweep sees them first.
  for (std::size_t r = n; r-- > 0;) {
    for (int c : children_[r]) {
      if (loops_[c].variable_bound() || variable_below_[c]) {
        variable_below_[r] = true;
      }
    }
  }
  partition_options_.clear();
  for (const ArrayDecl& a : arrays_) {
    std::vector<PartitionChoice> opts{{PartitionType::kBlock, 1}};
    for (PartitionType t : a.partition_types) {
      for (int f : a.partition_factors) {
        if (f > 1) opts.push_back({t, f});
      }
    }
    partition_options_.push_back(std::move(opts));
  }
}

bool DesignSpace::is_full_unroll(int loop, int unroll) const {
  const LoopDecl& l = loops_[loop];
  return !l.variable_bound() && unroll == l.bound;
}

DesignSpace DesignSpaceFromJson(const json& doc) {
  if (!doc.is_object()) throw ValidationError("design space must be an object");
  std::vector<LoopDecl> loops;
  std::vector<ArrayDecl> arrays;
  std::vector<FuncDecl> functions;
  try {
    for (const json& j : doc.value("loops", json::array())) {
      LoopDecl l;
      l.id = j.at("id").get<int>();
      l.parent = j.contains("parent") && !j.at("parent").is_null()
                     ? j.at("parent").get<int>()
                     : -1;
      const json& b = j.at("bound");
      if (b.is_string()) {
        if (b.get<std::string>() != "VARIABLE") {
          throw ValidationError("bound must be an integer or \"VARIABLE\"");
        }
        l.bound = kVariableBound;
      } else {
        l.bound = b.get<int>();
      }
      l.unroll_options = j.at("unroll_options").get<std::vector<int>>();
      l.ii_options = j.value("ii_options", std::vector<int>{1});
      if (j.contains("pipeline_prob")) l.pipeline_prior = j["pipeline_prob"].get<double>();
      loops.push_back(std::move(l));
    }
    for (const json& j : doc.value("arrays", json::array())) {
      ArrayDecl a;
      a.name = j.at("name").get<std::string>();
      a.size = j.value("size", 0);
      for (const json& t : j.value("types", json::array())) {
        a.partition_types.push_back(ParsePartitionType(t.get<std::string>()));
      }
      a.partition_factors = j.value("factors", std::vector<int>{1});
      arrays.push_back(std::move(a));
    }
    for (const json& j : doc.value("functions", json::array())) {
      FuncDecl f;
      f.name = j.at("name").get<std::string>();
      f.inlinable = j.value("inlinable", true);
      if (j.contains("inline_prob")) f.inline_prior = j["inline_prob"].get<double>();
      functions.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("design space: ") + e.what());
  }
  return DesignSpace(std::move(loops), std::move(arrays), std::move(functions));
}

json DesignSpaceToJson(const DesignSpace& space) {
  json doc;
  doc["loops"] = json::array();
  for (const LoopDecl& l : space.loops()) {
    json j{{"id", l.id},
           {"parent", l.parent},
           {"unroll_options", l.unroll_options},
           {"ii_options", l.ii_options}};
    j["bound"] = l.variable_bound() ? json("VARIABLE") : json(l.bound);
    if (l.pipeline_prior) j["pipeline_prob"] = *l.pipeline_prior;
    doc["loops"].push_back(std::move(j));
  }
  doc["arrays"] = json::array();
  for (const ArrayDecl& a : space.arrays()) {
    json types = json::array();
    for (PartitionType t : a.partition_types) types.push_back(PartitionTypeName(t));
    json j{{"name", a.name}, {"types", types}, {"factors", a.partition_factors}};
    if (a.size > 0) j["size"] = a.size;
    doc["arrays"].push_back(std::move(j));
  }
  doc["functions"] = json::array();
  for (const FuncDecl& f : space.functions()) {
    json j{{"name", f.name}, {"inlinable", f.inlinable}};
    if (f.inline_prior) j["inline_prob"] = *f.inline_prior;
    doc["functions"].push_back(std::move(j));
  }
  return doc;
}

DesignSpace LoadDesignSpace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open design space file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return DesignSpaceFromJson(doc);
}

std::vector<Site> SiteLayout(const DesignSpace& space) {
  std::vector<Site> sites;
  for (const LoopDecl& l : space.loops()) {
    sites.push_back({SiteKind::kUnroll, l.id, int(l.unroll_options.size())});
    sites.push_back({SiteKind::kPipeline, l.id, 2});
    sites.push_back({SiteKind::kII, l.id, int(l.ii_options.size())});
  }
  for (std::size_t a = 0; a < space.arrays().size(); ++a) {
    sites.push_back({SiteKind::kPartition, int(a),
                     int(space.partition_options(int(a)).size())});
  }
  for (std::size_t f = 0; f < space.functions().size(); ++f) {
    if (space.functions()[f].inlinable) {
      sites.push_back({SiteKind::kInline, int(f), 2});
    }
  }
  return sites;
}

std::vector<double> SiteProbs(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("softmax of an empty site");
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : logits) {
    if (!std::isfinite(x)) throw NumericError("non-finite logit");
    mx = std::max(mx, x);
  }
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

std::vector<double> ThetaDistribution::probs(std::size_t site) const {
  return SiteProbs(logits.at(site));
}

std::size_t ThetaDistribution::flat_dim() const {
  std::size_t n = 0;
  for (const Site& s : sites) n += s.size;
  return n;
}

int ThetaDistribution::find_site(SiteKind kind, int target) const {
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i].kind == kind && sites[i].target == target) return int(i);
  }
  return -1;
}

ThetaDistribution InitThetaUniform(const DesignSpace& space) {
  space.Validate();
  ThetaDistribution theta;
  theta.sites = SiteLayout(space);
  for (const Site& s : theta.sites) theta.logits.emplace_back(s.size, 0.0);
  return theta;
}

ThetaDistribution InitThetaFromPriors(const DesignSpace& space) {
  ThetaDistribution theta = InitThetaUniform(space);
  for (std::size_t i = 0; i < theta.sites.size(); ++i) {
    const Site& s = theta.sites[i];
    std::optional<double> p;
    if (s.kind == SiteKind::kPipeline) p = space.loops()[s.target].pipeline_prior;
    if (s.kind == SiteKind::kInline) p = space.functions()[s.target].inline_prior;
    if (p) theta.logits[i][1] = std::log(*p / (1.0 - *p));
  }
  return theta;
}

std::vector<double> FlattenTheta(const ThetaDistribution& theta) {
  std::vector<double> flat;
  flat.reserve(theta.flat_dim());
  for (std::size_t i = 0; i < theta.sites.size(); ++i) {
    const std::vector<double> p = theta.probs(i);
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return flat;
}

bool HasPipelinedAncestor(const DesignSpace& space, const PragmaConfig& config,
                          int loop) {
  for (int p = space.loops()[loop].parent; p >= 0; p = space.loops()[p].parent) {
    if (config.loops[p].pipelined) return true;
  }
  return false;
}

void CheckConfig(const DesignSpace& space, const PragmaConfig& config) {
  if (config.loops.size() != space.loops().size() ||
      config.arrays.size() != space.arrays().size() ||
      config.inlined.size() != space.functions().size()) {
    throw ValidationError("config does not match the design space shape");
  }
  for (const LoopDecl& l : space.loops()) {
    const LoopPragma& p = config.loops[l.id];
    const std::string name = LoopName(l.id);
    if (HasPipelinedAncestor(space, config, l.id)) {
      if (l.variable_bound() || p.unroll != l.bound || p.pipelined) {
        throw ValidationError(name + ": R1 requires full unroll under a pipelined ancestor");
      }
      continue;
    }
    if (std::find(l.unroll_options.begin(), l.unroll_options.end(), p.unroll) ==
        l.unroll_options.end()) {
      throw ValidationError(name + ": unroll factor not offered");
    }
    if (p.pipelined) {
      if (space.has_variable_descendant(l.id)) {
        throw ValidationError(name + ": R3 forbids pipelining above a variable-bound loop");
      }
      if (space.is_full_unroll(l.id, p.unroll)) {
        throw ValidationError(name + ": R2 forbids pipelining a fully unrolled loop");
      }
      if (!p.ii || std::find(l.ii_options.begin(), l.ii_options.end(), *p.ii) ==
                       l.ii_options.end()) {
        throw ValidationError(name + ": pipelined loop needs an offered II");
      }
    }
  }
  for (std::size_t a = 0; a < space.arrays().size(); ++a) {
    PartitionChoice c = config.arrays[a];
    if (c.factor == 1) c.type = PartitionType::kBlock;
    const auto& opts = space.partition_options(int(a));
    if (std::find(opts.begin(), opts.end(), c) == opts.end()) {
      throw ValidationError("array '" + space.arrays()[a].name +
                            "': partition choice not offered");
    }
  }
  for (std::size_t f = 0; f < space.functions().size(); ++f) {
    if (config.inlined[f] && !space.functions()[f].inlinable) {
      throw ValidationError("function '" + space.functions()[f].name +
                            "' is not inlinable");
    }
  }
}

PragmaConfig Canonicalize(const DesignSpace& space, const PragmaConfig& config) {
  PragmaConfig out = config;
  for (const LoopDecl& l : space.loops()) {
    LoopPragma& p = out.loops[l.id];
    if (HasPipelinedAncestor(space, out, l.id)) {
      p.unroll = l.bound;
      p.pipelined = false;
    }
    if (!p.pipelined) p.ii.reset();
  }
  for (PartitionChoice& c : out.arrays) {
    if (c.factor == 1) c.type = PartitionType::kBlock;
  }
  return out;
}

std::string CanonicalKey(const DesignSpace& space, const PragmaConfig& config) {
  const PragmaConfig c = Canonicalize(space, config);
  std::ostringstream os;
  for (const LoopDecl& l : space.loops()) {
    const LoopPragma& p = c.loops[l.id];
    os << 'L' << l.id << '=';
    if (HasPipelinedAncestor(space, c, l.id)) {
      os << 'F';
    } else {
      os << 'u' << p.unroll;
      if (p.pipelined) os << "p" << *p.ii;
    }
    os << ';';
  }
  for (std::size_t a = 0; a < space.arrays().size(); ++a) {
    const PartitionChoice& pc = c.arrays[a];
    os << 'A' << a << '=';
    if (pc.factor == 1) {
      os << '-';
    } else {
      os << (pc.type == PartitionType::kBlock ? 'b' : 'c') << pc.factor;
    }
    os << ';';
  }
  for (std::size_t f = 0; f < space.functions().size(); ++f) {
    os << 'F' << f << '=' << (c.inlined[f] ? 1 : 0) << ';';
  }
  return os.str();
}

PragmaConfig SampleConfig(const ThetaDistribution& theta,
                          const DesignSpace& space, std::uint64_t seed) {
  if (theta.sites.size() != SiteLayout(space).size()) {
    throw ValidationError("theta does not match the design space");
  }
  std::mt19937_64 rng(seed);
  PragmaConfig config;
  config.loops.resize(space.loops().size());
  config.arrays.resize(space.arrays().size());
  config.inlined.assign(space.functions().size(), false);

  std::size_t site = 0;
  for (const LoopDecl& l : space.loops()) {
    const std::size_t unroll_site = site, pipe_site = site + 1, ii_site = site + 2;
    site += 3;
    LoopPragma& p = config.loops[l.id];
    if (HasPipelinedAncestor(space, config, l.id)) {
      // R1; R3 keeps variable-bound loops out of this branch.
      p.unroll = l.bound;
      p.pipelined = false;
      continue;
    }
    const std::string name = LoopName(l.id);
    std::vector<bool> pipe_allowed{true, PipelineFeasible(space, l.id)};
    p.pipelined =
        DrawMasked(theta.probs(pipe_site), pipe_allowed, rng, name + " pipeline") == 1;
    std::vector<bool> unroll_allowed(l.unroll_options.size(), true);
    if (p.pipelined) {
      for (std::size_t i = 0; i < l.unroll_options.size(); ++i) {
        unroll_allowed[i] = !space.is_full_unroll(l.id, l.unroll_options[i]);
      }
    }
    p.unroll = l.unroll_options[DrawMasked(theta.probs(unroll_site), unroll_allowed,
                                           rng, name + " unroll")];
    if (p.pipelined) {
      const std::vector<bool> all(l.ii_options.size(), true);
      p.ii = l.ii_options[DrawMasked(theta.probs(ii_site), all, rng, name + " II")];
    }
  }
  for (std::size_t a = 0; a < space.arrays().size(); ++a, ++site) {
    const auto& opts = space.partition_options(int(a));
    const std::vector<bool> all(opts.size(), true);
    config.arrays[a] =
        opts[DrawMasked(theta.probs(site), all, rng, space.arrays()[a].name)];
  }
  for (std::size_t f = 0; f < space.functions().size(); ++f) {
    if (!space.functions()[f].inlinable) continue;
    const std::vector<bool> all{true, true};
    config.inlined[f] =
        DrawMasked(theta.probs(site), all, rng, space.functions()[f].name) == 1;
    ++site;
  }
  return config;
}

PragmaConfig IdentityConfig(const DesignSpace& space) {
  PragmaConfig c;
  c.loops.assign(space.loops().size(), LoopPragma{});
  c.arrays.assign(space.arrays().size(), PartitionChoice{});
  c.inlined.assign(space.functions().size(), false);
  return c;
}

json PragmaConfigToJson(const DesignSpace& space, const PragmaConfig& config) {
  json doc;
  doc["loops"] = json::array();
  for (const LoopPragma& p : config.loops) {
    json j{{"unroll", p.unroll}, {"pipeline", p.pipelined}};
    if (p.ii) j["ii"] = *p.ii;
    doc["loops"].push_back(std::move(j));
  }
  doc["arrays"] = json::array();
  for (std::size_t a = 0; a < config.arrays.size(); ++a) {
    doc["arrays"].push_back({{"name", space.arrays()[a].name},
                             {"type", PartitionTypeName(config.arrays[a].type)},
                             {"factor", config.arrays[a].factor}});
  }
  doc["functions"] = json::array();
  for (std::size_t f = 0; f < config.inlined.size(); ++f) {
    doc["functions"].push_back(
        {{"name", space.functions()[f].name}, {"inline", bool(config.inlined[f])}});
  }
  return doc;
}

PragmaConfig PragmaConfigFromJson(const DesignSpace& space, const json& doc) {
  PragmaConfig c;
  try {
    for (const json& j : doc.at("loops")) {
      LoopPragma p;
      p.unroll = j.at("unroll").get<int>();
      p.pipelined = j.value("pipeline", false);
      if (j.contains("ii")) p.ii = j["ii"].get<int>();
      c.loops.push_back(p);
    }
    for (const json& j : doc.at("arrays")) {
      c.arrays.push_back({ParsePartitionType(j.value("type", "block")),
                          j.value("factor", 1)});
    }
    for (const json& j : doc.at("functions")) {
      c.inlined.push_back(j.value("inline", false));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("pragma config: ") + e.what());
  }
  CheckConfig(space, c);
  return c;
}

json ThetaToJson(const ThetaDistribution& theta) {
  static constexpr const char* kKinds[] = {"unroll", "pipeline", "ii",
                                           "partition", "inline"};
  json sites = json::array();
  for (std::size_t i = 0; i < theta.sites.size(); ++i) {
    sites.push_back({{"kind", kKinds[int(theta.sites[i].kind)]},
                     {"target", theta.sites[i].target},
                     {"logits", theta.logits[i]}});
  }
  return json{{"sites", sites}};
}

ThetaDistribution ThetaFromJson(const DesignSpace& space, const json& doc) {
  ThetaDistribution theta = InitThetaUniform(space);
  const json& sites = doc.at("sites");
  if (sites.size() != theta.sites.size()) {
    throw ValidationError("theta file does not match the design space");
  }
  for (std::size_t i = 0; i < sites.size(); ++i) {
    auto logits = sites[i].at("logits").get<std::vector<double>>();
    if (int(logits.size()) != theta.sites[i].size) {
      throw ValidationError("theta site size mismatch");
    }
    theta.logits[i] = std::move(logits);
  }
  return theta;
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                      std::uint64_t c, std::uint64_t d) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (std::uint64_t x : {a, b, c, d}) h = mix(h ^ mix(x));
  return h;
}

}  // namespace invhls

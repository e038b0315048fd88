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

#include "invhls/mini_hls.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "invhls/errors.h"

namespace invhls {
namespace {

using nlohmann::json;

bool IsCompute(OpKind k) {
  return k == OpKind::kAdd || k == OpKind::kMul || k == OpKind::kCall ||
         k == OpKind::kLoop;
}

OpKind ParseOpKind(const std::string& s) {
  if (s == "add") return OpKind::kAdd;
  if (s == "mul") return OpKind::kMul;
  if (s == "load") return OpKind::kLoad;
  if (s == "store") return OpKind::kStore;
  if (s == "call") return OpKind::kCall;
  if (s == "loop") return OpKind::kLoop;
  throw ValidationError("unknown op '" + s + "'");
}

KernelOp OpFromJson(const json& j) {
  KernelOp op;
  op.kind = ParseOpKind(j.at("op").get<std::string>());
  op.array = j.value("array", "");
  if (j.contains("index")) {
    for (const json& t : j["index"]) op.index.emplace_back(t.at(0).get<int>(), t.at(1).get<int>());
  }
  op.offset = j.value("offset", 0);
  op.callee = j.value("callee", "");
  op.loop = j.value("loop", -1);
  if (j.contains("deps")) op.deps = j["deps"].get<std::vector<int>>();
  op.carried = j.value("carried", false);
  return op;
}

int EffectiveBound(const KernelLoop& l, const CostModel& cost) {
  return l.bound == kVariableBound ? cost.nominal_trip_count : l.bound;
}

int TripCount(int bound, int unroll) { return (bound + unroll - 1) / unroll; }

// Resource keys for the reservation tables.
int LoadPort(int array, int bank) { return (array * 4096 + bank) * 2; }
int StorePort(int array, int bank) { return (array * 4096 + bank) * 2 + 1; }
int FunctionPort(int f) { return -1 - f; }

bool IsLoadPort(int key) { return key >= 0 && key % 2 == 0; }
bool IsStorePort(int key) { return key >= 0 && key % 2 == 1; }

int OpLatency(const OpInstance& op, const CostModel& cost,
              const std::vector<RegionSchedule>& regions,
              const std::vector<RegionSchedule>& functions) {
  switch (op.kind) {
    case OpKind::kAdd: return cost.add_latency;
    case OpKind::kMul: return cost.mul_latency;
    case OpKind::kLoad: return cost.load_latency;
    case OpKind::kStore: return cost.store_latency;
    case OpKind::kCall: return cost.call_latency + functions[op.callee].depth;
    case OpKind::kLoop: return int(regions[op.region].latency);
  }
  return 0;
}

class Elaborator {
 public:
  Elaborator(const KernelModel& kernel, const DesignSpace& space,
             const PragmaConfig& config, const CostModel& cost)
      : kernel_(kernel), space_(space), config_(config), cost_(cost) {}

  ElaboratedKernel Run() {
    out_.partitions.assign(kernel_.arrays.size(), PartitionChoice{});
    for (std::size_t a = 0; a < space_.arrays().size(); ++a) {
      out_.partitions[kernel_.array_index(space_.arrays()[a].name)] = config_.arrays[a];
    }
    out_.function_instantiated.assign(kernel_.functions.size(), false);
    for (std::size_t f = 0; f < kernel_.functions.size(); ++f) {
      std::vector<OpInstance> body;
      AppendFunction(int(f), {}, body);
      out_.function_bodies.push_back(std::move(body));
    }
    std::vector<int> env(kernel_.loops.size(), 0);
    for (const KernelLoop& l : kernel_.loops) {
      if (l.parent != -1) continue;
      if (Dissolved(l.id)) {
        const int r = NewRegion(l.id, -1);
        out_.regions[r].has_controller = false;
        out_.regions[r].trip_count = 1;
        out_.regions[r].unroll = l.bound;
        for (int rep = 0; rep < l.bound; ++rep) {
          env[l.id] = rep;
          AppendBody(r, l.body, env, {}, l.id);
        }
        env[l.id] = 0;
        out_.top_regions.push_back(r);
      } else {
        out_.top_regions.push_back(BuildRegion(l.id, env, -1));
      }
    }
    return std::move(out_);
  }

 private:
  bool Dissolved(int loop) const {
    return space_.is_full_unroll(loop, config_.loops[loop].unroll);
  }

  int NewRegion(int loop, int parent) {
    Region r;
    r.loop = loop;
    r.parent = parent;
    const LoopPragma& p = config_.loops[loop];
    r.unroll = p.unroll;
    r.trip_count = TripCount(EffectiveBound(kernel_.loops[loop], cost_), p.unroll);
    r.pipelined = p.pipelined;
    r.ii = p.ii.value_or(1);
    out_.regions.push_back(std::move(r));
    return int(out_.regions.size()) - 1;
  }

  int BuildRegion(int loop, std::vector<int> env, int parent) {
    const int r = NewRegion(loop, parent);
    const int unroll = config_.loops[loop].unroll;
    for (int rep = 0; rep < unroll; ++rep) {
      env[loop] = rep;
      AppendBody(r, kernel_.loops[loop].body, env, {}, loop);
    }
    return r;
  }

  std::int64_t Address(const KernelOp& op, const std::vector<int>& env) const {
    std::int64_t a = op.offset;
    for (const auto& [loop, coeff] : op.index) a += std::int64_t(coeff) * env[loop];
    return a;
  }

  // Appends function f's body; returns its terminal instances.
  std::vector<int> AppendFunction(int f, const std::vector<int>& entry,
                                  std::vector<OpInstance>& target) {
    const auto& body = kernel_.functions[f].body;
    std::vector<std::vector<int>> outs(body.size());
    for (std::size_t j = 0; j < body.size(); ++j) {
      OpInstance inst;
      inst.kind = body[j].kind;
      inst.source_item = int(j);
      if (body[j].deps) {
        for (int d : *body[j].deps) inst.deps.insert(inst.deps.end(), outs[d].begin(), outs[d].end());
      } else if (j > 0) {
        inst.deps = outs[j - 1];
      }
      if (inst.deps.empty()) inst.deps = entry;
      target.push_back(std::move(inst));
      outs[j] = {int(target.size()) - 1};
    }
    if (body.empty()) return entry;
    return outs.back();
  }

  // Appends one copy of a loop body to region r; returns the terminal
  // instances of the copy.
  std::vector<int> AppendBody(int r, const std::vector<KernelOp>& body,
                              const std::vector<int>& env, const std::vector<int>& entry,
                              int source_loop) {
    const int first = int(out_.regions[r].ops.size());
    std::vector<std::vector<int>> outs(body.size());
    std::vector<int> loads, last_compute;
    for (std::size_t j = 0; j < body.size(); ++j) {
      const KernelOp& op = body[j];
      std::vector<int> deps;
      if (op.deps) {
        for (int d : *op.deps) deps.insert(deps.end(), outs[d].begin(), outs[d].end());
      } else if (op.kind == OpKind::kStore) {
        deps = last_compute.empty() ? loads : last_compute;
      } else if (IsCompute(op.kind)) {
        deps = loads;
        deps.insert(deps.end(), last_compute.begin(), last_compute.end());
      }
      if (deps.empty()) deps = entry;

      OpInstance inst;
      inst.kind = op.kind;
      inst.source_loop = source_loop;
      inst.source_item = int(j);
      inst.deps = deps;
      switch (op.kind) {
        case OpKind::kLoad:
        case OpKind::kStore:
          inst.array = kernel_.array_index(op.array);
          inst.address = Address(op, env);
          inst.index = op.index;
          outs[j] = {Push(r, std::move(inst))};
          break;
        case OpKind::kAdd:
        case OpKind::kMul: {
          inst.carried = op.carried;
          if (op.carried) {
            const auto key = std::make_tuple(r, source_loop, int(j));
            if (auto it = last_carried_.find(key); it != last_carried_.end()) {
              inst.deps.push_back(it->second);
            }
            outs[j] = {Push(r, std::move(inst))};
            last_carried_[key] = outs[j][0];
          } else {
            outs[j] = {Push(r, std::move(inst))};
          }
          break;
        }
        case OpKind::kCall: {
          const int f = kernel_.function_index(op.callee);
          if (config_.inlined[f]) {
            auto& ops = out_.regions[r].ops;
            const std::size_t before = ops.size();
            outs[j] = AppendFunction(f, deps, ops);
            for (std::size_t i = before; i < ops.size(); ++i) ops[i].source_loop = source_loop;
          } else {
            inst.callee = f;
            out_.function_instantiated[f] = true;
            outs[j] = {Push(r, std::move(inst))};
          }
          break;
        }
        case OpKind::kLoop: {
          const KernelLoop& child = kernel_.loops[op.loop];
          if (Dissolved(child.id)) {
            std::vector<int> terminals;
            std::vector<int> env2 = env;
            for (int rep = 0; rep < child.bound; ++rep) {
              env2[child.id] = rep;
              const auto t = AppendBody(r, child.body, env2, deps, child.id);
              terminals.insert(terminals.end(), t.begin(), t.end());
            }
            outs[j] = terminals.empty() ? deps : terminals;
          } else {
            const int child_region = BuildRegion(child.id, env, r);
            inst.region = child_region;
            outs[j] = {Push(r, std::move(inst))};
          }
          break;
        }
      }
      if (op.kind == OpKind::kLoad) loads.insert(loads.end(), outs[j].begin(), outs[j].end());
      if (IsCompute(op.kind)) last_compute = outs[j];
    }
    const auto& ops = out_.regions[r].ops;
    std::vector<bool> used(ops.size(), false);
    for (std::size_t i = first; i < ops.size(); ++i) {
      for (int d : ops[i].deps) {
        if (d >= first) used[d] = true;
      }
    }
    std::vector<int> terminals;
    for (std::size_t i = first; i < ops.size(); ++i) {
      if (!used[i]) terminals.push_back(int(i));
    }
    return terminals.empty() ? entry : terminals;
  }

  int Push(int r, OpInstance inst) {
    out_.regions[r].ops.push_back(std::move(inst));
    return int(out_.regions[r].ops.size()) - 1;
  }

  const KernelModel& kernel_;
  const DesignSpace& space_;
  const PragmaConfig config_;
  const CostModel& cost_;
  ElaboratedKernel out_;
  std::map<std::tuple<int, int, int>, int> last_carried_;
};

// Port keys touched by region r and everything nested in it over the full
// iteration space of r (ancestors fixed at the representative iteration).
std::set<int> TouchedPorts(const ElaboratedKernel& elab, const KernelModel& kernel, int r) {
  std::set<int> out;
  for (std::size_t q = r; q < elab.regions.size(); ++q) {
    std::vector<int> chain;
    int x = int(q);
    while (x != -1 && x != r) {
      chain.push_back(x);
      x = elab.regions[x].parent;
    }
    if (x != r) continue;
    chain.push_back(r);
    for (const OpInstance& op : elab.regions[q].ops) {
      if (op.kind == OpKind::kCall) {
        out.insert(FunctionPort(op.callee));
        continue;
      }
      if (op.kind != OpKind::kLoad && op.kind != OpKind::kStore) continue;
      std::vector<std::int64_t> steps;
      std::vector<int> trips;
      for (int c : chain) {
        const Region& reg = elab.regions[c];
        std::int64_t coeff = 0;
        for (const auto& [loop, k] : op.index) {
          if (loop == reg.loop) coeff += k;
        }
        steps.push_back(coeff * reg.unroll);
        trips.push_back(reg.trip_count);
      }
      std::vector<int> it(chain.size(), 0);
      while (true) {
        std::int64_t addr = op.address;
        for (std::size_t i = 0; i < it.size(); ++i) addr += steps[i] * it[i];
        const int bank = BankOf(elab, kernel, op.array, addr);
        out.insert(op.kind == OpKind::kLoad ? LoadPort(op.array, bank)
                                            : StorePort(op.array, bank));
        std::size_t d = 0;
        while (d < it.size() && ++it[d] == trips[d]) it[d++] = 0;
        if (d == it.size()) break;
      }
    }
  }
  return out;
}

std::vector<int> OpPorts(const ElaboratedKernel& elab, const KernelModel& kernel,
                         const OpInstance& op,
                         const std::vector<std::set<int>>& touched) {
  switch (op.kind) {
    case OpKind::kLoad: return {LoadPort(op.array, BankOf(elab, kernel, op.array, op.address))};
    case OpKind::kStore: return {StorePort(op.array, BankOf(elab, kernel, op.array, op.address))};
    case OpKind::kCall: return {FunctionPort(op.callee)};
    case OpKind::kLoop: return {touched[op.region].begin(), touched[op.region].end()};
    default: return {};
  }
}

RegionSchedule ScheduleFunction(const std::vector<OpInstance>& ops, const CostModel& cost) {
  RegionSchedule s;
  std::map<int, UnitUsage> per_cycle;
  for (const OpInstance& op : ops) {
    int t = 0;
    for (int d : op.deps) t = std::max(t, s.finish[d]);
    const int lat = op.kind == OpKind::kMul ? cost.mul_latency : cost.add_latency;
    s.start.push_back(t);
    s.finish.push_back(t + lat);
    s.depth = std::max(s.depth, t + lat);
    UnitUsage& u = per_cycle[t];
    (op.kind == OpKind::kMul ? u.multipliers : u.adders)++;
  }
  for (const auto& [_, u] : per_cycle) {
    s.units.adders = std::max(s.units.adders, u.adders);
    s.units.multipliers = std::max(s.units.multipliers, u.multipliers);
  }
  s.latency = s.depth;
  return s;
}

}  // namespace

const char* OpKindName(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kLoad: return "load";
    case OpKind::kStore: return "store";
    case OpKind::kCall: return "call";
    case OpKind::kLoop: return "loop";
  }
  return "?";
}

int KernelModel::array_index(const std::string& n) const {
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (arrays[i].name == n) return int(i);
  }
  return -1;
}

int KernelModel::function_index(const std::string& n) const {
  for (std::size_t i = 0; i < functions.size(); ++i) {
    if (functions[i].name == n) return int(i);
  }
  return -1;
}

void KernelModel::Validate(const DesignSpace& space) const {
  const std::string where = "kernel '" + name + "': ";
  if (loops.size() != space.loops().size()) {
    throw ValidationError(where + "loop count differs from the design space");
  }
  for (std::size_t i = 0; i < loops.size(); ++i) {
    const KernelLoop& l = loops[i];
    const LoopDecl& d = space.loops()[i];
    if (l.id != int(i) || l.parent != d.parent || l.bound != d.bound) {
      throw ValidationError(where + "loop " + std::to_string(i) +
                            " does not match its design-space declaration");
    }
  }
  for (const KernelArray& a : arrays) {
    if (a.size < 1) throw ValidationError(where + "array '" + a.name + "' has no elements");
  }
  for (const ArrayDecl& a : space.arrays()) {
    const int k = array_index(a.name);
    if (k < 0) throw ValidationError(where + "no array '" + a.name + "'");
    if (a.size > 0 && a.size != arrays[k].size) {
      throw ValidationError(where + "array '" + a.name + "' size differs from the design space");
    }
    for (int f : a.partition_factors) {
      if (f > 1 && arrays[k].size % f != 0) {
        throw ValidationError(where + "partition factor " + std::to_string(f) +
                              " does not divide array '" + a.name + "'");
      }
    }
  }
  if (functions.size() != space.functions().size()) {
    throw ValidationError(where + "function list differs from the design space");
  }
  for (std::size_t f = 0; f < functions.size(); ++f) {
    if (functions[f].name != space.functions()[f].name) {
      throw ValidationError(where + "function '" + functions[f].name +
                            "' out of order with the design space");
    }
    for (std::size_t j = 0; j < functions[f].body.size(); ++j) {
      const KernelOp& op = functions[f].body[j];
      if (op.kind != OpKind::kAdd && op.kind != OpKind::kMul) {
        throw ValidationError(where + "function bodies may only hold add/mul");
      }
      if (op.deps) {
        for (int d : *op.deps) {
          if (d < 0 || d >= int(j)) throw ValidationError(where + "function dep out of order");
        }
      }
    }
  }
  std::vector<int> referenced(loops.size(), 0);
  for (const KernelLoop& l : loops) {
    for (std::size_t j = 0; j < l.body.size(); ++j) {
      const KernelOp& op = l.body[j];
      const std::string at = where + "loop " + std::to_string(l.id) + " item " + std::to_string(j) + ": ";
      if (op.deps) {
        for (int d : *op.deps) {
          if (d < 0 || d >= int(j)) throw ValidationError(at + "deps must name earlier items");
        }
      }
      if (op.carried && op.kind != OpKind::kAdd) {
        throw ValidationError(at + "only adds may be carried");
      }
      switch (op.kind) {
        case OpKind::kLoad:
        case OpKind::kStore: {
          const int a = array_index(op.array);
          if (a < 0) throw ValidationError(at + "unknown array '" + op.array + "'");
          std::int64_t lo = op.offset, hi = op.offset;
          for (const auto& [loop, coeff] : op.index) {
            bool enclosing = false;
            for (int p = l.id; p != -1; p = loops[p].parent) enclosing |= (p == loop);
            if (!enclosing) throw ValidationError(at + "index uses a non-enclosing loop");
            const int b = loops[loop].bound == kVariableBound ? CostModel{}.nominal_trip_count
                                                              : loops[loop].bound;
            const std::int64_t span = std::int64_t(coeff) * (b - 1);
            (span >= 0 ? hi : lo) += span;
          }
          if (lo < 0 || hi >= arrays[a].size) {
            throw ValidationError(at + "access exceeds array '" + op.array + "'");
          }
          break;
        }
        case OpKind::kCall:
          if (function_index(op.callee) < 0) {
            throw ValidationError(at + "unknown function '" + op.callee + "'");
          }
          break;
        case OpKind::kLoop:
          if (op.loop < 0 || op.loop >= int(loops.size()) || loops[op.loop].parent != l.id) {
            throw ValidationError(at + "loop item must name a direct child");
          }
          referenced[op.loop]++;
          break;
        default:
          break;
      }
    }
  }
  for (const KernelLoop& l : loops) {
    if (l.parent != -1 && referenced[l.id] != 1) {
      throw ValidationError(where + "loop " + std::to_string(l.id) +
                            " must appear exactly once in its parent's body");
    }
  }
}

KernelModel KernelFromJson(const json& doc) {
  KernelModel k;
  try {
    k.name = doc.value("name", "kernel");
    for (const json& j : doc.value("arrays", json::array())) {
      k.arrays.push_back({j.at("name").get<std::string>(), j.at("size").get<int>()});
    }
    for (const json& j : doc.value("functions", json::array())) {
      KernelFunction f;
      f.name = j.at("name").get<std::string>();
      for (const json& o : j.value("body", json::array())) f.body.push_back(OpFromJson(o));
      k.functions.push_back(std::move(f));
    }
    for (const json& j : doc.value("loops", json::array())) {
      KernelLoop l;
      l.id = j.at("id").get<int>();
      l.parent = j.contains("parent") && !j["parent"].is_null() ? j["parent"].get<int>() : -1;
      const json& b = j.at("bound");
      l.bound = b.is_string() ? (b.get<std::string>() == "VARIABLE"
                                     ? kVariableBound
                                     : throw ValidationError("bad loop bound"))
                              : b.get<int>();
      for (const json& o : j.value("body", json::array())) l.body.push_back(OpFromJson(o));
      k.loops.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("kernel: ") + e.what());
  }
  return k;
}

KernelModel LoadKernel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open kernel file " + path);
  try {
    return KernelFromJson(json::parse(in));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

AreaVector& AreaVector::operator+=(const AreaVector& o) {
  ff += o.ff;
  lut += o.lut;
  dsp += o.dsp;
  bram += o.bram;
  uram += o.uram;
  return *this;
}

AreaVector AreaVector::operator*(std::int64_t k) const {
  return {ff * k, lut * k, dsp * k, bram * k, uram * k};
}

double ScalarizeArea(const AreaVector& a, const AreaWeights& w) {
  return w.lut * double(a.lut) + w.ff * double(a.ff) + w.dsp * double(a.dsp) +
         w.bram * double(a.bram) + w.uram * double(a.uram);
}

ElaboratedKernel Elaborate(const KernelModel& kernel, const DesignSpace& space,
                           const PragmaConfig& config, const CostModel& cost) {
  kernel.Validate(space);
  CheckConfig(space, config);
  return Elaborator(kernel, space, Canonicalize(space, config), cost).Run();
}

int BankOf(const ElaboratedKernel& elab, const KernelModel& kernel, int array,
           std::int64_t address) {
  const PartitionChoice& p = elab.partitions[array];
  if (p.factor <= 1) return 0;
  const std::int64_t size = kernel.arrays[array].size;
  const std::int64_t a = ((address % size) + size) % size;
  if (p.type == PartitionType::kCyclic) return int(a % p.factor);
  return int(a * p.factor / size);
}

ScheduleResult Schedule(const ElaboratedKernel& elab, const KernelModel& kernel,
                        const CostModel& cost) {
  ScheduleResult res;
  for (const auto& body : elab.function_bodies) res.functions.push_back(ScheduleFunction(body, cost));
  const std::size_t n = elab.regions.size();
  res.regions.resize(n);
  std::vector<std::set<int>> touched(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (elab.regions[r].parent != -1) touched[r] = TouchedPorts(elab, kernel, int(r));
  }
  for (std::size_t ri = n; ri-- > 0;) {
    const Region& reg = elab.regions[ri];
    RegionSchedule& s = res.regions[ri];
    std::vector<std::vector<int>> ports(reg.ops.size());
    for (std::size_t i = 0; i < reg.ops.size(); ++i) {
      ports[i] = OpPorts(elab, kernel, reg.ops[i], touched);
    }
    if (reg.pipelined) {
      std::map<int, int> pressure;
      int carried = 0;
      for (std::size_t i = 0; i < reg.ops.size(); ++i) {
        for (int p : ports[i]) pressure[p]++;
        carried += reg.ops[i].carried ? 1 : 0;
      }
      s.ii_eff = reg.ii;
      for (const auto& [_, c] : pressure) s.ii_eff = std::max(s.ii_eff, c);
      if (carried > 0) s.ii_eff = std::max(s.ii_eff, 1 + cost.add_latency * carried);
    }
    // busy[port][cycle]; modulo ii_eff for pipelined regions.
    std::map<int, std::vector<char>> busy;
    auto slot = [&](int t) { return reg.pipelined ? t % s.ii_eff : t; };
    auto is_free = [&](const std::vector<int>& ps, int t, int len) {
      for (int p : ps) {
        const auto it = busy.find(p);
        if (it == busy.end()) continue;
        for (int c = t; c < t + len; ++c) {
          const int k = slot(c);
          if (k < int(it->second.size()) && it->second[k]) return false;
        }
      }
      return true;
    };
    auto reserve = [&](const std::vector<int>& ps, int t, int len) {
      for (int p : ps) {
        auto& v = busy[p];
        for (int c = t; c < t + len; ++c) {
          const int k = slot(c);
          if (k >= int(v.size())) v.resize(k + 1, 0);
          v[k] = 1;
        }
      }
    };
    std::map<int, UnitUsage> issues;
    for (std::size_t i = 0; i < reg.ops.size(); ++i) {
      const OpInstance& op = reg.ops[i];
      int t = 0;
      for (int d : op.deps) t = std::max(t, s.finish[d]);
      const int lat = OpLatency(op, cost, res.regions, res.functions);
      // A child loop holds its ports for its whole run; single ops for their
      // issue cycle.
      const int hold = op.kind == OpKind::kLoop ? std::max(lat, 1) : 1;
      while (!is_free(ports[i], t, hold)) ++t;
      reserve(ports[i], t, hold);
      s.start.push_back(t);
      s.finish.push_back(t + lat);
      s.depth = std::max(s.depth, t + lat);
      if (op.kind == OpKind::kAdd) issues[slot(t)].adders++;
      if (op.kind == OpKind::kMul) issues[slot(t)].multipliers++;
    }
    for (const auto& [_, u] : issues) {
      s.units.adders = std::max(s.units.adders, u.adders);
      s.units.multipliers = std::max(s.units.multipliers, u.multipliers);
    }
    const std::int64_t trips = reg.trip_count;
    if (reg.pipelined) {
      s.latency = s.depth + std::int64_t(s.ii_eff) * (trips - 1);
    } else if (reg.has_controller) {
      s.latency = trips * (s.depth + cost.loop_overhead);
    } else {
      s.latency = s.depth;
    }
  }
  for (int r : elab.top_regions) res.latency += res.regions[r].latency;
  return res;
}

PortPeak ReplayBankUsage(const ElaboratedKernel& elab, const KernelModel& kernel,
                         const ScheduleResult& sched) {
  PortPeak peak;
  const std::size_t n = elab.regions.size();
  std::vector<std::set<int>> touched(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (elab.regions[r].parent != -1) touched[r] = TouchedPorts(elab, kernel, int(r));
  }
  for (std::size_t r = 0; r < n; ++r) {
    const Region& reg = elab.regions[r];
    const RegionSchedule& s = sched.regions[r];
    std::map<std::pair<int, std::int64_t>, int> use;  // (port, cycle) -> count
    const int iterations = reg.pipelined ? reg.trip_count : 1;
    for (int k = 0; k < iterations; ++k) {
      const std::int64_t base = reg.pipelined ? std::int64_t(k) * s.ii_eff : 0;
      for (std::size_t i = 0; i < reg.ops.size(); ++i) {
        const OpInstance& op = reg.ops[i];
        const auto ports = OpPorts(elab, kernel, op, touched);
        const int len = op.kind == OpKind::kLoop ? std::max(1, s.finish[i] - s.start[i]) : 1;
        for (int p : ports) {
          for (int c = 0; c < len; ++c) {
            const int count = ++use[{p, base + s.start[i] + c}];
            if (IsLoadPort(p)) peak.loads = std::max(peak.loads, count);
            if (IsStorePort(p)) peak.stores = std::max(peak.stores, count);
          }
        }
      }
    }
  }
  return peak;
}

AreaVector EstimateArea(const ElaboratedKernel& elab, const ScheduleResult& sched,
                        const CostModel& cost) {
  AreaVector area;
  for (std::size_t r = 0; r < elab.regions.size(); ++r) {
    const UnitUsage& u = sched.regions[r].units;
    area += cost.adder * u.adders;
    area += cost.multiplier * u.multipliers;
    if (elab.regions[r].has_controller) area += cost.loop_controller;
  }
  for (std::size_t f = 0; f < elab.function_instantiated.size(); ++f) {
    if (!elab.function_instantiated[f]) continue;
    area += cost.function_instance;
    area += cost.adder * sched.functions[f].units.adders;
    area += cost.multiplier * sched.functions[f].units.multipliers;
  }
  for (const PartitionChoice& p : elab.partitions) area += cost.bank * std::max(1, p.factor);
  return area;
}

CdfgGraph EmitCdfg(const ElaboratedKernel& elab, const KernelModel& kernel,
                   const ScheduleResult& sched) {
  std::vector<CdfgNode> nodes;
  std::vector<CdfgEdge> edges;
  auto add_node = [&](int type, const char* opcode, std::optional<std::int64_t> c) {
    const int id = int(nodes.size());
    nodes.push_back({id, type, opcode, 32, c});
    return id;
  };
  auto add_edge = [&](int src, int dst, int type) {
    edges.push_back({int(edges.size()), src, dst, type});
  };
  static constexpr int kOpCode[] = {kNodeAdd, kNodeMul, kNodeLoad, kNodeStore, kNodeCall};

  const int root = add_node(kNodeKernel, "kernel", sched.latency);
  std::vector<std::vector<int>> bank_node(kernel.arrays.size());
  for (std::size_t a = 0; a < kernel.arrays.size(); ++a) {
    const int banks = std::max(1, elab.partitions[a].factor);
    for (int b = 0; b < banks; ++b) bank_node[a].push_back(add_node(kNodeBank, "bank", b));
  }
  std::vector<int> function_node(kernel.functions.size(), -1);
  for (std::size_t f = 0; f < kernel.functions.size(); ++f) {
    if (!elab.function_instantiated[f]) continue;
    function_node[f] = add_node(kNodeFunction, "function", sched.functions[f].depth);
    const auto& body = elab.function_bodies[f];
    std::vector<int> ids;
    for (std::size_t i = 0; i < body.size(); ++i) {
      ids.push_back(add_node(kOpCode[int(body[i].kind)], OpKindName(body[i].kind),
                             sched.functions[f].start[i]));
      if (body[i].deps.empty()) add_edge(function_node[f], ids.back(), kControlEdge);
      for (int d : body[i].deps) add_edge(ids[d], ids.back(), kDataEdge);
    }
  }
  std::vector<int> entry(elab.regions.size(), -1);
  int prev_top = root;
  for (int r : elab.top_regions) {
    const Region& reg = elab.regions[r];
    const int type = !reg.has_controller ? kNodeBlock : reg.pipelined ? kNodePipeline : kNodeLoop;
    const char* opcode = !reg.has_controller ? "block" : reg.pipelined ? "pipeline" : "loop";
    entry[r] = add_node(type, opcode, sched.regions[r].latency);
    add_edge(prev_top, entry[r], kControlEdge);
    prev_top = entry[r];
  }
  for (std::size_t r = 0; r < elab.regions.size(); ++r) {
    const Region& reg = elab.regions[r];
    const RegionSchedule& s = sched.regions[r];
    std::vector<int> ids(reg.ops.size());
    for (std::size_t i = 0; i < reg.ops.size(); ++i) {
      const OpInstance& op = reg.ops[i];
      if (op.kind == OpKind::kLoop) {
        const bool pipe = elab.regions[op.region].pipelined;
        ids[i] = add_node(pipe ? kNodePipeline : kNodeLoop, pipe ? "pipeline" : "loop",
                          sched.regions[op.region].latency);
        entry[op.region] = ids[i];
      } else {
        ids[i] = add_node(kOpCode[int(op.kind)], OpKindName(op.kind), s.start[i]);
      }
      if (op.deps.empty()) add_edge(entry[r], ids[i], kControlEdge);
      for (int d : op.deps) add_edge(ids[d], ids[i], kDataEdge);
      if (op.kind == OpKind::kLoad) {
        add_edge(bank_node[op.array][BankOf(elab, kernel, op.array, op.address)], ids[i], kMemoryEdge);
      } else if (op.kind == OpKind::kStore) {
        add_edge(ids[i], bank_node[op.array][BankOf(elab, kernel, op.array, op.address)], kMemoryEdge);
      } else if (op.kind == OpKind::kCall) {
        add_edge(ids[i], function_node[op.callee], kCallEdge);
      }
    }
  }
  return CdfgGraph(std::move(nodes), std::move(edges));
}

SynthesisResult Synthesize(const KernelModel& kernel, const DesignSpace& space,
                           const PragmaConfig& config, const CostModel& cost) {
  const ElaboratedKernel elab = Elaborate(kernel, space, config, cost);
  const ScheduleResult sched = Schedule(elab, kernel, cost);
  SynthesisResult out;
  out.latency = sched.latency;
  out.area = EstimateArea(elab, sched, cost);
  out.graph = EmitCdfg(elab, kernel, sched);
  return out;
}

json AreaToJson(const AreaVector& a) {
  return json{{"FF", a.ff}, {"LUT", a.lut}, {"DSP", a.dsp}, {"BRAM", a.bram}, {"URAM", a.uram}};
}

AreaVector AreaFromJson(const json& doc) {
  AreaVector a;
  try {
    a.ff = doc.at("FF").get<std::int64_t>();
    a.lut = doc.at("LUT").get<std::int64_t>();
    a.dsp = doc.at("DSP").get<std::int64_t>();
    a.bram = doc.at("BRAM").get<std::int64_t>();
    a.uram = doc.at("URAM").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("area: ") + e.what());
  }
  if (a.ff < 0 || a.lut < 0 || a.dsp < 0 || a.bram < 0 || a.uram < 0) {
    throw ValidationError("area: negative resource count");
  }
  return a;
}

}  // namespace invhls

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

#ifndef INVHLS_MINI_HLS_H_
#define INVHLS_MINI_HLS_H_

// A deterministic miniature HLS flow: a kernel model is elaborated under a
// pragma configuration, list-scheduled against per-bank memory ports, costed
// and emitted as a CDFG.
//
// Elaboration produces scheduling regions. Every loop whose trip count stays
// above one becomes a region (one per replica of its enclosing bodies); a
// loop unrolled to its full bound dissolves into the enclosing region. Body
// items depend on each other either through explicit `deps` or through the
// default rule: loads have no inputs, each compute item (add, mul, call,
// loop) reads every earlier load plus the previous compute, and a store
// reads the last compute (or the loads when there is none).

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "invhls/cdfg.h"
#include "invhls/design_space.h"
#include "json.hpp"

namespace invhls {

enum class OpKind { kAdd, kMul, kLoad, kStore, kCall, kLoop };

const char* OpKindName(OpKind kind);

struct KernelOp {
  OpKind kind = OpKind::kAdd;
  std::string array;                        // load / store
  std::vector<std::pair<int, int>> index;   // (loop id, coefficient)
  int offset = 0;                           // load / store
  std::string callee;                       // call
  int loop = -1;                            // loop: child loop id
  std::optional<std::vector<int>> deps;     // earlier items of the same body
  bool carried = false;                     // add feeding the next iteration
};

struct KernelLoop {
  int id = 0;
  int parent = -1;
  int bound = 1;  // or kVariableBound
  std::vector<KernelOp> body;
};

struct KernelArray {
  std::string name;
  int size = 1;
};

struct KernelFunction {
  std::string name;
  std::vector<KernelOp> body;  // add / mul only
};

struct KernelModel {
  std::string name;
  std::vector<KernelLoop> loops;
  std::vector<KernelArray> arrays;
  std::vector<KernelFunction> functions;

  int array_index(const std::string& name) const;
  int function_index(const std::string& name) const;
  // Structural checks plus one-to-one agreement with the design space.
  void Validate(const DesignSpace& space) const;
};

KernelModel KernelFromJson(const nlohmann::json& doc);
KernelModel LoadKernel(const std::string& path);

struct AreaVector {
  std::int64_t ff = 0, lut = 0, dsp = 0, bram = 0, uram = 0;

  AreaVector& operator+=(const AreaVector& o);
  AreaVector operator*(std::int64_t k) const;
  bool operator==(const AreaVector&) const = default;
};

struct AreaWeights {
  double lut = 1.0, ff = 1.0, dsp = 100.0, bram = 50.0, uram = 50.0;
};

double ScalarizeArea(const AreaVector& area, const AreaWeights& weights = {});

// Every constant of the cost model.
struct CostModel {
  int add_latency = 1;
  int mul_latency = 3;
  int load_latency = 2;
  int store_latency = 1;
  int call_latency = 2;  // on top of the callee's body depth
  int loop_overhead = 1;
  int nominal_trip_count = 16;  // for variable-bound loops
  AreaVector adder{.ff = 32, .lut = 32};
  AreaVector multiplier{.ff = 16, .dsp = 3};
  AreaVector bank{.bram = 1};
  AreaVector loop_controller{.ff = 50, .lut = 50};
  AreaVector function_instance{.ff = 100, .lut = 100};
};

struct OpInstance {
  OpKind kind = OpKind::kAdd;
  int array = -1;     // kernel array index
  std::int64_t address = 0;  // at the representative iteration
  std::vector<std::pair<int, int>> index;
  int callee = -1;    // kernel function index (calls that stay calls)
  int region = -1;    // loop: child region
  std::vector<int> deps;
  bool carried = false;
  int source_loop = -1;
  int source_item = -1;
};

struct Region {
  int loop = -1;
  int unroll = 1;
  int trip_count = 1;
  bool pipelined = false;
  int ii = 1;
  bool has_controller = true;  // false for fully unrolled top-level loops
  int parent = -1;
  std::vector<OpInstance> ops;
};

struct ElaboratedKernel {
  std::vector<Region> regions;      // parents precede children
  std::vector<int> top_regions;     // executed in sequence
  std::vector<PartitionChoice> partitions;       // per kernel array
  std::vector<std::vector<OpInstance>> function_bodies;  // per kernel function
  std::vector<bool> function_instantiated;       // called without inlining
};

ElaboratedKernel Elaborate(const KernelModel& kernel, const DesignSpace& space,
                           const PragmaConfig& config, const CostModel& cost = {});

struct UnitUsage {
  int adders = 0;
  int multipliers = 0;
};

struct RegionSchedule {
  std::vector<int> start, finish;
  int depth = 0;
  int ii_eff = 0;  // pipelined regions only
  std::int64_t latency = 0;
  UnitUsage units;
};

struct ScheduleResult {
  std::vector<RegionSchedule> regions;
  std::vector<RegionSchedule> functions;
  std::int64_t latency = 0;
};

int BankOf(const ElaboratedKernel& elab, const KernelModel& kernel, int array,
           std::int64_t address);

ScheduleResult Schedule(const ElaboratedKernel& elab, const KernelModel& kernel,
                        const CostModel& cost = {});

// Peak loads and stores any single bank serves in one cycle within any region,
// replaying every pipelined iteration at its II offset and counting child
// loops as occupying the ports they touch for their whole duration.
struct PortPeak {
  int loads = 0;
  int stores = 0;
};
PortPeak ReplayBankUsage(const ElaboratedKernel& elab, const KernelModel& kernel,
                         const ScheduleResult& sched);

AreaVector EstimateArea(const ElaboratedKernel& elab, const ScheduleResult& sched,
                        const CostModel& cost = {});

// Node type codes of emitted graphs.
enum NodeCode : int {
  kNodeAdd = 0,
  kNodeMul = 1,
  kNodeLoad = 2,
  kNodeStore = 3,
  kNodeCall = 4,
  kNodeLoop = 5,
  kNodePipeline = 6,
  kNodeBank = 7,
  kNodeFunction = 8,
  kNodeKernel = 9,
  kNodeBlock = 10,
};

CdfgGraph EmitCdfg(const ElaboratedKernel& elab, const KernelModel& kernel,
                   const ScheduleResult& sched);

struct SynthesisResult {
  CdfgGraph graph;
  std::int64_t latency = 0;
  AreaVector area;

  bool operator==(const SynthesisResult&) const = default;
};

SynthesisResult Synthesize(const KernelModel& kernel, const DesignSpace& space,
                           const PragmaConfig& config, const CostModel& cost = {});

nlohmann::json AreaToJson(const AreaVector& area);
AreaVector AreaFromJson(const nlohmann::json& doc);

}  // namespace invhls

#endif  // INVHLS_MINI_HLS_H_

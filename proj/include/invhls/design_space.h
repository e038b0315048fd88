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

#ifndef INVHLS_DESIGN_SPACE_H_
#define INVHLS_DESIGN_SPACE_H_

// Pragma design space declaration, per-site sampling distributions, and
// rule-constrained configuration sampling.
//
// Three HLS rules shape every sampled configuration:
//   R1  a pipelined loop fully unrolls (and does not pipeline) every loop
//       nested beneath it;
//   R2  a loop is never both pipelined and fully unrolled;
//   R3  a loop with a variable trip count forbids pipelining any ancestor.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace invhls {

inline constexpr int kVariableBound = -1;

struct LoopDecl {
  int id = 0;
  int parent = -1;  // -1 for top level; otherwise < id
  int bound = 1;    // trip count, or kVariableBound
  std::vector<int> unroll_options;
  std::vector<int> ii_options;
  std::optional<double> pipeline_prior;  // initial P(pipelined)

  bool variable_bound() const { return bound == kVariableBound; }
};

enum class PartitionType { kBlock, kCyclic };

const char* PartitionTypeName(PartitionType type);

struct ArrayDecl {
  std::string name;
  int size = 0;  // element count; 0 when the declaration omits it
  std::vector<PartitionType> partition_types;
  std::vector<int> partition_factors;
};

struct FuncDecl {
  std::string name;
  bool inlinable = true;
  std::optional<double> inline_prior;  // initial P(inlined)
};

// One array partition choice. factor == 1 means "not partitioned"; the type
// is then irrelevant and canonically kBlock.
struct PartitionChoice {
  PartitionType type = PartitionType::kBlock;
  int factor = 1;

  bool operator==(const PartitionChoice&) const = default;
};

class DesignSpace {
 public:
  DesignSpace() = default;
  DesignSpace(std::vector<LoopDecl> loops, std::vector<ArrayDecl> arrays,
              std::vector<FuncDecl> functions);

  // Throws ValidationError describing the first violated invariant.
  void Validate() const;

  const std::vector<LoopDecl>& loops() const { return loops_; }
  const std::vector<ArrayDecl>& arrays() const { return arrays_; }
  const std::vector<FuncDecl>& functions() const { return functions_; }

  const std::vector<int>& children(int loop) const { return children_[loop]; }
  bool has_variable_descendant(int loop) const {
    return variable_below_[loop];
  }
  // Options of an array's partition site: "none" first, then every
  // (type, factor > 1) pair in declaration order.
  const std::vector<PartitionChoice>& partition_options(int array) const {
    return partition_options_[array];
  }
  // True when `unroll` equals the fixed bound of the loop.
  bool is_full_unroll(int loop, int unroll) const;

 private:
  void BuildDerived();

  std::vector<LoopDecl> loops_;
  std::vector<ArrayDecl> arrays_;
  std::vector<FuncDecl> functions_;
  std::vector<std::vector<int>> children_;
  std::vector<bool> variable_below_;
  std::vector<std::vector<PartitionChoice>> partition_options_;
};

DesignSpace DesignSpaceFromJson(const nlohmann::json& doc);
nlohmann::json DesignSpaceToJson(const DesignSpace& space);
DesignSpace LoadDesignSpace(const std::string& path);

enum class SiteKind { kUnroll, kPipeline, kII, kPartition, kInline };

struct Site {
  SiteKind kind;
  int target;  // loop, array or function index
  int size;    // number of options
};

// Fixed site order: per loop {unroll, pipeline, II}, then one partition site
// per array, then one inline site per inlinable function. Pipeline and inline
// sites are ordered [off, on].
std::vector<Site> SiteLayout(const DesignSpace& space);

// Per-site unconstrained logits; probabilities are softmax(logits).
struct ThetaDistribution {
  std::vector<Site> sites;
  std::vector<std::vector<double>> logits;

  std::vector<double> probs(std::size_t site) const;
  std::size_t flat_dim() const;
  // Index of the site for (kind, target), or -1.
  int find_site(SiteKind kind, int target) const;
};

// Numerically stable softmax. Throws NumericError on NaN/inf input and
// ValidationError on empty input.
std::vector<double> SiteProbs(std::span<const double> logits);

ThetaDistribution InitThetaUniform(const DesignSpace& space);
// Uniform except for pipeline/inline sites carrying user priors p, which get
// logits [0, log(p / (1 - p))].
ThetaDistribution InitThetaFromPriors(const DesignSpace& space);

// Concatenation of all site probability vectors in site order.
std::vector<double> FlattenTheta(const ThetaDistribution& theta);

struct LoopPragma {
  int unroll = 1;
  bool pipelined = false;
  std::optional<int> ii;  // set only when pipelined

  bool operator==(const LoopPragma&) const = default;
};

struct PragmaConfig {
  std::vector<LoopPragma> loops;
  std::vector<PartitionChoice> arrays;
  std::vector<bool> inlined;  // one flag per function in the space

  bool operator==(const PragmaConfig&) const = default;
};

// True when loop `loop` has a pipelined strict ancestor under `config`.
bool HasPipelinedAncestor(const DesignSpace& space, const PragmaConfig& config,
                          int loop);

// Throws ValidationError when the config does not match the space or breaks
// R1-R3.
void CheckConfig(const DesignSpace& space, const PragmaConfig& config);

// Masked fields reset: II dropped on non-pipelined loops, R1 descendants set
// to (bound, not pipelined), unpartitioned arrays typed kBlock.
PragmaConfig Canonicalize(const DesignSpace& space, const PragmaConfig& config);

std::string CanonicalKey(const DesignSpace& space, const PragmaConfig& config);

// Loops are visited parent-first. Rule-forbidden options are masked and the
// rest renormalized; R1 descendants are assigned without drawing randomness.
PragmaConfig SampleConfig(const ThetaDistribution& theta,
                          const DesignSpace& space, std::uint64_t seed);

// The identity configuration: no unrolling, pipelining, partitioning or
// inlining.
PragmaConfig IdentityConfig(const DesignSpace& space);

nlohmann::json PragmaConfigToJson(const DesignSpace& space,
                                  const PragmaConfig& config);
PragmaConfig PragmaConfigFromJson(const DesignSpace& space,
                                  const nlohmann::json& doc);

nlohmann::json ThetaToJson(const ThetaDistribution& theta);
ThetaDistribution ThetaFromJson(const DesignSpace& space,
                                const nlohmann::json& doc);

// splitmix64 finalizer; used to derive independent seeds from a base seed.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0, std::uint64_t d = 0);

}  // namespace invhls

#endif  // INVHLS_DESIGN_SPACE_H_

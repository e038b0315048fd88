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

// Acceptance driver: one PASS/FAIL line per criterion, exit status 0 only
// when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "invhls/autodiff.h"
#include "invhls/backend.h"
#include "invhls/design_space.h"
#include "invhls/errors.h"
#include "invhls/estimator.h"
#include "invhls/experiment.h"
#include "invhls/inverse_loop.h"
#include "invhls/mini_hls.h"
#include "invhls/pareto.h"
#include "invhls/predictor.h"
#include "oracles.h"

namespace invhls {
namespace {

namespace fs = std::filesystem;
using oracle::GradientMismatch;
using Clock = std::chrono::steady_clock;

const std::string kFixtures = INVHLS_FIXTURE_DIR;
const std::string kConfigs = INVHLS_CONFIG_DIR;
const std::vector<std::string> kKernels = {"stencil-1d", "vecadd-2d", "mac-reduce"};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED " + what;
    }
  }
  void Note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

// 1. Sampling rules.
Verdict RuleCompliance() {
  Verdict v;
  const auto start = Clock::now();
  std::mt19937_64 rng(20261014);
  int samples = 0, violations = 0, spaces = 0;
  for (; spaces < 200; ++spaces) {
    const DesignSpace space = oracle::RandomSpace(rng);
    for (int t = 0; t < 50; ++t, ++samples) {
      const ThetaDistribution theta = oracle::RandomTheta(space, rng, 3.0);
      const PragmaConfig c = SampleConfig(theta, space, rng());
      bool bad = !oracle::RuleViolation(space, c).empty();
      try {
        CheckConfig(space, c);
      } catch (const ValidationError&) {
        bad = true;
      }
      violations += bad;
    }
  }
  v.Require(violations == 0, std::to_string(violations) + " rule violations");

  // Exhaustive agreement on small spaces: the checkers agree on the live part
  // of every raw assignment, the sampler's support is exactly the valid set, and observed
  // frequencies match the exact masked distribution.
  int small = 0, disagreements = 0, support_mismatch = 0, freq_outliers = 0;
  for (int attempt = 0; attempt < 400 && small < 30; ++attempt) {
    const DesignSpace space = oracle::RandomSpace(rng);
    const ThetaDistribution theta = oracle::RandomTheta(space, rng, 1.5);
    const std::map<std::string, double> exact = oracle::ExactDistribution(space, theta);
    if (exact.size() > 64 || exact.size() < 2) continue;
    ++small;
    std::set<std::string> valid;
    for (const PragmaConfig& c : oracle::EnumerateRaw(space, false)) {
      const PragmaConfig canon = Canonicalize(space, c);
      const bool oracle_ok = oracle::RuleViolation(space, canon).empty();
      bool lib_ok = true;
      try {
        CheckConfig(space, canon);
      } catch (const ValidationError&) {
        lib_ok = false;
      }
      disagreements += oracle_ok != lib_ok;
      if (oracle_ok) valid.insert(CanonicalKey(space, c));
    }
    std::set<std::string> support;
    for (const auto& [k, p] : exact) support.insert(k);
    support_mismatch += support != valid;
    const int draws = 4000;
    std::map<std::string, int> seen;
    for (int s = 0; s < draws; ++s) {
      const std::string key = CanonicalKey(space, SampleConfig(theta, space, rng()));
      if (!exact.count(key)) ++support_mismatch;
      ++seen[key];
    }
    for (const auto& [k, p] : exact) {
      const double sd = std::sqrt(draws * p * (1.0 - p));
      freq_outliers += std::abs(seen[k] - draws * p) > 5.0 * sd + 1.0;
    }
  }
  v.Require(small >= 20, "only " + std::to_string(small) + " small spaces");
  v.Require(disagreements == 0, std::to_string(disagreements) + " checker disagreements");
  v.Require(support_mismatch == 0, std::to_string(support_mismatch) + " support mismatches");
  v.Require(freq_outliers == 0, std::to_string(freq_outliers) + " frequency outliers");
  const double secs = Seconds(start);
  v.Require(secs < 10.0, "runtime " + Fmt("%.1f s", secs));
  v.Note(std::to_string(samples) + " samples over " + std::to_string(spaces) +
         " spaces, 0 violations; " + std::to_string(small) + " spaces (<= 64 configs) exhaustive; " +
         Fmt("%.2f s", secs));
  return v;
}

// Central differences against parameter gradients of a scalar builder.
double ParamMismatch(const std::function<Var(Tape&)>& f, const std::vector<Parameter*>& params,
                     double rel, double abs, double h = 1e-5) {
  for (Parameter* p : params) p->ZeroGrad();
  {
    Tape t;
    t.Backward(f(t));
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    const Matrix g = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double x = p->value.data()[i];
      p->value.data()[i] = x + h;
      double up, down;
      {
        Tape t;
        up = f(t).scalar();
      }
      p->value.data()[i] = x - h;
      {
        Tape t;
        down = f(t).scalar();
      }
      p->value.data()[i] = x;
      const double fd = (up - down) / (2 * h);
      const double scale = std::max(std::abs(fd), std::abs(g.data()[i]));
      worst = std::max(worst, std::abs(fd - g.data()[i]) / (rel * scale + abs));
    }
  }
  return worst;
}

EdgeIndex RandomEdges(int n, std::mt19937_64& rng) {
  EdgeIndex idx;
  idx.num_nodes = n;
  std::uniform_int_distribution<int> node(0, n - 1);
  for (int e = 0; e < 2 * n; ++e) {
    idx.src.push_back(node(rng));
    idx.dst.push_back(node(rng));
  }
  for (int i = 0; i < n; ++i) {
    idx.src.push_back(i);
    idx.dst.push_back(i);
  }
  return idx;
}

// Untrained chain models over a theta of `dim` entries.
struct ChainModels {
  PredictorModel pl, pa;
  CvaeModel vl, va;
  Surrogate s;

  ChainModels(int dim, std::uint64_t seed) {
    PredictorConfig pc;
    pc.hidden = 4;
    pc.head_hidden = {3};
    CvaeConfig cc;
    cc.latent = 3;
    cc.hidden = 5;
    cc.condition = 4;
    pl = PredictorModel(pc, seed);
    pa = PredictorModel(pc, seed + 1);
    vl = CvaeModel(4, dim, cc, seed + 2);
    va = CvaeModel(4, dim, cc, seed + 3);
    std::mt19937_64 rng(seed);
    for (ObjectiveChain* c : {&s.latency, &s.area}) {
      c->scaler.mean = oracle::RandomMatrix(1, 4, rng);
      c->scaler.stddev = oracle::RandomMatrix(1, 4, rng, 0.5, 2.0);
    }
    s.latency.predictor = &pl;
    s.latency.estimator = &vl;
    s.area.predictor = &pa;
    s.area.estimator = &va;
  }
};

// Pre-activation rows q[dst] + k[src] + e * we of the attention logits.
Matrix EdgeSums(const std::vector<Matrix>& x, const std::vector<int>& src,
                const std::vector<int>& dst) {
  Matrix s = x[2] * x[3];
  for (std::size_t i = 0; i < src.size(); ++i) s.row(i) += x[0].row(dst[i]) + x[1].row(src[i]);
  return s;
}

// 2. Gradients against central finite differences.
Verdict Numerics() {
  Verdict v;
  const auto start = Clock::now();
  const int instances = 20;
  using B = oracle::Builder;
  struct Case {
    std::string name;
    B f;
    std::vector<std::pair<int, int>> shapes;
    bool positive = false;
    // Minimum distance of the kink argument from zero; instances closer than
    // the margin are redrawn.
    std::function<double(const std::vector<Matrix>&)> kink_distance;
  };
  auto min_abs = [](const std::vector<Matrix>& x) { return x[0].cwiseAbs().minCoeff(); };
  const std::vector<int> idx{2, 0, 2, 1, 3};
  const std::vector<int> seg{0, 1, 1, 0, 2};
  const std::vector<int> src{0, 1, 2, 3, 0, 2, 1};
  const std::vector<int> dst{1, 1, 0, 2, 3, 3, 0};
  const std::vector<Case> cases = {
      {"matmul", [](Tape&, const auto& x) { return Matmul(x[0], x[1]); }, {{3, 4}, {4, 2}}},
      {"add", [](Tape&, const auto& x) { return Add(x[0], x[1]); }, {{3, 2}, {3, 2}}},
      {"sub", [](Tape&, const auto& x) { return Sub(x[0], x[1]); }, {{3, 2}, {3, 2}}},
      {"mul", [](Tape&, const auto& x) { return Mul(x[0], x[1]); }, {{3, 2}, {3, 2}}},
      {"add_row", [](Tape&, const auto& x) { return AddRow(x[0], x[1]); }, {{3, 2}, {1, 2}}},
      {"mul_row", [](Tape&, const auto& x) { return MulRow(x[0], x[1]); }, {{3, 2}, {1, 2}}},
      {"mul_col", [](Tape&, const auto& x) { return MulCol(x[0], x[1]); }, {{3, 2}, {3, 1}}},
      {"transpose", [](Tape&, const auto& x) { return Transpose(x[0]); }, {{3, 2}}},
      {"scale", [](Tape&, const auto& x) { return Scale(x[0], -1.7); }, {{3, 2}}},
      {"add_scalar", [](Tape&, const auto& x) { return AddScalar(x[0], 0.4); }, {{3, 2}}},
      {"concat",
       [](Tape&, const auto& x) {
         const Var parts[] = {x[0], x[1], x[0]};
         return ConcatCols(parts);
       },
       {{3, 2}, {3, 1}}},
      {"broadcast", [](Tape&, const auto& x) { return BroadcastRows(x[0], 4); }, {{1, 3}}},
      {"mean_rows", [](Tape&, const auto& x) { return MeanRows(x[0]); }, {{4, 3}}},
      {"sum", [](Tape&, const auto& x) { return Sum(x[0]); }, {{4, 3}}},
      {"mean", [](Tape&, const auto& x) { return Mean(x[0]); }, {{4, 3}}},
      {"softmax", [](Tape&, const auto& x) { return Softmax(x[0]); }, {{3, 4}}},
      {"leaky_relu", [](Tape&, const auto& x) { return LeakyRelu(x[0], 0.2); }, {{4, 3}}, false,
       min_abs},
      {"relu", [](Tape&, const auto& x) { return Relu(x[0]); }, {{4, 3}}, false, min_abs},
      {"elu", [](Tape&, const auto& x) { return Elu(x[0]); }, {{4, 3}}},
      {"exp", [](Tape&, const auto& x) { return Exp(x[0]); }, {{4, 3}}},
      {"log", [](Tape&, const auto& x) { return Log(x[0]); }, {{4, 3}}, true},
      {"square", [](Tape&, const auto& x) { return Square(x[0]); }, {{4, 3}}},
      {"sqrt", [](Tape&, const auto& x) { return Sqrt(x[0]); }, {{4, 3}}, true},
      {"softplus", [](Tape&, const auto& x) { return Softplus(x[0]); }, {{4, 3}}},
      {"gather", [&](Tape&, const auto& x) { return GatherRows(x[0], idx); }, {{4, 3}}},
      {"scatter", [&](Tape&, const auto& x) { return ScatterAddRows(x[0], seg, 4); }, {{5, 3}}},
      {"segment_mean", [&](Tape&, const auto& x) { return SegmentMeanRows(x[0], seg, 3); },
       {{5, 3}}},
      {"segment_softmax", [&](Tape&, const auto& x) { return SegmentSoftmax(x[0], seg, 3); },
       {{5, 1}}},
      {"edge_logits_dynamic",
       [&](Tape&, const auto& x) {
         return EdgeAttentionLogits(x[0], x[1], x[2], x[3], x[4], src, dst, 0.2, true);
       },
       {{4, 3}, {4, 3}, {7, 2}, {2, 3}, {3, 1}}, false,
       [&](const std::vector<Matrix>& x) { return EdgeSums(x, src, dst).cwiseAbs().minCoeff(); }},
      {"edge_logits_static",
       [&](Tape&, const auto& x) {
         return EdgeAttentionLogits(x[0], x[1], x[2], x[3], x[4], src, dst, 0.2, false);
       },
       {{4, 3}, {4, 3}, {7, 2}, {2, 3}, {3, 1}}, false,
       [&](const std::vector<Matrix>& x) {
         return (EdgeSums(x, src, dst) * x[4]).cwiseAbs().minCoeff();
       }},
      {"weighted_aggregate",
       [&](Tape&, const auto& x) { return WeightedAggregate(x[0], x[1], src, dst, 4); },
       {{7, 1}, {4, 3}}},
  };
  std::mt19937_64 rng(7);
  double worst_primitive = 0.0;
  std::string worst_name;
  for (const Case& c : cases) {
    for (int i = 0; i < instances; ++i) {
      std::vector<Matrix> in;
      do {
        in.clear();
        for (auto [r, k] : c.shapes) {
          in.push_back(c.positive ? oracle::RandomMatrix(r, k, rng, 0.3, 2.0)
                                  : oracle::RandomMatrix(r, k, rng));
        }
      } while (c.kink_distance && c.kink_distance(in) < 1e-3);
      const double m = GradientMismatch(c.f, in, 1e-6, 1e-8, rng());
      if (m > worst_primitive) worst_primitive = m, worst_name = c.name;
    }
  }
  v.Require(worst_primitive <= 1.0, "primitive " + worst_name);

  // Attention layer: inputs and parameters, both forms.
  double worst_layer = 0.0;
  for (int i = 0; i < instances; ++i) {
    const AttentionForm form = i % 2 ? AttentionForm::kStatic : AttentionForm::kDynamic;
    std::mt19937_64 lrng(100 + i);
    Gatv2Layer layer(3, 2, 4, form, lrng, "acc");
    const EdgeIndex edges = RandomEdges(5, lrng);
    const Matrix h = oracle::RandomMatrix(5, 3, lrng);
    const Matrix e = oracle::RandomMatrix(Eigen::Index(edges.src.size()), 2, lrng);
    const Matrix w = oracle::RandomMatrix(5, 4, lrng);
    worst_layer = std::max(
        worst_layer,
        GradientMismatch([&](Tape& t, const auto& x) { return layer.Forward(t, x[0], x[1], edges); },
                         {h, e}, 1e-4, 1e-9, lrng()));
    worst_layer = std::max(worst_layer, ParamMismatch(
                                            [&](Tape& t) {
                                              return Sum(Mul(layer.Forward(t, t.Constant(h),
                                                                           t.Constant(e), edges),
                                                             t.Constant(w)));
                                            },
                                            layer.parameters(), 1e-4, 1e-9));
  }
  v.Require(worst_layer <= 1.0, "attention layer");

  // VAE loss: inputs, then the full model loss through its parameters.
  double worst_vae = 0.0;
  for (int i = 0; i < instances; ++i) {
    const double c = 0.5 + 0.1 * i;
    std::mt19937_64 vrng(200 + i);
    const std::vector<Matrix> in = {oracle::RandomMatrix(4, 3, vrng), oracle::RandomMatrix(4, 3, vrng),
                                    oracle::RandomMatrix(4, 2, vrng),
                                    oracle::RandomMatrix(4, 2, vrng, 0.3, 2.0)};
    worst_vae = std::max(worst_vae, GradientMismatch(
                                        [&](Tape&, const auto& x) {
                                          return VaeLoss(x[0], x[1], x[2], x[3], c);
                                        },
                                        in, 1e-4, 1e-9, vrng()));
    CvaeConfig cc;
    cc.latent = 2;
    cc.hidden = 4;
    cc.condition = 3;
    CvaeModel model(3, 5, cc, 300 + i);
    const Matrix f = oracle::RandomMatrix(4, 3, vrng), th = oracle::RandomMatrix(4, 5, vrng, 0, 1);
    const Matrix noise = oracle::RandomMatrix(4, 2, vrng);
    worst_vae = std::max(worst_vae, ParamMismatch([&](Tape& t) { return model.Loss(t, f, th, noise); },
                                                  model.parameters(), 1e-4, 1e-9));
  }
  v.Require(worst_vae <= 1.0, "vae loss");

  // Full surrogate chain with respect to the distribution logits.
  const DesignSpace space = LoadDesignSpace(kFixtures + "/vecadd-2d.space.json");
  double worst_chain = 0.0;
  for (int i = 0; i < instances; ++i) {
    std::mt19937_64 srng(400 + i);
    const ThetaDistribution theta = oracle::RandomTheta(space, srng, 1.0);
    const std::vector<int> sites = SiteOfEntry(theta);
    ChainModels m(int(theta.flat_dim()), 500 + i);
    const Matrix zl = oracle::RandomMatrix(8, 3, srng), za = oracle::RandomMatrix(8, 3, srng);
    const double lambda = (i % 6) * 0.2;
    worst_chain = std::max(
        worst_chain,
        GradientMismatch(
            [&](Tape& t, const auto& x) {
              return SurrogateCost(t, x[0], sites, int(theta.logits.size()), m.s, zl, za, lambda);
            },
            {ThetaLogitColumn(theta)}, 1e-4, 1e-9, srng()));
  }
  v.Require(worst_chain <= 1.0, "surrogate chain");
  v.Note(std::to_string(cases.size()) + " primitives x " + std::to_string(instances) +
         Fmt(" (worst %.3f of 1e-6 tol)", worst_primitive) +
         Fmt(", attention %.3f", worst_layer) + Fmt(", vae %.3f", worst_vae) +
         Fmt(", chain %.3f of 1e-4 tol", worst_chain) + Fmt("; %.1f s", Seconds(start)));
  return v;
}

// 3. KL closed forms.
Verdict KlClosedForms() {
  Verdict v;
  double worst_zero = 0.0, worst_analytic = 0.0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const int r = 1 + i % 5, k = 1 + i % 7;
    Tape t;
    worst_zero = std::max(worst_zero, std::abs(VaeKl(t.Constant(Matrix::Zero(r, k)),
                                                     t.Constant(Matrix::Ones(r, k)))
                                                   .scalar()));
    const Matrix m = oracle::RandomMatrix(r, k, rng, -3, 3);
    const Matrix var = oracle::RandomMatrix(r, k, rng, 0.01, 5.0);
    double kl = 0.0;
    for (int a = 0; a < r; ++a) {
      double tr = 0.0, mm = 0.0, logdet = 0.0;
      for (int b = 0; b < k; ++b) {
        tr += var(a, b);
        mm += m(a, b) * m(a, b);
        logdet += std::log(var(a, b));
      }
      kl += 0.5 * (tr + mm - k - logdet);
    }
    kl /= r;
    worst_analytic =
        std::max(worst_analytic, std::abs(VaeKl(t.Constant(m), t.Constant(var)).scalar() - kl));
  }
  v.Require(worst_zero <= 1e-12, "KL at standard prior");
  v.Require(worst_analytic <= 1e-10, "analytic KL");
  v.Note(Fmt("KL(0,1) max |.| = %.1e", worst_zero) +
         Fmt(", analytic max err %.1e over 100 instances", worst_analytic));
  return v;
}

// 4. Pareto and ADRS oracles.
Verdict MetricOracles() {
  Verdict v;
  std::mt19937_64 rng(4);
  int front_mismatch = 0, adrs_mismatch = 0, self_nonzero = 0;
  std::uniform_int_distribution<int> n(1, 200);
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<int> c(1, i % 2 ? 20 : 1000);
    std::vector<ObjectivePoint> pts(n(rng));
    for (std::size_t j = 0; j < pts.size(); ++j) {
      pts[j] = {double(c(rng)), double(c(rng)), "k" + std::to_string(j)};
    }
    const auto front = ParetoExtract(pts);
    front_mismatch += front != oracle::BruteFront(pts);
    self_nonzero += Adrs(front, front) != 0.0;
  }
  std::uniform_real_distribution<double> u(0.5, 1000.0);
  std::uniform_int_distribution<int> m(1, 40);
  for (int i = 0; i < 1000; ++i) {
    std::vector<ObjectivePoint> ref(m(rng)), approx(m(rng));
    for (auto& p : ref) p = {u(rng), u(rng), ""};
    for (auto& p : approx) p = {u(rng), u(rng), ""};
    adrs_mismatch += std::abs(Adrs(ref, approx) - oracle::BruteAdrs(ref, approx)) > 1e-12;
  }
  const ObjectivePoint p11{1, 1, ""}, p21{2, 1, ""}, p22{2, 2, ""};
  const double hand1 = Adrs(std::vector{p11}, std::vector{p21});
  const double hand2 = Adrs(std::vector{p11, p22}, std::vector{p11});
  v.Require(front_mismatch == 0, std::to_string(front_mismatch) + " front mismatches");
  v.Require(adrs_mismatch == 0, std::to_string(adrs_mismatch) + " ADRS mismatches");
  v.Require(self_nonzero == 0, "ADRS(G, G) != 0");
  v.Require(hand1 == 1.0, "hand example 1 = " + Fmt("%.17g", hand1));
  v.Require(hand2 == 0.25, "hand example 2 = " + Fmt("%.17g", hand2));
  v.Note("1000 front and 1000 ADRS instances agree; hand examples " + Fmt("%g", hand1) + ", " +
         Fmt("%g", hand2));
  return v;
}

// 5. Query-specific key selection.
Verdict DynamicAttention() {
  Verdict v;
  std::vector<double> dyn, stat;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    dyn.push_back(oracle::FitQuerySelection(AttentionForm::kDynamic, seed));
    stat.push_back(oracle::FitQuerySelection(AttentionForm::kStatic, seed));
  }
  const double md = Median(dyn), ms = Median(stat);
  v.Require(md < 1e-3, "dynamic median loss " + Fmt("%.2e", md));
  v.Require(ms >= 10.0 * 1e-3 && ms >= 10.0 * md, "static median loss " + Fmt("%.2e", ms));
  v.Note("median loss dynamic " + Fmt("%.2e", md) + ", static " + Fmt("%.3f", ms) + " (5 seeds)");
  return v;
}

// 6. Mini-HLS determinism, port legality and hand latencies.
Verdict MiniHls() {
  Verdict v;
  int designs = 0, nondeterministic = 0, port_excess = 0;
  for (const std::string name : {"vecadd", "vecadd-2d", "stencil-1d", "mac-reduce"}) {
    const KernelModel kernel = LoadKernel(kFixtures + "/" + name + ".kernel.json");
    const DesignSpace space = LoadDesignSpace(kFixtures + "/" + name + ".space.json");
    const ThetaDistribution uniform = InitThetaUniform(space);
    for (std::uint64_t s = 0; s < 300; ++s, ++designs) {
      const PragmaConfig c = SampleConfig(uniform, space, MixSeed(6, s));
      const SynthesisResult a = Synthesize(kernel, space, c), b = Synthesize(kernel, space, c);
      nondeterministic += !(a == b) || SerializeGraph(a.graph) != SerializeGraph(b.graph);
      const ElaboratedKernel elab = Elaborate(kernel, space, c);
      const PortPeak peak = ReplayBankUsage(elab, kernel, Schedule(elab, kernel));
      port_excess += peak.loads > 1 || peak.stores > 1;
    }
  }
  const KernelModel vk = LoadKernel(kFixtures + "/vecadd.kernel.json");
  const DesignSpace vs = LoadDesignSpace(kFixtures + "/vecadd.space.json");
  PragmaConfig pipelined = IdentityConfig(vs);
  pipelined.loops[0] = {1, true, 1};
  const std::int64_t seq = Synthesize(vk, vs, IdentityConfig(vs)).latency;
  const std::int64_t pip = Synthesize(vk, vs, pipelined).latency;
  v.Require(nondeterministic == 0, std::to_string(nondeterministic) + " nondeterministic");
  v.Require(port_excess == 0, std::to_string(port_excess) + " port overuses");
  v.Require(seq == 40, "vecadd sequential latency " + std::to_string(seq));
  v.Require(pip == 11, "vecadd II=1 latency " + std::to_string(pip));
  v.Note(std::to_string(designs) + " designs bit-identical and port-legal; vecadd " +
         std::to_string(seq) + " / " + std::to_string(pip) + " cycles");
  return v;
}

struct RunSummary {
  std::vector<ObjectivePoint> front;
  RunResult result;
  fs::path dir;
};

// Mean cost of each iteration's draws under the final standardization.
std::pair<double, double> FirstLastCost(const RunResult& r, double lambda) {
  const Standardizer s = Standardizer::Fit(r.dataset);
  auto mean = [&](const std::vector<std::string>& keys) {
    double total = 0.0;
    int n = 0;
    for (const std::string& k : keys) {
      if (const DesignRecord* d = r.dataset.Find(k)) {
        total += Cost(s.latency(double(d->latency)), s.area(d->area_scalar), lambda);
        ++n;
      }
    }
    return n ? total / n : std::nan("");
  };
  return {mean(r.sampled_keys.front()), mean(r.sampled_keys.back())};
}

bool DatasetKeysUnique(const fs::path& dir, std::size_t& lines) {
  std::ifstream in(dir / "dataset.jsonl");
  std::set<std::string> keys;
  lines = 0;
  for (std::string l; std::getline(in, l);) {
    if (l.empty()) continue;
    ++lines;
    keys.insert(nlohmann::json::parse(l).at("key").get<std::string>());
  }
  return keys.size() == lines;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 7 and 8 share the protocol runs.
void EndToEnd(const fs::path& work, const std::string& trend_kernel, Verdict& opt,
              Verdict& budget) {
  const auto start = Clock::now();
  std::ostringstream log;
  std::map<std::string, std::map<Method, std::vector<RunSummary>>> runs;
  int wins = 0;
  std::string table;
  for (const std::string& k : kKernels) {
    ExperimentConfig cfg = LoadExperimentConfig(kConfigs + "/" + k + ".json");
    cfg.output_dir = (work / k).string();
    fs::remove_all(cfg.output_dir);
    for (Method m : {Method::kInverse, Method::kRandom}) {
      for (std::uint64_t seed : cfg.seeds) {
        const auto t0 = Clock::now();
        RunResult r = RunExperiment(cfg, m, seed, log);
        const fs::path dir = fs::path(cfg.output_dir) / RunDirName(m, seed);
        std::cerr << "  " << k << " " << dir.filename().string() << ": " << r.syntheses
                  << " syntheses, " << r.iterations << " iterations, "
                  << Fmt("%.1f s", Seconds(t0)) << '\n';
        runs[k][m].push_back({r.front, std::move(r), dir});
      }
    }
    std::vector<std::vector<ObjectivePoint>> all;
    for (auto& [m, rs] : runs[k]) {
      for (auto& r : rs) all.push_back(r.front);
    }
    const auto reference = ReferenceFront(all);
    std::map<Method, double> med;
    for (auto& [m, rs] : runs[k]) {
      std::vector<double> a;
      for (auto& r : rs) a.push_back(Adrs(reference, r.front));
      med[m] = Median(a);
    }
    const bool win = med[Method::kInverse] <= med[Method::kRandom];
    wins += win;
    table += (table.empty() ? "" : ", ") + k + Fmt(" %.3f", med[Method::kInverse]) +
             Fmt(" vs %.3f", med[Method::kRandom]);
  }
  opt.Require(wins >= 2, "median ADRS not better on >= 2 kernels");
  opt.Note("median ADRS (inverse vs random) " + table + "; " + std::to_string(wins) + "/3");

  // Single-weight runs for the expected-cost trend.
  ExperimentConfig tcfg = LoadExperimentConfig(kConfigs + "/" + trend_kernel + ".json");
  tcfg.output_dir = (work / (trend_kernel + "-trend")).string();
  fs::remove_all(tcfg.output_dir);
  tcfg.run.lambdas = {0.5};
  int decreased = 0;
  std::string trend;
  std::vector<RunSummary> trend_runs;
  for (std::uint64_t seed : tcfg.seeds) {
    RunResult r = RunExperiment(tcfg, Method::kInverse, seed, log);
    const auto [first, last] = FirstLastCost(r, 0.5);
    decreased += last < first;
    trend += (trend.empty() ? "" : " ") + Fmt("%.2f", first) + Fmt("->%.2f", last);
    trend_runs.push_back({r.front, std::move(r),
                          fs::path(tcfg.output_dir) / RunDirName(Method::kInverse, seed)});
  }
  opt.Require(decreased >= 4, "cost decreased in only " + std::to_string(decreased) + "/5");
  opt.Note(trend_kernel + " weight 0.5 first->final mean cost " + trend + " (" +
           std::to_string(decreased) + "/5 decreased)");
  const double secs = Seconds(start);
  opt.Require(secs < 1800.0, "runtime " + Fmt("%.0f s", secs));
  opt.Note(Fmt("%.0f s total", secs));

  int bad_budget = 0, dup = 0, total = 0;
  auto check = [&](const RunSummary& r, int budget_b) {
    ++total;
    std::size_t lines = 0;
    dup += !DatasetKeysUnique(r.dir, lines);
    bad_budget += r.result.syntheses != budget_b || int(lines) != budget_b;
  };
  for (auto& [k, by] : runs) {
    for (auto& [m, rs] : by) {
      for (auto& r : rs) check(r, 180);
    }
  }
  for (auto& r : trend_runs) check(r, 180);
  budget.Require(bad_budget == 0, std::to_string(bad_budget) + " runs off budget");
  budget.Require(dup == 0, std::to_string(dup) + " runs with duplicate keys");

  // Seeded reruns into fresh directories.
  int differ = 0;
  for (Method m : {Method::kInverse, Method::kRandom}) {
    ExperimentConfig cfg = LoadExperimentConfig(kConfigs + "/vecadd-2d.json");
    cfg.output_dir = (work / "vecadd-2d-rerun").string();
    fs::remove_all(fs::path(cfg.output_dir) / RunDirName(m, 0));
    RunExperiment(cfg, m, 0, log);
    const fs::path a = work / "vecadd-2d" / RunDirName(m, 0);
    const fs::path b = fs::path(cfg.output_dir) / RunDirName(m, 0);
    differ += Slurp(a / "run_log.jsonl") != Slurp(b / "run_log.jsonl");
    differ += Slurp(a / "dataset.jsonl") != Slurp(b / "dataset.jsonl");
  }
  budget.Require(differ == 0, "seeded reruns differ");
  budget.Note(std::to_string(total) + " runs with exactly 180 syntheses and unique keys; " +
              "seeded reruns byte-identical");
}

}  // namespace
}  // namespace invhls

int main(int argc, char** argv) {
  using namespace invhls;
  ConfigureAllocator();
  CLI::App app{"Acceptance criteria"};
  std::string work = "acceptance-runs";
  std::vector<int> only;
  std::string trend_kernel = "vecadd-2d";
  app.add_option("--work-dir", work, "Directory for end-to-end run artifacts");
  app.add_option("--only", only, "Criteria to evaluate (default all)");
  app.add_option("--trend-kernel", trend_kernel, "Kernel of the single-weight trend runs");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int c) {
    return only.empty() || std::find(only.begin(), only.end(), c) != only.end();
  };

  const std::vector<std::pair<int, std::string>> names = {
      {1, "rule compliance"},          {2, "numerics"},           {3, "KL closed forms"},
      {4, "metric oracles"},           {5, "dynamic attention"},  {6, "mini-HLS"},
      {7, "end-to-end optimization"},  {8, "budget and dedup"}};
  std::map<int, Verdict> verdicts;
  auto guarded = [&](int c, const std::function<Verdict()>& f) {
    try {
      verdicts[c] = f();
    } catch (const std::exception& e) {
      verdicts[c] = {false, std::string("error: ") + e.what()};
    }
  };
  if (wanted(1)) guarded(1, RuleCompliance);
  if (wanted(2)) guarded(2, Numerics);
  if (wanted(3)) guarded(3, KlClosedForms);
  if (wanted(4)) guarded(4, MetricOracles);
  if (wanted(5)) guarded(5, DynamicAttention);
  if (wanted(6)) guarded(6, MiniHls);
  if (wanted(7) || wanted(8)) {
    Verdict opt, budget;
    try {
      std::filesystem::create_directories(work);
      EndToEnd(work, trend_kernel, opt, budget);
    } catch (const std::exception& e) {
      opt = budget = {false, std::string("error: ") + e.what()};
    }
    if (wanted(7)) verdicts[7] = opt;
    if (wanted(8)) verdicts[8] = budget;
  }
  bool all = true;
  for (const auto& [c, name] : names) {
    if (!verdicts.count(c)) continue;
    const Verdict& v = verdicts[c];
    all &= v.pass;
    std::cout << "C" << c << " " << (v.pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail
              << std::endl;
  }
  return all ? 0 : 1;
}

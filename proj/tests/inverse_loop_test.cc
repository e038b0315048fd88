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

#include "invhls/inverse_loop.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "invhls/errors.h"

namespace invhls {
namespace {

using nlohmann::json;

const std::string kDir = INVHLS_FIXTURE_DIR;

constexpr char kTinyKernel[] = R"({
  "name": "tiny",
  "arrays": [{"name": "a", "size": 2}],
  "loops": [{"id": 0, "bound": 2, "body": [
    {"op": "load", "array": "a", "index": [[0, 1]]},
    {"op": "add"},
    {"op": "store", "array": "a", "index": [[0, 1]]}
  ]}]
})";

// 3 loop settings x 3 partition settings = 9 distinct keys.
constexpr char kTinySpace[] = R"({
  "loops": [{"id": 0, "bound": 2, "unroll_options": [1, 2], "ii_options": [1]}],
  "arrays": [{"name": "a", "size": 2, "types": ["block", "cyclic"], "factors": [1, 2]}]
})";

Matrix Normal(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

ThetaDistribution RandomTheta(const DesignSpace& space, std::mt19937_64& rng) {
  ThetaDistribution t = InitThetaUniform(space);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& site : t.logits) {
    for (double& v : site) v = n(rng);
  }
  return t;
}

RunConfig FastConfig() {
  RunConfig c;
  c.lambdas = {0.0, 0.5, 1.0};
  c.n1 = 6;
  c.budget = 24;
  c.n2 = 4;
  c.inner_steps = 3;
  c.theta_lr = 0.05;
  c.predictor.hidden = 8;
  c.predictor.head_hidden = {8};
  c.predictor.epochs = 3;
  c.predictor.lr = 1e-2;
  c.cvae.latent = 2;
  c.cvae.hidden = 8;
  c.cvae.condition = 4;
  c.cvae.epochs = 3;
  return c;
}

// Small untrained models wired into a surrogate over `theta_dim` entries.
struct Models {
  PredictorModel pl, pa;
  CvaeModel vl, va;
  Surrogate surrogate;

  Models(int theta_dim, std::uint64_t seed) {
    PredictorConfig pc;
    pc.hidden = 4;
    pc.head_hidden = {3};
    CvaeConfig cc;
    cc.latent = 3;
    cc.hidden = 5;
    cc.condition = 4;
    pl = PredictorModel(pc, seed);
    pa = PredictorModel(pc, seed + 1);
    vl = CvaeModel(4, theta_dim, cc, seed + 2);
    va = CvaeModel(4, theta_dim, cc, seed + 3);
    std::mt19937_64 rng(seed);
    for (ObjectiveChain* c : {&surrogate.latency, &surrogate.area}) {
      c->scaler.mean = Normal(1, 4, rng);
      c->scaler.stddev = Normal(1, 4, rng).cwiseAbs().array() + 0.5;
    }
    Wire();
  }
  void Wire() {
    surrogate.latency.predictor = &pl;
    surrogate.latency.estimator = &vl;
    surrogate.area.predictor = &pa;
    surrogate.area.estimator = &va;
  }
};

// Rewires every dense layer into a single unit path so that the latency chain
// evaluates to -theta[entry] for any latent draw.
void RigToMinusEntry(Models& m, int entry) {
  auto route = [](std::vector<Parameter*> params, int first_row) {
    for (std::size_t i = 0; i < params.size(); i += 2) {
      params[i]->value.setZero();
      params[i + 1]->value.setZero();
      params[i]->value(i == 0 ? first_row : 0, 0) = 1.0;
    }
    return params;
  };
  std::vector<Parameter*> cvae = m.vl.parameters();
  const int latent = m.vl.config().latent;
  // Projector, encoder, heads, decoder; only the projector and decoder matter.
  std::vector<Parameter*> proj(cvae.begin(), cvae.begin() + 4);
  std::vector<Parameter*> dec(cvae.end() - 6, cvae.end());
  route(proj, entry);
  route(dec, latent);
  std::vector<Parameter*> head = route(m.pl.head_parameters(), 0);
  head[head.size() - 2]->value(0, 0) = -1.0;
  m.surrogate.latency.scaler.mean.setZero();
  m.surrogate.latency.scaler.stddev.setOnes();
}

TEST(Cost, Endpoints) {
  EXPECT_EQ(Cost(3.0, -2.0, 1.0), 3.0);
  EXPECT_EQ(Cost(3.0, -2.0, 0.0), -2.0);
  EXPECT_EQ(Cost(2.0, 0.0, 0.5), 1.0);
  EXPECT_THROW(Cost(1.0, 1.0, 1.5), ValidationError);
  EXPECT_THROW(Cost(1.0, 1.0, -0.1), ValidationError);
}

TEST(Standardizer, TwoPointPopulationZScore) {
  const std::vector<double> l = {10.0, 20.0}, a = {5.0, 5.0};
  const Standardizer s = Standardizer::Fit(l, a);
  EXPECT_DOUBLE_EQ(s.latency(10.0), -1.0);
  EXPECT_DOUBLE_EQ(s.latency(20.0), 1.0);
  EXPECT_EQ(s.area_std, 1.0);
  EXPECT_EQ(s.area(5.0), 0.0);
}

TEST(Standardizer, SingleRecordIsZero) {
  const std::vector<double> l = {42.0}, a = {7.0};
  const Standardizer s = Standardizer::Fit(l, a);
  EXPECT_EQ(s.latency(42.0), 0.0);
  EXPECT_EQ(s.area(7.0), 0.0);
}

TEST(Standardizer, StandardizedMeanIsZero) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1.0, 1e5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> l(1 + trial % 37), a(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = u(rng), a[i] = u(rng);
    const Standardizer s = Standardizer::Fit(l, a);
    double ml = 0.0, ma = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) ml += s.latency(l[i]), ma += s.area(a[i]);
    EXPECT_NEAR(ml / l.size(), 0.0, 1e-12);
    EXPECT_NEAR(ma / a.size(), 0.0, 1e-12);
  }
}

TEST(FeatureScaler, StandardizesColumnsAndGuardsConstants) {
  std::mt19937_64 rng(2);
  Matrix x = Normal(20, 3, rng, 4.0);
  x.col(1).setConstant(3.0);
  const FeatureScaler s = FeatureScaler::Fit(x);
  const Matrix y = s.Apply(x);
  EXPECT_EQ(s.stddev(0, 1), 1.0);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(y.col(j).mean(), 0.0, 1e-12);
  EXPECT_NEAR(y.col(0).array().square().mean(), 1.0, 1e-12);
}

TEST(DesignDataset, RejectsDuplicateKeys) {
  DesignDataset d;
  DesignRecord r;
  r.key = "x";
  d.Add(r);
  EXPECT_TRUE(d.Contains("x"));
  EXPECT_NE(d.Find("x"), nullptr);
  EXPECT_EQ(d.Find("y"), nullptr);
  EXPECT_THROW(d.Add(r), ValidationError);
  EXPECT_EQ(d.size(), 1u);
}

TEST(RunConfig, ValidationAndJson) {
  RunConfig c;
  EXPECT_NO_THROW(c.Validate());
  RunConfig bad = c;
  bad.n1 = 31;
  EXPECT_THROW(bad.Validate(), ValidationError);
  bad = c;
  bad.lambdas = {0.5, 0.2};
  bad.n1 = 30;
  EXPECT_THROW(bad.Validate(), ValidationError);
  bad = c;
  bad.lambdas = {0.0, 1.5};
  EXPECT_THROW(bad.Validate(), ValidationError);
  bad = c;
  bad.budget = 29;
  EXPECT_THROW(bad.Validate(), ValidationError);
  const RunConfig f = FastConfig();
  const RunConfig g = RunConfigFromJson(RunConfigToJson(f));
  EXPECT_EQ(RunConfigToJson(g), RunConfigToJson(f));
  EXPECT_THROW(RunConfigFromJson(json{{"budget", "many"}}), ValidationError);
}

class SurrogateTest : public ::testing::Test {
 protected:
  void SetUp() override { space_ = LoadDesignSpace(kDir + "/vecadd.space.json"); }
  DesignSpace space_;
};

TEST_F(SurrogateTest, LatencyEndpointIgnoresAreaChain) {
  std::mt19937_64 rng(3);
  const ThetaDistribution theta = RandomTheta(space_, rng);
  const std::vector<int> seg = SiteOfEntry(theta);
  Models m(int(theta.flat_dim()), 5);
  const Matrix zl = Normal(6, 3, rng), za = Normal(6, 3, rng);
  Tape t1;
  const double full = SurrogateCost(t1, t1.Constant(ThetaLogitColumn(theta)), seg,
                                    int(theta.logits.size()), m.surrogate, zl, za, 1.0)
                          .scalar();
  m.surrogate.area = ObjectiveChain{};
  Tape t2;
  const double alone = SurrogateCost(t2, t2.Constant(ThetaLogitColumn(theta)), seg,
                                     int(theta.logits.size()), m.surrogate, zl, za, 1.0)
                           .scalar();
  EXPECT_EQ(full, alone);
  Tape t3;
  EXPECT_THROW(SurrogateCost(t3, t3.Constant(ThetaLogitColumn(theta)), seg,
                             int(theta.logits.size()), m.surrogate, zl, za, 0.5),
               ValidationError);
}

TEST_F(SurrogateTest, SingleDrawEqualsHandComposition) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const ThetaDistribution theta = RandomTheta(space_, rng);
    Models m(int(theta.flat_dim()), 10 + trial);
    const Matrix zl = Normal(1, 3, rng), za = Normal(1, 3, rng);
    const std::vector<double> flat = FlattenTheta(theta);
    const Matrix row = Eigen::Map<const Matrix>(flat.data(), 1, Eigen::Index(flat.size()));
    auto chain = [&](ObjectiveChain& c, const Matrix& z) {
      Matrix f = c.estimator->SampleFeature(z, row);
      f = (f.array() * c.scaler.stddev.array() + c.scaler.mean.array()).matrix();
      Tape t;
      return c.predictor->Head(t, t.Constant(f)).scalar();
    };
    const double lambda = 0.3;
    const double want =
        lambda * chain(m.surrogate.latency, zl) + (1 - lambda) * chain(m.surrogate.area, za);
    Tape t;
    const double got = SurrogateCost(t, t.Constant(ThetaLogitColumn(theta)), SiteOfEntry(theta),
                                     int(theta.logits.size()), m.surrogate, zl, za, lambda)
                           .scalar();
    EXPECT_NEAR(got, want, 1e-12);
  }
}

TEST_F(SurrogateTest, LogitGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ThetaDistribution theta = RandomTheta(space_, rng);
    const std::vector<int> seg = SiteOfEntry(theta);
    const int sites = int(theta.logits.size());
    Models m(int(theta.flat_dim()), 100 + trial);
    const Matrix zl = Normal(8, 3, rng), za = Normal(8, 3, rng);
    const double lambda = (trial % 6) * 0.2;
    const Matrix x0 = ThetaLogitColumn(theta);
    auto value = [&](const Matrix& x) {
      Tape t;
      return SurrogateCost(t, t.Constant(x), seg, sites, m.surrogate, zl, za, lambda).scalar();
    };
    Tape t;
    Var x = t.Leaf(x0);
    t.Backward(SurrogateCost(t, x, seg, sites, m.surrogate, zl, za, lambda));
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
      Matrix up = x0, down = x0;
      up(i, 0) += 1e-5;
      down(i, 0) -= 1e-5;
      const double fd = (value(up) - value(down)) / 2e-5;
      const double g = x.grad()(i, 0);
      EXPECT_LE(std::abs(fd - g), 1e-4 * std::max(std::abs(fd), std::abs(g)) + 1e-9)
          << "trial " << trial << " entry " << i;
    }
  }
}

TEST_F(SurrogateTest, UntrainedModelsRejected) {
  ThetaDistribution theta = InitThetaUniform(space_);
  Surrogate empty;
  Tape t;
  EXPECT_THROW(SurrogateCost(t, t.Constant(ThetaLogitColumn(theta)), SiteOfEntry(theta),
                             int(theta.logits.size()), empty, Matrix::Zero(1, 3),
                             Matrix::Zero(1, 3), 0.5),
               ValidationError);
}

TEST_F(SurrogateTest, RiggedChainIsMinusEntryProbability) {
  std::mt19937_64 rng(6);
  const ThetaDistribution theta = RandomTheta(space_, rng);
  Models m(int(theta.flat_dim()), 7);
  RigToMinusEntry(m, 2);
  const Matrix z = Normal(5, 3, rng);
  Tape t;
  const double c = SurrogateCost(t, t.Constant(ThetaLogitColumn(theta)), SiteOfEntry(theta),
                                 int(theta.logits.size()), m.surrogate, z, z, 1.0)
                       .scalar();
  EXPECT_NEAR(c, -FlattenTheta(theta)[2], 1e-14);
}

TEST_F(SurrogateTest, UpdateRaisesProbabilityOfMinimizingOption) {
  std::mt19937_64 rng(7);
  const ThetaDistribution theta = InitThetaUniform(space_);
  for (int entry : {0, 2, 3}) {
    Models m(int(theta.flat_dim()), 20 + entry);
    RigToMinusEntry(m, entry);
    const Matrix z = Normal(4, 3, rng);
    const ThetaUpdate u = UpdateTheta(theta, m.surrogate, z, z, 1.0, 50, 0.05);
    EXPECT_GT(FlattenTheta(u.theta)[entry], FlattenTheta(theta)[entry] + 0.1);
    EXPECT_LT(u.last_cost, u.first_cost);
    for (std::size_t s = 0; s < u.theta.logits.size(); ++s) {
      double total = 0.0;
      for (double p : u.theta.probs(s)) {
        EXPECT_GT(p, 0.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST_F(SurrogateTest, ZeroGradientLeavesThetaUnchanged) {
  std::mt19937_64 rng(8);
  const ThetaDistribution theta = RandomTheta(space_, rng);
  Models m(int(theta.flat_dim()), 9);
  RigToMinusEntry(m, 1);
  std::vector<Parameter*> head = m.pl.head_parameters();
  head[head.size() - 2]->value.setZero();
  head.back()->value(0, 0) = 0.25;
  const Matrix z = Normal(4, 3, rng);
  const ThetaUpdate u = UpdateTheta(theta, m.surrogate, z, z, 1.0, 50, 0.05);
  EXPECT_EQ(u.theta.logits, theta.logits);
  EXPECT_EQ(u.first_cost, 0.25);
  EXPECT_EQ(u.last_cost, 0.25);
}

TEST_F(SurrogateTest, NonFiniteCostAborts) {
  std::mt19937_64 rng(9);
  const ThetaDistribution theta = RandomTheta(space_, rng);
  Models m(int(theta.flat_dim()), 11);
  m.pl.head_parameters().back()->value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const Matrix z = Normal(4, 3, rng);
  EXPECT_THROW(UpdateTheta(theta, m.surrogate, z, z, 1.0, 5, 0.05), NumericError);
}

TEST(ThetaLogits, ColumnRoundTrip) {
  const DesignSpace space = LoadDesignSpace(kDir + "/vecadd.space.json");
  std::mt19937_64 rng(10);
  const ThetaDistribution a = RandomTheta(space, rng);
  ThetaDistribution b = InitThetaUniform(space);
  SetThetaLogits(b, ThetaLogitColumn(a));
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_THROW(SetThetaLogits(b, Matrix::Zero(2, 1)), ShapeError);
}

// Fails every synthesis whose key hashes to 0 mod 4.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(Backend& inner, const DesignSpace& space) : inner_(inner), space_(space) {}
  SynthesisOutcome Synthesize(const PragmaConfig& c) override {
    if (std::hash<std::string>{}(CanonicalKey(space_, c)) % 4 == 0) {
      SynthesisOutcome o;
      o.status = SynthesisStatus::kToolFailure;
      o.exit_code = 1;
      return o;
    }
    return inner_.Synthesize(c);
  }
  bool deterministic() const override { return true; }
  std::string name() const override { return "flaky"; }

 private:
  Backend& inner_;
  const DesignSpace& space_;
};

class RunTest : public ::testing::Test {
 protected:
  void SetUp() override {
    space_ = LoadDesignSpace(kDir + "/vecadd-2d.space.json");
    backend_.emplace(LoadKernel(kDir + "/vecadd-2d.kernel.json"), space_);
  }

  struct Trace {
    std::vector<std::string> log;
    std::vector<std::string> keys;
    std::map<int, std::vector<ThetaDistribution>> thetas;
  };

  RunResult Go(Backend& backend, const RunConfig& cfg, Trace& trace, bool random = false) {
    RunEvents ev;
    ev.on_log = [&](const json& j) { trace.log.push_back(j.dump()); };
    ev.on_synthesis = [&](const std::string& key, int, int, const std::vector<double>&,
                          const PragmaConfig&, const SynthesisOutcome&) {
      trace.keys.push_back(key);
    };
    ev.on_thetas = [&](int iter, const std::vector<ThetaDistribution>& t) {
      trace.thetas[iter] = t;
    };
    return random ? RunRandomBaseline(space_, backend, cfg, ev) : invhls::Run(space_, backend, cfg, ev);
  }

  DesignSpace space_;
  std::optional<MiniHlsBackend> backend_;
};

TEST_F(RunTest, ExactBudgetUniqueKeysAndProvenance) {
  RunConfig cfg = FastConfig();
  for (std::uint64_t seed : {0u, 1u}) {
    cfg.seed = seed;
    Trace tr;
    const RunResult r = Go(*backend_, cfg, tr);
    EXPECT_EQ(r.syntheses, cfg.budget);
    EXPECT_EQ(int(tr.keys.size()), cfg.budget);
    EXPECT_EQ(std::set<std::string>(tr.keys.begin(), tr.keys.end()).size(), tr.keys.size());
    EXPECT_EQ(int(r.dataset.size()), cfg.budget - r.failures);
    EXPECT_FALSE(r.front.empty());
    for (const DesignRecord& rec : r.dataset.records()) {
      ASSERT_TRUE(tr.thetas.count(rec.iteration));
      EXPECT_EQ(rec.theta, FlattenTheta(tr.thetas[rec.iteration][rec.k])) << rec.key;
    }
    EXPECT_EQ(int(r.mean_cost.size()), r.iterations);
  }
}

TEST_F(RunTest, SeededRerunsAreByteIdentical) {
  RunConfig cfg = FastConfig();
  cfg.seed = 3;
  Trace a, b;
  const RunResult ra = Go(*backend_, cfg, a);
  const RunResult rb = Go(*backend_, cfg, b);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(ra.front, rb.front);
  cfg.seed = 4;
  Trace c;
  Go(*backend_, cfg, c);
  EXPECT_NE(a.log, c.log);
}

TEST_F(RunTest, ParallelWorkersMatchSequential) {
  RunConfig cfg = FastConfig();
  Trace a, b;
  Go(*backend_, cfg, a);
  cfg.workers = 3;
  Go(*backend_, cfg, b);
  EXPECT_EQ(a.log, b.log);
}

TEST_F(RunTest, BudgetEqualToBatchGivesOneRoundWhenDrawsAreNew) {
  RunConfig cfg;
  cfg.budget = 30;
  cfg.n1 = 30;
  cfg.predictor = FastConfig().predictor;
  cfg.cvae = FastConfig().cvae;
  int single_round = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    Trace tr;
    const RunResult r = Go(*backend_, cfg, tr);
    EXPECT_EQ(r.syntheses, 30);
    EXPECT_FALSE(r.front.empty());
    EXPECT_LE(r.front.size(), 30u);
    const auto& first = r.sampled_keys.front();
    const bool all_new = std::set<std::string>(first.begin(), first.end()).size() == 30;
    EXPECT_EQ(r.iterations == 1, all_new);
    single_round += r.iterations == 1;
  }
  EXPECT_GT(single_round, 0);
}

TEST_F(RunTest, FailuresConsumeBudget) {
  FlakyBackend flaky(*backend_, space_);
  Trace tr;
  const RunResult r = Go(flaky, FastConfig(), tr);
  EXPECT_EQ(r.syntheses, 24);
  EXPECT_GT(r.failures, 0);
  EXPECT_EQ(int(r.dataset.size()), 24 - r.failures);
  EXPECT_EQ(std::set<std::string>(tr.keys.begin(), tr.keys.end()).size(), 24u);
}

TEST_F(RunTest, RandomBaselineBudgetAndDeterminism) {
  RunConfig cfg = FastConfig();
  cfg.budget = 40;
  Trace a, b;
  const RunResult ra = Go(*backend_, cfg, a, true);
  Go(*backend_, cfg, b, true);
  EXPECT_EQ(ra.syntheses, 40);
  EXPECT_EQ(std::set<std::string>(a.keys.begin(), a.keys.end()).size(), 40u);
  EXPECT_EQ(a.log, b.log);
  EXPECT_FALSE(ra.front.empty());
}

class TinyRunTest : public ::testing::Test {
 protected:
  void SetUp() override {
    space_ = DesignSpaceFromJson(json::parse(kTinySpace));
    backend_.emplace(KernelFromJson(json::parse(kTinyKernel)), space_);
  }
  DesignSpace space_;
  std::optional<MiniHlsBackend> backend_;
};

TEST_F(TinyRunTest, DuplicateDrawsAreDroppedNotResynthesized) {
  RunConfig cfg = FastConfig();
  cfg.lambdas = {0.0, 1.0};
  cfg.budget = 9;
  std::vector<int> per_iter;
  std::vector<std::string> keys;
  RunEvents ev;
  ev.on_log = [&](const json& j) {
    if (j["type"] == "iteration") per_iter.push_back(j["synthesized"].get<int>());
  };
  ev.on_synthesis = [&](const std::string& key, int, int, const std::vector<double>&,
                        const PragmaConfig&, const SynthesisOutcome&) { keys.push_back(key); };
  const RunResult r = invhls::Run(space_, *backend_, cfg, ev);
  EXPECT_EQ(r.syntheses, 9);
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), 9u);
  int total = 0;
  bool short_round = false;
  for (int n : per_iter) {
    EXPECT_LE(n, cfg.n1);
    short_round |= n < cfg.n1;
    total += n;
  }
  EXPECT_EQ(total, 9);
  EXPECT_TRUE(short_round);
}

// Learned distributions may concentrate before the last key is drawn, so the
// learner stops at or below the space size; uniform sampling reaches it.
TEST_F(TinyRunTest, ExhaustedSpaceStallsBelowBudget) {
  RunConfig cfg = FastConfig();
  cfg.lambdas = {0.0, 1.0};
  cfg.budget = 20;
  cfg.max_stalled_iterations = 3;
  const RunResult r = invhls::Run(space_, *backend_, cfg);
  EXPECT_TRUE(r.stalled);
  EXPECT_LE(r.syntheses, 9);
  EXPECT_EQ(std::size_t(r.syntheses), r.dataset.size());
  const RunResult b = RunRandomBaseline(space_, *backend_, cfg);
  EXPECT_TRUE(b.stalled);
  EXPECT_EQ(b.syntheses, 9);
}

TEST_F(TinyRunTest, TemperingReachesEveryKeyBeforeStalling) {
  RunConfig cfg = FastConfig();
  cfg.lambdas = {0.5};
  cfg.n1 = 3;
  cfg.budget = 20;
  std::vector<double> temperatures;
  RunEvents ev;
  ev.on_log = [&](const json& j) {
    if (j["type"] == "iteration") temperatures.push_back(j.value("temperature", 1.0));
  };
  const RunResult r = invhls::Run(space_, *backend_, cfg, ev);
  EXPECT_TRUE(r.stalled);
  EXPECT_EQ(r.syntheses, 9);
  EXPECT_EQ(r.dataset.size(), 9u);
  ASSERT_GE(temperatures.size(), std::size_t(cfg.max_stalled_iterations));
  EXPECT_EQ(temperatures.back(), double(cfg.max_stalled_iterations));
}

TEST(Tempered, FlattensTowardUniformAndKeepsOrder) {
  const DesignSpace space = DesignSpaceFromJson(json::parse(kTinySpace));
  ThetaDistribution theta = InitThetaUniform(space);
  for (auto& site : theta.logits) {
    for (std::size_t j = 0; j < site.size(); ++j) site[j] = 3.0 * double(j);
  }
  EXPECT_EQ(FlattenTheta(Tempered(theta, 1.0)), FlattenTheta(theta));
  const ThetaDistribution hot = Tempered(theta, 1e6);
  for (std::size_t i = 0; i < theta.sites.size(); ++i) {
    const auto p = theta.probs(i), q = hot.probs(i);
    for (std::size_t j = 0; j < p.size(); ++j) {
      EXPECT_NEAR(q[j], 1.0 / double(p.size()), 1e-5);
      if (j > 0) EXPECT_GT(q[j], q[j - 1]);
    }
  }
}

TEST_F(RunTest, SynthesizeBatchKeepsInputOrder) {
  std::vector<PragmaConfig> configs;
  for (std::uint64_t s = 0; s < 12; ++s) {
    configs.push_back(SampleConfig(InitThetaUniform(space_), space_, s));
  }
  const auto seq = SynthesizeBatch(*backend_, configs, 1);
  const auto par = SynthesizeBatch(*backend_, configs, 4);
  ASSERT_EQ(seq.size(), par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_EQ(*seq[i].result, *par[i].result);
}

TEST(Workers, FromEnvironment) {
  unsetenv("INVHLS_WORKERS");
  EXPECT_EQ(WorkersFromEnv(2), 2);
  setenv("INVHLS_WORKERS", "5", 1);
  EXPECT_EQ(WorkersFromEnv(2), 5);
  setenv("INVHLS_WORKERS", "zero", 1);
  EXPECT_EQ(WorkersFromEnv(2), 2);
  unsetenv("INVHLS_WORKERS");
}

}  // namespace
}  // namespace invhls

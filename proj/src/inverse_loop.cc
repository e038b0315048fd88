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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <random>
#include <set>
#include <thread>

#include "invhls/errors.h"

namespace invhls {
namespace {

using nlohmann::json;

Matrix NormalMatrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

json PredictorConfigToJson(const PredictorConfig& p) {
  return json{{"hidden", p.hidden},
              {"layers", p.layers},
              {"head_hidden", p.head_hidden},
              {"epochs", p.epochs},
              {"lr", p.lr},
              {"form", p.form == AttentionForm::kDynamic ? "dynamic" : "static"}};
}

json CvaeConfigToJson(const CvaeConfig& c) {
  return json{{"latent", c.latent}, {"hidden", c.hidden}, {"condition", c.condition},
              {"c", c.c},           {"epochs", c.epochs}, {"lr", c.lr}};
}

json AreaJson(const AreaVector& a) { return AreaToJson(a); }

template <typename F>
auto MaybeParallel(bool parallel, F f) {
  return std::async(parallel ? std::launch::async : std::launch::deferred, std::move(f));
}

struct Pending {
  std::string key;
  PragmaConfig config;
  int k = 0;
  std::vector<double> theta;
};

// Shared bookkeeping of both drivers: synthesize a batch, record outcomes and
// emit per-synthesis log lines.
class Driver {
 public:
  Driver(const DesignSpace& space, Backend& backend, const RunConfig& cfg, const RunEvents& events,
         RunResult& result)
      : space_(space), backend_(backend), cfg_(cfg), events_(events), result_(result) {}

  bool tried(const std::string& key) const { return tried_.count(key) > 0; }
  int remaining() const { return cfg_.budget - result_.syntheses; }

  // Synthesizes the batch; successful records are appended to the result
  // dataset. Returns standardized costs context for logging.
  void SynthesizeAndRecord(int iteration, const std::vector<Pending>& batch) {
    std::vector<PragmaConfig> configs;
    for (const Pending& p : batch) configs.push_back(p.config);
    const std::vector<SynthesisOutcome> outcomes = SynthesizeBatch(backend_, configs, cfg_.workers);
    std::vector<const DesignRecord*> fresh;
    std::vector<std::size_t> fresh_pos;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Pending& p = batch[i];
      const SynthesisOutcome& o = outcomes[i];
      ++result_.syntheses;
      tried_.insert(p.key);
      if (events_.on_synthesis) events_.on_synthesis(p.key, iteration, p.k, p.theta, p.config, o);
      if (!o.ok()) {
        ++result_.failures;
        continue;
      }
      DesignRecord r;
      r.key = p.key;
      r.config = p.config;
      r.graph = o.result->graph;
      r.latency = o.result->latency;
      r.area = o.result->area;
      r.area_scalar = ScalarizeArea(r.area);
      r.iteration = iteration;
      r.k = p.k;
      r.theta = p.theta;
      result_.dataset.Add(std::move(r));
    }
    const Standardizer s = Standardizer::Fit(result_.dataset);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Pending& p = batch[i];
      const SynthesisOutcome& o = outcomes[i];
      json line = {{"type", "synthesis"}, {"iter", iteration}, {"k", p.k}, {"key", p.key},
                   {"status", SynthesisStatusName(o.status)}};
      if (o.ok()) {
        const double l = double(o.result->latency), a = ScalarizeArea(o.result->area);
        line["latency"] = o.result->latency;
        line["area"] = AreaJson(o.result->area);
        line["area_scalar"] = a;
        if (p.k < int(cfg_.lambdas.size())) {
          line["cost"] = Cost(s.latency(l), s.area(a), cfg_.lambdas[p.k]);
        }
      } else {
        line["message"] = o.message;
        if (o.status == SynthesisStatus::kToolFailure) line["exit_code"] = o.exit_code;
      }
      Log(line);
    }
  }

  void Log(const json& line) {
    if (events_.on_log) events_.on_log(line);
  }

  // Mean cost per k over the iteration's sampled keys with known results.
  std::vector<double> MeanCosts(const std::vector<std::vector<std::string>>& sampled) const {
    const Standardizer s = Standardizer::Fit(result_.dataset);
    std::vector<double> out;
    for (std::size_t k = 0; k < sampled.size(); ++k) {
      double total = 0.0;
      int count = 0;
      for (const std::string& key : sampled[k]) {
        if (const DesignRecord* r = result_.dataset.Find(key)) {
          total += Cost(s.latency(double(r->latency)), s.area(r->area_scalar), cfg_.lambdas[k]);
          ++count;
        }
      }
      out.push_back(count ? total / count : std::nan(""));
    }
    return out;
  }

 private:
  const DesignSpace& space_;
  Backend& backend_;
  const RunConfig& cfg_;
  const RunEvents& events_;
  RunResult& result_;
  std::set<std::string> tried_;
};

json CostsJson(const std::vector<double>& costs) {
  json out = json::array();
  for (double c : costs) {
    if (std::isfinite(c)) {
      out.push_back(c);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

}  // namespace

void RunConfig::Validate() const {
  if (lambdas.empty()) throw ValidationError("run config: empty weight list");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0 && lambdas[i] <= 1.0)) {
      throw ValidationError("run config: weights must lie in [0, 1]");
    }
    if (i > 0 && lambdas[i] < lambdas[i - 1]) {
      throw ValidationError("run config: weights must be sorted");
    }
  }
  if (n1 < 1 || n1 % int(lambdas.size()) != 0) {
    throw ValidationError("run config: n1 must be a positive multiple of the weight count");
  }
  if (budget < n1) throw ValidationError("run config: budget must be at least n1");
  if (n2 < 1 || inner_steps < 0 || !(theta_lr > 0.0)) {
    throw ValidationError("run config: bad n2, inner_steps or theta_lr");
  }
  if (max_stalled_iterations < 1 || workers < 1) {
    throw ValidationError("run config: max_stalled_iterations and workers must be >= 1");
  }
  predictor.Validate();
  cvae.Validate();
}

RunConfig RunConfigFromJson(const json& doc, RunConfig c) {
  try {
    c.lambdas = doc.value("lambdas", c.lambdas);
    c.budget = doc.value("budget", c.budget);
    c.n1 = doc.value("n1", c.n1);
    c.n2 = doc.value("n2", c.n2);
    c.inner_steps = doc.value("inner_steps", c.inner_steps);
    c.theta_lr = doc.value("theta_lr", c.theta_lr);
    c.seed = doc.value("seed", c.seed);
    c.max_stalled_iterations = doc.value("max_stalled_iterations", c.max_stalled_iterations);
    c.workers = doc.value("workers", c.workers);
    if (doc.contains("predictor")) {
      const json& p = doc["predictor"];
      c.predictor.hidden = p.value("hidden", c.predictor.hidden);
      c.predictor.layers = p.value("layers", c.predictor.layers);
      c.predictor.head_hidden = p.value("head_hidden", c.predictor.head_hidden);
      c.predictor.epochs = p.value("epochs", c.predictor.epochs);
      c.predictor.lr = p.value("lr", c.predictor.lr);
      const std::string form = p.value("form", "dynamic");
      if (form != "dynamic" && form != "static") {
        throw ValidationError("run config: predictor form must be dynamic or static");
      }
      c.predictor.form = form == "dynamic" ? AttentionForm::kDynamic : AttentionForm::kStatic;
    }
    if (doc.contains("cvae")) {
      const json& v = doc["cvae"];
      c.cvae.latent = v.value("latent", c.cvae.latent);
      c.cvae.hidden = v.value("hidden", c.cvae.hidden);
      c.cvae.condition = v.value("condition", c.cvae.condition);
      c.cvae.c = v.value("c", c.cvae.c);
      c.cvae.epochs = v.value("epochs", c.cvae.epochs);
      c.cvae.lr = v.value("lr", c.cvae.lr);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  c.Validate();
  return c;
}

json RunConfigToJson(const RunConfig& c) {
  return json{{"lambdas", c.lambdas},
              {"budget", c.budget},
              {"n1", c.n1},
              {"n2", c.n2},
              {"inner_steps", c.inner_steps},
              {"theta_lr", c.theta_lr},
              {"seed", c.seed},
              {"max_stalled_iterations", c.max_stalled_iterations},
              {"predictor", PredictorConfigToJson(c.predictor)},
              {"cvae", CvaeConfigToJson(c.cvae)}};
}

void DesignDataset::Add(DesignRecord record) {
  if (Contains(record.key)) throw ValidationError("dataset: duplicate key " + record.key);
  index_.emplace(record.key, records_.size());
  records_.push_back(std::move(record));
}

const DesignRecord* DesignDataset::Find(const std::string& key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? nullptr : &records_[it->second];
}

Standardizer Standardizer::Fit(std::span<const double> latency, std::span<const double> area) {
  auto stats = [](std::span<const double> x, double& mean, double& sd) {
    mean = 0.0;
    sd = 1.0;
    if (x.empty()) return;
    for (double v : x) mean += v;
    mean /= double(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= double(x.size());
    sd = var > 0.0 ? std::sqrt(var) : 1.0;
  };
  Standardizer s;
  stats(latency, s.latency_mean, s.latency_std);
  stats(area, s.area_mean, s.area_std);
  return s;
}

Standardizer Standardizer::Fit(const DesignDataset& data) {
  std::vector<double> l, a;
  for (const DesignRecord& r : data.records()) {
    l.push_back(double(r.latency));
    a.push_back(r.area_scalar);
  }
  return Fit(l, a);
}

double Cost(double l_std, double a_std, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("cost: weight outside [0, 1]");
  return lambda * l_std + (1.0 - lambda) * a_std;
}

FeatureScaler FeatureScaler::Fit(const Matrix& x) {
  FeatureScaler s;
  s.mean = x.colwise().mean();
  s.stddev.resize(1, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(0, j)).square().mean();
    s.stddev(0, j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix FeatureScaler::Apply(const Matrix& x) const {
  Matrix out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = (x.row(i).array() - mean.row(0).array()) / stddev.row(0).array();
  }
  return out;
}

std::vector<int> SiteOfEntry(const ThetaDistribution& theta) {
  std::vector<int> out;
  for (std::size_t s = 0; s < theta.logits.size(); ++s) {
    out.insert(out.end(), theta.logits[s].size(), int(s));
  }
  return out;
}

Matrix ThetaLogitColumn(const ThetaDistribution& theta) {
  Matrix col(theta.flat_dim(), 1);
  Eigen::Index i = 0;
  for (const auto& site : theta.logits) {
    for (double v : site) col(i++, 0) = v;
  }
  return col;
}

void SetThetaLogits(ThetaDistribution& theta, const Matrix& column) {
  if (column.rows() != Eigen::Index(theta.flat_dim()) || column.cols() != 1) {
    throw ShapeError("theta logits: column length differs from the distribution");
  }
  Eigen::Index i = 0;
  for (auto& site : theta.logits) {
    for (double& v : site) v = column(i++, 0);
  }
}

Var FlattenThetaVar(Var logits, std::span<const int> site_of_entry, int num_sites) {
  return Transpose(SegmentSoftmax(logits, site_of_entry, num_sites));
}

namespace {

Var ChainCost(Tape& tape, Var theta, ObjectiveChain& chain, const Matrix& z) {
  if (!chain.predictor || !chain.estimator) throw ValidationError("surrogate: untrained models");
  Var f = chain.estimator->SampleFeature(tape, tape.Constant(z), theta);
  f = AddRow(MulRow(f, tape.Constant(chain.scaler.stddev)), tape.Constant(chain.scaler.mean));
  return Mean(chain.predictor->Head(tape, f));
}

}  // namespace

Var SurrogateCost(Tape& tape, Var logits, std::span<const int> site_of_entry, int num_sites,
                  Surrogate& surrogate, const Matrix& z_latency, const Matrix& z_area,
                  double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("surrogate: weight outside [0, 1]");
  Var theta = FlattenThetaVar(logits, site_of_entry, num_sites);
  if (lambda == 1.0) return ChainCost(tape, theta, surrogate.latency, z_latency);
  if (lambda == 0.0) return ChainCost(tape, theta, surrogate.area, z_area);
  return Add(Scale(ChainCost(tape, theta, surrogate.latency, z_latency), lambda),
             Scale(ChainCost(tape, theta, surrogate.area, z_area), 1.0 - lambda));
}

ThetaUpdate UpdateTheta(const ThetaDistribution& theta, Surrogate& surrogate,
                        const Matrix& z_latency, const Matrix& z_area, double lambda,
                        int inner_steps, double lr) {
  const std::vector<int> seg = SiteOfEntry(theta);
  const int sites = int(theta.logits.size());
  Parameter logits("theta", ThetaLogitColumn(theta));
  Parameter* params[] = {&logits};
  AdamState adam = MakeAdam(params, {.lr = lr});
  ThetaUpdate out;
  auto evaluate = [&](bool backward) {
    logits.ZeroGrad();
    Tape tape;
    Var c = SurrogateCost(tape, tape.Param(logits), seg, sites, surrogate, z_latency, z_area,
                          lambda);
    if (!std::isfinite(c.scalar())) throw NumericError("surrogate cost is not finite");
    if (backward) {
      tape.Backward(c);
      if (!logits.grad.allFinite()) throw NumericError("surrogate gradient is not finite");
    }
    return c.scalar();
  };
  for (int step = 0; step < inner_steps; ++step) {
    const double c = evaluate(true);
    if (step == 0) out.first_cost = c;
    AdamStep(adam, params);
  }
  out.last_cost = evaluate(false);
  if (inner_steps == 0) out.first_cost = out.last_cost;
  out.theta = theta;
  SetThetaLogits(out.theta, logits.value);
  return out;
}

std::vector<SynthesisOutcome> SynthesizeBatch(Backend& backend,
                                              std::span<const PragmaConfig> configs, int workers) {
  std::vector<SynthesisOutcome> out(configs.size());
  const int threads = std::min<int>(std::max(1, workers), int(configs.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) out[i] = backend.Synthesize(configs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(configs.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < configs.size();) {
        try {
          out[i] = backend.Synthesize(configs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

int WorkersFromEnv(int fallback) {
  if (const char* v = std::getenv("INVHLS_WORKERS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return fallback;
}

std::vector<ObjectivePoint> DatasetFront(const DesignDataset& data) {
  std::vector<ObjectivePoint> points;
  for (const DesignRecord& r : data.records()) {
    points.push_back({double(r.latency), r.area_scalar, r.key});
  }
  if (points.empty()) return {};
  return ParetoExtract(points);
}

ThetaDistribution Tempered(const ThetaDistribution& theta, double temperature) {
  ThetaDistribution out = theta;
  if (temperature == 1.0) return out;
  for (auto& site : out.logits) {
    for (double& x : site) x /= temperature;
  }
  return out;
}

RunResult Run(const DesignSpace& space, Backend& backend, const RunConfig& cfg,
              const RunEvents& events) {
  cfg.Validate();
  RunResult result;
  Driver driver(space, backend, cfg, events, result);
  const int weights = int(cfg.lambdas.size());
  const int per_k = cfg.n1 / weights;
  std::vector<ThetaDistribution> thetas(weights, InitThetaUniform(space));
  const bool parallel = cfg.workers > 1;
  if (events.on_thetas) events.on_thetas(0, thetas);
  int stalled = 0;
  for (int iter = 0;; ++iter) {
    std::vector<Pending> batch;
    std::set<std::string> batch_keys;
    std::vector<std::vector<std::string>> sampled(weights);
    const double temperature = 1.0 + stalled;
    for (int k = 0; k < weights; ++k) {
      const ThetaDistribution draw_from = Tempered(thetas[k], temperature);
      const std::vector<double> flat = FlattenTheta(draw_from);
      for (int s = 0; s < per_k; ++s) {
        PragmaConfig c = SampleConfig(draw_from, space, MixSeed(cfg.seed, iter, k, s));
        std::string key = CanonicalKey(space, c);
        sampled[k].push_back(key);
        if (driver.tried(key) || !batch_keys.insert(key).second) continue;
        batch.push_back({std::move(key), std::move(c), k, flat});
      }
    }
    const int sampled_new = int(batch.size());
    if (int(batch.size()) > driver.remaining()) batch.resize(driver.remaining());
    driver.SynthesizeAndRecord(iter, batch);
    result.iterations = iter + 1;
    result.mean_cost.push_back(driver.MeanCosts(sampled));
    std::vector<std::string> all_keys;
    for (const auto& ks : sampled) all_keys.insert(all_keys.end(), ks.begin(), ks.end());
    result.sampled_keys.push_back(all_keys);

    json line = {{"type", "iteration"},
                 {"iter", iter},
                 {"mean_cost", CostsJson(result.mean_cost.back())},
                 {"sampled", weights * per_k},
                 {"new", sampled_new},
                 {"synthesized", int(batch.size())},
                 {"total_syntheses", result.syntheses},
                 {"dataset", result.dataset.size()}};
    if (temperature != 1.0) line["temperature"] = temperature;
    const bool done = result.syntheses >= cfg.budget;
    stalled = batch.empty() ? stalled + 1 : 0;
    if (stalled >= cfg.max_stalled_iterations) result.stalled = true;
    if (done || result.stalled || result.dataset.size() < 2) {
      if (result.stalled) line["stalled"] = true;
      driver.Log(line);
      if (done || result.stalled) break;
      continue;
    }

    const auto& records = result.dataset.records();
    const Standardizer stdz = Standardizer::Fit(result.dataset);
    std::vector<const CdfgGraph*> graphs;
    std::vector<double> yl, ya;
    Matrix theta_rows(Eigen::Index(records.size()), Eigen::Index(records[0].theta.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
      graphs.push_back(&records[i].graph);
      yl.push_back(stdz.latency(double(records[i].latency)));
      ya.push_back(stdz.area(records[i].area_scalar));
      for (std::size_t j = 0; j < records[i].theta.size(); ++j) {
        theta_rows(Eigen::Index(i), Eigen::Index(j)) = records[i].theta[j];
      }
    }
    auto pl_job = MaybeParallel(parallel, [&] {
      return TrainPredictor(graphs, yl, cfg.predictor, MixSeed(cfg.seed, iter, 1000));
    });
    auto pa_job = MaybeParallel(parallel, [&] {
      return TrainPredictor(graphs, ya, cfg.predictor, MixSeed(cfg.seed, iter, 1001));
    });
    TrainedPredictor pl = pl_job.get(), pa = pa_job.get();
    const Matrix fl = pl.model.ExtractFeatures(graphs);
    const Matrix fa = pa.model.ExtractFeatures(graphs);
    Surrogate surrogate;
    surrogate.latency.scaler = FeatureScaler::Fit(fl);
    surrogate.area.scaler = FeatureScaler::Fit(fa);
    auto vl_job = MaybeParallel(parallel, [&] {
      return TrainCvae(surrogate.latency.scaler.Apply(fl), theta_rows, cfg.cvae,
                       MixSeed(cfg.seed, iter, 2000));
    });
    auto va_job = MaybeParallel(parallel, [&] {
      return TrainCvae(surrogate.area.scaler.Apply(fa), theta_rows, cfg.cvae,
                       MixSeed(cfg.seed, iter, 2001));
    });
    TrainedCvae vl = vl_job.get(), va = va_job.get();
    if (events.on_checkpoint) {
      events.on_checkpoint(iter, "predictor_latency", pl.model.ToJson());
      events.on_checkpoint(iter, "predictor_area", pa.model.ToJson());
      events.on_checkpoint(iter, "estimator_latency", vl.model.ToJson());
      events.on_checkpoint(iter, "estimator_area", va.model.ToJson());
    }
    surrogate.latency.predictor = &pl.model;
    surrogate.latency.estimator = &vl.model;
    surrogate.area.predictor = &pa.model;
    surrogate.area.estimator = &va.model;

    json surrogate_log = json::array();
    for (int k = 0; k < weights; ++k) {
      const Matrix zl = NormalMatrix(cfg.n2, cfg.cvae.latent, MixSeed(cfg.seed, iter, 3000, k));
      const Matrix za = NormalMatrix(cfg.n2, cfg.cvae.latent, MixSeed(cfg.seed, iter, 3001, k));
      try {
        ThetaUpdate u = UpdateTheta(thetas[k], surrogate, zl, za, cfg.lambdas[k],
                                    cfg.inner_steps, cfg.theta_lr);
        thetas[k] = std::move(u.theta);
        surrogate_log.push_back({u.first_cost, u.last_cost});
      } catch (const NumericError& e) {
        surrogate_log.push_back({{"error", e.what()}});
      }
    }
    if (events.on_thetas) events.on_thetas(iter + 1, thetas);
    line["losses"] = {{"predictor_latency", pl.final_loss},
                      {"predictor_area", pa.final_loss},
                      {"estimator_latency", vl.final_loss},
                      {"estimator_area", va.final_loss}};
    line["surrogate"] = surrogate_log;
    driver.Log(line);
  }
  result.thetas = thetas;
  result.front = DatasetFront(result.dataset);
  return result;
}

RunResult RunRandomBaseline(const DesignSpace& space, Backend& backend, const RunConfig& cfg,
                            const RunEvents& events) {
  cfg.Validate();
  RunResult result;
  Driver driver(space, backend, cfg, events, result);
  const ThetaDistribution uniform = InitThetaUniform(space);
  const std::vector<double> flat = FlattenTheta(uniform);
  // Gives up once this many consecutive draws repeat known keys.
  const int patience = 200 * cfg.n1;
  std::uint64_t draw = 0;
  bool exhausted = false;
  for (int iter = 0; !exhausted && driver.remaining() > 0; ++iter) {
    std::vector<Pending> batch;
    std::set<std::string> batch_keys;
    const int want = std::min(cfg.n1, driver.remaining());
    int misses = 0;
    while (int(batch.size()) < want) {
      PragmaConfig c = SampleConfig(uniform, space, MixSeed(cfg.seed, 0x5a3d, draw++));
      std::string key = CanonicalKey(space, c);
      if (driver.tried(key) || !batch_keys.insert(key).second) {
        if (++misses >= patience) {
          exhausted = true;
          break;
        }
        continue;
      }
      misses = 0;
      batch.push_back({std::move(key), std::move(c), int(cfg.lambdas.size()), flat});
    }
    driver.SynthesizeAndRecord(iter, batch);
    result.iterations = iter + 1;
    json line = {{"type", "iteration"},
                 {"iter", iter},
                 {"synthesized", int(batch.size())},
                 {"total_syntheses", result.syntheses},
                 {"dataset", result.dataset.size()}};
    if (exhausted) line["exhausted"] = true;
    driver.Log(line);
    if (batch.empty()) break;
  }
  result.stalled = exhausted;
  result.thetas = {uniform};
  result.front = DatasetFront(result.dataset);
  return result;
}

}  // namespace invhls

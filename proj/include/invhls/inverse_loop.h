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

#ifndef INVHLS_INVERSE_LOOP_H_
#define INVHLS_INVERSE_LOOP_H_

// The budgeted optimization loop: sample configurations from one pragma
// distribution per cost weight, synthesize the new ones, fit predictors and
// feature estimators, then descend each distribution on a learned surrogate
// of its expected cost.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "invhls/autodiff.h"
#include "invhls/backend.h"
#include "invhls/design_space.h"
#include "invhls/estimator.h"
#include "invhls/pareto.h"
#include "invhls/predictor.h"

namespace invhls {

struct RunConfig {
  std::vector<double> lambdas = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  int budget = 180;
  int n1 = 30;
  int n2 = 64;
  int inner_steps = 50;
  double theta_lr = 0.05;
  std::uint64_t seed = 0;
  PredictorConfig predictor;
  CvaeConfig cvae;
  // Consecutive iterations without a single new design before giving up.
  int max_stalled_iterations = 20;
  int workers = 1;

  void Validate() const;
};

RunConfig RunConfigFromJson(const nlohmann::json& doc, RunConfig base = {});
nlohmann::json RunConfigToJson(const RunConfig& cfg);

struct DesignRecord {
  std::string key;
  PragmaConfig config;
  CdfgGraph graph;
  std::int64_t latency = 0;
  AreaVector area;
  double area_scalar = 0.0;
  int iteration = 0;
  int k = 0;
  std::vector<double> theta;  // flattened distribution it was sampled from
};

class DesignDataset {
 public:
  // Throws ValidationError on a repeated key.
  void Add(DesignRecord record);
  bool Contains(const std::string& key) const { return index_.count(key) > 0; }
  const DesignRecord* Find(const std::string& key) const;
  const std::vector<DesignRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<DesignRecord> records_;
  std::map<std::string, std::size_t> index_;
};

// Population z-scores of latency and scalarized area; a zero spread becomes 1.
struct Standardizer {
  double latency_mean = 0.0, latency_std = 1.0;
  double area_mean = 0.0, area_std = 1.0;

  static Standardizer Fit(std::span<const double> latency, std::span<const double> area);
  static Standardizer Fit(const DesignDataset& data);
  double latency(double l) const { return (l - latency_mean) / latency_std; }
  double area(double a) const { return (a - area_mean) / area_std; }
};

double Cost(double l_std, double a_std, double lambda);

// Per-column mean/std used to standardize extracted features.
struct FeatureScaler {
  Matrix mean, stddev;  // 1 x F

  static FeatureScaler Fit(const Matrix& x);
  Matrix Apply(const Matrix& x) const;
};

// Per-site softmax of a column of logits, transposed into a 1 x D row.
Var FlattenThetaVar(Var logits, std::span<const int> site_of_entry, int num_sites);
std::vector<int> SiteOfEntry(const ThetaDistribution& theta);
Matrix ThetaLogitColumn(const ThetaDistribution& theta);
void SetThetaLogits(ThetaDistribution& theta, const Matrix& column);

// The head and decoder chains of one objective.
struct ObjectiveChain {
  PredictorModel* predictor = nullptr;
  CvaeModel* estimator = nullptr;
  FeatureScaler scaler;
};

struct Surrogate {
  ObjectiveChain latency;
  ObjectiveChain area;
};

// mean_i [lambda * head_l(destd(Dec_l(z_l[i], theta))) +
//         (1 - lambda) * head_a(destd(Dec_a(z_a[i], theta)))]
// An endpoint weight skips the chain it zeroes.
Var SurrogateCost(Tape& tape, Var logits, std::span<const int> site_of_entry, int num_sites,
                  Surrogate& surrogate, const Matrix& z_latency, const Matrix& z_area,
                  double lambda);

struct ThetaUpdate {
  ThetaDistribution theta;
  double first_cost = 0.0, last_cost = 0.0;
};

// inner_steps ADAM steps on theta's logits with a fresh optimizer. Throws
// NumericError on a non-finite cost or gradient.
ThetaUpdate UpdateTheta(const ThetaDistribution& theta, Surrogate& surrogate,
                        const Matrix& z_latency, const Matrix& z_area, double lambda,
                        int inner_steps, double lr);

// One JSON-lines record per synthesis and per iteration.
struct RunEvents {
  std::function<void(const nlohmann::json&)> on_log;
  std::function<void(const std::string& key, int iteration, int k,
                     const std::vector<double>& theta, const PragmaConfig& config,
                     const SynthesisOutcome& outcome)>
      on_synthesis;
  std::function<void(int iteration, const std::vector<ThetaDistribution>& thetas)> on_thetas;
  std::function<void(int iteration, const std::string& name, const nlohmann::json& checkpoint)>
      on_checkpoint;
};

struct RunResult {
  std::vector<ObjectivePoint> front;
  DesignDataset dataset;  // every successful synthesis, final batch included
  int syntheses = 0;      // backend invocations
  int failures = 0;
  int iterations = 0;
  std::vector<std::vector<double>> mean_cost;  // [iteration][k]
  std::vector<std::vector<std::string>> sampled_keys;  // [iteration], all k
  std::vector<ThetaDistribution> thetas;  // final distributions
  bool stalled = false;
};

// Logits divided by temperature; 1 returns theta unchanged.
ThetaDistribution Tempered(const ThetaDistribution& theta, double temperature);

// After s consecutive iterations without a new design, draws come from
// Tempered(theta, 1 + s) and records store that distribution.
RunResult Run(const DesignSpace& space, Backend& backend, const RunConfig& cfg,
              const RunEvents& events = {});

// Uniform sampling of up to B distinct configurations without learning.
RunResult RunRandomBaseline(const DesignSpace& space, Backend& backend, const RunConfig& cfg,
                            const RunEvents& events = {});

// Front over a dataset's (latency, scalarized area) points.
std::vector<ObjectivePoint> DatasetFront(const DesignDataset& data);

// Batch synthesis on up to `workers` threads; results in input order.
std::vector<SynthesisOutcome> SynthesizeBatch(Backend& backend,
                                              std::span<const PragmaConfig> configs, int workers);

int WorkersFromEnv(int fallback);

}  // namespace invhls

#endif  // INVHLS_INVERSE_LOOP_H_

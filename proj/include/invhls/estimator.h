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

#ifndef INVHLS_ESTIMATOR_H_
#define INVHLS_ESTIMATOR_H_

// Conditional VAE over graph features, conditioned on a flattened pragma
// distribution. Loss per record:
//   |f - f'|^2 / (2c) - sum_i 0.5 (1 + log v_i - v_i - m_i^2)

#include <cstdint>
#include <span>
#include <vector>

#include "invhls/autodiff.h"
#include "invhls/nn.h"

namespace invhls {

// z = m + sqrt(v) * noise. Throws ValidationError when any v <= 0.
Var Reparameterize(Var m, Var v, Var noise);

// Batch-averaged loss; rows are records. Throws ValidationError for c <= 0.
Var VaeLoss(Var f, Var f_rec, Var m, Var v, double c);
// The KL part alone, batch-averaged.
Var VaeKl(Var m, Var v);

struct CvaeConfig {
  int latent = 16;
  int hidden = 64;
  int condition = 64;  // projector output width
  double c = 1.0;
  int epochs = 400;
  double lr = 2e-3;

  void Validate() const;
};

class CvaeModel {
 public:
  CvaeModel() = default;
  CvaeModel(int feature_dim, int theta_dim, const CvaeConfig& cfg, std::uint64_t seed);

  Var Condition(Tape& tape, Var theta);
  // Returns {m, v}.
  std::pair<Var, Var> Encode(Tape& tape, Var f, Var cond);
  Var Decode(Tape& tape, Var z, Var cond);
  // Dec([z | projector(theta)]); z rows share the single theta row.
  Var SampleFeature(Tape& tape, Var z, Var theta);
  Matrix SampleFeature(const Matrix& z, const Matrix& theta);

  // Full loss of one batch with the given reparameterization noise.
  Var Loss(Tape& tape, const Matrix& f, const Matrix& theta, const Matrix& noise);

  std::vector<Parameter*> parameters();
  int feature_dim() const { return feature_dim_; }
  int theta_dim() const { return theta_dim_; }
  const CvaeConfig& config() const { return cfg_; }

  nlohmann::json ToJson();
  void LoadJson(const nlohmann::json& doc);

 private:
  CvaeConfig cfg_;
  int feature_dim_ = 0, theta_dim_ = 0;
  Mlp projector_, encoder_, decoder_;
  Linear mean_head_, var_head_;
};

struct TrainedCvae {
  CvaeModel model;
  std::vector<double> losses;  // per epoch, before the update
  double final_loss = 0.0;     // deterministic (noise = 0) loss after training
};

// features: N x F, thetas: N x T. Fresh model, full-batch ADAM with fresh
// noise each epoch.
TrainedCvae TrainCvae(const Matrix& features, const Matrix& thetas, const CvaeConfig& cfg,
                      std::uint64_t seed);

}  // namespace invhls

#endif  // INVHLS_ESTIMATOR_H_

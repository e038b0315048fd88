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

#include "invhls/estimator.h"

#include <cmath>
#include <random>

#include "invhls/errors.h"

namespace invhls {

Var Reparameterize(Var m, Var v, Var noise) {
  if ((v.value().array() <= 0.0).any()) {
    throw ValidationError("reparameterize: variance must be positive");
  }
  return Add(m, Mul(Sqrt(v), noise));
}

Var VaeKl(Var m, Var v) {
  // -0.5 * sum(1 + log v - v - m^2), averaged over rows.
  Var inner = Sub(Sub(AddScalar(Log(v), 1.0), v), Square(m));
  return Scale(Sum(inner), -0.5 / double(m.rows()));
}

Var VaeLoss(Var f, Var f_rec, Var m, Var v, double c) {
  if (!(c > 0.0)) throw ValidationError("vae loss: c must be positive");
  Var rec = Scale(Sum(Square(Sub(f, f_rec))), 1.0 / (2.0 * c * double(f.rows())));
  return Add(rec, VaeKl(m, v));
}

void CvaeConfig::Validate() const {
  if (latent < 1 || hidden < 1 || condition < 1) {
    throw ValidationError("cvae: widths must be >= 1");
  }
  if (!(c > 0.0)) throw ValidationError("cvae: c must be positive");
  if (epochs < 0 || !(lr > 0.0)) throw ValidationError("cvae: bad epochs or learning rate");
}

CvaeModel::CvaeModel(int feature_dim, int theta_dim, const CvaeConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), feature_dim_(feature_dim), theta_dim_(theta_dim) {
  cfg_.Validate();
  if (feature_dim < 1 || theta_dim < 1) throw ValidationError("cvae: empty feature or theta");
  std::mt19937_64 rng(seed);
  projector_ = Mlp({theta_dim, cfg_.hidden, cfg_.condition}, rng, "proj");
  encoder_ = Mlp({feature_dim + cfg_.condition, cfg_.hidden, cfg_.hidden}, rng, "enc");
  mean_head_ = Linear(cfg_.hidden, cfg_.latent, rng, "enc.m");
  var_head_ = Linear(cfg_.hidden, cfg_.latent, rng, "enc.v");
  decoder_ = Mlp({cfg_.latent + cfg_.condition, cfg_.hidden, cfg_.hidden, feature_dim}, rng, "dec");
}

Var CvaeModel::Condition(Tape& tape, Var theta) { return Elu(projector_.Forward(tape, theta)); }

std::pair<Var, Var> CvaeModel::Encode(Tape& tape, Var f, Var cond) {
  const Var parts[] = {f, cond};
  Var h = Elu(encoder_.Forward(tape, ConcatCols(parts)));
  Var m = mean_head_.Forward(tape, h);
  Var v = AddScalar(Softplus(var_head_.Forward(tape, h)), 1e-6);
  return {m, v};
}

Var CvaeModel::Decode(Tape& tape, Var z, Var cond) {
  const Var parts[] = {z, cond};
  return decoder_.Forward(tape, ConcatCols(parts));
}

Var CvaeModel::SampleFeature(Tape& tape, Var z, Var theta) {
  if (theta.rows() != 1 || theta.cols() != theta_dim_ || z.cols() != cfg_.latent) {
    throw ShapeError("sample_feature: theta must be 1 x " + std::to_string(theta_dim_) +
                     " and z n x " + std::to_string(cfg_.latent));
  }
  Var cond = BroadcastRows(Condition(tape, theta), z.rows());
  return Decode(tape, z, cond);
}

Matrix CvaeModel::SampleFeature(const Matrix& z, const Matrix& theta) {
  Tape tape;
  return SampleFeature(tape, tape.Constant(z), tape.Constant(theta)).value();
}

Var CvaeModel::Loss(Tape& tape, const Matrix& f, const Matrix& theta, const Matrix& noise) {
  if (f.cols() != feature_dim_ || theta.cols() != theta_dim_ || f.rows() != theta.rows() ||
      noise.rows() != f.rows() || noise.cols() != cfg_.latent) {
    throw ShapeError("cvae: feature/theta/noise shapes disagree with the model");
  }
  Var fv = tape.Constant(f);
  Var cond = Condition(tape, tape.Constant(theta));
  auto [m, v] = Encode(tape, fv, cond);
  Var z = Reparameterize(m, v, tape.Constant(noise));
  return VaeLoss(fv, Decode(tape, z, cond), m, v, cfg_.c);
}

std::vector<Parameter*> CvaeModel::parameters() {
  std::vector<Parameter*> out;
  for (Parameter* p : projector_.parameters()) out.push_back(p);
  for (Parameter* p : encoder_.parameters()) out.push_back(p);
  for (Parameter* p : mean_head_.parameters()) out.push_back(p);
  for (Parameter* p : var_head_.parameters()) out.push_back(p);
  for (Parameter* p : decoder_.parameters()) out.push_back(p);
  return out;
}

nlohmann::json CvaeModel::ToJson() { return ParamsToJson(parameters(), "cvae"); }

void CvaeModel::LoadJson(const nlohmann::json& doc) { ParamsFromJson(doc, parameters(), "cvae"); }

TrainedCvae TrainCvae(const Matrix& features, const Matrix& thetas, const CvaeConfig& cfg,
                      std::uint64_t seed) {
  if (features.rows() < 1 || features.rows() != thetas.rows()) {
    throw ShapeError("cvae training needs one theta row per feature row");
  }
  TrainedCvae out{CvaeModel(int(features.cols()), int(thetas.cols()), cfg, seed), {}, 0.0};
  std::vector<Parameter*> params = out.model.parameters();
  AdamState adam = MakeAdam(params, {.lr = cfg.lr});
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> normal;
  Matrix noise(features.rows(), cfg.latent);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
    ZeroGrads(params);
    Tape tape;
    Var loss = out.model.Loss(tape, features, thetas, noise);
    if (!std::isfinite(loss.scalar())) throw NumericError("cvae loss is not finite");
    out.losses.push_back(loss.scalar());
    tape.Backward(loss);
    AdamStep(adam, params);
  }
  Tape tape;
  out.final_loss =
      out.model.Loss(tape, features, thetas, Matrix::Zero(features.rows(), cfg.latent)).scalar();
  return out;
}

}  // namespace invhls

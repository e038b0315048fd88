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

#include "invhls/nn.h"

#include <cmath>

#include "invhls/errors.h"

namespace invhls {

using nlohmann::json;

Matrix GlorotUniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / double(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u = double(rng() >> 11) * 0x1.0p-53;
    m.data()[i] = (2.0 * u - 1.0) * limit;
  }
  return m;
}

Linear::Linear(int in, int out, std::mt19937_64& rng, const std::string& name)
    : weight_(name + ".weight", GlorotUniform(in, out, rng)),
      bias_(name + ".bias", Matrix::Zero(1, out)) {}

Var Linear::Forward(Tape& tape, Var x) {
  return AddRow(Matmul(x, tape.Param(weight_)), tape.Param(bias_));
}

Mlp::Mlp(const std::vector<int>& widths, std::mt19937_64& rng, const std::string& name) {
  if (widths.size() < 2) throw ValidationError("Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(widths[i], widths[i + 1], rng, name + "." + std::to_string(i));
  }
}

Var Mlp::Forward(Tape& tape, Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].Forward(tape, x);
    if (i + 1 < layers_.size()) x = Elu(x);
  }
  return x;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (Linear& l : layers_) {
    for (Parameter* p : l.parameters()) out.push_back(p);
  }
  return out;
}

void ZeroGrads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->ZeroGrad();
}

json ParamsToJson(const std::vector<Parameter*>& params, const std::string& kind) {
  json list = json::array();
  for (const Parameter* p : params) {
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
    list.push_back({{"name", p->name},
                    {"rows", p->value.rows()},
                    {"cols", p->value.cols()},
                    {"data", std::move(data)}});
  }
  return json{{"format", "invhls-checkpoint"}, {"version", 1}, {"kind", kind},
              {"params", std::move(list)}};
}

void ParamsFromJson(const json& doc, const std::vector<Parameter*>& params,
                    const std::string& kind) {
  try {
    if (doc.at("format") != "invhls-checkpoint" || doc.at("version") != 1) {
      throw ValidationError("checkpoint: unsupported format or version");
    }
    if (doc.at("kind") != kind) {
      throw ValidationError("checkpoint: expected kind '" + kind + "'");
    }
    const json& list = doc.at("params");
    if (list.size() != params.size()) {
      throw ValidationError("checkpoint: parameter count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json& j = list[i];
      Parameter& p = *params[i];
      if (j.at("name") != p.name || j.at("rows") != p.value.rows() ||
          j.at("cols") != p.value.cols()) {
        throw ValidationError("checkpoint: parameter '" + p.name + "' does not match");
      }
      const auto data = j.at("data").get<std::vector<double>>();
      if (Eigen::Index(data.size()) != p.value.size()) {
        throw ValidationError("checkpoint: data length mismatch for '" + p.name + "'");
      }
      std::copy(data.begin(), data.end(), p.value.data());
      p.ZeroGrad();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace invhls

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

#ifndef INVHLS_NN_H_
#define INVHLS_NN_H_

// Dense layers and parameter checkpoints on top of the autodiff tape.

#include <random>
#include <string>
#include <vector>

#include "invhls/autodiff.h"
#include "json.hpp"

namespace invhls {

// Glorot-uniform initialized rows x cols matrix.
Matrix GlorotUniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, std::mt19937_64& rng, const std::string& name);

  Var Forward(Tape& tape, Var x);
  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }
  int in_dim() const { return int(weight_.value.rows()); }
  int out_dim() const { return int(weight_.value.cols()); }

 private:
  Parameter weight_, bias_;
};

// widths = {in, hidden..., out}; ELU between layers, identity after the last.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& widths, std::mt19937_64& rng, const std::string& name);

  Var Forward(Tape& tape, Var x);
  std::vector<Parameter*> parameters();
  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }

 private:
  std::vector<Linear> layers_;
};

void ZeroGrads(const std::vector<Parameter*>& params);

// Checkpoint layout:
//   {"format": "invhls-checkpoint", "version": 1, "kind": <kind>,
//    "params": [{"name", "rows", "cols", "data": [row-major values]}]}
nlohmann::json ParamsToJson(const std::vector<Parameter*>& params, const std::string& kind);
// Names, order and shapes must match; throws ValidationError otherwise.
void ParamsFromJson(const nlohmann::json& doc, const std::vector<Parameter*>& params,
                    const std::string& kind);

}  // namespace invhls

#endif  // INVHLS_NN_H_

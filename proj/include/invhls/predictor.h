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

#ifndef INVHLS_PREDICTOR_H_
#define INVHLS_PREDICTOR_H_

// Graph-attention regressors over CDFGs. A predictor is an embedding, a stack
// of attention layers with ELU between them, a mean readout (the feature
// extractor boundary) and an MLP head.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "invhls/autodiff.h"
#include "invhls/cdfg.h"
#include "invhls/nn.h"

namespace invhls {

// kDynamic scores edges with a^T LeakyReLU(W[h_i | h_j | e_ij]); kStatic
// applies a before the nonlinearity, LeakyReLU(a^T W[h_i | h_j | e_ij]).
enum class AttentionForm { kDynamic, kStatic };

// Edge list with self loops already present; dst[e] is the query node.
struct EdgeIndex {
  std::vector<int> src;
  std::vector<int> dst;
  int num_nodes = 0;
};

class Gatv2Layer {
 public:
  Gatv2Layer() = default;
  Gatv2Layer(int in_dim, int edge_dim, int out_dim, AttentionForm form, std::mt19937_64& rng,
             const std::string& name, double slope = 0.2);

  // Per-edge logits (E x 1).
  Var Scores(Tape& tape, Var h, Var e, const EdgeIndex& edges);
  // Per-edge attention, normalized over each query's incoming edges.
  Var Attention(Tape& tape, Var h, Var e, const EdgeIndex& edges);
  // h'_i = sum_j alpha_ij (W_k h_j) + b.
  Var Forward(Tape& tape, Var h, Var e, const EdgeIndex& edges);

  std::vector<Parameter*> parameters() { return {&wq_, &wk_, &we_, &a_, &bias_}; }
  Parameter& query_weight() { return wq_; }
  Parameter& key_weight() { return wk_; }
  Parameter& edge_weight() { return we_; }
  Parameter& attention_vector() { return a_; }
  Parameter& bias() { return bias_; }
  AttentionForm form() const { return form_; }
  int out_dim() const { return int(wq_.value.cols()); }

 private:
  Parameter wq_, wk_, we_, a_, bias_;
  AttentionForm form_ = AttentionForm::kDynamic;
  double slope_ = 0.2;
};

// Dense (|V| x |V|) attention matrix: alpha(i, j) for query i and key j.
Matrix AttentionMatrix(Gatv2Layer& layer, const Matrix& h, const Matrix& e,
                       const EdgeIndex& edges);

// Disjoint union of graphs with one self loop per node.
struct GraphBatch {
  std::vector<int> node_type;
  std::vector<int> edge_type;  // self loops use the extra type edge_type_vocab
  EdgeIndex edges;
  std::vector<int> graph_of_node;
  Matrix numeric;
  int num_graphs = 0;
};

GraphBatch BatchGraphs(std::span<const CdfgGraph* const> graphs, const EmbeddingConfig& cfg);

// Mean of node rows; throws GraphError(kEmptyGraph) on zero rows.
Matrix GraphFeature(const Matrix& node_features);

struct PredictorConfig {
  EmbeddingConfig embedding;
  int hidden = 64;  // attention width = feature dimension
  int layers = 3;
  std::vector<int> head_hidden = {64, 64};
  AttentionForm form = AttentionForm::kDynamic;
  double slope = 0.2;
  int epochs = 200;
  double lr = 1e-3;

  void Validate() const;
};

class PredictorModel {
 public:
  PredictorModel() = default;
  PredictorModel(const PredictorConfig& cfg, std::uint64_t seed);

  // Graph features (G x hidden) and predictions (G x 1) on a tape.
  Var Features(Tape& tape, const GraphBatch& batch);
  Var Head(Tape& tape, Var features);
  Var Predict(Tape& tape, const GraphBatch& batch) { return Head(tape, Features(tape, batch)); }

  Matrix ExtractFeatures(std::span<const CdfgGraph* const> graphs);
  std::vector<double> PredictValues(std::span<const CdfgGraph* const> graphs);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> head_parameters() { return head_.parameters(); }
  const PredictorConfig& config() const { return cfg_; }
  int feature_dim() const { return cfg_.hidden; }

  nlohmann::json ToJson();
  void LoadJson(const nlohmann::json& doc);

 private:
  PredictorConfig cfg_;
  Parameter node_table_, edge_table_;
  std::vector<Gatv2Layer> layers_;
  Mlp head_;
};

struct TrainedPredictor {
  PredictorModel model;
  std::vector<double> losses;  // full-batch MSE before each epoch's update
  double final_loss = 0.0;     // after the last update
};

// Fresh model, full-batch ADAM on mean squared error.
TrainedPredictor TrainPredictor(std::span<const CdfgGraph* const> graphs,
                                std::span<const double> targets, const PredictorConfig& cfg,
                                std::uint64_t seed);

}  // namespace invhls

#endif  // INVHLS_PREDICTOR_H_

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

#include "invhls/predictor.h"

#include <cmath>

#include "invhls/errors.h"

namespace invhls {

Gatv2Layer::Gatv2Layer(int in_dim, int edge_dim, int out_dim, AttentionForm form,
                       std::mt19937_64& rng, const std::string& name, double slope)
    : wq_(name + ".wq", GlorotUniform(in_dim, out_dim, rng)),
      wk_(name + ".wk", GlorotUniform(in_dim, out_dim, rng)),
      we_(name + ".we", GlorotUniform(edge_dim, out_dim, rng)),
      a_(name + ".a", GlorotUniform(out_dim, 1, rng)),
      bias_(name + ".bias", Matrix::Zero(1, out_dim)),
      form_(form),
      slope_(slope) {}

Var Gatv2Layer::Scores(Tape& tape, Var h, Var e, const EdgeIndex& edges) {
  if (h.rows() != edges.num_nodes || e.rows() != Eigen::Index(edges.src.size()) ||
      edges.src.size() != edges.dst.size()) {
    throw ShapeError("attention: " + std::to_string(h.rows()) + " nodes / " +
                     std::to_string(e.rows()) + " edge rows do not match the edge index");
  }
  Var q = Matmul(h, tape.Param(wq_));
  Var k = Matmul(h, tape.Param(wk_));
  return EdgeAttentionLogits(q, k, e, tape.Param(we_), tape.Param(a_), edges.src, edges.dst,
                             slope_, form_ == AttentionForm::kDynamic);
}

Var Gatv2Layer::Attention(Tape& tape, Var h, Var e, const EdgeIndex& edges) {
  return SegmentSoftmax(Scores(tape, h, e, edges), edges.dst, edges.num_nodes);
}

Var Gatv2Layer::Forward(Tape& tape, Var h, Var e, const EdgeIndex& edges) {
  Var q = Matmul(h, tape.Param(wq_));
  Var k = Matmul(h, tape.Param(wk_));
  Var logits = EdgeAttentionLogits(q, k, e, tape.Param(we_), tape.Param(a_), edges.src,
                                   edges.dst, slope_, form_ == AttentionForm::kDynamic);
  Var alpha = SegmentSoftmax(logits, edges.dst, edges.num_nodes);
  return AddRow(WeightedAggregate(alpha, k, edges.src, edges.dst, edges.num_nodes),
                tape.Param(bias_));
}

Matrix AttentionMatrix(Gatv2Layer& layer, const Matrix& h, const Matrix& e,
                       const EdgeIndex& edges) {
  Tape tape;
  Var alpha = layer.Attention(tape, tape.Constant(h), tape.Constant(e), edges);
  Matrix out = Matrix::Zero(edges.num_nodes, edges.num_nodes);
  for (std::size_t k = 0; k < edges.src.size(); ++k) {
    out(edges.dst[k], edges.src[k]) += alpha.value()(Eigen::Index(k), 0);
  }
  return out;
}

GraphBatch BatchGraphs(std::span<const CdfgGraph* const> graphs, const EmbeddingConfig& cfg) {
  GraphBatch b;
  b.num_graphs = int(graphs.size());
  int total = 0;
  for (const CdfgGraph* g : graphs) total += int(g->nodes().size());
  b.numeric.resize(total, 3);
  int base = 0;
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const CdfgGraph& g = *graphs[gi];
    CheckVocabulary(g, cfg);
    const int n = int(g.nodes().size());
    if (n == 0) throw GraphError(GraphError::Kind::kEmptyGraph, "empty graph in batch");
    b.numeric.middleRows(base, n) = NumericChannels(g, cfg);
    for (int i = 0; i < n; ++i) {
      b.node_type.push_back(g.nodes()[i].node_type);
      b.graph_of_node.push_back(gi);
    }
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
      b.edge_type.push_back(g.edges()[e].edge_type);
      b.edges.src.push_back(base + g.src_index(int(e)));
      b.edges.dst.push_back(base + g.dst_index(int(e)));
    }
    for (int i = 0; i < n; ++i) {
      b.edge_type.push_back(cfg.edge_type_vocab);
      b.edges.src.push_back(base + i);
      b.edges.dst.push_back(base + i);
    }
    base += n;
  }
  b.edges.num_nodes = total;
  return b;
}

Matrix GraphFeature(const Matrix& node_features) {
  if (node_features.rows() == 0) {
    throw GraphError(GraphError::Kind::kEmptyGraph, "graph feature of an empty graph");
  }
  return node_features.colwise().mean();
}

void PredictorConfig::Validate() const {
  embedding.Validate();
  if (hidden < 1 || layers < 1) throw ValidationError("predictor: hidden and layers must be >= 1");
  for (int w : head_hidden) {
    if (w < 1) throw ValidationError("predictor: head widths must be >= 1");
  }
  if (epochs < 0 || !(lr > 0)) throw ValidationError("predictor: bad epochs or learning rate");
}

PredictorModel::PredictorModel(const PredictorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.Validate();
  std::mt19937_64 rng(seed);
  const EmbeddingConfig& e = cfg_.embedding;
  node_table_ = Parameter("embed.node", GlorotUniform(e.node_type_vocab, e.node_embed_dim, rng));
  edge_table_ =
      Parameter("embed.edge", GlorotUniform(e.edge_type_vocab + 1, e.edge_embed_dim, rng));
  int in = e.node_feature_dim();
  for (int l = 0; l < cfg_.layers; ++l) {
    layers_.emplace_back(in, e.edge_embed_dim, cfg_.hidden, cfg_.form, rng,
                         "gat" + std::to_string(l), cfg_.slope);
    in = cfg_.hidden;
  }
  std::vector<int> widths = {cfg_.hidden};
  widths.insert(widths.end(), cfg_.head_hidden.begin(), cfg_.head_hidden.end());
  widths.push_back(1);
  head_ = Mlp(widths, rng, "head");
}

Var PredictorModel::Features(Tape& tape, const GraphBatch& batch) {
  const Var parts[] = {GatherRows(tape.Param(node_table_), batch.node_type),
                       tape.Constant(batch.numeric)};
  Var h = ConcatCols(parts);
  Var e = GatherRows(tape.Param(edge_table_), batch.edge_type);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].Forward(tape, h, e, batch.edges);
    if (l + 1 < layers_.size()) h = Elu(h);
  }
  return SegmentMeanRows(h, batch.graph_of_node, batch.num_graphs);
}

Var PredictorModel::Head(Tape& tape, Var features) { return head_.Forward(tape, features); }

Matrix PredictorModel::ExtractFeatures(std::span<const CdfgGraph* const> graphs) {
  Tape tape;
  return Features(tape, BatchGraphs(graphs, cfg_.embedding)).value();
}

std::vector<double> PredictorModel::PredictValues(std::span<const CdfgGraph* const> graphs) {
  Tape tape;
  const Matrix& p = Predict(tape, BatchGraphs(graphs, cfg_.embedding)).value();
  return std::vector<double>(p.data(), p.data() + p.rows());
}

std::vector<Parameter*> PredictorModel::parameters() {
  std::vector<Parameter*> out = {&node_table_, &edge_table_};
  for (Gatv2Layer& l : layers_) {
    for (Parameter* p : l.parameters()) out.push_back(p);
  }
  for (Parameter* p : head_.parameters()) out.push_back(p);
  return out;
}

nlohmann::json PredictorModel::ToJson() { return ParamsToJson(parameters(), "predictor"); }

void PredictorModel::LoadJson(const nlohmann::json& doc) {
  ParamsFromJson(doc, parameters(), "predictor");
}

TrainedPredictor TrainPredictor(std::span<const CdfgGraph* const> graphs,
                                std::span<const double> targets, const PredictorConfig& cfg,
                                std::uint64_t seed) {
  if (graphs.size() < 1 || graphs.size() != targets.size()) {
    throw ValidationError("predictor training needs one target per graph");
  }
  TrainedPredictor out{PredictorModel(cfg, seed), {}, 0.0};
  const GraphBatch batch = BatchGraphs(graphs, cfg.embedding);
  Matrix y(Eigen::Index(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) y(Eigen::Index(i), 0) = targets[i];
  std::vector<Parameter*> params = out.model.parameters();
  AdamState adam = MakeAdam(params, {.lr = cfg.lr});
  auto loss_of = [&](Tape& tape) {
    return Mean(Square(Sub(out.model.Predict(tape, batch), tape.Constant(y))));
  };
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ZeroGrads(params);
    Tape tape;
    Var loss = loss_of(tape);
    if (!std::isfinite(loss.scalar())) throw NumericError("predictor loss is not finite");
    out.losses.push_back(loss.scalar());
    tape.Backward(loss);
    AdamStep(adam, params);
  }
  Tape tape;
  out.final_loss = loss_of(tape).scalar();
  return out;
}

}  // namespace invhls

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

#ifndef INVHLS_CDFG_H_
#define INVHLS_CDFG_H_

// Post-synthesis control/data-flow graphs: data model, the neutral JSON
// exchange format, DOT export and the fixed attribute transforms used ahead of
// the learned embeddings.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "invhls/errors.h"
#include "invhls/matrix.h"
#include "json.hpp"

namespace invhls {

// Registered code tables. Codes below these bounds are valid.
inline constexpr int kNodeTypeCount = 16;
inline constexpr int kEdgeTypeCount = 8;
inline constexpr int kMaxBitwidth = 1024;

// Edge type codes emitted by the mini-HLS backend.
inline constexpr int kDataEdge = 0;
inline constexpr int kControlEdge = 1;
inline constexpr int kMemoryEdge = 2;
inline constexpr int kCallEdge = 3;

struct CdfgNode {
  int id = 0;
  int node_type = 0;
  std::string opcode;
  int bitwidth = 32;
  std::optional<std::int64_t> const_value;

  bool operator==(const CdfgNode&) const = default;
};

// src and dst are node ids.
struct CdfgEdge {
  int id = 0;
  int src = 0;
  int dst = 0;
  int edge_type = 0;

  bool operator==(const CdfgEdge&) const = default;
};

class GraphError : public ValidationError {
 public:
  enum class Kind {
    kMalformed,
    kUnknownField,
    kEmptyGraph,
    kDuplicateNodeId,
    kDuplicateEdgeId,
    kDanglingEndpoint,
    kBadAttribute,
  };
  GraphError(Kind kind, const std::string& what)
      : ValidationError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class CdfgGraph {
 public:
  CdfgGraph() = default;
  // Validates and builds adjacency; throws GraphError.
  CdfgGraph(std::vector<CdfgNode> nodes, std::vector<CdfgEdge> edges);

  const std::vector<CdfgNode>& nodes() const { return nodes_; }
  const std::vector<CdfgEdge>& edges() const { return edges_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  // Position of the node with the given id.
  int node_index(int id) const;
  // Edge endpoints as node positions.
  int src_index(std::size_t edge) const { return edge_src_[edge]; }
  int dst_index(std::size_t edge) const { return edge_dst_[edge]; }
  // Incoming edge positions of node position i; N(i) is their sources.
  const std::vector<int>& in_edges(int i) const { return in_edges_[i]; }

  bool operator==(const CdfgGraph& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_;
  }

 private:
  std::vector<CdfgNode> nodes_;
  std::vector<CdfgEdge> edges_;
  std::vector<int> edge_src_, edge_dst_;
  std::vector<std::vector<int>> in_edges_;
  std::vector<std::pair<int, int>> id_to_index_;  // sorted by id
};

CdfgGraph GraphFromJson(const nlohmann::json& doc);
nlohmann::json GraphToJson(const CdfgGraph& graph);
CdfgGraph ParseGraph(const std::string& text);
std::string SerializeGraph(const CdfgGraph& graph);
std::string GraphToDot(const CdfgGraph& graph);

struct EmbeddingConfig {
  int node_type_vocab = kNodeTypeCount;
  int edge_type_vocab = kEdgeTypeCount;
  int node_embed_dim = 8;  // learned part; three numeric channels follow
  int edge_embed_dim = 4;
  double const_scale = 8.0;

  int node_feature_dim() const { return node_embed_dim + 3; }
  void Validate() const;
};

// Per node: [log2(1 + bitwidth), has_const, squash(const)] where
// squash(c) = sign(c) * tanh(log2(1 + |c|) / const_scale).
Matrix NumericChannels(const CdfgGraph& graph, const EmbeddingConfig& cfg);

// Throws GraphError(kBadAttribute) on codes outside the vocabularies.
void CheckVocabulary(const CdfgGraph& graph, const EmbeddingConfig& cfg);

// Node features [type_table[type] | numeric channels] with shape
// (|V|, node_feature_dim) and edge features edge_table[type] with shape
// (|E|, edge_embed_dim).
std::pair<Matrix, Matrix> Embed(const CdfgGraph& graph, const EmbeddingConfig& cfg,
                                const Matrix& node_type_table,
                                const Matrix& edge_type_table);

}  // namespace invhls

#endif  // INVHLS_CDFG_H_

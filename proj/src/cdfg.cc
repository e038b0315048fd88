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

#include "invhls/cdfg.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace invhls {
namespace {

using nlohmann::json;
using Kind = GraphError::Kind;

void RejectUnknownFields(const json& obj, std::initializer_list<const char*> allowed,
                         const char* what) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw GraphError(Kind::kUnknownField,
                       std::string(what) + ": unknown field '" + key + "'");
    }
  }
}

template <typename T>
T Field(const json& obj, const char* key, const char* what) {
  if (!obj.contains(key)) {
    throw GraphError(Kind::kMalformed,
                     std::string(what) + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw GraphError(Kind::kMalformed,
                     std::string(what) + ": bad type for field '" + key + "'");
  }
}

}  // namespace

CdfgGraph::CdfgGraph(std::vector<CdfgNode> nodes, std::vector<CdfgEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  if (nodes_.empty()) throw GraphError(Kind::kEmptyGraph, "graph has no nodes");
  id_to_index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const CdfgNode& n = nodes_[i];
    if (n.node_type < 0 || n.node_type >= kNodeTypeCount) {
      throw GraphError(Kind::kBadAttribute,
                       "node " + std::to_string(n.id) + ": unregistered type " +
                           std::to_string(n.node_type));
    }
    if (n.bitwidth < 0 || n.bitwidth > kMaxBitwidth) {
      throw GraphError(Kind::kBadAttribute,
                       "node " + std::to_string(n.id) + ": bitwidth out of range");
    }
    id_to_index_.emplace_back(n.id, int(i));
  }
  std::sort(id_to_index_.begin(), id_to_index_.end());
  for (std::size_t i = 1; i < id_to_index_.size(); ++i) {
    if (id_to_index_[i].first == id_to_index_[i - 1].first) {
      throw GraphError(Kind::kDuplicateNodeId,
                       "duplicate node id " + std::to_string(id_to_index_[i].first));
    }
  }
  std::set<int> edge_ids;
  in_edges_.assign(nodes_.size(), {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const CdfgEdge& edge = edges_[e];
    if (!edge_ids.insert(edge.id).second) {
      throw GraphError(Kind::kDuplicateEdgeId,
                       "duplicate edge id " + std::to_string(edge.id));
    }
    if (edge.edge_type < 0 || edge.edge_type >= kEdgeTypeCount) {
      throw GraphError(Kind::kBadAttribute,
                       "edge " + std::to_string(edge.id) + ": unregistered type");
    }
    const int s = node_index(edge.src), d = node_index(edge.dst);
    if (s < 0 || d < 0) {
      throw GraphError(Kind::kDanglingEndpoint,
                       "edge " + std::to_string(edge.id) + " references missing node " +
                           std::to_string(s < 0 ? edge.src : edge.dst));
    }
    edge_src_.push_back(s);
    edge_dst_.push_back(d);
    in_edges_[d].push_back(int(e));
  }
}

int CdfgGraph::node_index(int id) const {
  auto it = std::lower_bound(id_to_index_.begin(), id_to_index_.end(),
                             std::make_pair(id, -1));
  if (it == id_to_index_.end() || it->first != id) return -1;
  return it->second;
}

CdfgGraph GraphFromJson(const json& doc) {
  if (!doc.is_object()) throw GraphError(Kind::kMalformed, "graph must be an object");
  RejectUnknownFields(doc, {"nodes", "edges"}, "graph");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw GraphError(Kind::kMalformed, "graph: 'nodes' must be an array");
  }
  std::vector<CdfgNode> nodes;
  for (const json& j : doc["nodes"]) {
    if (!j.is_object()) throw GraphError(Kind::kMalformed, "node must be an object");
    RejectUnknownFields(j, {"id", "type", "opcode", "bitwidth", "const"}, "node");
    CdfgNode n;
    n.id = Field<int>(j, "id", "node");
    n.node_type = Field<int>(j, "type", "node");
    n.opcode = Field<std::string>(j, "opcode", "node");
    n.bitwidth = Field<int>(j, "bitwidth", "node");
    if (j.contains("const") && !j["const"].is_null()) {
      n.const_value = Field<std::int64_t>(j, "const", "node");
    }
    nodes.push_back(std::move(n));
  }
  std::vector<CdfgEdge> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) {
      throw GraphError(Kind::kMalformed, "graph: 'edges' must be an array");
    }
    for (const json& j : doc["edges"]) {
      if (!j.is_object()) throw GraphError(Kind::kMalformed, "edge must be an object");
      RejectUnknownFields(j, {"id", "type", "src", "dst"}, "edge");
      edges.push_back({Field<int>(j, "id", "edge"), Field<int>(j, "src", "edge"),
                       Field<int>(j, "dst", "edge"), Field<int>(j, "type", "edge")});
    }
  }
  return CdfgGraph(std::move(nodes), std::move(edges));
}

json GraphToJson(const CdfgGraph& graph) {
  json nodes = json::array();
  for (const CdfgNode& n : graph.nodes()) {
    json j{{"id", n.id}, {"type", n.node_type}, {"opcode", n.opcode},
           {"bitwidth", n.bitwidth}};
    if (n.const_value) j["const"] = *n.const_value;
    nodes.push_back(std::move(j));
  }
  json edges = json::array();
  for (const CdfgEdge& e : graph.edges()) {
    edges.push_back({{"id", e.id}, {"type", e.edge_type}, {"src", e.src}, {"dst", e.dst}});
  }
  return json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

CdfgGraph ParseGraph(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw GraphError(Kind::kMalformed, std::string("graph: ") + e.what());
  }
  return GraphFromJson(doc);
}

std::string SerializeGraph(const CdfgGraph& graph) { return GraphToJson(graph).dump(); }

std::string GraphToDot(const CdfgGraph& graph) {
  static constexpr const char* kStyles[] = {"solid", "dashed", "dotted", "bold"};
  std::ostringstream os;
  os << "digraph cdfg {\n";
  for (const CdfgNode& n : graph.nodes()) {
    os << "  n" << n.id << " [label=\"" << n.opcode << "_" << n.id;
    if (n.const_value) os << "\\n" << *n.const_value;
    os << "\"];\n";
  }
  for (const CdfgEdge& e : graph.edges()) {
    os << "  n" << e.src << " -> n" << e.dst << " [style="
       << kStyles[e.edge_type % 4] << "];\n";
  }
  os << "}\n";
  return os.str();
}

void EmbeddingConfig::Validate() const {
  if (node_type_vocab < 1 || edge_type_vocab < 1 || node_embed_dim < 1 ||
      edge_embed_dim < 1 || !(const_scale > 0.0)) {
    throw ValidationError("embedding dimensions must be >= 1");
  }
}

void CheckVocabulary(const CdfgGraph& graph, const EmbeddingConfig& cfg) {
  for (const CdfgNode& n : graph.nodes()) {
    if (n.node_type >= cfg.node_type_vocab) {
      throw GraphError(Kind::kBadAttribute,
                       "node type " + std::to_string(n.node_type) +
                           " outside the embedding vocabulary");
    }
  }
  for (const CdfgEdge& e : graph.edges()) {
    if (e.edge_type >= cfg.edge_type_vocab) {
      throw GraphError(Kind::kBadAttribute,
                       "edge type " + std::to_string(e.edge_type) +
                           " outside the embedding vocabulary");
    }
  }
}

Matrix NumericChannels(const CdfgGraph& graph, const EmbeddingConfig& cfg) {
  Matrix out(graph.num_nodes(), 3);
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    const CdfgNode& n = graph.nodes()[i];
    out(i, 0) = std::log2(1.0 + n.bitwidth);
    if (n.const_value) {
      const double c = double(*n.const_value);
      out(i, 1) = 1.0;
      out(i, 2) = std::copysign(std::tanh(std::log2(1.0 + std::abs(c)) / cfg.const_scale), c);
    } else {
      out(i, 1) = 0.0;
      out(i, 2) = 0.0;
    }
  }
  return out;
}

std::pair<Matrix, Matrix> Embed(const CdfgGraph& graph, const EmbeddingConfig& cfg,
                                const Matrix& node_type_table,
                                const Matrix& edge_type_table) {
  cfg.Validate();
  CheckVocabulary(graph, cfg);
  if (node_type_table.rows() < cfg.node_type_vocab ||
      node_type_table.cols() != cfg.node_embed_dim ||
      edge_type_table.rows() < cfg.edge_type_vocab ||
      edge_type_table.cols() != cfg.edge_embed_dim) {
    throw ShapeError("embedding tables do not match the embedding config");
  }
  Matrix nodes(graph.num_nodes(), cfg.node_feature_dim());
  const Matrix numeric = NumericChannels(graph, cfg);
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    nodes.row(i).head(cfg.node_embed_dim) =
        node_type_table.row(graph.nodes()[i].node_type);
    nodes.row(i).tail(3) = numeric.row(i);
  }
  Matrix edges(graph.num_edges(), cfg.edge_embed_dim);
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    edges.row(e) = edge_type_table.row(graph.edges()[e].edge_type);
  }
  return {std::move(nodes), std::move(edges)};
}

}  // namespace invhls

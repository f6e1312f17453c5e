#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetmp/tensor.hpp"

namespace hetmp {

/// Immutable node/edge structure. Edges are stored as directed entries;
/// for an undirected graph the list is symmetric-closed (both (u,v) and
/// (v,u) present exactly once each). The raw list carries no self-loops
/// added by layer formulas; families that need them add them internally.
struct Graph {
  int num_nodes = 0;
  int num_classes = 0;
  bool directed = false;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> edge_types;  // parallel to edges; empty when untyped
  int num_edge_types = 1;
  Tensor features;              // [num_nodes, d]; empty when absent
  std::vector<int> labels;      // -1 for unlabeled; empty when absent

  // CSR-style incoming-neighbour index, built once by finalize().
  std::vector<int> in_offsets;   // size num_nodes+1
  std::vector<int> in_neighbors; // sources u of edges (u -> v), grouped by v

  void finalize();  // validates invariants, builds the neighbour index
  bool has_labels() const { return !labels.empty(); }
  int degree(int v) const { return in_offsets[v + 1] - in_offsets[v]; }

  /// Dense per-type adjacency A_i (unit weights). type < num_edge_types.
  Tensor dense_adjacency(int type) const;
};

/// Symmetric closure of a directed edge list; idempotent. Deduplicates and
/// keeps one entry per ordered pair.
std::vector<std::pair<int, int>> symmetric_closure(
    const std::vector<std::pair<int, int>>& edges);

struct Split {
  std::vector<bool> train_mask, val_mask, test_mask;
  uint64_t seed = 0;
};

enum class FeatureMode { one_hot_label, gaussian_per_class };

struct SyntheticSpec {
  int num_nodes = 0;
  int num_classes = 2;
  double p_in = 0.5;
  double p_out = 0.0;
  FeatureMode feature_mode = FeatureMode::one_hot_label;
  double sigma = 0.5;  // gaussian-per-class only
  uint64_t seed = 0;
};

enum class GraphFormat { graph_json, edge_csv };

Graph load_graph(const std::string& path, GraphFormat format);
Graph load_graph_auto(const std::string& path);  // by extension / directory
void save_graph(const Graph& g, const std::string& path);  // graph-json
std::string graph_to_json(const Graph& g);
Graph graph_from_json(const std::string& text);

/// Deterministic uniform shuffle split with the documented rounding rule:
/// floor each ratio's node count, assign remainders to train first, then
/// val. Unlabeled nodes belong to no mask.
Split make_split(const Graph& g, double train, double val, double test,
                 uint64_t seed);

/// Planted-partition generator: balanced classes (sizes within +-1),
/// intra-class pairs connected with p_in, inter-class with p_out,
/// undirected, no self-loops.
Graph planted_partition(const SyntheticSpec& spec);

}  // namespace hetmp

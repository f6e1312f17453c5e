#pragma once

#include <string>
#include <vector>

#include "hetmp/graph.hpp"

namespace hetmp {

enum class Channel { orig, hom, het };

Channel channel_from_string(const std::string& s);
std::string to_string(Channel c);

struct HomophilyReport {
  double h_node = 0.0;
  double h_edge = 0.0;
  double h_edge_insensitive = 0.0;
  int num_classes = 0;
};

/// Standard cosine; returns 0 when either vector's norm is below eps_norm.
double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b);

/// Channel scaling factor: hom -> cos(h_u, h_v), orig -> 1, het -> 1 - cos.
/// Unclamped: negative similarities pass through.
double scaling_factor(const std::vector<double>& h_u,
                      const std::vector<double>& h_v, Channel gamma);

/// Mean over nodes of the same-label neighbour fraction; degree-0 nodes
/// contribute 0.
double node_homophily(const Graph& g);

/// Fraction of undirected edges joining same-label endpoints.
double edge_homophily(const Graph& g);

/// Class-insensitive edge homophily ratio:
///   (1/(C-1)) * sum_k max(0, h_k - |C_k|/n)
/// with h_k the same-class fraction of edge endpoints incident to class-k
/// nodes: h_k = sum_{v: y_v=k} |{u in N(v): y_u=k}| / sum_{v: y_v=k} d_v.
double class_insensitive_edge_homophily(const Graph& g);

HomophilyReport homophily_report(const Graph& g);

}  // namespace hetmp

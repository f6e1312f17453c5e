#include "hetmp/homophily.hpp"

#include <cmath>
#include <stdexcept>

#include "hetmp/tape.hpp"

namespace hetmp {

Channel channel_from_string(const std::string& s) {
  if (s == "orig") return Channel::orig;
  if (s == "hom") return Channel::hom;
  if (s == "het") return Channel::het;
  throw std::invalid_argument("unknown channel tag: " + s);
}

std::string to_string(Channel c) {
  switch (c) {
    case Channel::orig: return "orig";
    case Channel::hom: return "hom";
    case Channel::het: return "het";
  }
  return "?";
}

double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < Tape::kEpsNorm || nb < Tape::kEpsNorm) return 0.0;
  return dot / (na * nb);
}

double scaling_factor(const std::vector<double>& h_u,
                      const std::vector<double>& h_v, Channel gamma) {
  // hom is the double-complement 1-(1-cos): off by at most one ulp from
  // the raw cosine, and it makes hom + het == 1 hold bit-exactly for any
  // cosine (1-het is exact by Sterbenz for het >= 0.5, and the final sum
  // rounds to 1 for het < 0.5).
  switch (gamma) {
    case Channel::orig: return 1.0;
    case Channel::hom: return 1.0 - (1.0 - cosine_similarity(h_u, h_v));
    case Channel::het: return 1.0 - cosine_similarity(h_u, h_v);
  }
  throw std::invalid_argument("unknown gamma");
}

namespace {
void require_labels(const Graph& g) {
  if (!g.has_labels()) throw std::invalid_argument("graph has no labels");
}
}  // namespace

double node_homophily(const Graph& g) {
  require_labels(g);
  double acc = 0.0;
  for (int v = 0; v < g.num_nodes; ++v) {
    int deg = g.degree(v);
    if (deg == 0) continue;  // contributes 0
    int same = 0;
    for (int i = g.in_offsets[v]; i < g.in_offsets[v + 1]; ++i)
      if (g.labels[g.in_neighbors[i]] == g.labels[v]) ++same;
    acc += static_cast<double>(same) / deg;
  }
  return acc / g.num_nodes;
}

double edge_homophily(const Graph& g) {
  require_labels(g);
  if (g.edges.empty()) throw std::invalid_argument("edge_homophily: empty edge set");
  // Directed entries of an undirected graph double-count consistently, so
  // the ratio is the per-undirected-edge fraction either way.
  int64_t same = 0;
  for (auto [u, v] : g.edges)
    if (g.labels[u] == g.labels[v]) ++same;
  return static_cast<double>(same) / g.edges.size();
}

double class_insensitive_edge_homophily(const Graph& g) {
  require_labels(g);
  int c = g.num_classes;
  if (c < 2) throw std::invalid_argument("class_insensitive_edge_homophily: C >= 2 required");
  std::vector<int64_t> same(c, 0), total(c, 0), size(c, 0);
  for (int y : g.labels)
    if (y >= 0) ++size[y];
  for (int v = 0; v < g.num_nodes; ++v) {
    int yv = g.labels[v];
    if (yv < 0) continue;
    for (int i = g.in_offsets[v]; i < g.in_offsets[v + 1]; ++i) {
      ++total[yv];
      if (g.labels[g.in_neighbors[i]] == yv) ++same[yv];
    }
  }
  int64_t n = 0;
  for (int64_t s : size) n += s;
  double acc = 0.0;
  for (int k = 0; k < c; ++k) {
    if (total[k] == 0) continue;
    double hk = static_cast<double>(same[k]) / total[k];
    acc += std::max(0.0, hk - static_cast<double>(size[k]) / n);
  }
  return acc / (c - 1);
}

HomophilyReport homophily_report(const Graph& g) {
  return {node_homophily(g), edge_homophily(g),
          class_insensitive_edge_homophily(g), g.num_classes};
}

}  // namespace hetmp

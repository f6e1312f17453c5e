#include "hetmp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hetmp {

namespace fs = std::filesystem;
using nlohmann::json;

void Graph::finalize() {
  for (auto [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw std::out_of_range("edge endpoint index out of range");
  }
  if (!edge_types.empty() && edge_types.size() != edges.size())
    throw std::invalid_argument("edge_types length mismatch");
  for (int t : edge_types)
    if (t < 0 || t >= num_edge_types)
      throw std::out_of_range("edge type out of range");
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != num_nodes)
      throw std::invalid_argument("labels length mismatch");
    for (int y : labels)
      if (y != -1 && (y < 0 || y >= num_classes))
        throw std::out_of_range("label out of range");
  }
  if (features.numel() > 0 && features.rows() != num_nodes)
    throw std::invalid_argument("feature row count mismatch");
  if (!directed) {
    std::set<std::pair<int, int>> s(edges.begin(), edges.end());
    for (auto [u, v] : edges)
      if (u != v && !s.count({v, u}))
        throw std::invalid_argument("undirected graph not symmetric-closed");
    if (s.size() != edges.size())
      throw std::invalid_argument("duplicate edge entries");
  }
  in_offsets.assign(num_nodes + 1, 0);
  for (auto [u, v] : edges) ++in_offsets[v + 1];
  std::partial_sum(in_offsets.begin(), in_offsets.end(), in_offsets.begin());
  in_neighbors.assign(edges.size(), 0);
  std::vector<int> cursor(in_offsets.begin(), in_offsets.end() - 1);
  for (auto [u, v] : edges) in_neighbors[cursor[v]++] = u;
}

Tensor Graph::dense_adjacency(int type) const {
  Tensor a({num_nodes, num_nodes});
  for (size_t e = 0; e < edges.size(); ++e) {
    int t = edge_types.empty() ? 0 : edge_types[e];
    if (t == type) a.at(edges[e].first, edges[e].second) = 1.0;
  }
  return a;
}

std::vector<std::pair<int, int>> symmetric_closure(
    const std::vector<std::pair<int, int>>& edges) {
  std::set<std::pair<int, int>> s;
  for (auto [u, v] : edges) {
    s.insert({u, v});
    if (u != v) s.insert({v, u});
  }
  return {s.begin(), s.end()};
}

namespace {

Graph parse_graph_json(const json& j) {
  Graph g;
  g.num_nodes = j.at("num_nodes").get<int>();
  g.directed = j.value("directed", false);
  g.num_edge_types = j.value("num_edge_types", 1);
  bool typed = false;
  for (const auto& e : j.at("edges")) {
    if (e.size() < 2) throw std::invalid_argument("edge entry needs [u,v]");
    g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    if (e.size() >= 3) {
      typed = true;
      g.edge_types.push_back(e[2].get<int>());
    } else {
      g.edge_types.push_back(0);
    }
  }
  if (!typed) g.edge_types.clear();
  if (!g.directed) {
    if (g.edge_types.empty()) {
      g.edges = symmetric_closure(g.edges);
    } else {
      std::map<std::pair<int, int>, int> m;
      for (size_t e = 0; e < g.edges.size(); ++e) {
        auto [u, v] = g.edges[e];
        m[{u, v}] = g.edge_types[e];
        if (u != v) m[{v, u}] = g.edge_types[e];
      }
      g.edges.clear();
      g.edge_types.clear();
      for (auto& [uv, t] : m) {
        g.edges.push_back(uv);
        g.edge_types.push_back(t);
      }
    }
  }
  if (j.contains("features") && !j["features"].is_null()) {
    const auto& rows = j["features"];
    int n = static_cast<int>(rows.size());
    int d = n > 0 ? static_cast<int>(rows[0].size()) : 0;
    g.features = Tensor({n, d});
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != d)
        throw std::invalid_argument("ragged feature rows");
      for (int k = 0; k < d; ++k) g.features.at(i, k) = rows[i][k].get<double>();
    }
  }
  if (j.contains("labels") && !j["labels"].is_null())
    g.labels = j["labels"].get<std::vector<int>>();
  g.num_classes = j.value("num_classes", 0);
  g.finalize();
  return g;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

Graph parse_edge_csv(const fs::path& dir) {
  Graph g;
  auto labels = read_csv(dir / "labels.csv");
  g.num_nodes = static_cast<int>(labels.size());
  for (auto& r : labels) g.labels.push_back(std::stoi(r.at(0)));
  g.num_classes = *std::max_element(g.labels.begin(), g.labels.end()) + 1;
  bool typed = false;
  for (auto& r : read_csv(dir / "edges.csv")) {
    g.edges.emplace_back(std::stoi(r.at(0)), std::stoi(r.at(1)));
    if (r.size() >= 3) {
      typed = true;
      g.edge_types.push_back(std::stoi(r[2]));
    } else {
      g.edge_types.push_back(0);
    }
  }
  if (!typed) g.edge_types.clear();
  if (typed)
    g.num_edge_types = *std::max_element(g.edge_types.begin(), g.edge_types.end()) + 1;
  g.directed = false;
  g.edges = symmetric_closure(g.edges);
  if (typed) g.edge_types.assign(g.edges.size(), 0);  // types lost under closure; untyped fallback
  if (fs::exists(dir / "features.csv")) {
    auto rows = read_csv(dir / "features.csv");
    int d = rows.empty() ? 0 : static_cast<int>(rows[0].size());
    g.features = Tensor({static_cast<int>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i)
      for (int k = 0; k < d; ++k)
        g.features.at(static_cast<int>(i), k) = std::stod(rows[i].at(k));
  }
  g.finalize();
  return g;
}

}  // namespace

Graph load_graph(const std::string& path, GraphFormat format) {
  if (format == GraphFormat::edge_csv) return parse_edge_csv(path);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("parse failure in " + path + ": " + e.what());
  }
  return parse_graph_json(j);
}

Graph load_graph_auto(const std::string& path) {
  if (fs::is_directory(path)) return load_graph(path, GraphFormat::edge_csv);
  return load_graph(path, GraphFormat::graph_json);
}

std::string graph_to_json(const Graph& g) {
  json j;
  j["num_nodes"] = g.num_nodes;
  j["directed"] = g.directed;
  j["num_classes"] = g.num_classes;
  j["num_edge_types"] = g.num_edge_types;
  json edges = json::array();
  for (size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edge_types.empty())
      edges.push_back({g.edges[e].first, g.edges[e].second});
    else
      edges.push_back({g.edges[e].first, g.edges[e].second, g.edge_types[e]});
  }
  j["edges"] = edges;
  if (g.features.numel() > 0) {
    json rows = json::array();
    for (int i = 0; i < g.features.rows(); ++i) {
      json row = json::array();
      for (int k = 0; k < g.features.cols(); ++k) row.push_back(g.features.at(i, k));
      rows.push_back(row);
    }
    j["features"] = rows;
  }
  if (!g.labels.empty()) j["labels"] = g.labels;
  return j.dump(2);
}

Graph graph_from_json(const std::string& text) {
  return parse_graph_json(json::parse(text));
}

void save_graph(const Graph& g, const std::string& path) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << graph_to_json(g) << "\n";
  }
  fs::rename(tmp, path);
}

Split make_split(const Graph& g, double train, double val, double test,
                 uint64_t seed) {
  if (train <= 0 || val <= 0 || test <= 0 ||
      std::fabs(train + val + test - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must be positive and sum to 1");
  if (!g.has_labels()) throw std::invalid_argument("make_split: graph has no labels");
  std::vector<int> idx;
  for (int i = 0; i < g.num_nodes; ++i)
    if (g.labels[i] >= 0) idx.push_back(i);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  int n = static_cast<int>(idx.size());
  int n_train = static_cast<int>(std::floor(train * n));
  int n_val = static_cast<int>(std::floor(val * n));
  int n_test = static_cast<int>(std::floor(test * n));
  int rem = n - n_train - n_val - n_test;
  // Remainders go to train first, then val.
  if (rem > 0) { ++n_train; --rem; }
  if (rem > 0) { ++n_val; --rem; }
  if (rem > 0) n_test += rem;
  Split s;
  s.seed = seed;
  s.train_mask.assign(g.num_nodes, false);
  s.val_mask.assign(g.num_nodes, false);
  s.test_mask.assign(g.num_nodes, false);
  int p = 0;
  for (int i = 0; i < n_train; ++i) s.train_mask[idx[p++]] = true;
  for (int i = 0; i < n_val; ++i) s.val_mask[idx[p++]] = true;
  for (int i = 0; i < n_test; ++i) s.test_mask[idx[p++]] = true;
  return s;
}

Graph planted_partition(const SyntheticSpec& spec) {
  if (spec.num_nodes <= 0 || spec.num_classes <= 0)
    throw std::invalid_argument("planted_partition: bad sizes");
  if (spec.p_in < 0 || spec.p_in > 1 || spec.p_out < 0 || spec.p_out > 1)
    throw std::invalid_argument("planted_partition: probabilities must be in [0,1]");
  Graph g;
  g.num_nodes = spec.num_nodes;
  g.num_classes = spec.num_classes;
  g.directed = false;
  g.labels.resize(spec.num_nodes);
  for (int i = 0; i < spec.num_nodes; ++i) g.labels[i] = i % spec.num_classes;
  Rng rng(spec.seed);
  std::vector<std::pair<int, int>> undirected;
  for (int u = 0; u < spec.num_nodes; ++u)
    for (int v = u + 1; v < spec.num_nodes; ++v) {
      double p = g.labels[u] == g.labels[v] ? spec.p_in : spec.p_out;
      if (rng.uniform() < p) undirected.emplace_back(u, v);
    }
  g.edges = symmetric_closure(undirected);
  if (spec.feature_mode == FeatureMode::one_hot_label) {
    g.features = Tensor({spec.num_nodes, spec.num_classes});
    for (int i = 0; i < spec.num_nodes; ++i) g.features.at(i, g.labels[i]) = 1.0;
  } else {
    g.features = Tensor({spec.num_nodes, spec.num_classes});
    for (int i = 0; i < spec.num_nodes; ++i)
      for (int k = 0; k < spec.num_classes; ++k)
        g.features.at(i, k) = (k == g.labels[i] ? 1.0 : 0.0) + spec.sigma * rng.normal();
  }
  g.finalize();
  return g;
}

}  // namespace hetmp

#include "hetmp/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace hetmp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void check_positive(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

MixMpConvSpec atom_conv_spec(const FlowConfig& cfg) {
  MixMpConvSpec s;
  s.in_dim = cfg.num_node_types;
  s.out_dim = cfg.gnn_hidden;
  s.num_edge_types = cfg.num_edge_types;
  s.share_channel_params = cfg.share_channel_params;
  return s;
}

/// GNN coupling function: MixMP conv -> batch norm -> relu -> linear head
/// emitting (log S, T); log S is tanh-capped for stability.
std::pair<Var, Var> gnn_coupling(Tape& tp, FlowModel& m,
                                 const CouplingLayer& layer, Var x2,
                                 const std::vector<Tensor>& adj) {
  const FlowConfig& cfg = m.cfg;
  int na = cfg.num_node_types;
  Var h = mixmp_conv_forward(tp, atom_conv_spec(cfg), layer.prefix + ".conv",
                             m.ps, x2, adj);
  Var gamma = tp.param(layer.prefix + ".bn_g", m.ps[layer.prefix + ".bn_g"]);
  Var beta = tp.param(layer.prefix + ".bn_b", m.ps[layer.prefix + ".bn_b"]);
  h = tp.relu(tp.batch_norm(h, gamma, beta, /*train=*/true));
  Var w = tp.param(layer.prefix + ".w_out", m.ps[layer.prefix + ".w_out"]);
  Var b = tp.param(layer.prefix + ".b_out", m.ps[layer.prefix + ".b_out"]);
  Var out = tp.add_rowvec(tp.matmul(h, w), b);
  Var log_s = tp.scale(tp.tanh_(tp.slice_cols(out, 0, na)), cfg.logs_cap);
  Var t = tp.slice_cols(out, na, 2 * na);
  return {log_s, t};
}

/// CNN coupling function: two 3x3 convolutions over the edge tensor.
std::pair<Var, Var> cnn_coupling(Tape& tp, FlowModel& m,
                                 const CouplingLayer& layer, Var x2) {
  const FlowConfig& cfg = m.cfg;
  int c = cfg.bond_channels();
  Var w1 = tp.param(layer.prefix + ".w1", m.ps[layer.prefix + ".w1"]);
  Var b1 = tp.param(layer.prefix + ".b1", m.ps[layer.prefix + ".b1"]);
  Var w2 = tp.param(layer.prefix + ".w2", m.ps[layer.prefix + ".w2"]);
  Var b2 = tp.param(layer.prefix + ".b2", m.ps[layer.prefix + ".b2"]);
  Var h = tp.relu(tp.conv2d(x2, w1, b1));
  Var out = tp.conv2d(h, w2, b2);
  Var log_s = tp.scale(tp.tanh_(tp.slice_channels(out, 0, c)), cfg.logs_cap);
  Var t = tp.slice_channels(out, c, 2 * c);
  return {log_s, t};
}

std::pair<Var, Var> coupling_fn(Tape& tp, FlowModel& m,
                                const CouplingLayer& layer, Var x2,
                                const std::vector<Tensor>& adj) {
  switch (layer.kind) {
    case CouplingKind::identity: {
      Var z = tp.constant(Tensor::zeros(x2->value.shape));
      return {z, z};
    }
    case CouplingKind::gnn:
      return gnn_coupling(tp, m, layer, x2, adj);
    case CouplingKind::cnn:
      return cnn_coupling(tp, m, layer, x2);
  }
  throw std::logic_error("coupling_fn: bad kind");
}

Tensor complement(const Tensor& mask) {
  Tensor out = mask;
  for (auto& v : out.data) v = 1.0 - v;
  return out;
}

/// Uses the stored mask, rebuilding the stripe pattern when the input has
/// a different node count than the model was configured for.
Tensor effective_mask(const FlowConfig& cfg, const CouplingLayer& layer,
                      const std::vector<int>& shape) {
  if (layer.index < 0 || layer.mask.shape == shape) return layer.mask;
  if (layer.kind == CouplingKind::gnn) return atom_mask(cfg, layer.index, shape[0]);
  if (layer.kind == CouplingKind::cnn) return bond_mask(cfg, layer.index, shape[0]);
  return layer.mask;
}

void check_mask(const Tensor& mask, const std::vector<int>& shape) {
  if (mask.shape != shape)
    throw std::invalid_argument("coupling mask shape mismatch");
  bool all_ones = true;
  for (double v : mask.data) {
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("coupling mask entries must be 0 or 1");
    if (v == 0.0) all_ones = false;
  }
  if (all_ones)
    throw std::invalid_argument(
        "degenerate all-ones coupling mask: the coupling function would "
        "receive no information");
}

/// Latent log-variance as a tape node per the sharing mode; `bond` selects
/// the bond-side parameter in separate mode.
Var latent_log_var(Tape& tp, FlowModel& m, bool bond) {
  switch (m.cfg.sharing_mode) {
    case 0:
      return tp.constant(Tensor::zeros({1}));
    case 1:
      return tp.param("lnmu", m.ps["lnmu"]);
    case 2:
      return tp.param(bond ? "lnmu_b" : "lnmu_a",
                      m.ps[bond ? "lnmu_b" : "lnmu_a"]);
    default:
      throw std::invalid_argument("sharing_mode must be 0, 1, or 2");
  }
}

double latent_variance(const FlowModel& m, bool bond) {
  switch (m.cfg.sharing_mode) {
    case 0:
      return 1.0;
    case 1:
      return std::exp(m.ps.values.at("lnmu").data[0]);
    case 2:
      return std::exp(m.ps.values.at(bond ? "lnmu_b" : "lnmu_a").data[0]);
    default:
      throw std::invalid_argument("sharing_mode must be 0, 1, or 2");
  }
}

/// 0.5 * [ sum h^2 / mu + dim * (ln mu + ln 2 pi) ] with mu = exp(lnmu).
Var gaussian_nll(Tape& tp, Var h, Var lnmu) {
  double dim = static_cast<double>(h->value.numel());
  Var quad = tp.mul(tp.sum_all(tp.mul(h, h)),
                    tp.scale(tp.exp_(tp.scale(lnmu, -1.0)), 0.5));
  Var logdet_term = tp.scale(lnmu, 0.5 * dim);
  Var norm_const = tp.constant(Tensor::full({1}, 0.5 * dim * kLog2Pi));
  return tp.add(tp.add(quad, logdet_term), norm_const);
}

/// Runs one flow end to end on the tape, returning (latent, sum of logdets).
std::pair<Var, Var> flow_forward(Tape& tp, FlowModel& m,
                                 const std::vector<CouplingLayer>& layers,
                                 Var z, const std::vector<Tensor>& adj) {
  Var logdet = tp.constant(Tensor::zeros({1}));
  for (const auto& layer : layers) {
    AclResult r = acl_forward(tp, m, layer, z, adj);
    z = r.y;
    logdet = tp.add(logdet, r.logdet);
  }
  return {z, logdet};
}

Tensor flow_inverse(FlowModel& m, const std::vector<CouplingLayer>& layers,
                    Tensor y, const std::vector<Tensor>& adj) {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    y = acl_inverse(m, *it, y, adj);
  return y;
}

/// Argmax-discretizes continuous flow outputs into a graph. Bond scores
/// are symmetrized over (u,v)/(v,u) before the per-pair argmax; channel 0
/// means no edge. Self loops are never emitted.
Graph discretize(const FlowConfig& cfg, const Tensor& x_cont,
                 const Tensor& e_cont) {
  int n = x_cont.shape[0], na = cfg.num_node_types, c = cfg.bond_channels();
  Graph g;
  g.num_nodes = n;
  g.num_classes = na;
  g.num_edge_types = cfg.num_edge_types;
  g.features = Tensor::zeros({n, na});
  g.labels.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < na; ++k)
      if (x_cont.at(i, k) > x_cont.at(i, best)) best = k;
    g.labels[i] = best;
    g.features.at(i, best) = 1.0;
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      int best = 0;
      double best_score = -1e300;
      for (int k = 0; k < c; ++k) {
        double s = 0.5 * (e_cont.at(u, v, k) + e_cont.at(v, u, k));
        if (s > best_score) {
          best_score = s;
          best = k;
        }
      }
      if (best > 0) {
        g.edges.emplace_back(u, v);
        g.edges.emplace_back(v, u);
        g.edge_types.push_back(best - 1);
        g.edge_types.push_back(best - 1);
      }
    }
  g.finalize();
  return g;
}

std::vector<Tensor> per_type_adjacency(const Graph& g, int num_edge_types) {
  std::vector<Tensor> adj;
  adj.reserve(num_edge_types);
  for (int t = 0; t < num_edge_types; ++t) adj.push_back(g.dense_adjacency(t));
  return adj;
}

void atomic_write(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << text;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace

Tensor atom_mask(const FlowConfig& cfg, int layer, int num_nodes) {
  check_positive(cfg.layers_atom >= 2, "atom flow needs at least 2 layers");
  Tensor m = Tensor::zeros({num_nodes, cfg.num_node_types});
  for (int j = 0; j < num_nodes; ++j)
    if (j % cfg.layers_atom == layer % cfg.layers_atom)
      for (int k = 0; k < cfg.num_node_types; ++k) m.at(j, k) = 1.0;
  return m;
}

Tensor bond_mask(const FlowConfig& cfg, int layer, int num_nodes) {
  check_positive(cfg.layers_bond >= 2, "bond flow needs at least 2 layers");
  int c = cfg.bond_channels();
  Tensor m = Tensor::zeros({num_nodes, num_nodes, c});
  for (int j = 0; j < num_nodes; ++j)
    if (j % cfg.layers_bond == layer % cfg.layers_bond)
      for (int v = 0; v < num_nodes; ++v)
        for (int k = 0; k < c; ++k) m.at(j, v, k) = 1.0;
  return m;
}

FlowModel make_flow_model(const FlowConfig& cfg, Rng& rng) {
  check_positive(cfg.num_nodes >= 2, "num_nodes must be at least 2");
  check_positive(cfg.num_node_types >= 1, "num_node_types must be positive");
  check_positive(cfg.num_edge_types >= 1, "num_edge_types must be positive");
  FlowModel m;
  m.cfg = cfg;
  int na = cfg.num_node_types, c = cfg.bond_channels();
  for (int i = 0; i < cfg.layers_atom; ++i) {
    CouplingLayer layer;
    layer.kind = CouplingKind::gnn;
    layer.index = i;
    layer.mask = atom_mask(cfg, i, cfg.num_nodes);
    layer.prefix = "atom" + std::to_string(i);
    init_mixmp_conv_params(atom_conv_spec(cfg), layer.prefix + ".conv", m.ps,
                           rng);
    m.ps[layer.prefix + ".bn_g"] = Tensor::full({1, cfg.gnn_hidden}, 1.0);
    m.ps[layer.prefix + ".bn_b"] = Tensor::zeros({1, cfg.gnn_hidden});
    // Zero head: the fresh flow is the identity map, a standard stable init.
    m.ps[layer.prefix + ".w_out"] = Tensor::zeros({cfg.gnn_hidden, 2 * na});
    m.ps[layer.prefix + ".b_out"] = Tensor::zeros({1, 2 * na});
    m.atom_flow.push_back(std::move(layer));
  }
  double fan1 = 9.0 * c + 9.0 * cfg.cnn_hidden;
  for (int i = 0; i < cfg.layers_bond; ++i) {
    CouplingLayer layer;
    layer.kind = CouplingKind::cnn;
    layer.index = i;
    layer.mask = bond_mask(cfg, i, cfg.num_nodes);
    layer.prefix = "bond" + std::to_string(i);
    double b1 = std::sqrt(6.0 / fan1);
    m.ps[layer.prefix + ".w1"] =
        rng.uniform_tensor({3, 3, c, cfg.cnn_hidden}, -b1, b1);
    m.ps[layer.prefix + ".b1"] = Tensor::zeros({1, cfg.cnn_hidden});
    m.ps[layer.prefix + ".w2"] = Tensor::zeros({3, 3, cfg.cnn_hidden, 2 * c});
    m.ps[layer.prefix + ".b2"] = Tensor::zeros({1, 2 * c});
    m.bond_flow.push_back(std::move(layer));
  }
  if (cfg.sharing_mode == 1) {
    m.ps["lnmu"] = Tensor::zeros({1});
  } else if (cfg.sharing_mode == 2) {
    m.ps["lnmu_a"] = Tensor::zeros({1});
    m.ps["lnmu_b"] = Tensor::zeros({1});
  } else if (cfg.sharing_mode != 0) {
    throw std::invalid_argument("sharing_mode must be 0, 1, or 2");
  }
  return m;
}

Tensor edge_tensor(const FlowConfig& cfg, const Graph& g) {
  int n = g.num_nodes, c = cfg.bond_channels();
  if (g.num_edge_types > cfg.num_edge_types)
    throw std::invalid_argument("graph has more edge types than the flow");
  Tensor e = Tensor::zeros({n, n, c});
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) e.at(u, v, 0) = 1.0;
  for (size_t i = 0; i < g.edges.size(); ++i) {
    auto [u, v] = g.edges[i];
    int t = g.edge_types.empty() ? 0 : g.edge_types[i];
    e.at(u, v, 0) = 0.0;
    e.at(u, v, t + 1) = 1.0;
  }
  return e;
}

FlowSample make_sample(const FlowConfig& cfg, const Graph& g, Rng& rng) {
  if (g.features.ndim() != 2 || g.features.shape[1] != cfg.num_node_types)
    throw std::invalid_argument("graph feature width must match num_node_types");
  FlowSample s;
  s.x = g.features;
  for (auto& v : s.x.data) v += rng.uniform(0.0, cfg.dequant_scale);
  s.e = edge_tensor(cfg, g);
  for (auto& v : s.e.data) v += rng.uniform(0.0, cfg.dequant_scale);
  s.adj = per_type_adjacency(g, cfg.num_edge_types);
  return s;
}

AclResult acl_forward(Tape& tp, FlowModel& m, const CouplingLayer& layer,
                      Var x, const std::vector<Tensor>& adj) {
  Tensor mask = effective_mask(m.cfg, layer, x->value.shape);
  check_mask(mask, x->value.shape);
  Tensor inv_mask = complement(mask);
  Var x1 = tp.hadamard_mask(x, mask);
  Var x2 = tp.hadamard_mask(x, inv_mask);
  auto [log_s, t] = coupling_fn(tp, m, layer, x2, adj);
  if (!log_s->value.all_finite() || !t->value.all_finite())
    throw std::runtime_error("nonfinite coupling output");
  Var scaled = tp.add(tp.mul(tp.exp_(log_s), x1), t);
  AclResult r;
  r.y = tp.add(tp.hadamard_mask(scaled, mask), x2);
  r.logdet = tp.sum_all(tp.hadamard_mask(log_s, mask));
  return r;
}

Tensor acl_inverse(FlowModel& m, const CouplingLayer& layer, const Tensor& y,
                   const std::vector<Tensor>& adj) {
  Tensor mask = effective_mask(m.cfg, layer, y.shape);
  check_mask(mask, y.shape);
  Tensor inv_mask = complement(mask);
  Tape tp;
  Var yv = tp.constant(y);
  Var y2 = tp.hadamard_mask(yv, inv_mask);
  auto [log_s, t] = coupling_fn(tp, m, layer, y2, adj);
  Var x1 = tp.mul(tp.sub(tp.hadamard_mask(yv, mask), t),
                  tp.exp_(tp.scale(log_s, -1.0)));
  Var x = tp.add(tp.hadamard_mask(x1, mask), y2);
  if (!x->value.all_finite())
    throw std::runtime_error("nonfinite coupling inverse (S underflow)");
  return x->value;
}

FlowNll flow_nll(Tape& tp, FlowModel& m, const FlowSample& s) {
  auto [h_b, logdet_b] =
      flow_forward(tp, m, m.bond_flow, tp.constant(s.e), {});
  auto [h_a, logdet_a] =
      flow_forward(tp, m, m.atom_flow, tp.constant(s.x), s.adj);
  FlowNll out;
  out.bond =
      tp.sub(gaussian_nll(tp, h_b, latent_log_var(tp, m, true)), logdet_b);
  out.atom =
      tp.sub(gaussian_nll(tp, h_a, latent_log_var(tp, m, false)), logdet_a);
  out.total = tp.add(out.atom, out.bond);
  if (!out.total->value.all_finite())
    throw std::runtime_error("nonfinite flow NLL");
  return out;
}

std::pair<Tensor, Tensor> flow_encode(FlowModel& m, const FlowSample& s) {
  Tape tp;
  auto [h_a, da] = flow_forward(tp, m, m.atom_flow, tp.constant(s.x), s.adj);
  auto [h_b, db] = flow_forward(tp, m, m.bond_flow, tp.constant(s.e), {});
  (void)da;
  (void)db;
  return {h_a->value, h_b->value};
}

Graph decode(FlowModel& m, const Tensor& h_a, const Tensor& h_b) {
  Tensor e_cont = flow_inverse(m, m.bond_flow, h_b, {});
  Graph topo = discretize(
      m.cfg, Tensor::zeros({h_a.shape[0], m.cfg.num_node_types}), e_cont);
  std::vector<Tensor> adj = per_type_adjacency(topo, m.cfg.num_edge_types);
  Tensor x_cont = flow_inverse(m, m.atom_flow, h_a, adj);
  Graph g = discretize(m.cfg, x_cont, e_cont);
  return g;
}

Graph decode_with_topology(FlowModel& m, const Tensor& h_a,
                           const Graph& topology) {
  std::vector<Tensor> adj = per_type_adjacency(topology, m.cfg.num_edge_types);
  Tensor x_cont = flow_inverse(m, m.atom_flow, h_a, adj);
  int n = x_cont.shape[0], na = m.cfg.num_node_types;
  Graph g;
  g.num_nodes = n;
  g.num_classes = na;
  g.num_edge_types = topology.num_edge_types;
  g.edges = topology.edges;
  g.edge_types = topology.edge_types;
  g.features = Tensor::zeros({n, na});
  g.labels.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < na; ++k)
      if (x_cont.at(i, k) > x_cont.at(i, best)) best = k;
    g.labels[i] = best;
    g.features.at(i, best) = 1.0;
  }
  g.finalize();
  return g;
}

FlowTrainResult flow_train(FlowModel& m, const std::vector<Graph>& pool,
                           const FlowTrainConfig& cfg) {
  if (pool.empty()) throw std::invalid_argument("empty training pool");
  Rng rng(cfg.seed);
  AdamWState state;
  AdamWConfig opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  FlowTrainResult result;
  int batch = std::min<int>(cfg.batch_size, static_cast<int>(pool.size()));
  for (int step = 0; step < cfg.steps; ++step) {
    Tape tp;
    std::vector<Var> losses;
    for (int b = 0; b < batch; ++b) {
      const Graph& g = pool[rng.randint(static_cast<int>(pool.size()))];
      FlowSample s = make_sample(m.cfg, g, rng);
      losses.push_back(flow_nll(tp, m, s).total);
    }
    Var loss = tp.scale(tp.add_n(losses), 1.0 / batch);
    result.nll_history.push_back(loss->value.data[0]);
    adamw_step(m.ps, tp.grad(loss), state, opt);
  }
  m.trained = true;
  return result;
}

GenMode gen_mode_from_string(const std::string& s) {
  if (s == "full") return GenMode::full;
  if (s == "true_adj") return GenMode::true_adj;
  throw std::invalid_argument("unknown generation mode: " + s);
}

std::string to_string(GenMode m) {
  return m == GenMode::full ? "full" : "true_adj";
}

std::vector<Graph> generate(FlowModel& m, int n, GenMode mode,
                            const std::vector<Graph>& pool, Rng& rng) {
  if (!m.trained) throw std::runtime_error("generate: untrained model");
  if (mode == GenMode::true_adj && pool.empty())
    throw std::invalid_argument("true_adj generation needs a data pool");
  double sd_a = std::sqrt(latent_variance(m, false));
  double sd_b = std::sqrt(latent_variance(m, true));
  int nn = m.cfg.num_nodes, na = m.cfg.num_node_types;
  int c = m.cfg.bond_channels();
  std::vector<Graph> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (mode == GenMode::full) {
      Tensor h_b = rng.normal_tensor({nn, nn, c}, sd_b);
      Tensor h_a = rng.normal_tensor({nn, na}, sd_a);
      out.push_back(decode(m, h_a, h_b));
    } else {
      const Graph& topo = pool[rng.randint(static_cast<int>(pool.size()))];
      Tensor h_a = rng.normal_tensor({topo.num_nodes, na}, sd_a);
      out.push_back(decode_with_topology(m, h_a, topo));
    }
  }
  return out;
}

std::vector<double> homophily_histogram(const std::vector<Graph>& graphs) {
  std::vector<double> hist(10, 0.0);
  for (const auto& g : graphs) {
    double h = node_homophily(g);
    int bin = std::min(9, static_cast<int>(std::floor(h * 10.0)));
    bin = std::max(0, bin);
    hist[bin] += 1.0;
  }
  return hist;
}

std::string histogram_csv(const std::vector<double>& hist) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (int i = 0; i < 10; ++i) {
    os << (i / 10.0) << "," << ((i + 1) / 10.0) << "," << hist[i] << "\n";
  }
  return os.str();
}

void save_flow_model(const FlowModel& m, const std::string& path) {
  nlohmann::json j;
  j["format"] = "hetmp-flow";
  j["version"] = 1;
  j["trained"] = m.trained;
  const FlowConfig& c = m.cfg;
  j["config"] = {{"num_nodes", c.num_nodes},
                 {"num_node_types", c.num_node_types},
                 {"num_edge_types", c.num_edge_types},
                 {"layers_atom", c.layers_atom},
                 {"layers_bond", c.layers_bond},
                 {"gnn_hidden", c.gnn_hidden},
                 {"cnn_hidden", c.cnn_hidden},
                 {"sharing_mode", c.sharing_mode},
                 {"share_channel_params", c.share_channel_params},
                 {"dequant_scale", c.dequant_scale},
                 {"logs_cap", c.logs_cap}};
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : m.ps.values)
    params[name] = {{"shape", t.shape}, {"data", t.data}};
  j["params"] = std::move(params);
  atomic_write(path, j.dump(2) + "\n");
}

FlowModel load_flow_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "hetmp-flow" || j.value("version", 0) != 1)
    throw std::runtime_error("unrecognized model file format");
  const auto& c = j.at("config");
  FlowConfig cfg;
  cfg.num_nodes = c.at("num_nodes").get<int>();
  cfg.num_node_types = c.at("num_node_types").get<int>();
  cfg.num_edge_types = c.at("num_edge_types").get<int>();
  cfg.layers_atom = c.at("layers_atom").get<int>();
  cfg.layers_bond = c.at("layers_bond").get<int>();
  cfg.gnn_hidden = c.at("gnn_hidden").get<int>();
  cfg.cnn_hidden = c.at("cnn_hidden").get<int>();
  cfg.sharing_mode = c.at("sharing_mode").get<int>();
  cfg.share_channel_params = c.at("share_channel_params").get<bool>();
  cfg.dequant_scale = c.at("dequant_scale").get<double>();
  cfg.logs_cap = c.at("logs_cap").get<double>();
  Rng rng(0);
  FlowModel m = make_flow_model(cfg, rng);
  m.trained = j.value("trained", false);
  for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) {
    Tensor t(it.value().at("shape").get<std::vector<int>>());
    t.data = it.value().at("data").get<std::vector<double>>();
    if (static_cast<int64_t>(t.data.size()) != t.numel())
      throw std::runtime_error("model file: tensor size mismatch");
    m.ps[it.key()] = std::move(t);
  }
  return m;
}

}  // namespace hetmp

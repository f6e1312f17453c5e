#include "hetmp/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace hetmp {

Family family_from_string(const std::string& s) {
  if (s == "gcn") return Family::gcn;
  if (s == "gat") return Family::gat;
  if (s == "gin") return Family::gin;
  if (s == "sage") return Family::sage;
  throw std::invalid_argument("unknown family: " + s);
}

std::string to_string(Family f) {
  switch (f) {
    case Family::gcn: return "gcn";
    case Family::gat: return "gat";
    case Family::gin: return "gin";
    case Family::sage: return "sage";
  }
  return "?";
}

GammaMode gamma_from_string(const std::string& s) {
  if (s == "orig") return GammaMode::orig;
  if (s == "hom") return GammaMode::hom;
  if (s == "het") return GammaMode::het;
  if (s == "mix") return GammaMode::mix;
  throw std::invalid_argument("unknown gamma mode: " + s);
}

std::string to_string(GammaMode g) {
  switch (g) {
    case GammaMode::orig: return "orig";
    case GammaMode::hom: return "hom";
    case GammaMode::het: return "het";
    case GammaMode::mix: return "mix";
  }
  return "?";
}

namespace {

Channel to_channel(GammaMode g) {
  switch (g) {
    case GammaMode::orig: return Channel::orig;
    case GammaMode::hom: return Channel::hom;
    case GammaMode::het: return Channel::het;
    default: throw std::invalid_argument("mix is not a single channel");
  }
}

struct EdgeLists {
  std::vector<int> src, dst;
};

EdgeLists edge_lists(const Graph& g) {
  EdgeLists e;
  e.src.reserve(g.edges.size());
  e.dst.reserve(g.edges.size());
  for (auto [u, v] : g.edges) {
    e.src.push_back(u);
    e.dst.push_back(v);
  }
  return e;
}

// Self-loop-augmented degrees (unit edge weights).
std::vector<double> gcn_hat_degrees(const Graph& g) {
  std::vector<double> d(g.num_nodes, 1.0);
  for (auto [u, v] : g.edges) d[v] += 1.0;
  return d;
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = a.at(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at(i, j) += av * b.at(p, j);
    }
  return out;
}

std::vector<double> row_of(const Tensor& h, int i) {
  std::vector<double> r(h.cols());
  for (int j = 0; j < h.cols(); ++j) r[j] = h.at(i, j);
  return r;
}

}  // namespace

MessageSet compute_messages(const LayerSpec& spec, const ParamStore& ps,
                            const std::string& prefix, const Tensor& h,
                            const Graph& g) {
  if (h.rows() != g.num_nodes)
    throw std::invalid_argument("compute_messages: embedding row count mismatch");
  if (h.cols() != spec.in_dim)
    throw std::invalid_argument("compute_messages: embedding width mismatch");
  int e_count = static_cast<int>(g.edges.size());
  MessageSet ms;
  ms.alpha = Tensor::full({e_count}, 1.0);
  switch (spec.family) {
    case Family::gcn: {
      auto dhat = gcn_hat_degrees(g);
      ms.neighbor = Tensor({e_count, spec.in_dim});
      for (int e = 0; e < e_count; ++e) {
        auto [u, v] = g.edges[e];
        double c = 1.0 / std::sqrt(dhat[u] * dhat[v]);
        for (int j = 0; j < spec.in_dim; ++j) ms.neighbor.at(e, j) = c * h.at(u, j);
      }
      ms.self = Tensor({g.num_nodes, spec.in_dim});
      for (int v = 0; v < g.num_nodes; ++v)
        for (int j = 0; j < spec.in_dim; ++j) ms.self.at(v, j) = h.at(v, j) / dhat[v];
      break;
    }
    case Family::gat: {
      const Tensor& ws = ps.values.at(prefix + ".w_src");
      const Tensor& wt = ps.values.at(prefix + ".w_trg");
      const Tensor& as = ps.values.at(prefix + ".a_src");
      const Tensor& at = ps.values.at(prefix + ".a_trg");
      Tensor hs = matmul_plain(h, ws), ht = matmul_plain(h, wt);
      Tensor sv = matmul_plain(hs, as), tv = matmul_plain(ht, at);  // [n,1]
      auto lr = [&](double x) { return x > 0 ? x : spec.leaky_slope * x; };
      // Softmax over N(v) u {v} per target v, self logit uses t_v.
      std::vector<double> z(g.num_nodes, 0.0), mx(g.num_nodes, -1e300);
      std::vector<double> elog(e_count), slog(g.num_nodes);
      for (int e = 0; e < e_count; ++e) {
        auto [u, v] = g.edges[e];
        elog[e] = lr(sv.data[v] + tv.data[u]);
        mx[v] = std::max(mx[v], elog[e]);
      }
      for (int v = 0; v < g.num_nodes; ++v) {
        slog[v] = lr(sv.data[v] + tv.data[v]);
        mx[v] = std::max(mx[v], slog[v]);
      }
      std::vector<double> att(e_count), att_self(g.num_nodes);
      for (int e = 0; e < e_count; ++e) {
        att[e] = std::exp(elog[e] - mx[g.edges[e].second]);
        z[g.edges[e].second] += att[e];
      }
      for (int v = 0; v < g.num_nodes; ++v) {
        att_self[v] = std::exp(slog[v] - mx[v]);
        z[v] += att_self[v];
      }
      ms.neighbor = Tensor({e_count, spec.out_dim});
      for (int e = 0; e < e_count; ++e) {
        auto [u, v] = g.edges[e];
        double a = att[e] / z[v];
        for (int j = 0; j < spec.out_dim; ++j) ms.neighbor.at(e, j) = a * ht.at(u, j);
      }
      ms.self = Tensor({g.num_nodes, spec.out_dim});
      for (int v = 0; v < g.num_nodes; ++v) {
        double a = att_self[v] / z[v];
        for (int j = 0; j < spec.out_dim; ++j) ms.self.at(v, j) = a * hs.at(v, j);
      }
      break;
    }
    case Family::gin: {
      ms.neighbor = Tensor({e_count, spec.in_dim});
      for (int e = 0; e < e_count; ++e)
        for (int j = 0; j < spec.in_dim; ++j)
          ms.neighbor.at(e, j) = h.at(g.edges[e].first, j);
      ms.self = Tensor({g.num_nodes, spec.in_dim});
      for (int v = 0; v < g.num_nodes; ++v)
        for (int j = 0; j < spec.in_dim; ++j)
          ms.self.at(v, j) = (1.0 + spec.gin_eps) * h.at(v, j);
      break;
    }
    case Family::sage: {
      ms.neighbor = Tensor({e_count, spec.in_dim});
      for (int e = 0; e < e_count; ++e)
        for (int j = 0; j < spec.in_dim; ++j)
          ms.neighbor.at(e, j) = h.at(g.edges[e].first, j);
      ms.self = h;  // root term
      break;
    }
  }
  return ms;
}

MessageSet scale_messages(const MessageSet& ms, const Tensor& h,
                          const Graph& g, Channel gamma) {
  MessageSet out = ms;
  int e_count = ms.neighbor.rows();
  for (int e = 0; e < e_count; ++e) {
    auto [u, v] = g.edges[e];
    double a = scaling_factor(row_of(h, u), row_of(h, v), gamma);
    out.alpha.data[e] = ms.alpha.data[e] * a;
    for (int j = 0; j < ms.neighbor.cols(); ++j) out.neighbor.at(e, j) = ms.neighbor.at(e, j) * a;
  }
  return out;
}

void init_layer_params(const LayerSpec& spec, const std::string& prefix,
                       ParamStore& ps, Rng& rng) {
  if (spec.in_dim <= 0 || spec.out_dim <= 0)
    throw std::invalid_argument("layer dims must be positive");
  auto init_family = [&](const std::string& p) {
    switch (spec.family) {
      case Family::gcn:
        ps[p + ".w"] = rng.glorot(spec.in_dim, spec.out_dim);
        break;
      case Family::gat:
        ps[p + ".w_src"] = rng.glorot(spec.in_dim, spec.out_dim);
        ps[p + ".w_trg"] = rng.glorot(spec.in_dim, spec.out_dim);
        ps[p + ".a_src"] = rng.glorot(spec.out_dim, 1);
        ps[p + ".a_trg"] = rng.glorot(spec.out_dim, 1);
        break;
      case Family::gin:
        ps[p + ".w1"] = rng.glorot(spec.in_dim, spec.out_dim);
        ps[p + ".b1"] = Tensor({spec.out_dim});
        ps[p + ".w2"] = rng.glorot(spec.out_dim, spec.out_dim);
        ps[p + ".b2"] = Tensor({spec.out_dim});
        break;
      case Family::sage:
        ps[p + ".w_self"] = rng.glorot(spec.in_dim, spec.out_dim);
        ps[p + ".w_nbr"] = rng.glorot(spec.in_dim, spec.out_dim);
        break;
    }
  };
  if (spec.gamma != GammaMode::mix) {
    init_family(prefix);
    return;
  }
  if (spec.share_channel_params) {
    init_family(prefix + ".shared");
  } else {
    init_family(prefix + ".orig");
    init_family(prefix + ".hom");
    init_family(prefix + ".het");
  }
  ps[prefix + ".mix_w"] = rng.glorot(3 * spec.out_dim, spec.out_dim);
}

namespace {

Var tape_param(Tape& tp, ParamStore& ps, const std::string& name) {
  return tp.param(name, ps.values.at(name));
}

// Per-edge channel scaling factors as a tape Var [E,1].
Var channel_alpha(Tape& tp, Var h, const EdgeLists& el, Channel ch, bool detach) {
  int e_count = static_cast<int>(el.src.size());
  if (ch == Channel::orig) return tp.constant(Tensor::full({e_count, 1}, 1.0));
  Var cos = tp.edge_cosine(h, el.src, el.dst, detach);
  if (ch == Channel::hom) return cos;
  return tp.sub(tp.constant(Tensor::full({e_count, 1}, 1.0)), cos);  // het
}

Var family_channel_forward(Tape& tp, const LayerSpec& spec,
                           const std::string& prefix, ParamStore& ps, Var h,
                           const Graph& g, Channel ch) {
  const EdgeLists el = edge_lists(g);
  const int n = g.num_nodes;
  const int e_count = static_cast<int>(el.src.size());
  Var alpha = channel_alpha(tp, h, el, ch, spec.detach_scaling);
  switch (spec.family) {
    case Family::gcn: {
      Var w = tape_param(tp, ps, prefix + ".w");
      Var hw = tp.matmul(h, w);
      auto dhat = gcn_hat_degrees(g);
      Tensor coef({e_count, 1});
      for (int e = 0; e < e_count; ++e)
        coef.data[e] = 1.0 / std::sqrt(dhat[el.src[e]] * dhat[el.dst[e]]);
      Var msg = tp.mul_col(tp.mul_col(tp.gather_rows(hw, el.src), alpha),
                           tp.constant(coef));
      Var agg = tp.scatter_add_rows(msg, el.dst, n);
      Tensor self_coef({n, 1});
      for (int v = 0; v < n; ++v) self_coef.data[v] = 1.0 / dhat[v];
      return tp.add(agg, tp.mul_col(hw, tp.constant(self_coef)));
    }
    case Family::gat: {
      Var ws = tape_param(tp, ps, prefix + ".w_src");
      Var wt = tape_param(tp, ps, prefix + ".w_trg");
      Var as = tape_param(tp, ps, prefix + ".a_src");
      Var at = tape_param(tp, ps, prefix + ".a_trg");
      Var hs = tp.matmul(h, ws), ht = tp.matmul(h, wt);
      Var sv = tp.matmul(hs, as), tv = tp.matmul(ht, at);  // [n,1]
      // Augmented edge list: E neighbour entries then n self entries; one
      // softmax over N(v) u {v} per target node.
      std::vector<int> aug_src = el.src, aug_dst = el.dst;
      for (int v = 0; v < n; ++v) {
        aug_src.push_back(v);
        aug_dst.push_back(v);
      }
      Var logits = tp.leaky_relu(
          tp.add(tp.gather_rows(sv, aug_dst), tp.gather_rows(tv, aug_src)),
          spec.leaky_slope);
      Var att = tp.segment_softmax(logits, aug_dst, n);
      Var att_nbr = tp.slice_rows(att, 0, e_count);
      Var att_self = tp.slice_rows(att, e_count, e_count + n);
      Var msg = tp.mul_col(tp.mul_col(tp.gather_rows(ht, el.src), att_nbr), alpha);
      Var agg = tp.scatter_add_rows(msg, el.dst, n);
      return tp.add(agg, tp.mul_col(hs, att_self));
    }
    case Family::gin: {
      Var msg = tp.mul_col(tp.gather_rows(h, el.src), alpha);
      Var agg = tp.scatter_add_rows(msg, el.dst, n);
      Var tot = tp.add(tp.scale(h, 1.0 + spec.gin_eps), agg);
      Var w1 = tape_param(tp, ps, prefix + ".w1");
      Var b1 = tape_param(tp, ps, prefix + ".b1");
      Var w2 = tape_param(tp, ps, prefix + ".w2");
      Var b2 = tape_param(tp, ps, prefix + ".b2");
      Var hmid = tp.relu(tp.add_rowvec(tp.matmul(tot, w1), b1));
      return tp.add_rowvec(tp.matmul(hmid, w2), b2);
    }
    case Family::sage: {
      Var msg = tp.mul_col(tp.gather_rows(h, el.src), alpha);
      Var agg = tp.scatter_add_rows(msg, el.dst, n);
      Tensor inv_deg({n, 1});
      for (int v = 0; v < n; ++v) {
        int d = g.degree(v);
        inv_deg.data[v] = d > 0 ? 1.0 / d : 0.0;
      }
      Var mean_nbr = tp.mul_col(agg, tp.constant(inv_deg));
      Var w_self = tape_param(tp, ps, prefix + ".w_self");
      Var w_nbr = tape_param(tp, ps, prefix + ".w_nbr");
      return tp.add(tp.matmul(h, w_self), tp.matmul(mean_nbr, w_nbr));
    }
  }
  throw std::logic_error("unreachable family");
}

}  // namespace

Var layer_forward(Tape& tp, const LayerSpec& spec, const std::string& prefix,
                  ParamStore& ps, Var h, const Graph& g) {
  if (h->value.cols() != spec.in_dim)
    throw std::invalid_argument("layer_forward: input width mismatch");
  if (spec.gamma != GammaMode::mix)
    return family_channel_forward(tp, spec, prefix, ps, h, g, to_channel(spec.gamma));
  auto channel_prefix = [&](const char* tag) {
    return spec.share_channel_params ? prefix + ".shared" : prefix + "." + tag;
  };
  // Parameters shared across channels are registered once; build each
  // channel on a per-channel spec whose gamma is the single channel.
  std::vector<Var> outs;
  const Channel chans[3] = {Channel::orig, Channel::hom, Channel::het};
  const char* tags[3] = {"orig", "hom", "het"};
  for (int i = 0; i < 3; ++i) {
    outs.push_back(
        family_channel_forward(tp, spec, channel_prefix(tags[i]), ps, h, g, chans[i]));
  }
  Var cat = tp.concat_cols(outs);
  Var mw = tape_param(tp, ps, prefix + ".mix_w");
  return tp.matmul(cat, mw);
}

void init_mixmp_conv_params(const MixMpConvSpec& spec, const std::string& prefix,
                            ParamStore& ps, Rng& rng) {
  for (int i = 0; i < spec.num_edge_types; ++i) {
    std::string p = prefix + ".w" + std::to_string(i);
    if (spec.share_channel_params)
      ps[p] = rng.glorot(spec.in_dim, spec.out_dim);
    else
      ps[p] = rng.glorot(3 * spec.in_dim, spec.out_dim);
  }
}

Var mixmp_conv_forward(Tape& tp, const MixMpConvSpec& spec,
                       const std::string& prefix, ParamStore& ps, Var h,
                       const std::vector<Tensor>& adjacency) {
  if (adjacency.empty())
    throw std::invalid_argument("mixmp_conv_forward: missing edge tensor");
  if (static_cast<int>(adjacency.size()) != spec.num_edge_types)
    throw std::invalid_argument("mixmp_conv_forward: edge type count mismatch");
  if (h->value.cols() != spec.in_dim)
    throw std::invalid_argument("mixmp_conv_forward: input width mismatch");
  int n = h->value.rows();
  Var cosm = tp.cosine_matrix(h, spec.detach_scaling);
  Var ones = tp.constant(Tensor::full({n, n}, 1.0));
  Var het = tp.sub(ones, cosm);
  std::vector<Var> per_type;
  for (int i = 0; i < spec.num_edge_types; ++i) {
    if (adjacency[i].rows() != n || adjacency[i].cols() != n)
      throw std::invalid_argument("mixmp_conv_forward: adjacency shape mismatch");
    Var w = tape_param(tp, ps, prefix + ".w" + std::to_string(i));
    // (H_gamma ⊙ A_i) h scales each edge's contribution before aggregation.
    Var a_orig = tp.matmul(tp.hadamard_mask(ones, adjacency[i]), h);
    Var a_hom = tp.matmul(tp.hadamard_mask(cosm, adjacency[i]), h);
    Var a_het = tp.matmul(tp.hadamard_mask(het, adjacency[i]), h);
    if (spec.share_channel_params) {
      // Equal channel blocks collapse to projecting the channel sum.
      per_type.push_back(tp.matmul(tp.add(a_orig, tp.add(a_hom, a_het)), w));
    } else {
      per_type.push_back(tp.matmul(tp.concat_cols({a_orig, a_hom, a_het}), w));
    }
  }
  return tp.add_n(per_type);
}

}  // namespace hetmp

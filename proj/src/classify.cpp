#include "hetmp/classify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hetmp {

EvalMetric metric_from_string(const std::string& s) {
  if (s == "acc" || s == "accuracy") return EvalMetric::accuracy;
  if (s == "auc" || s == "roc_auc") return EvalMetric::roc_auc;
  throw std::invalid_argument("unknown metric: " + s);
}

std::string to_string(EvalMetric m) {
  return m == EvalMetric::accuracy ? "acc" : "auc";
}

std::vector<LayerSpec> ModelSpec::layer_specs() const {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  std::vector<LayerSpec> layers;
  for (int k = 0; k < depth; ++k) {
    LayerSpec ls;
    ls.family = family;
    ls.gamma = gamma;
    ls.share_channel_params = share_channel_params;
    ls.detach_scaling = detach_scaling;
    ls.in_dim = k == 0 ? in_dim : hidden_dim;
    ls.out_dim = k == depth - 1 ? num_classes : hidden_dim;
    layers.push_back(ls);
  }
  return layers;
}

void init_model_params(const ModelSpec& spec, ParamStore& ps, Rng& rng) {
  auto layers = spec.layer_specs();
  for (size_t k = 0; k < layers.size(); ++k)
    init_layer_params(layers[k], "layer" + std::to_string(k), ps, rng);
}

Var model_forward(Tape& tp, const ModelSpec& spec, ParamStore& ps,
                  const Graph& g, bool train, Rng* dropout_rng) {
  auto layers = spec.layer_specs();
  if (spec.in_dim != g.features.cols())
    throw std::invalid_argument("feature width mismatch");
  Var h = tp.constant(g.features);
  for (size_t k = 0; k < layers.size(); ++k) {
    h = layer_forward(tp, layers[k], "layer" + std::to_string(k), ps, h, g);
    if (k + 1 < layers.size()) {
      h = tp.relu(h);
      if (train && spec.dropout > 0.0)
        h = tp.dropout(h, spec.dropout, *dropout_rng, true);
    }
  }
  if (!h->value.all_finite())
    throw std::runtime_error("model_forward: nonfinite output");
  return h;
}

Tensor predict_logits(const ModelSpec& spec, ParamStore& ps, const Graph& g) {
  Tape tp;
  return model_forward(tp, spec, ps, g, false, nullptr)->value;
}

double evaluate(const Tensor& logits, const Graph& g,
                const std::vector<bool>& mask, EvalMetric metric) {
  int n = logits.rows(), c = logits.cols();
  bool any = false;
  for (bool b : mask) any = any || b;
  if (!any) throw std::invalid_argument("evaluate: empty mask");
  if (metric == EvalMetric::accuracy) {
    int correct = 0, count = 0;
    for (int i = 0; i < n; ++i) {
      if (!mask[i] || g.labels[i] < 0) continue;
      int arg = 0;
      for (int j = 1; j < c; ++j)
        if (logits.at(i, j) > logits.at(i, arg)) arg = j;
      correct += arg == g.labels[i];
      ++count;
    }
    return static_cast<double>(correct) / count;
  }
  if (c != 2) throw std::invalid_argument("roc_auc requires binary labels");
  // Rank statistic (Mann-Whitney), ties averaged. Score for class 1 is
  // the logit margin; any strictly monotone transform gives the same AUC.
  std::vector<std::pair<double, int>> scored;
  for (int i = 0; i < n; ++i) {
    if (!mask[i] || g.labels[i] < 0) continue;
    scored.push_back({logits.at(i, 1) - logits.at(i, 0), g.labels[i]});
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  size_t m = scored.size();
  std::vector<double> rank(m);
  for (size_t i = 0; i < m;) {
    size_t j = i;
    while (j < m && scored[j].first == scored[i].first) ++j;
    double r = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (size_t k = i; k < j; ++k) rank[k] = r;
    i = j;
  }
  int64_t n_pos = 0, n_neg = 0;
  double rank_sum = 0.0;
  for (size_t i = 0; i < m; ++i) {
    if (scored[i].second == 1) {
      ++n_pos;
      rank_sum += rank[i];
    } else {
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc_auc: mask holds a single class");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (static_cast<double>(n_pos) * n_neg);
}

TrainResult train(const ModelSpec& spec, const Graph& g, const Split& split,
                  const TrainConfig& cfg) {
  if (!g.has_labels()) throw std::invalid_argument("train: graph has no labels");
  if (cfg.max_epochs <= 0 || cfg.patience > cfg.max_epochs)
    throw std::invalid_argument("train: bad epoch/patience configuration");
  ParamStore ps;
  Rng init_rng(cfg.seed);
  init_model_params(spec, ps, init_rng);
  Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamWState opt;
  AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;

  TrainResult best;
  best.best_val_metric = -1.0;
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    {
      Tape tp;
      Var logits = model_forward(tp, spec, ps, g, true, &dropout_rng);
      Var loss = tp.masked_cross_entropy(logits, g.labels, split.train_mask);
      if (!std::isfinite(loss->value.data[0]))
        throw std::runtime_error("train: nonfinite loss at epoch " + std::to_string(epoch));
      auto grads = tp.grad(loss);
      adamw_step(ps, grads, opt, opt_cfg);
    }
    Tensor logits = predict_logits(spec, ps, g);
    double val = evaluate(logits, g, split.val_mask, cfg.eval_metric);
    best.epochs_run = epoch + 1;
    if (val > best.best_val_metric) {
      best.best_val_metric = val;
      best.best_epoch = epoch;
      best.params = ps;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  Tensor logits = predict_logits(spec, best.params, g);
  best.test_metric = evaluate(logits, g, split.test_mask, cfg.eval_metric);
  return best;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / xs.size();
}

double stddev_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mu = mean_of(xs), s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / (xs.size() - 1));
}

BenchmarkResult benchmark(const Graph& g, const ModelSpec& base_spec,
                          const std::vector<GammaMode>& modes,
                          const std::vector<uint64_t>& seeds,
                          const TrainConfig& cfg) {
  if (seeds.size() < 2) throw std::invalid_argument("benchmark: need >= 2 seeds");
  BenchmarkResult out;
  for (GammaMode mode : modes) {
    ModelSpec spec = base_spec;
    spec.gamma = mode;
    RunReport rep;
    rep.family = to_string(spec.family);
    rep.mode = to_string(mode);
    for (uint64_t seed : seeds) {
      Split split = make_split(g, 0.6, 0.2, 0.2, seed);
      TrainConfig c = cfg;
      c.seed = seed;
      rep.seeds.push_back(seed);
      rep.per_seed.push_back(train(spec, g, split, c).test_metric);
    }
    rep.mean = mean_of(rep.per_seed);
    rep.stddev = stddev_of(rep.per_seed);
    out.reports.push_back(std::move(rep));
  }
  const RunReport* orig = nullptr;
  for (const auto& r : out.reports)
    if (r.mode == "orig") orig = &r;
  if (orig) {
    for (const auto& r : out.reports) {
      if (r.mode == "orig") continue;
      std::vector<double> d(r.per_seed.size());
      for (size_t i = 0; i < d.size(); ++i) d[i] = r.per_seed[i] - orig->per_seed[i];
      out.deltas_vs_orig.push_back({r.mode, std::move(d)});
    }
  }
  return out;
}

double paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("paired_t_test: need matched samples, n >= 2");
  size_t n = a.size();
  std::vector<double> d(n);
  for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double mu = mean_of(d), sd = stddev_of(d);
  if (sd == 0.0) return mu == 0.0 ? 1.0 : 0.0;
  double t = mu / (sd / std::sqrt(static_cast<double>(n)));
  double df = static_cast<double>(n - 1);
  // Two-sided p-value via the incomplete-beta tail of Student's t.
  double x = df / (df + t * t);
  // Continued-fraction regularized incomplete beta I_x(df/2, 1/2).
  auto betacf = [](double aa, double bb, double xx) {
    const int max_it = 200;
    const double eps = 3e-14, fpmin = 1e-300;
    double qab = aa + bb, qap = aa + 1.0, qam = aa - 1.0;
    double c = 1.0, dd = 1.0 - qab * xx / qap;
    if (std::fabs(dd) < fpmin) dd = fpmin;
    dd = 1.0 / dd;
    double h = dd;
    for (int m = 1; m <= max_it; ++m) {
      int m2 = 2 * m;
      double aa1 = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
      dd = 1.0 + aa1 * dd;
      if (std::fabs(dd) < fpmin) dd = fpmin;
      c = 1.0 + aa1 / c;
      if (std::fabs(c) < fpmin) c = fpmin;
      dd = 1.0 / dd;
      h *= dd * c;
      aa1 = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
      dd = 1.0 + aa1 * dd;
      if (std::fabs(dd) < fpmin) dd = fpmin;
      c = 1.0 + aa1 / c;
      if (std::fabs(c) < fpmin) c = fpmin;
      dd = 1.0 / dd;
      double del = dd * c;
      h *= del;
      if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
  };
  auto ibeta = [&](double aa, double bb, double xx) {
    if (xx <= 0.0) return 0.0;
    if (xx >= 1.0) return 1.0;
    double ln = std::lgamma(aa + bb) - std::lgamma(aa) - std::lgamma(bb) +
                aa * std::log(xx) + bb * std::log(1.0 - xx);
    double front = std::exp(ln);
    if (xx < (aa + 1.0) / (aa + bb + 2.0)) return front * betacf(aa, bb, xx) / aa;
    return 1.0 - front * betacf(bb, aa, 1.0 - xx) / bb;
  };
  return ibeta(df / 2.0, 0.5, x);
}

}  // namespace hetmp

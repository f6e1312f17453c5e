#pragma once

#include <string>
#include <vector>

#include "hetmp/graph.hpp"
#include "hetmp/layers.hpp"
#include "hetmp/tape.hpp"

namespace hetmp {

enum class EvalMetric { accuracy, roc_auc };

EvalMetric metric_from_string(const std::string& s);
std::string to_string(EvalMetric m);

struct ModelSpec {
  Family family = Family::gcn;
  GammaMode gamma = GammaMode::orig;
  int in_dim = 0;
  int hidden_dim = 128;
  int num_classes = 0;
  int depth = 2;
  double dropout = 0.2;
  bool share_channel_params = false;
  bool detach_scaling = false;

  std::vector<LayerSpec> layer_specs() const;
};

struct TrainConfig {
  double lr = 0.001;
  double weight_decay = 0.0;
  int max_epochs = 1000;
  int patience = 100;  // early stopping on the validation metric
  uint64_t seed = 0;
  EvalMetric eval_metric = EvalMetric::accuracy;
};

struct TrainResult {
  double test_metric = 0.0;
  double best_val_metric = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  ParamStore params;
};

void init_model_params(const ModelSpec& spec, ParamStore& ps, Rng& rng);

/// Full forward pass to logits. Dropout is active only when train is set.
Var model_forward(Tape& tp, const ModelSpec& spec, ParamStore& ps,
                  const Graph& g, bool train, Rng* dropout_rng);

/// Full-batch training minimizing cross-entropy on the train mask, early
/// stopping on the best validation metric; returns the test metric at the
/// best-validation checkpoint. Deterministic per seed.
TrainResult train(const ModelSpec& spec, const Graph& g, const Split& split,
                  const TrainConfig& cfg);

Tensor predict_logits(const ModelSpec& spec, ParamStore& ps, const Graph& g);

/// accuracy: argmax fraction correct. roc_auc: binary labels only, rank
/// statistic with ties averaged; class 1 scored by its softmax logit margin.
double evaluate(const Tensor& logits, const Graph& g,
                const std::vector<bool>& mask, EvalMetric metric);

struct RunReport {
  std::string family, mode;
  std::vector<uint64_t> seeds;
  std::vector<double> per_seed;
  double mean = 0.0, stddev = 0.0;
};

struct BenchmarkResult {
  std::vector<RunReport> reports;  // one per mode
  /// Per-seed paired differences a_mode - a_orig, keyed like reports
  /// (empty when orig is not among the modes).
  std::vector<std::pair<std::string, std::vector<double>>> deltas_vs_orig;
};

BenchmarkResult benchmark(const Graph& g, const ModelSpec& base_spec,
                          const std::vector<GammaMode>& modes,
                          const std::vector<uint64_t>& seeds,
                          const TrainConfig& cfg);

/// Two-sided paired t-test p-value over per-seed pairs.
double paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

double mean_of(const std::vector<double>& xs);
double stddev_of(const std::vector<double>& xs);

}  // namespace hetmp

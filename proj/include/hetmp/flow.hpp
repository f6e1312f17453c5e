#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hetmp/graph.hpp"
#include "hetmp/layers.hpp"
#include "hetmp/tape.hpp"

namespace hetmp {

/// Coupling function of an affine coupling layer: identity (for tests),
/// a MixMP graph convolution (atom flow), or a small 3x3 CNN (bond flow).
enum class CouplingKind { identity, gnn, cnn };

/// One affine coupling layer: a binary mask over the coupled tensor and a
/// parametric coupling function addressed by parameter-name prefix.
struct CouplingLayer {
  CouplingKind kind = CouplingKind::identity;
  Tensor mask;         // same shape as the coupled tensor; entries in {0,1}
  std::string prefix;  // parameter-name prefix in the model's store
  int index = -1;      // stripe index; >= 0 lets the mask adapt to input size
};

struct FlowConfig {
  int num_nodes = 9;       // graph size sampled in full generation mode
  int num_node_types = 4;  // atom-type alphabet (feature width)
  int num_edge_types = 2;  // bond types, excluding the no-edge channel
  int layers_atom = 8;
  int layers_bond = 4;
  int gnn_hidden = 16;     // atom-coupling MixMP width
  int cnn_hidden = 8;      // bond-coupling conv width
  int sharing_mode = 1;    // latent variance: 0 fixed at 1, 1 shared, 2 separate
  bool share_channel_params = false;
  double dequant_scale = 0.6;  // uniform dequantization noise in [0, scale)
  double logs_cap = 2.0;       // tanh cap on log S

  int bond_channels() const { return num_edge_types + 1; }  // + no-edge
};

/// Paired atom and bond flows over fixed-size typed graphs, plus the
/// log-variance parameters of the Gaussian latents.
struct FlowModel {
  FlowConfig cfg;
  std::vector<CouplingLayer> atom_flow;
  std::vector<CouplingLayer> bond_flow;
  ParamStore ps;
  bool trained = false;
};

/// Builds masks and initializes parameters. Coupling output projections
/// start at zero, so a fresh model is the identity map.
FlowModel make_flow_model(const FlowConfig& cfg, Rng& rng);

/// Row-striped masks: layer i of a k-layer flow selects rows j with
/// j % k == i % k (all feature columns / channels of those rows).
Tensor atom_mask(const FlowConfig& cfg, int layer, int num_nodes);
Tensor bond_mask(const FlowConfig& cfg, int layer, int num_nodes);

/// One training instance: dequantized feature and edge tensors plus the
/// discrete per-type adjacency used to condition the atom flow.
struct FlowSample {
  Tensor x;                 // [n, num_node_types]
  Tensor e;                 // [n, n, num_edge_types + 1]; channel 0 = no edge
  std::vector<Tensor> adj;  // dense n x n per bond type
};

/// One-hot edge tensor of a graph, including the no-edge channel.
Tensor edge_tensor(const FlowConfig& cfg, const Graph& g);

/// One-hot tensors perturbed by uniform noise in [0, dequant_scale).
FlowSample make_sample(const FlowConfig& cfg, const Graph& g, Rng& rng);

struct AclResult {
  Var y;
  Var logdet;  // [1]
};

/// Y = M (.) (S (.) X1 + T) + (1 - M) (.) X2 with (log S, T) = f(X2);
/// logdet = sum of log S over masked positions. Rejects an all-ones mask.
/// `adj` conditions the GNN coupling function and is ignored otherwise.
AclResult acl_forward(Tape& tp, FlowModel& m, const CouplingLayer& layer,
                      Var x, const std::vector<Tensor>& adj);

/// Exact inverse: X = M (.) (M (.) Y - T) / S + (1 - M) (.) Y.
Tensor acl_inverse(FlowModel& m, const CouplingLayer& layer, const Tensor& y,
                   const std::vector<Tensor>& adj);

struct FlowNll {
  Var total;  // [1]
  Var atom;   // L_a
  Var bond;   // L_b
};

/// Negative log-likelihood: Gaussian NLL of the latents under the model's
/// variance-sharing mode, minus the accumulated log-determinants.
FlowNll flow_nll(Tape& tp, FlowModel& m, const FlowSample& s);

/// Forward pass to latent space: (h_a, h_b) as plain tensors.
std::pair<Tensor, Tensor> flow_encode(FlowModel& m, const FlowSample& s);

/// Inverts both flows from given latents and discretizes (argmax per row
/// for atom types, per-pair argmax with the no-edge channel for bonds).
Graph decode(FlowModel& m, const Tensor& h_a, const Tensor& h_b);

/// Inverts only the atom flow, keeping the given graph's topology.
Graph decode_with_topology(FlowModel& m, const Tensor& h_a,
                           const Graph& topology);

struct FlowTrainConfig {
  int steps = 300;
  int batch_size = 8;
  double lr = 0.001;
  double weight_decay = 0.0;
  uint64_t seed = 0;
};

struct FlowTrainResult {
  std::vector<double> nll_history;  // mean batch NLL per step
};

FlowTrainResult flow_train(FlowModel& m, const std::vector<Graph>& pool,
                           const FlowTrainConfig& cfg);

enum class GenMode { full, true_adj };
GenMode gen_mode_from_string(const std::string& s);
std::string to_string(GenMode m);

/// full: sample h_b, invert the bond flow, discretize the topology, then
/// sample h_a and invert the atom flow conditioned on it. true_adj: draw
/// the topology uniformly from `pool` and run only the atom inversion.
std::vector<Graph> generate(FlowModel& m, int n, GenMode mode,
                            const std::vector<Graph>& pool, Rng& rng);

/// Node-homophily histogram with fixed bin edges [0, 0.1, ..., 1.0];
/// the final bin is closed. Returns 10 counts.
std::vector<double> homophily_histogram(const std::vector<Graph>& graphs);
std::string histogram_csv(const std::vector<double>& hist);

/// Versioned JSON model file: config, trained flag, all parameter tensors.
void save_flow_model(const FlowModel& m, const std::string& path);
FlowModel load_flow_model(const std::string& path);

}  // namespace hetmp

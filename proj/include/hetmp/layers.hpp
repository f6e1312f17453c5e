#pragma once

#include <string>
#include <vector>

#include "hetmp/graph.hpp"
#include "hetmp/homophily.hpp"
#include "hetmp/tape.hpp"

namespace hetmp {

enum class Family { gcn, gat, gin, sage };

Family family_from_string(const std::string& s);
std::string to_string(Family f);

enum class GammaMode { orig, hom, het, mix };

GammaMode gamma_from_string(const std::string& s);
std::string to_string(GammaMode g);

struct LayerSpec {
  Family family = Family::gcn;
  int in_dim = 0, out_dim = 0;
  GammaMode gamma = GammaMode::orig;
  bool share_channel_params = false;  // mix only
  double leaky_slope = 0.2;           // GAT attention nonlinearity
  double gin_eps = 0.0;
  bool detach_scaling = false;        // stop gradients through the cosine
};

/// Per-edge messages plus the self-message each family defines, before or
/// after channel scaling. Plain tensors; used for direct inspection and
/// property tests, the training path goes through layer_forward.
struct MessageSet {
  Tensor neighbor;  // [E, d], row e is the message along directed edge e
  Tensor self;      // [n, d] self-message (GCN self-loop, GAT/GIN self, SAGE root)
  Tensor alpha;     // [E] scaling factors applied so far (ones initially)
};

MessageSet compute_messages(const LayerSpec& spec, const ParamStore& ps,
                            const std::string& prefix, const Tensor& h,
                            const Graph& g);

/// Scales every neighbour message by scaling_factor(h_u, h_v, gamma)
/// computed on the current layer input embeddings. Self-messages keep
/// alpha = 1 on every channel. gamma must be a single channel, not mix.
MessageSet scale_messages(const MessageSet& ms, const Tensor& h,
                          const Graph& g, Channel gamma);

void init_layer_params(const LayerSpec& spec, const std::string& prefix,
                       ParamStore& ps, Rng& rng);

/// Full layer: messages, gamma scaling, family UPDATE. Registers (or
/// reuses) parameters named under prefix on the tape.
Var layer_forward(Tape& tp, const LayerSpec& spec, const std::string& prefix,
                  ParamStore& ps, Var h, const Graph& g);

/// MixMP graph-convolution used as the flow coupling function
/// (concatenated orig/hom/het channel aggregates per edge type, projected
/// and summed over edge types).
struct MixMpConvSpec {
  int in_dim = 0, out_dim = 0;
  int num_edge_types = 1;
  bool share_channel_params = false;
  bool detach_scaling = false;
};

void init_mixmp_conv_params(const MixMpConvSpec& spec, const std::string& prefix,
                            ParamStore& ps, Rng& rng);

/// adjacency[i] is the dense n x n matrix A_i for edge type i (constant).
Var mixmp_conv_forward(Tape& tp, const MixMpConvSpec& spec,
                       const std::string& prefix, ParamStore& ps, Var h,
                       const std::vector<Tensor>& adjacency);

}  // namespace hetmp

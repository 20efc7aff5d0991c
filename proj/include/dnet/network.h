#pragma once

#include "dnet/autodiff.h"
#include "dnet/operators.h"
#include "dnet/shape.h"

#include <cstdint>
#include <string>

namespace dnet {

struct NetworkConfig {
  int width = 128;
  int n_blocks = 4;
  std::string input_mode = "hks";        // xyz | hks
  std::string head = "vertex_softmax";   // vertex_softmax | global_mean_softmax | raw
  double dropout = 0.0;
  std::string gradient_mode = "complex"; // real | complex
  int mlp_hidden_layers = 2;
  int n_out = 1;
  int k = 128;

  // Ablation switches; the defaults are the full method.
  bool use_diffusion = true;
  bool use_gradient_features = true;
  double fixed_time = -1.0; // >= 0 freezes every diffusion time at this value
  bool learn_A = true;      // false freezes A at its random initialization

  int input_dim() const { return input_mode == "xyz" ? 3 : 16; }
  bool complex_gradients() const { return gradient_mode == "complex"; }
  void validate() const;
};

// All learnable state: input/output linear maps plus, per block, diffusion
// times tau, the gradient-feature matrix A, and the MLP layers.
struct DiffusionNetParams {
  NetworkConfig config;
  ad::ParamStore store;

  ad::Param& at(const std::string& name) { return store.at(name); }
  size_t n_scalars() const { return store.total_scalars(); }
};

// Xavier-uniform weights, zero biases, tau = 1e-4, A = 0. With learn_A off,
// A is drawn uniformly (and frozen); with fixed_time >= 0, tau is frozen.
DiffusionNetParams init_params(const NetworkConfig& config, uint64_t seed);

// Input featurization: raw positions (xyz mode) or heat kernel signatures at
// the 16 default times (hks mode).
Eigen::MatrixXd featurize(const Shape& shape, const GeometryOperators& ops,
                          const NetworkConfig& config);

struct ForwardOptions {
  bool train = false;
  uint64_t dropout_seed = 0;
  int* clamp_count = nullptr; // total diffusion-time clamps across blocks
};

// Pre-softmax outputs: V x n_out for vertex heads, 1 x n_out after the
// mass-weighted global mean for classification heads.
ad::Tensor network_logits(ad::Tape& tape, const Eigen::MatrixXd& features,
                          const GeometryOperators& ops, DiffusionNetParams& params,
                          const ForwardOptions& options = {});

// Logits plus the configured head activation (softmax rows; raw passes through).
ad::Tensor network_forward(ad::Tape& tape, const Eigen::MatrixXd& features,
                           const GeometryOperators& ops, DiffusionNetParams& params,
                           const ForwardOptions& options = {});

// One DiffusionNet block: diffusion, gradient features, shared pointwise MLP,
// residual. Exposed for tests.
ad::Tensor block_forward(ad::Tape& tape, ad::Tensor x, int block_index,
                         const GeometryOperators& ops, DiffusionNetParams& params,
                         const ForwardOptions& options = {});

// Per-face outputs by averaging the incident vertices' rows (used before the
// final softmax when a task is labeled on faces).
ad::Tensor average_to_faces(ad::Tensor vertex_values, const Eigen::MatrixXi& faces);

// Single-file checkpoint: JSON header (config, parameter names/shapes,
// format version) followed by little-endian float64 blobs in declared order.
void save_checkpoint(const DiffusionNetParams& params, const std::string& path);
DiffusionNetParams load_checkpoint(const std::string& path);

} // namespace dnet

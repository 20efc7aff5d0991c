#include "dnet/network.h"

#include "dnet/rng.h"
#include "dnet/spectral.h"

#include <cmath>

namespace dnet {

void NetworkConfig::validate() const {
  if (width < 1) throw Error("config: width must be >= 1");
  if (n_blocks < 1) throw Error("config: n_blocks must be >= 1");
  if (input_mode != "xyz" && input_mode != "hks")
    throw Error("config: input_mode must be 'xyz' or 'hks'");
  if (head != "vertex_softmax" && head != "global_mean_softmax" && head != "raw")
    throw Error("config: unknown head '" + head + "'");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("config: dropout must be in [0, 1)");
  if (gradient_mode != "real" && gradient_mode != "complex")
    throw Error("config: gradient_mode must be 'real' or 'complex'");
  if (mlp_hidden_layers < 0) throw Error("config: mlp_hidden_layers must be >= 0");
  if (n_out < 1) throw Error("config: n_out must be >= 1");
  if (k < 1) throw Error("config: k must be >= 1");
}

namespace {

Eigen::MatrixXd xavier_uniform(int fan_in, int fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Eigen::MatrixXd W(fan_in, fan_out);
  for (int i = 0; i < fan_in; i++)
    for (int j = 0; j < fan_out; j++) W(i, j) = rng.uniform(-bound, bound);
  return W;
}

std::string block_prefix(int b) { return "block" + std::to_string(b) + "."; }

// MLP layer widths for one block: input is concat(u, g) (2D) or just u (D),
// then mlp_hidden_layers hidden layers of width D, then a final D -> D map.
std::vector<std::pair<int, int>> mlp_layer_shapes(const NetworkConfig& c) {
  int in = c.use_gradient_features ? 2 * c.width : c.width;
  std::vector<std::pair<int, int>> shapes;
  int cur = in;
  for (int h = 0; h < c.mlp_hidden_layers; h++) {
    shapes.emplace_back(cur, c.width);
    cur = c.width;
  }
  shapes.emplace_back(cur, c.width);
  return shapes;
}

} // namespace

DiffusionNetParams init_params(const NetworkConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  DiffusionNetParams params;
  params.config = config;
  ad::ParamStore& st = params.store;
  const int D = config.width;

  st.add("linear_in.W", xavier_uniform(config.input_dim(), D, rng));
  st.add("linear_in.b", Eigen::MatrixXd::Zero(1, D));

  for (int b = 0; b < config.n_blocks; b++) {
    const std::string pre = block_prefix(b);
    if (config.use_diffusion) {
      double t0 = config.fixed_time >= 0.0 ? config.fixed_time : 1e-4;
      bool learn_t = config.fixed_time < 0.0;
      st.add(pre + "tau", Eigen::MatrixXd::Constant(D, 1, t0), learn_t);
    }
    if (config.use_gradient_features) {
      if (config.learn_A) {
        st.add(pre + "A_re", Eigen::MatrixXd::Zero(D, D));
        if (config.complex_gradients()) st.add(pre + "A_im", Eigen::MatrixXd::Zero(D, D));
      } else {
        st.add(pre + "A_re", xavier_uniform(D, D, rng), false);
        if (config.complex_gradients()) st.add(pre + "A_im", xavier_uniform(D, D, rng), false);
      }
    }
    auto shapes = mlp_layer_shapes(config);
    for (size_t l = 0; l < shapes.size(); l++) {
      st.add(pre + "mlp" + std::to_string(l) + ".W",
             xavier_uniform(shapes[l].first, shapes[l].second, rng));
      st.add(pre + "mlp" + std::to_string(l) + ".b",
             Eigen::MatrixXd::Zero(1, shapes[l].second));
    }
  }

  st.add("linear_out.W", xavier_uniform(D, config.n_out, rng));
  st.add("linear_out.b", Eigen::MatrixXd::Zero(1, config.n_out));
  return params;
}

Eigen::MatrixXd featurize(const Shape& shape, const GeometryOperators& ops,
                          const NetworkConfig& config) {
  if (ops.k != config.k)
    throw Error("featurize: operators were precomputed with k=" + std::to_string(ops.k) +
                " but the network expects k=" + std::to_string(config.k));
  if (config.input_mode == "xyz") return shape.positions();
  return compute_hks(ops.basis, hks_default_times());
}

namespace {

ad::Tensor linear(ad::Tape& tape, ad::Tensor x, DiffusionNetParams& params,
                  const std::string& name) {
  ad::Tensor W = tape.param(params.at(name + ".W"));
  ad::Tensor b = tape.param(params.at(name + ".b"));
  return ad::add(ad::matmul(x, W), b);
}

} // namespace

ad::Tensor block_forward(ad::Tape& tape, ad::Tensor x, int b, const GeometryOperators& ops,
                         DiffusionNetParams& params, const ForwardOptions& options) {
  const NetworkConfig& c = params.config;
  const std::string pre = block_prefix(b);

  ad::Tensor u = x;
  if (c.use_diffusion) {
    int clamps = 0;
    u = ad::spectral_diffusion(x, tape.param(params.at(pre + "tau")), ops.basis, ops.mass,
                               &clamps);
    if (options.clamp_count) *options.clamp_count += clamps;
  }

  ad::Tensor mlp_in = u;
  if (c.use_gradient_features) {
    if (c.complex_gradients() && !ops.oriented)
      throw Error("complex gradient features require an oriented shape; use gradient_mode=real");
    ad::Tensor w = ad::sparse_apply(ops.gradient, u);
    ad::Tensor g;
    if (c.complex_gradients()) {
      ad::Tensor a_im = tape.param(params.at(pre + "A_im"));
      g = ad::gradient_features(w, tape.param(params.at(pre + "A_re")), &a_im);
    } else {
      g = ad::gradient_features(w, tape.param(params.at(pre + "A_re")));
    }
    mlp_in = ad::concat_cols(u, g);
  }

  ad::Tensor y = mlp_in;
  const int n_layers = c.mlp_hidden_layers + 1;
  for (int l = 0; l < n_layers; l++) {
    y = linear(tape, y, params, pre + "mlp" + std::to_string(l));
    if (l + 1 < n_layers) {
      y = ad::relu(y);
      if (c.dropout > 0.0) {
        uint64_t seed = options.dropout_seed * 0x9e3779b97f4a7c15ull +
                        static_cast<uint64_t>(b) * 131ull + static_cast<uint64_t>(l);
        y = ad::dropout(y, c.dropout, options.train, seed);
      }
    }
  }
  return ad::add(x, y); // residual
}

ad::Tensor network_logits(ad::Tape& tape, const Eigen::MatrixXd& features,
                          const GeometryOperators& ops, DiffusionNetParams& params,
                          const ForwardOptions& options) {
  const NetworkConfig& c = params.config;
  c.validate();
  if (features.cols() != c.input_dim())
    throw Error("network: expected " + std::to_string(c.input_dim()) +
                " input channels, got " + std::to_string(features.cols()));
  if (features.rows() != ops.n_vertices())
    throw Error("network: feature rows do not match the operator bundle");

  ad::Tensor x = linear(tape, tape.input(features), params, "linear_in");
  for (int b = 0; b < c.n_blocks; b++) x = block_forward(tape, x, b, ops, params, options);
  ad::Tensor logits = linear(tape, x, params, "linear_out");

  if (c.head == "global_mean_softmax") logits = ad::weighted_mean_rows(logits, ops.mass);
  return logits;
}

ad::Tensor network_forward(ad::Tape& tape, const Eigen::MatrixXd& features,
                           const GeometryOperators& ops, DiffusionNetParams& params,
                           const ForwardOptions& options) {
  ad::Tensor logits = network_logits(tape, features, ops, params, options);
  if (params.config.head == "raw") return logits;
  return ad::row_softmax(logits);
}

ad::Tensor average_to_faces(ad::Tensor vertex_values, const Eigen::MatrixXi& faces) {
  std::vector<int> c0(static_cast<size_t>(faces.rows())), c1 = c0, c2 = c0;
  for (int f = 0; f < faces.rows(); f++) {
    c0[static_cast<size_t>(f)] = faces(f, 0);
    c1[static_cast<size_t>(f)] = faces(f, 1);
    c2[static_cast<size_t>(f)] = faces(f, 2);
  }
  ad::Tensor sum = ad::add(ad::add(ad::gather_rows(vertex_values, c0),
                                   ad::gather_rows(vertex_values, c1)),
                           ad::gather_rows(vertex_values, c2));
  return ad::scale(sum, 1.0 / 3.0);
}

} // namespace dnet

#pragma once

#include "dnet/operators.h"
#include "dnet/spectral.h"

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dnet {
namespace ad {

// A named parameter with its gradient accumulator. Parameters live outside
// the tape and persist across steps; backward() adds into `grad`.
struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct ParamStore {
  std::vector<Param> items;

  Param& add(const std::string& name, Eigen::MatrixXd value, bool trainable = true);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  void zero_grads();
  size_t total_scalars() const;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; invalid once the tape is cleared.
struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  const Eigen::MatrixXd& value() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
};

// Reverse-mode tape: records one node per forward operation in execution
// order, traverses in exact reverse on backward(), accumulates gradients
// additively, flushes them into bound Params, then clears itself.
class Tape {
public:
  explicit Tape(bool check_finite = false) : check_finite_(check_finite) {}

  Tensor input(Eigen::MatrixXd value);
  Tensor param(Param& p);

  void backward(Tensor loss);
  void clear();
  size_t size() const { return nodes_.size(); }

  // Op-author interface.
  using BackwardFn = std::function<void(Tape&, int self)>;
  Tensor emit(Eigen::MatrixXd value, BackwardFn backward);
  const Eigen::MatrixXd& value(int id) const;
  const Eigen::MatrixXd& grad(int id) const;
  bool has_grad(int id) const;
  void accum(int id, const Eigen::MatrixXd& g);

private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad; // empty until touched
    BackwardFn backward;
    Param* sink = nullptr;
  };
  std::vector<Node> nodes_;
  bool check_finite_ = false;

  void check_id(int id) const;
};

// --- core ops ---------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b);
// Same-shape addition, or row-vector bias broadcast when b is 1 x C.
Tensor add(Tensor a, Tensor b);
Tensor scale(Tensor a, double s);
Tensor concat_cols(Tensor a, Tensor b);
Tensor relu(Tensor a);
Tensor tanh_act(Tensor a);
// Inverted dropout: kept entries scaled by 1/(1-p); identity in eval mode.
Tensor dropout(Tensor a, double p, bool train, uint64_t seed);
Tensor row_softmax(Tensor a);
Tensor log_elem(Tensor a);
Tensor mean_rows(Tensor a);                                      // 1 x C column means
Tensor weighted_mean_rows(Tensor a, const Eigen::VectorXd& w);   // mass-weighted mean
Tensor gather_rows(Tensor a, const std::vector<int>& rows);

// Scalar reduction sum_ij w_ij a_ij (1 x 1 output).
Tensor weighted_sum(Tensor a, const Eigen::MatrixXd& w);

// Fixed sparse matrix times tensor. The complex overload maps a real V x D
// input to V x 2D output laid out as [Re | Im] channel blocks; its backward
// applies the conjugate transpose.
Tensor sparse_apply(const SparseReal& S, Tensor x);
Tensor sparse_apply(const SparseComplex& S, Tensor x);

// --- geometric ops ----------------------------------------------------------

// Learned-time spectral diffusion of U (V x D) with per-channel raw times
// tau (D x 1). Times are clamped to t = max(tau, 1e-8); clamped channels get
// zero time-gradient. `clamp_count`, when given, receives the number of
// clamped channels. The basis and mass must outlive the tape.
Tensor spectral_diffusion(Tensor u, Tensor tau, const EigenBasis& basis,
                          const Eigen::VectorXd& mass, int* clamp_count = nullptr);

// Gradient features g_v(i) = tanh(Re sum_j conj(w_v(i)) A_ij w_v(j)) for
// complex per-vertex channel gradients W (V x 2D as [Re | Im]). A is given as
// its real part (D x D) plus an optional imaginary part for oriented shapes.
Tensor gradient_features(Tensor w, Tensor a_re, const Tensor* a_im = nullptr);

// Mean over rows of -sum_c q_c log softmax(logits)_c with
// q = (1 - alpha) onehot(target) + alpha / C, stabilized via log-sum-exp.
Tensor cross_entropy_label_smoothed(Tensor logits, const std::vector<int>& targets,
                                    double alpha);

} // namespace ad
} // namespace dnet

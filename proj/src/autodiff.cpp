#include "dnet/autodiff.h"

#include "dnet/rng.h"

#include <algorithm>
#include <cmath>

namespace dnet {
namespace ad {

// --- ParamStore --------------------------------------------------------------

Param& ParamStore::add(const std::string& name, Eigen::MatrixXd value, bool trainable) {
  for (const auto& p : items)
    if (p.name == name) throw Error("param '" + name + "' already exists");
  Param p;
  p.name = name;
  p.grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  p.trainable = trainable;
  items.push_back(std::move(p));
  return items.back();
}

Param& ParamStore::at(const std::string& name) {
  for (auto& p : items)
    if (p.name == name) return p;
  throw Error("param '" + name + "' not found");
}

const Param& ParamStore::at(const std::string& name) const {
  for (const auto& p : items)
    if (p.name == name) return p;
  throw Error("param '" + name + "' not found");
}

void ParamStore::zero_grads() {
  for (auto& p : items) p.zero_grad();
}

size_t ParamStore::total_scalars() const {
  size_t n = 0;
  for (const auto& p : items) n += static_cast<size_t>(p.value.size());
  return n;
}

// --- Tape --------------------------------------------------------------------

const Eigen::MatrixXd& Tensor::value() const {
  if (!tape) throw Error("tensor is detached (no tape)");
  return tape->value(id);
}

void Tape::check_id(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw Error("tensor references a cleared or foreign tape node");
}

Tensor Tape::input(Eigen::MatrixXd value) {
  if (check_finite_ && !value.allFinite()) throw Error("non-finite input tensor");
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr});
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::param(Param& p) {
  if (check_finite_ && !p.value.allFinite())
    throw Error("non-finite parameter value: " + p.name);
  nodes_.push_back(Node{p.value, {}, nullptr, &p});
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::emit(Eigen::MatrixXd value, BackwardFn backward) {
  if (check_finite_ && !value.allFinite()) throw Error("non-finite value produced by an op");
  nodes_.push_back(Node{std::move(value), {}, std::move(backward), nullptr});
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

const Eigen::MatrixXd& Tape::value(int id) const {
  check_id(id);
  return nodes_[static_cast<size_t>(id)].value;
}

const Eigen::MatrixXd& Tape::grad(int id) const {
  check_id(id);
  return nodes_[static_cast<size_t>(id)].grad;
}

bool Tape::has_grad(int id) const {
  check_id(id);
  return nodes_[static_cast<size_t>(id)].grad.size() > 0;
}

void Tape::accum(int id, const Eigen::MatrixXd& g) {
  check_id(id);
  Node& n = nodes_[static_cast<size_t>(id)];
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
    throw Error("gradient shape mismatch during backward");
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Tensor loss) {
  if (loss.tape != this) throw Error("backward: loss tensor is detached from this tape");
  check_id(loss.id);
  const Node& ln = nodes_[static_cast<size_t>(loss.id)];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw Error("backward: loss must be a scalar (1x1) tensor");

  accum(loss.id, Eigen::MatrixXd::Ones(1, 1));
  for (int i = loss.id; i >= 0; i--) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) {
      if (n.sink->grad.size() == 0) n.sink->zero_grad();
      n.sink->grad += n.grad;
    }
  }
  clear();
}

void Tape::clear() { nodes_.clear(); }

// --- core ops ----------------------------------------------------------------

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

Tape& same_tape(Tensor a, Tensor b) {
  if (!a.tape || a.tape != b.tape) throw Error("operands live on different tapes");
  return *a.tape;
}

} // namespace

Tensor matmul(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  const Eigen::MatrixXd& A = a.value();
  const Eigen::MatrixXd& B = b.value();
  if (A.cols() != B.rows())
    throw Error("matmul: inner dimensions differ: " + shape_str(A) + " * " + shape_str(B));
  int ia = a.id, ib = b.id;
  return t.emit(A * B, [ia, ib](Tape& tp, int self) {
    const Eigen::MatrixXd& g = tp.grad(self);
    tp.accum(ia, g * tp.value(ib).transpose());
    tp.accum(ib, tp.value(ia).transpose() * g);
  });
}

Tensor add(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  const Eigen::MatrixXd& A = a.value();
  const Eigen::MatrixXd& B = b.value();
  int ia = a.id, ib = b.id;
  if (A.rows() == B.rows() && A.cols() == B.cols()) {
    return t.emit(A + B, [ia, ib](Tape& tp, int self) {
      tp.accum(ia, tp.grad(self));
      tp.accum(ib, tp.grad(self));
    });
  }
  if (B.rows() == 1 && B.cols() == A.cols()) { // bias row broadcast
    Eigen::MatrixXd out = A;
    out.rowwise() += B.row(0);
    return t.emit(std::move(out), [ia, ib](Tape& tp, int self) {
      const Eigen::MatrixXd& g = tp.grad(self);
      tp.accum(ia, g);
      tp.accum(ib, g.colwise().sum());
    });
  }
  throw Error("add: shape mismatch: " + shape_str(A) + " + " + shape_str(B));
}

Tensor scale(Tensor a, double s) {
  Tape& t = *a.tape;
  int ia = a.id;
  return t.emit(s * a.value(), [ia, s](Tape& tp, int self) { tp.accum(ia, s * tp.grad(self)); });
}

Tensor concat_cols(Tensor a, Tensor b) {
  Tape& t = same_tape(a, b);
  const Eigen::MatrixXd& A = a.value();
  const Eigen::MatrixXd& B = b.value();
  if (A.rows() != B.rows())
    throw Error("concat: row counts differ: " + shape_str(A) + " | " + shape_str(B));
  Eigen::MatrixXd out(A.rows(), A.cols() + B.cols());
  out << A, B;
  int ia = a.id, ib = b.id;
  int ca = static_cast<int>(A.cols()), cb = static_cast<int>(B.cols());
  return t.emit(std::move(out), [ia, ib, ca, cb](Tape& tp, int self) {
    const Eigen::MatrixXd& g = tp.grad(self);
    tp.accum(ia, g.leftCols(ca));
    tp.accum(ib, g.rightCols(cb));
  });
}

Tensor relu(Tensor a) {
  Tape& t = *a.tape;
  int ia = a.id;
  return t.emit(a.value().cwiseMax(0.0), [ia](Tape& tp, int self) {
    // subgradient convention relu'(0) = 0
    Eigen::MatrixXd mask = (tp.value(ia).array() > 0.0).cast<double>();
    tp.accum(ia, tp.grad(self).cwiseProduct(mask));
  });
}

Tensor tanh_act(Tensor a) {
  Tape& t = *a.tape;
  Eigen::MatrixXd y = a.value().array().tanh();
  int ia = a.id;
  return t.emit(std::move(y), [ia](Tape& tp, int self) {
    Eigen::MatrixXd dy = 1.0 - tp.value(self).array().square();
    tp.accum(ia, tp.grad(self).cwiseProduct(dy));
  });
}

Tensor dropout(Tensor a, double p, bool train, uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout: p must be in [0, 1)");
  Tape& t = *a.tape;
  if (!train || p == 0.0) {
    int ia = a.id;
    return t.emit(a.value(), [ia](Tape& tp, int self) { tp.accum(ia, tp.grad(self)); });
  }
  const Eigen::MatrixXd& A = a.value();
  Rng rng(seed);
  double keep = 1.0 - p;
  Eigen::MatrixXd mask(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); i++)
    for (int j = 0; j < A.cols(); j++) mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  int ia = a.id;
  return t.emit(A.cwiseProduct(mask), [ia, mask](Tape& tp, int self) {
    tp.accum(ia, tp.grad(self).cwiseProduct(mask));
  });
}

Tensor row_softmax(Tensor a) {
  Tape& t = *a.tape;
  const Eigen::MatrixXd& A = a.value();
  Eigen::MatrixXd out(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); i++) {
    Eigen::RowVectorXd r = A.row(i);
    double mx = r.maxCoeff();
    Eigen::RowVectorXd e = (r.array() - mx).exp();
    out.row(i) = e / e.sum();
  }
  int ia = a.id;
  return t.emit(std::move(out), [ia](Tape& tp, int self) {
    const Eigen::MatrixXd& p = tp.value(self);
    const Eigen::MatrixXd& g = tp.grad(self);
    Eigen::MatrixXd dx(p.rows(), p.cols());
    for (int i = 0; i < p.rows(); i++) {
      double dot = g.row(i).dot(p.row(i));
      dx.row(i) = p.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
    tp.accum(ia, dx);
  });
}

Tensor log_elem(Tensor a) {
  Tape& t = *a.tape;
  int ia = a.id;
  return t.emit(a.value().array().log(), [ia](Tape& tp, int self) {
    tp.accum(ia, tp.grad(self).cwiseQuotient(tp.value(ia)));
  });
}

Tensor mean_rows(Tensor a) {
  Tape& t = *a.tape;
  const Eigen::MatrixXd& A = a.value();
  const double n = static_cast<double>(A.rows());
  int ia = a.id;
  Eigen::MatrixXd out = A.colwise().mean();
  return t.emit(std::move(out), [ia, n](Tape& tp, int self) {
    const Eigen::MatrixXd& g = tp.grad(self); // 1 x C
    Eigen::MatrixXd dx = (Eigen::VectorXd::Ones(static_cast<int>(n)) / n) * g;
    tp.accum(ia, dx);
  });
}

Tensor weighted_mean_rows(Tensor a, const Eigen::VectorXd& w) {
  Tape& t = *a.tape;
  const Eigen::MatrixXd& A = a.value();
  if (w.size() != A.rows()) throw Error("weighted_mean_rows: weight length mismatch");
  double wsum = w.sum();
  if (wsum <= 0) throw Error("weighted_mean_rows: weights must have positive sum");
  Eigen::VectorXd wn = w / wsum;
  int ia = a.id;
  Eigen::MatrixXd out = wn.transpose() * A; // 1 x C
  return t.emit(std::move(out), [ia, wn](Tape& tp, int self) {
    tp.accum(ia, wn * tp.grad(self));
  });
}

Tensor gather_rows(Tensor a, const std::vector<int>& rows) {
  Tape& t = *a.tape;
  const Eigen::MatrixXd& A = a.value();
  Eigen::MatrixXd out(static_cast<int>(rows.size()), A.cols());
  for (size_t i = 0; i < rows.size(); i++) {
    if (rows[i] < 0 || rows[i] >= A.rows()) throw Error("gather_rows: index out of range");
    out.row(static_cast<int>(i)) = A.row(rows[i]);
  }
  int ia = a.id;
  int nrows = static_cast<int>(A.rows());
  std::vector<int> idx = rows;
  return t.emit(std::move(out), [ia, idx, nrows](Tape& tp, int self) {
    const Eigen::MatrixXd& g = tp.grad(self);
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(nrows, g.cols());
    for (size_t i = 0; i < idx.size(); i++) dx.row(idx[i]) += g.row(static_cast<int>(i));
    tp.accum(ia, dx);
  });
}

Tensor weighted_sum(Tensor a, const Eigen::MatrixXd& w) {
  Tape& t = *a.tape;
  const Eigen::MatrixXd& A = a.value();
  if (w.rows() != A.rows() || w.cols() != A.cols())
    throw Error("weighted_sum: weight shape mismatch");
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = A.cwiseProduct(w).sum();
  int ia = a.id;
  Eigen::MatrixXd wc = w;
  return t.emit(std::move(out), [ia, wc](Tape& tp, int self) {
    tp.accum(ia, tp.grad(self)(0, 0) * wc);
  });
}

Tensor sparse_apply(const SparseReal& S, Tensor x) {
  Tape& t = *x.tape;
  const Eigen::MatrixXd& X = x.value();
  if (S.cols() != X.rows())
    throw Error("sparse_apply: dimension mismatch: S is " + std::to_string(S.rows()) + "x" +
                std::to_string(S.cols()) + ", X is " + shape_str(X));
  int ix = x.id;
  const SparseReal* Sp = &S; // S must outlive the tape
  return t.emit(S * X, [ix, Sp](Tape& tp, int self) {
    tp.accum(ix, Sp->transpose() * tp.grad(self));
  });
}

Tensor sparse_apply(const SparseComplex& S, Tensor x) {
  Tape& t = *x.tape;
  const Eigen::MatrixXd& X = x.value();
  if (S.cols() != X.rows())
    throw Error("sparse_apply: dimension mismatch: S is " + std::to_string(S.rows()) + "x" +
                std::to_string(S.cols()) + ", X is " + shape_str(X));
  SparseReal Sre(S.rows(), S.cols()), Sim(S.rows(), S.cols());
  {
    std::vector<Eigen::Triplet<double>> tre, tim;
    tre.reserve(static_cast<size_t>(S.nonZeros()));
    tim.reserve(static_cast<size_t>(S.nonZeros()));
    for (int c = 0; c < S.outerSize(); c++) {
      for (SparseComplex::InnerIterator it(S, c); it; ++it) {
        tre.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value().real());
        tim.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value().imag());
      }
    }
    Sre.setFromTriplets(tre.begin(), tre.end());
    Sim.setFromTriplets(tim.begin(), tim.end());
  }
  const int D = static_cast<int>(X.cols());
  Eigen::MatrixXd out(X.rows(), 2 * D);
  out.leftCols(D) = Sre * X;
  out.rightCols(D) = Sim * X;
  int ix = x.id;
  return t.emit(std::move(out), [ix, Sre, Sim, D](Tape& tp, int self) {
    const Eigen::MatrixXd& g = tp.grad(self);
    // real input: dX = Re(S)^T dY_re + Im(S)^T dY_im
    tp.accum(ix, Sre.transpose() * g.leftCols(D) + Sim.transpose() * g.rightCols(D));
  });
}

// --- geometric ops -----------------------------------------------------------

Tensor spectral_diffusion(Tensor u, Tensor tau, const EigenBasis& basis,
                          const Eigen::VectorXd& mass, int* clamp_count) {
  Tape& t = same_tape(u, tau);
  const Eigen::MatrixXd& U = u.value();
  const Eigen::MatrixXd& Traw = tau.value();
  const int D = static_cast<int>(U.cols());
  if (Traw.rows() != D || Traw.cols() != 1)
    throw Error("spectral_diffusion: tau must be D x 1 with D matching the channel count");
  if (U.rows() != basis.eigenvectors.rows() || U.rows() != mass.size())
    throw Error("spectral_diffusion: operator dimension mismatch");

  constexpr double kEps = 1e-8;
  Eigen::VectorXd tvals(D);
  Eigen::Matrix<bool, Eigen::Dynamic, 1> clamped(D);
  int n_clamped = 0;
  for (int d = 0; d < D; d++) {
    clamped[d] = Traw(d, 0) < kEps;
    if (clamped[d]) n_clamped++;
    tvals[d] = std::max(Traw(d, 0), kEps);
  }
  if (clamp_count) *clamp_count = n_clamped;

  const int k = basis.k;
  Eigen::MatrixXd C = basis.eigenvectors.transpose() * (mass.asDiagonal() * U); // k x D
  Eigen::MatrixXd E(k, D);
  for (int d = 0; d < D; d++) E.col(d) = (-basis.eigenvalues.array() * tvals[d]).exp();
  Eigen::MatrixXd Chat = E.cwiseProduct(C);
  Eigen::MatrixXd out = basis.eigenvectors * Chat;

  int iu = u.id, itau = tau.id;
  const EigenBasis* bp = &basis; // must outlive the tape
  Eigen::VectorXd m = mass;
  return t.emit(std::move(out), [iu, itau, bp, m, C, E, clamped](Tape& tp, int self) {
    const Eigen::MatrixXd& g = tp.grad(self);            // V x D
    Eigen::MatrixXd dChat = bp->eigenvectors.transpose() * g; // k x D
    Eigen::MatrixXd dC = E.cwiseProduct(dChat);
    tp.accum(iu, m.asDiagonal() * (bp->eigenvectors * dC));

    const int D = static_cast<int>(C.cols());
    Eigen::MatrixXd dtau(D, 1);
    for (int d = 0; d < D; d++) {
      if (clamped[d]) {
        dtau(d, 0) = 0.0;
        continue;
      }
      // d out / d t_d = Phi (-lambda .* E_d .* C_d)
      dtau(d, 0) = dChat.col(d)
                       .cwiseProduct(-bp->eigenvalues.cwiseProduct(E.col(d)).cwiseProduct(C.col(d)))
                       .sum();
    }
    tp.accum(itau, dtau);
  });
}

Tensor gradient_features(Tensor w, Tensor a_re, const Tensor* a_im) {
  Tape& t = same_tape(w, a_re);
  const Eigen::MatrixXd& W = w.value();
  if (W.cols() % 2 != 0) throw Error("gradient_features: W must have [Re | Im] channel pairs");
  const int D = static_cast<int>(W.cols()) / 2;
  const Eigen::MatrixXd& Are = a_re.value();
  if (Are.rows() != D || Are.cols() != D)
    throw Error("gradient_features: A must be D x D with D matching the channel count");
  const bool complex_mode = a_im != nullptr;
  if (complex_mode && (a_im->value().rows() != D || a_im->value().cols() != D))
    throw Error("gradient_features: A_im must be D x D");

  Eigen::MatrixXd Wre = W.leftCols(D), Wim = W.rightCols(D);
  Eigen::MatrixXd Yre, Yim;
  if (complex_mode) {
    const Eigen::MatrixXd& Aim = a_im->value();
    Yre = Wre * Are.transpose() - Wim * Aim.transpose();
    Yim = Wre * Aim.transpose() + Wim * Are.transpose();
  } else {
    Yre = Wre * Are.transpose();
    Yim = Wim * Are.transpose();
  }
  Eigen::MatrixXd S = Wre.cwiseProduct(Yre) + Wim.cwiseProduct(Yim);
  Eigen::MatrixXd G = S.array().tanh();

  int iw = w.id, ire = a_re.id;
  int iim = complex_mode ? a_im->id : -1;
  return t.emit(std::move(G), [iw, ire, iim, D, Wre, Wim, Yre, Yim](Tape& tp, int self) {
    const Eigen::MatrixXd& G = tp.value(self);
    Eigen::MatrixXd dS = tp.grad(self).cwiseProduct((1.0 - G.array().square()).matrix());

    Eigen::MatrixXd dYre = dS.cwiseProduct(Wre);
    Eigen::MatrixXd dYim = dS.cwiseProduct(Wim);
    Eigen::MatrixXd dWre = dS.cwiseProduct(Yre);
    Eigen::MatrixXd dWim = dS.cwiseProduct(Yim);

    const Eigen::MatrixXd& Are = tp.value(ire);
    if (iim >= 0) {
      const Eigen::MatrixXd& Aim = tp.value(iim);
      dWre += dYre * Are + dYim * Aim;
      dWim += -dYre * Aim + dYim * Are;
      tp.accum(iim, -dYre.transpose() * Wim + dYim.transpose() * Wre);
    } else {
      dWre += dYre * Are;
      dWim += dYim * Are;
    }
    tp.accum(ire, dYre.transpose() * Wre + dYim.transpose() * Wim);

    Eigen::MatrixXd dW(Wre.rows(), 2 * D);
    dW << dWre, dWim;
    tp.accum(iw, dW);
  });
}

Tensor cross_entropy_label_smoothed(Tensor logits, const std::vector<int>& targets,
                                    double alpha) {
  Tape& t = *logits.tape;
  const Eigen::MatrixXd& L = logits.value();
  const int N = static_cast<int>(L.rows());
  const int C = static_cast<int>(L.cols());
  if (static_cast<int>(targets.size()) != N)
    throw Error("cross_entropy: one target per logit row required");
  if (alpha < 0.0 || alpha >= 1.0) throw Error("cross_entropy: alpha must be in [0, 1)");
  for (int i = 0; i < N; i++)
    if (targets[i] < 0 || targets[i] >= C)
      throw Error("cross_entropy: class index " + std::to_string(targets[i]) +
                  " out of range [0, " + std::to_string(C) + ")");

  Eigen::MatrixXd P(N, C); // softmax, reused in backward
  double loss = 0.0;
  for (int i = 0; i < N; i++) {
    Eigen::RowVectorXd r = L.row(i);
    double mx = r.maxCoeff();
    Eigen::RowVectorXd sh = r.array() - mx;
    double lse = std::log(sh.array().exp().sum());
    Eigen::RowVectorXd logp = sh.array() - lse;
    P.row(i) = logp.array().exp();
    double row_loss = -alpha / C * logp.sum() - (1.0 - alpha) * logp[targets[i]];
    loss += row_loss;
  }
  loss /= N;

  int il = logits.id;
  std::vector<int> tg = targets;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = loss;
  return t.emit(std::move(out), [il, tg, alpha, P](Tape& tp, int self) {
    const double gscale = tp.grad(self)(0, 0) / static_cast<double>(P.rows());
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(P.rows(), P.cols(),
                                                  alpha / static_cast<double>(P.cols()));
    for (int i = 0; i < P.rows(); i++) q(i, tg[static_cast<size_t>(i)]) += 1.0 - alpha;
    tp.accum(il, gscale * (P - q));
  });
}

} // namespace ad
} // namespace dnet

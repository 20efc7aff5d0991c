#pragma once

#include "dnet/autodiff.h"
#include "dnet/rng.h"

#include <cmath>
#include <functional>
#include <vector>

namespace dnet_test {

// Central finite-difference oracle: perturbs every element of every listed
// parameter, compares (f(x+h) - f(x-h)) / 2h against the analytic gradient
// left in Param::grad by `run_backward`. Returns the worst relative error.
inline double fd_check(std::vector<dnet::ad::Param*> params,
                       const std::function<double()>& loss_value,
                       const std::function<void()>& run_backward) {
  for (auto* p : params) p->zero_grad();
  run_backward();
  std::vector<Eigen::MatrixXd> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); pi++) {
    dnet::ad::Param& p = *params[pi];
    for (int i = 0; i < p.value.rows(); i++) {
      for (int j = 0; j < p.value.cols(); j++) {
        double orig = p.value(i, j);
        double h = 1e-5 * std::max(1.0, std::abs(orig));
        p.value(i, j) = orig + h;
        double fp = loss_value();
        p.value(i, j) = orig - h;
        double fm = loss_value();
        p.value(i, j) = orig;
        double fd = (fp - fm) / (2.0 * h);
        double an = analytic[pi](i, j);
        double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, dnet::Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; i++)
    for (int j = 0; j < cols; j++) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

} // namespace dnet_test

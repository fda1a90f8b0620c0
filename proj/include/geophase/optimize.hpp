#pragma once

// Thin wrapper over GSL's quasi-Newton minimizer (vector_bfgs2).

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace geophase {

// Returns f(x); fills *grad when it is non-null.
using Objective = std::function<double(const Eigen::VectorXd &x, Eigen::VectorXd *grad)>;

struct MinimizeOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8; // on the gradient 2-norm
  double initial_step = 0.01;
  double line_tolerance = 0.1;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
};

MinimizeResult minimize_bfgs(const Objective &objective, const Eigen::VectorXd &x0,
                             const MinimizeOptions &options = {});

} // namespace geophase

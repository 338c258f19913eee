#pragma once

#include <vector>

#include <Eigen/Core>

namespace xrt {

struct BoxQpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Variables sitting on their lower / upper bound at the solution.
  std::vector<int> at_lower;
  std::vector<int> at_upper;
};

/// Primal active-set solver for
///
///   min 0.5 x'Hx + g'x   s.t.  lower <= x <= upper
///
/// H must be symmetric positive definite. Bounds may be infinite; a
/// variable with lower == upper is held fixed. lower <= upper is required.
BoxQpResult solve_box_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

double box_qp_objective(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                        const Eigen::VectorXd& x);

/// Infinity norm of x - clamp(x - (Hx + g)): zero exactly at a KKT point.
double box_qp_kkt_residual(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::VectorXd& x);

}  // namespace xrt

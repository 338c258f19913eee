#include "xrteleop/box_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "xrteleop/error.hpp"

namespace xrt {
namespace {

enum class Bound : signed char { Free = 0, Lower = -1, Upper = 1 };

}  // namespace

double box_qp_objective(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                        const Eigen::VectorXd& x) {
  return 0.5 * x.dot(hessian * x) + gradient.dot(x);
}

double box_qp_kkt_residual(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::VectorXd& x) {
  if (x.size() == 0) return 0.0;
  const Eigen::VectorXd grad = hessian * x + gradient;
  const Eigen::VectorXd projected = (x - grad).cwiseMax(lower).cwiseMin(upper);
  return (x - projected).lpNorm<Eigen::Infinity>();
}

BoxQpResult solve_box_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  const Eigen::Index n = gradient.size();
  if (hessian.rows() != n || hessian.cols() != n || lower.size() != n || upper.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "box QP operands disagree in size");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) throw Error(ErrorCode::InfeasibleBounds, "box QP bound with lower > upper");
  }

  BoxQpResult result;
  result.x = Eigen::VectorXd::Zero(n);
  std::vector<Bound> working(static_cast<std::size_t>(n), Bound::Free);

  // Feasible start: the origin clamped into the box.
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& w = working[static_cast<std::size_t>(i)];
    if (lower[i] > 0.0) {
      result.x[i] = lower[i];
      w = Bound::Lower;
    } else if (upper[i] < 0.0) {
      result.x[i] = upper[i];
      w = Bound::Upper;
    } else if (lower[i] == upper[i]) {
      w = Bound::Lower;
    }
  }

  const double scale = std::max(1.0, hessian.diagonal().cwiseAbs().maxCoeff() + gradient.cwiseAbs().maxCoeff());
  const double multiplier_tol = 1e-13 * scale;
  const int max_iterations = 50 + 10 * static_cast<int>(n);
  bool at_subspace_minimum = false;

  for (result.iterations = 0; result.iterations < max_iterations; ++result.iterations) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (working[static_cast<std::size_t>(i)] == Bound::Free) free.push_back(i);
    }

    if (!at_subspace_minimum && !free.empty()) {
      const Eigen::Index m = static_cast<Eigen::Index>(free.size());
      const Eigen::VectorXd grad = hessian * result.x + gradient;
      Eigen::MatrixXd hff(m, m);
      Eigen::VectorXd rhs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        rhs[a] = -grad[free[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < m; ++b) {
          hff(a, b) = hessian(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        }
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(hff);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::InvalidArgument, "box QP Hessian is not positive definite");
      }
      const Eigen::VectorXd step = llt.solve(rhs);

      double alpha = 1.0;
      Eigen::Index blocking = -1;
      Bound blocking_side = Bound::Free;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free[static_cast<std::size_t>(a)];
        const double p = step[a];
        if (p < 0.0 && std::isfinite(lower[i])) {
          const double t = (lower[i] - result.x[i]) / p;
          if (t < alpha) {
            alpha = t;
            blocking = i;
            blocking_side = Bound::Lower;
          }
        } else if (p > 0.0 && std::isfinite(upper[i])) {
          const double t = (upper[i] - result.x[i]) / p;
          if (t < alpha) {
            alpha = t;
            blocking = i;
            blocking_side = Bound::Upper;
          }
        }
      }
      alpha = std::max(alpha, 0.0);
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free[static_cast<std::size_t>(a)];
        result.x[i] = std::clamp(result.x[i] + alpha * step[a], lower[i], upper[i]);
      }
      if (blocking >= 0) {
        result.x[blocking] = blocking_side == Bound::Lower ? lower[blocking] : upper[blocking];
        working[static_cast<std::size_t>(blocking)] = blocking_side;
        continue;
      }
      at_subspace_minimum = true;
    }

    // Subspace minimum reached: release the bound with the most negative multiplier.
    const Eigen::VectorXd grad = hessian * result.x + gradient;
    Eigen::Index release = -1;
    double worst = -multiplier_tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Bound w = working[static_cast<std::size_t>(i)];
      if (w == Bound::Free || lower[i] == upper[i]) continue;
      const double lambda = w == Bound::Lower ? grad[i] : -grad[i];
      if (lambda < worst) {
        worst = lambda;
        release = i;
      }
    }
    if (release < 0) {
      result.converged = true;
      break;
    }
    working[static_cast<std::size_t>(release)] = Bound::Free;
    at_subspace_minimum = false;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (result.x[i] == lower[i]) result.at_lower.push_back(static_cast<int>(i));
    if (result.x[i] == upper[i]) result.at_upper.push_back(static_cast<int>(i));
  }
  result.objective = box_qp_objective(hessian, gradient, result.x);
  return result;
}

}  // namespace xrt

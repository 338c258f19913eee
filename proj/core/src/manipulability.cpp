#include <cmath>

#include "xrteleop/error.hpp"
#include "xrteleop/kinematics.hpp"

namespace xrt {

double manipulability(const Jacobian& jac, const RowSelection& rows) {
  const int k = rows.count();
  if (k == 0) return 0.0;
  if (k > jac.matrix.cols()) return 0.0;  // rank deficient by construction
  const Eigen::MatrixXd js = rows.select(jac.matrix);
  const Eigen::MatrixXd gram = js * js.transpose();
  const double det = gram.determinant();
  return det > 0.0 ? std::sqrt(det) : 0.0;
}

Eigen::VectorXd manipulability_gradient(const KinematicChain& chain, const Configuration& q,
                                        std::string_view frame, const RowSelection& rows, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be > 0");
  // Validates frame and dimensions even for dof 0.
  (void)jacobian(chain, q, frame);
  Eigen::VectorXd grad(chain.dof());
  Configuration probe = q;
  for (int j = 0; j < chain.dof(); ++j) {
    probe[j] = q[j] + step;
    const double up = manipulability(jacobian(chain, probe, frame), rows);
    probe[j] = q[j] - step;
    const double down = manipulability(jacobian(chain, probe, frame), rows);
    probe[j] = q[j];
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace xrt

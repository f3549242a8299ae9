#ifndef HMG_OPERATORS_HPP
#define HMG_OPERATORS_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "hmg/mesh.hpp"

namespace hmg {

// Nodal derivatives from the precomputed least-squares stencils.  Both expect
// an interior node; boundary nodes have no stencil.
Eigen::Vector2d field_gradient(const Field& f, std::size_t node);
Eigen::Matrix2d field_hessian(const Field& f, std::size_t node);

// a_ij(p) = delta_ij - p_i p_j / (1 + |p|^2)
Eigen::Matrix2d operator_coefficients(const Eigen::Vector2d& grad);

// Eigenvalues of a_ij(p) must lie in [1/(1+|p|^2), 1]; throws otherwise.
void assert_ellipticity(const Eigen::Vector2d& grad);

// Residual of the regularized operator
//   Q_eps[f] = Delta f - (f_i f_j / (1+|grad f|^2)) f_ij + n / max(f, eps)
// at interior nodes; boundary rows carry the Dirichlet defect f - g_eps with
// g_eps = eps.  With eps = 0 a nonpositive interior value is an error.
Field residual(const Field& f, double eps);

// Exact Jacobian of the residual (sparse, row per node).
Eigen::SparseMatrix<double> jacobian(const Field& f, double eps);

} // namespace hmg

#endif

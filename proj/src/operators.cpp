#include "hmg/operators.hpp"

#include <cmath>
#include <sstream>

namespace hmg {

namespace {

void require_interior(const Mesh& mesh, std::size_t node) {
  if (node >= mesh.node_count()) fail_invalid("node index out of range");
  if (mesh.boundary_flag[node]) {
    std::ostringstream os;
    os << "node " << node << " is a boundary node and has no difference stencil";
    fail_invalid(os.str());
  }
  const auto& st = mesh.stencil[node];
  if (st.end - st.begin < 5) {
    std::ostringstream os;
    os << "stencil unavailable at node " << node << ": only " << (st.end - st.begin)
       << " neighbors";
    fail(ErrorCode::runtime, os.str());
  }
}

} // namespace

Eigen::Vector2d field_gradient(const Field& f, std::size_t node) {
  const Mesh& mesh = *f.mesh;
  require_interior(mesh, node);
  const auto& st = mesh.stencil[node];
  double gx = 0, gy = 0;
  const double fc = f.values[node];
  for (std::int64_t m = st.begin; m < st.end; ++m) {
    double df = f.values[mesh.st_nbr[m]] - fc;
    gx += mesh.st_wx[m] * df;
    gy += mesh.st_wy[m] * df;
  }
  return {gx, gy};
}

Eigen::Matrix2d field_hessian(const Field& f, std::size_t node) {
  const Mesh& mesh = *f.mesh;
  require_interior(mesh, node);
  const auto& st = mesh.stencil[node];
  double hxx = 0, hxy = 0, hyy = 0;
  const double fc = f.values[node];
  for (std::int64_t m = st.begin; m < st.end; ++m) {
    double df = f.values[mesh.st_nbr[m]] - fc;
    hxx += mesh.st_wxx[m] * df;
    hxy += mesh.st_wxy[m] * df;
    hyy += mesh.st_wyy[m] * df;
  }
  Eigen::Matrix2d H;
  H << hxx, hxy, hxy, hyy;
  return H;
}

Eigen::Matrix2d operator_coefficients(const Eigen::Vector2d& g) {
  double denom = 1.0 + g.squaredNorm();
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity() - (g * g.transpose()) / denom;
  return a;
}

void assert_ellipticity(const Eigen::Vector2d& g) {
  Eigen::Matrix2d a = operator_coefficients(g);
  double tr = a.trace();
  double det = a.determinant();
  double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  double lmin = tr / 2.0 - disc;
  double lmax = tr / 2.0 + disc;
  double lo = 1.0 / (1.0 + g.squaredNorm());
  double tol = 1e-12 * (1.0 + g.squaredNorm());
  if (lmin < lo - tol || lmax > 1.0 + tol)
    fail(ErrorCode::runtime, "ellipticity violated: eigenvalues of a_ij out of range");
}

namespace {

inline double singular_term(double fval, double eps, int n) {
  return static_cast<double>(n) / std::max(fval, eps);
}

} // namespace

Field residual(const Field& f, double eps) {
  const Mesh& mesh = *f.mesh;
  const int n = 2;
  Field r;
  r.mesh = f.mesh;
  r.name = "residual";
  r.epsilon = eps;
  r.values.assign(mesh.node_count(), 0.0);
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    if (mesh.boundary_flag[i]) {
      r.values[i] = f.values[i] - eps;
      continue;
    }
    const double fc = f.values[i];
    if (eps <= 0 && fc <= 0) {
      std::ostringstream os;
      os << "nonpositive interior value " << fc << " at node " << i << " ("
         << mesh.pos[i].x() << ", " << mesh.pos[i].y() << ")";
      fail(ErrorCode::invalid_argument, os.str());
    }
    const auto& st = mesh.stencil[i];
    double gx = 0, gy = 0, hxx = 0, hxy = 0, hyy = 0;
    for (std::int64_t m = st.begin; m < st.end; ++m) {
      double df = f.values[mesh.st_nbr[m]] - fc;
      gx += mesh.st_wx[m] * df;
      gy += mesh.st_wy[m] * df;
      hxx += mesh.st_wxx[m] * df;
      hxy += mesh.st_wxy[m] * df;
      hyy += mesh.st_wyy[m] * df;
    }
    double denom = 1.0 + gx * gx + gy * gy;
    double gHg = gx * gx * hxx + 2.0 * gx * gy * hxy + gy * gy * hyy;
    assert_ellipticity(Eigen::Vector2d(gx, gy));
    r.values[i] = (hxx + hyy) - gHg / denom + singular_term(fc, eps, n);
  }
  return r;
}

Eigen::SparseMatrix<double> jacobian(const Field& f, double eps) {
  const Mesh& mesh = *f.mesh;
  const int n = 2;
  const std::size_t N = mesh.node_count();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(12 * N);
  for (std::size_t i = 0; i < N; ++i) {
    if (mesh.boundary_flag[i]) {
      trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      continue;
    }
    const auto& st = mesh.stencil[i];
    const double fc = f.values[i];
    double gx = 0, gy = 0, hxx = 0, hxy = 0, hyy = 0;
    for (std::int64_t m = st.begin; m < st.end; ++m) {
      double df = f.values[mesh.st_nbr[m]] - fc;
      gx += mesh.st_wx[m] * df;
      gy += mesh.st_wy[m] * df;
      hxx += mesh.st_wxx[m] * df;
      hxy += mesh.st_wxy[m] * df;
      hyy += mesh.st_wyy[m] * df;
    }
    double denom = 1.0 + gx * gx + gy * gy;
    double gHg = gx * gx * hxx + 2.0 * gx * gy * hxy + gy * gy * hyy;
    // dQ/dH : a_ij ; dQ/dg : c = -2 H g / denom + 2 (g.H.g) g / denom^2
    double axx = 1.0 - gx * gx / denom;
    double axy = -gx * gy / denom;
    double ayy = 1.0 - gy * gy / denom;
    double Hg_x = hxx * gx + hxy * gy;
    double Hg_y = hxy * gx + hyy * gy;
    double cx = -2.0 * Hg_x / denom + 2.0 * gHg * gx / (denom * denom);
    double cy = -2.0 * Hg_y / denom + 2.0 * gHg * gy / (denom * denom);
    double dsing = (fc > eps) ? -static_cast<double>(n) / (fc * fc) : 0.0;

    double self = dsing;
    for (std::int64_t m = st.begin; m < st.end; ++m) {
      double coeff = axx * mesh.st_wxx[m] + 2.0 * axy * mesh.st_wxy[m] + ayy * mesh.st_wyy[m] +
                     cx * mesh.st_wx[m] + cy * mesh.st_wy[m];
      trips.emplace_back(static_cast<int>(i), mesh.st_nbr[m], coeff);
      self -= coeff;
    }
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), self);
  }
  Eigen::SparseMatrix<double> J(static_cast<int>(N), static_cast<int>(N));
  J.setFromTriplets(trips.begin(), trips.end());
  J.makeCompressed();
  return J;
}

} // namespace hmg

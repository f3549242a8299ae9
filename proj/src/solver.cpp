#include "hmg/solver.hpp"

#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>
#include <sstream>

#include "hmg/jsonio.hpp"

namespace hmg {

std::vector<double> geometric_schedule(double from, double to, double ratio) {
  if (!(from > to) || !(to > 0) || !(ratio > 0) || !(ratio < 1))
    fail_invalid("schedule must be decreasing with ratio in (0,1)");
  std::vector<double> s;
  double v = from;
  while (v > to * (1.0 + 1e-12)) {
    s.push_back(v);
    v *= ratio;
  }
  s.push_back(to);
  return s;
}

namespace {

double max_norm(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double l2_norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct NewtonOutcome {
  int steps = 0;
  double residual_norm = 0;
  bool converged = false;
  std::vector<std::string> diagnostics;
};

class StageSolver {
public:
  explicit StageSolver(const SolverConfig& config) : config_(config) {}

  NewtonOutcome run(Field& f, double eps) {
    NewtonOutcome out;
    const double tol = config_.newton_tol_rel * (2.0 / eps);
    Field r = residual(f, eps);
    double rnorm = max_norm(r.values);
    double r2 = l2_norm(r.values);
    for (out.steps = 0; out.steps < config_.max_newton_steps; ++out.steps) {
      if (rnorm <= tol) {
        out.converged = true;
        break;
      }
      Eigen::SparseMatrix<double> J = jacobian(f, eps);
      if (!pattern_ready_) {
        lu_.analyzePattern(J);
        pattern_ready_ = true;
      }
      lu_.factorize(J);
      if (lu_.info() != Eigen::Success) {
        out.diagnostics.push_back("linear solver failed to factorize the Jacobian");
        break;
      }
      Eigen::VectorXd rhs(J.rows());
      for (std::size_t i = 0; i < r.values.size(); ++i) rhs[static_cast<int>(i)] = -r.values[i];
      Eigen::VectorXd delta = lu_.solve(rhs);
      if (lu_.info() != Eigen::Success) {
        out.diagnostics.push_back("linear solve failed");
        break;
      }
      // damped line search: require residual decrease and positivity
      double t = 1.0;
      bool accepted = false;
      Field trial = f;
      while (t >= config_.min_step) {
        for (std::size_t i = 0; i < f.values.size(); ++i)
          trial.values[i] = f.values[i] + t * delta[static_cast<int>(i)];
        double min_int = trial.min_interior_value();
        if (min_int > eps * config_.positivity_factor) {
          Field rt = residual(trial, eps);
          double rt2 = l2_norm(rt.values);
          if (rt2 < r2) {
            f.values.swap(trial.values);
            r = std::move(rt);
            r2 = rt2;
            rnorm = max_norm(r.values);
            accepted = true;
            break;
          }
        }
        t *= config_.damping_factor;
      }
      if (!accepted) {
        out.diagnostics.push_back(
            "line search stalled at eps=" + JsonWriter::format_double(eps) +
            " (residual oscillation; the mesh may be too coarse)");
        break;
      }
    }
    if (!out.converged && rnorm <= tol) out.converged = true;
    out.residual_norm = rnorm;
    return out;
  }

private:
  const SolverConfig& config_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  bool pattern_ready_ = false;
};

} // namespace

Field initial_guess(std::shared_ptr<const Mesh> mesh, double floor_value) {
  if (!(floor_value > 0)) fail_invalid("initial guess floor must be positive");
  Field f;
  f.mesh = mesh;
  f.name = "f";
  f.values.resize(mesh->node_count());
  for (std::size_t i = 0; i < mesh->node_count(); ++i)
    f.values[i] = mesh->boundary_flag[i] ? floor_value : std::max(mesh->dist[i], floor_value);
  return f;
}

SolveReport solve_on_mesh(std::shared_ptr<const Mesh> mesh, const SolverConfig& config,
                          const Field* warm_start) {
  auto t0 = std::chrono::steady_clock::now();
  if (config.eps_schedule.empty()) fail_invalid("eps schedule must not be empty");
  for (std::size_t i = 0; i + 1 < config.eps_schedule.size(); ++i)
    if (!(config.eps_schedule[i] > config.eps_schedule[i + 1]))
      fail_invalid("eps schedule must be strictly decreasing");

  SolveReport rep;
  rep.field.mesh = mesh;
  rep.field.name = "f";
  const double eps0 = config.eps_schedule.front();
  rep.field.values.resize(mesh->node_count());
  if (warm_start) {
    if (warm_start->values.size() != mesh->node_count())
      fail_invalid("warm start field does not match the mesh");
    rep.field.values = warm_start->values;
    for (std::size_t i = 0; i < mesh->node_count(); ++i) {
      if (mesh->boundary_flag[i])
        rep.field.values[i] = eps0;
      else
        rep.field.values[i] = std::max(rep.field.values[i], 0.5 * eps0);
    }
  } else {
    rep.field = initial_guess(mesh, eps0);
  }

  StageSolver stage(config);
  std::vector<double> prev;
  bool all_ok = true;
  for (double eps : config.eps_schedule) {
    for (std::size_t i = 0; i < mesh->node_count(); ++i)
      if (mesh->boundary_flag[i]) rep.field.values[i] = eps;
    NewtonOutcome out = stage.run(rep.field, eps);
    EpsStage st;
    st.eps = eps;
    st.newton_steps = out.steps;
    st.final_residual_norm = out.residual_norm;
    st.converged = out.converged;
    if (!prev.empty()) {
      double inc = 0;
      for (std::size_t i = 0; i < prev.size(); ++i)
        inc = std::max(inc, rep.field.values[i] - prev[i]);
      st.max_increase_vs_prev = inc;
    }
    prev = rep.field.values;
    rep.trajectory.push_back(st);
    for (auto& d : out.diagnostics) rep.diagnostics.push_back(d);
    if (!out.converged) {
      all_ok = false;
      rep.hit_max_steps = true;
      break;
    }
  }
  rep.converged = all_ok;
  rep.final_eps = rep.trajectory.empty() ? eps0 : rep.trajectory.back().eps;
  rep.final_residual_norm = rep.trajectory.empty() ? 0 : rep.trajectory.back().final_residual_norm;
  rep.field.epsilon = rep.final_eps;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

SolveReport solve(std::shared_ptr<const Domain> domain, const SolverConfig& config) {
  auto mesh = build_mesh(domain, config.mesh);
  return solve_on_mesh(mesh, config);
}

SolveReport solve_corner(std::shared_ptr<const Domain> domain, const SolverConfig& config) {
  const auto* inter = dynamic_cast<const IntersectionDomain*>(domain.get());
  if (!inter)
    fail_invalid("solve_corner requires a convex_intersection domain");
  if (inter->corners().empty()) fail_invalid("convex_intersection has no corners");
  if (config.smoothing_schedule.empty()) return solve(domain, config);

  auto t0 = std::chrono::steady_clock::now();
  Field carried;
  bool have_carry = false;
  for (double se : config.smoothing_schedule) {
    std::shared_ptr<const Domain> smooth = domain->smooth_approximation(se);
    auto mesh = build_mesh(smooth, config.mesh);
    Field warm;
    if (have_carry) {
      warm.mesh = mesh;
      warm.values.resize(mesh->node_count());
      for (std::size_t i = 0; i < mesh->node_count(); ++i)
        warm.values[i] = std::max(carried.mesh->value_at(carried.values, mesh->pos[i]), 0.0);
    }
    SolveReport r = solve_on_mesh(mesh, config, have_carry ? &warm : nullptr);
    if (!r.converged) {
      r.diagnostics.push_back("smoothing stage failed at eps=" + JsonWriter::format_double(se));
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return r;
    }
    carried = r.field;
    have_carry = true;
  }
  // final stage on the true corner domain; corner nodes are Dirichlet rows
  auto mesh = build_mesh(domain, config.mesh);
  Field warm;
  warm.mesh = mesh;
  warm.values.resize(mesh->node_count());
  for (std::size_t i = 0; i < mesh->node_count(); ++i)
    warm.values[i] = std::max(carried.mesh->value_at(carried.values, mesh->pos[i]), 0.0);
  SolveReport rep = solve_on_mesh(mesh, config, &warm);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string SolveReport::to_json(bool include_wall_time) const {
  JsonWriter w;
  w.begin_object();
  w.key("domain");
  field.mesh->domain->append_json(w);
  w.key("mesh").begin_object();
  w.kv("target_h", field.mesh->target_h);
  w.kv("grading", field.mesh->grading);
  w.kv("node_count", field.mesh->node_count());
  w.kv("interior_count", field.mesh->interior_count());
  w.kv("layer_count", field.mesh->layer_depths.size());
  w.kv("collar_depth", field.mesh->collar_depth);
  w.kv("hash", to_hex(field.mesh->hash));
  w.end_object();
  w.key("epsilon_trajectory").begin_array();
  for (const auto& st : trajectory) {
    w.begin_object();
    w.kv("eps", st.eps);
    w.kv("newton_steps", st.newton_steps);
    w.kv("residual_norm", st.final_residual_norm);
    w.kv("max_increase_vs_prev", st.max_increase_vs_prev);
    w.kv("converged", st.converged);
    w.end_object();
  }
  w.end_array();
  w.kv("converged", converged);
  w.kv("hit_max_steps", hit_max_steps);
  w.kv("final_eps", final_eps);
  w.kv("final_residual_norm", final_residual_norm);
  double fmax = -1e300, fmin = 1e300;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    fmax = std::max(fmax, field.values[i]);
    if (field.mesh->is_interior(i)) fmin = std::min(fmin, field.values[i]);
  }
  w.kv("f_max", fmax);
  w.kv("f_min_interior", fmin);
  w.key("diagnostics").begin_array();
  for (const auto& d : diagnostics) w.value(d);
  w.end_array();
  if (include_wall_time) w.kv("wall_time_s", wall_seconds);
  w.end_object();
  return w.take();
}

// --- radial solver ------------------------------------------------------------

namespace {

struct Tridiag {
  std::vector<double> lower, diag, upper;  // lower[i] couples to i-1, upper[i] to i+1
  void resize(std::size_t n) {
    lower.assign(n, 0);
    diag.assign(n, 0);
    upper.assign(n, 0);
  }
  // Thomas algorithm
  std::vector<double> solve(std::vector<double> rhs) const {
    const std::size_t n = diag.size();
    std::vector<double> c(n, 0.0), x(n, 0.0);
    double beta = diag[0];
    if (beta == 0) fail(ErrorCode::runtime, "singular tridiagonal system");
    x[0] = rhs[0] / beta;
    for (std::size_t i = 1; i < n; ++i) {
      c[i - 1] = upper[i - 1] / beta;
      beta = diag[i] - lower[i] * c[i - 1];
      if (beta == 0) fail(ErrorCode::runtime, "singular tridiagonal system");
      x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
  }
};

class RadialSystem {
public:
  RadialSystem(int n, double R, const RadialOptions& opts) : n_(n), R_(R) {
    // graded nodes from the boundary r = R toward the center
    const double diam = 2.0 * R;
    const double gamma = opts.grading;
    const double h = opts.target_h;
    double collar = 0.25 * diam;
    std::vector<double> depths{0.0};
    double c = h / (gamma * diam);
    for (std::int64_t k = 1;; ++k) {
      double d = diam * std::pow(k * c, gamma);
      if (d > collar) break;
      depths.push_back(d);
    }
    double spacing = depths.back() - depths[depths.size() - 2];
    double d = depths.back();
    while (d < R - 1e-12) {
      spacing = std::min(spacing * 1.35, h);
      d = std::min(d + spacing, R);
      depths.push_back(d);
    }
    // r sorted ascending: center first
    r_.resize(depths.size());
    for (std::size_t i = 0; i < depths.size(); ++i)
      r_[i] = R - depths[depths.size() - 1 - i];
    r_.front() = 0.0;
    r_.back() = R;
  }

  const std::vector<double>& nodes() const { return r_; }

  // residual and Jacobian of the radial operator
  //   Q = f'' / (1 + f'^2) + (n-1) f'/r + n / max(f, eps)
  // with symmetry at r = 0 and Dirichlet f(R) = eps.
  void assemble(const std::vector<double>& f, double eps, std::vector<double>* res,
                Tridiag* jac) const {
    const std::size_t M = r_.size();
    res->assign(M, 0.0);
    if (jac) jac->resize(M);
    for (std::size_t i = 0; i < M; ++i) {
      if (i == M - 1) {
        (*res)[i] = f[i] - eps;
        if (jac) jac->diag[i] = 1.0;
        continue;
      }
      double w1m = 0, w1c = 0, w1p = 0, w2m = 0, w2c = 0, w2p = 0;
      double fp, fpp;
      if (i == 0) {
        // symmetric center: f'(0) = 0, f'' from the mirrored 3-point formula
        double hp = r_[1] - r_[0];
        w2p = 2.0 / (hp * hp);
        w2c = -2.0 / (hp * hp);
        fp = 0.0;
        fpp = w2c * f[0] + w2p * f[1];
      } else {
        double hm = r_[i] - r_[i - 1];
        double hp = r_[i + 1] - r_[i];
        w1m = -hp / (hm * (hm + hp));
        w1p = hm / (hp * (hm + hp));
        w1c = -(w1m + w1p);
        w2m = 2.0 / (hm * (hm + hp));
        w2p = 2.0 / (hp * (hm + hp));
        w2c = -(w2m + w2p);
        fp = w1m * f[i - 1] + w1c * f[i] + w1p * f[i + 1];
        fpp = w2m * f[i - 1] + w2c * f[i] + w2p * f[i + 1];
      }
      double denom = 1.0 + fp * fp;
      double curv = (i == 0) ? n_ * fpp / denom : fpp / denom + (n_ - 1) * fp / r_[i];
      // at the center the angular terms contribute (n-1) f''(0)
      double sing = n_ / std::max(f[i], eps);
      (*res)[i] = curv + sing;
      if (jac) {
        double dQdfp, dQdfpp;
        if (i == 0) {
          dQdfpp = n_ / denom;
          dQdfp = -n_ * fpp * 2.0 * fp / (denom * denom);
        } else {
          dQdfpp = 1.0 / denom;
          dQdfp = -fpp * 2.0 * fp / (denom * denom) + (n_ - 1) / r_[i];
        }
        double dsing = (f[i] > eps) ? -n_ / (f[i] * f[i]) : 0.0;
        if (i > 0) jac->lower[i] = dQdfpp * w2m + dQdfp * w1m;
        jac->diag[i] = dQdfpp * w2c + dQdfp * w1c + dsing;
        jac->upper[i] = dQdfpp * w2p + dQdfp * w1p;
      }
    }
  }

private:
  int n_;
  double R_;
  std::vector<double> r_;
};

} // namespace

double RadialProfile::value_at(double radius) const {
  if (radius <= r.front()) return f.front();
  if (radius >= r.back()) return f.back();
  auto it = std::upper_bound(r.begin(), r.end(), radius);
  std::size_t i = static_cast<std::size_t>(it - r.begin());
  double t = (radius - r[i - 1]) / (r[i] - r[i - 1]);
  return (1 - t) * f[i - 1] + t * f[i];
}

std::string RadialProfile::to_json() const {
  JsonWriter w;
  w.begin_object();
  w.kv("n", n);
  w.kv("R", R);
  w.kv("converged", converged);
  w.kv("final_residual", final_residual);
  w.kv("node_count", r.size());
  w.kv("f_center", f.empty() ? 0.0 : f.front());
  w.end_object();
  return w.take();
}

RadialProfile solve_radial(int n, double R, const RadialOptions& opts) {
  if (n < 2) fail_invalid("radial solve requires n >= 2");
  if (!(R > 0)) fail_invalid("radial solve requires R > 0");
  RadialSystem sys(n, R, opts);
  const auto& r = sys.nodes();
  const std::size_t M = r.size();

  RadialProfile prof;
  prof.n = n;
  prof.R = R;
  prof.r = r;
  prof.f.resize(M);
  double eps0 = opts.eps_schedule.front();
  for (std::size_t i = 0; i < M; ++i) prof.f[i] = std::max(R - r[i], eps0);

  std::vector<double> res;
  Tridiag jac;
  bool all_ok = true;
  for (double eps : opts.eps_schedule) {
    prof.f.back() = eps;
    sys.assemble(prof.f, eps, &res, nullptr);
    double r2 = l2_norm(res);
    double tol = opts.newton_tol_rel * (n / eps);
    bool ok = false;
    for (int it = 0; it < opts.max_newton_steps; ++it) {
      if (max_norm(res) <= tol) {
        ok = true;
        break;
      }
      sys.assemble(prof.f, eps, &res, &jac);
      std::vector<double> rhs = res;
      for (auto& v : rhs) v = -v;
      std::vector<double> delta = jac.solve(rhs);
      double t = 1.0;
      bool accepted = false;
      std::vector<double> trial(M);
      while (t >= 9.5367431640625e-7) {
        for (std::size_t i = 0; i < M; ++i) trial[i] = prof.f[i] + t * delta[i];
        double mn = 1e300;
        for (std::size_t i = 0; i + 1 < M; ++i) mn = std::min(mn, trial[i]);
        if (mn > 0.5 * eps) {
          std::vector<double> res_t;
          sys.assemble(trial, eps, &res_t, nullptr);
          double rt2 = l2_norm(res_t);
          if (rt2 < r2) {
            prof.f.swap(trial);
            res.swap(res_t);
            r2 = rt2;
            accepted = true;
            break;
          }
        }
        t *= 0.5;
      }
      if (!accepted) break;
    }
    if (max_norm(res) <= tol) ok = true;
    if (!ok) {
      all_ok = false;
      break;
    }
  }
  prof.converged = all_ok;
  prof.final_residual = max_norm(res);
  return prof;
}

} // namespace hmg

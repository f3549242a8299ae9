#ifndef HMG_SOLVER_HPP
#define HMG_SOLVER_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hmg/mesh.hpp"
#include "hmg/operators.hpp"

namespace hmg {

std::vector<double> geometric_schedule(double from, double to, double ratio);

struct SolverConfig {
  MeshOptions mesh;
  // decreasing positive continuation values for the singular term; the
  // boundary value at stage eps is eps itself
  std::vector<double> eps_schedule = geometric_schedule(1e-1, 1e-6, 0.25);
  double newton_tol_rel = 1e-9;  // tolerance relative to the n/eps scale
  int max_newton_steps = 50;
  double damping_factor = 0.5;
  double min_step = 9.5367431640625e-7;  // 2^-20
  double positivity_factor = 0.5;        // reject iterates with min f <= eps * factor
  // domain-smoothing continuation for corner domains
  std::vector<double> smoothing_schedule = {1e-1, 1e-2, 1e-3};
  bool verbose = false;
};

struct EpsStage {
  double eps = 0;
  int newton_steps = 0;
  double final_residual_norm = 0;  // max-norm
  double max_increase_vs_prev = 0; // nodewise increase vs previous stage
  bool converged = false;
};

struct SolveReport {
  Field field;
  std::vector<EpsStage> trajectory;
  bool converged = false;
  bool hit_max_steps = false;
  double final_eps = 0;
  double final_residual_norm = 0;
  double wall_seconds = 0;
  std::vector<std::string> diagnostics;

  // serialized SolveReport; wall time is optional so reports stay
  // byte-deterministic when required
  std::string to_json(bool include_wall_time = true) const;
};

// max(d(x), floor) at interior nodes, floor at boundary nodes.
Field initial_guess(std::shared_ptr<const Mesh> mesh, double floor_value);

SolveReport solve_on_mesh(std::shared_ptr<const Mesh> mesh, const SolverConfig& config,
                          const Field* warm_start = nullptr);
SolveReport solve(std::shared_ptr<const Domain> domain, const SolverConfig& config);
// Smoothing continuation for convex-intersection domains with corners.
SolveReport solve_corner(std::shared_ptr<const Domain> domain, const SolverConfig& config);

// --- radial reduction -------------------------------------------------------

struct RadialOptions {
  double target_h = 1e-4;
  double grading = 4.0;
  std::vector<double> eps_schedule = geometric_schedule(1e-1, 1e-8, 0.25);
  double newton_tol_rel = 1e-9;
  int max_newton_steps = 60;
};

struct RadialProfile {
  int n = 2;
  double R = 1;
  std::vector<double> r;  // 0 = center ... R = boundary
  std::vector<double> f;
  bool converged = false;
  double final_residual = 0;
  double value_at(double radius) const;
  std::string to_json() const;
};

RadialProfile solve_radial(int n, double R, const RadialOptions& opts = {});

} // namespace hmg

#endif

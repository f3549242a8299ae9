#ifndef HMG_MESH_HPP
#define HMG_MESH_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hmg/geometry.hpp"

namespace hmg {

struct MeshOptions {
  double target_h = 0.02;   // interior / tangential spacing
  double grading = 3.0;     // gamma >= 1; normal spacing ~ h (d/diam)^(1-1/gamma)
  double collar_fraction = 0.10;  // graded collar depth as a fraction of diam
  double transition_growth = 1.35;
  int max_stencil = 16;
};

// Boundary-graded node cloud.  Nodes come in three groups: boundary samples
// (on the boundary), collar nodes marching inward along boundary normals with
// graded depths, and a uniform Cartesian core.  Interior nodes carry
// precomputed weighted least-squares stencils for gradient and Hessian.
class Mesh {
public:
  struct Stencil {
    // CSR ranges into the weight arrays below
    std::int64_t begin = 0, end = 0;
  };

  std::shared_ptr<const Domain> domain;
  double target_h = 0;
  double grading = 0;

  // node data
  std::vector<Vec2> pos;
  std::vector<double> dist;        // distance to the boundary (cached)
  std::vector<Vec2> nearest;       // nearest boundary point
  std::vector<Vec2> normal;        // inward normal direction
  std::vector<std::uint8_t> boundary_flag;
  std::vector<std::uint8_t> corner_flag;
  std::vector<int> ray;            // boundary-sample index for collar nodes, -1 for core
  std::vector<int> layer;          // 0 for boundary nodes, -1 for core

  // stencil data (empty ranges for boundary nodes)
  std::vector<Stencil> stencil;
  std::vector<int> st_nbr;
  std::vector<double> st_wx, st_wy, st_wxx, st_wxy, st_wyy;

  std::vector<double> layer_depths;  // graded depth schedule (layer k at depth[k])
  double collar_depth = 0;           // depth where graded layers end
  double layered_depth = 0;          // depth where the Cartesian core starts

  std::uint64_t hash = 0;

  std::size_t node_count() const { return pos.size(); }
  std::size_t interior_count() const;
  bool is_interior(std::size_t i) const { return boundary_flag[i] == 0; }

  int nearest_node(const Vec2& x) const;            // any node
  int nearest_interior_node(const Vec2& x) const;   // node with a stencil

  // Quadratic (Taylor) interpolation of nodal values at an arbitrary point.
  double value_at(const std::vector<double>& values, const Vec2& x) const;
  // Linear interpolation (gradient term only).
  double linear_value_at(const std::vector<double>& values, const Vec2& x) const;

  void write_mesh_txt(const std::string& path) const;

  // node lookup grid (built once)
  struct Grid {
    double cell = 0;
    Vec2 origin = Vec2::Zero();
    int nx = 0, ny = 0;
    std::vector<std::vector<int>> cells;
  };
  const Grid& grid() const { return grid_; }

private:
  friend class MeshBuilder;
  Grid grid_;
  void build_grid();
  template <typename Pred>
  int nearest_node_if(const Vec2& x, Pred&& keep) const;
};

std::shared_ptr<const Mesh> build_mesh(std::shared_ptr<const Domain> domain,
                                       const MeshOptions& opts);

// Nodal scalar field bound to a mesh.
struct Field {
  std::shared_ptr<const Mesh> mesh;
  std::vector<double> values;
  std::string name = "f";
  double epsilon = 0.0;  // regularization the field was produced with

  double max_value() const;
  double min_interior_value() const;
};

void write_field_csv(const Field& field, const std::string& path);
Field read_field_csv(std::shared_ptr<const Mesh> mesh, const std::string& path);

} // namespace hmg

#endif

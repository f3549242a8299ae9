#ifndef HMG_GEOMETRY_HPP
#define HMG_GEOMETRY_HPP

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hmg/error.hpp"
#include "hmg/jsonio.hpp"

namespace hmg {

using Vec2 = Eigen::Vector2d;

struct DistanceResult {
  double d = 0.0;               // distance to the boundary, >= 0
  Eigen::VectorXd nearest;      // a nearest boundary point
  bool inside = false;
};

// Allocation-free variant used on 2-D hot paths.
struct DistanceResult2 {
  double d = 0.0;
  Vec2 nearest = Vec2::Zero();
  bool inside = false;
};

struct BoundaryProbe {
  Eigen::VectorXd point;
  Eigen::VectorXd inward_normal;
  std::vector<double> principal_curvatures;  // inward convention; empty at corners
  std::optional<double> mean_curvature;      // arithmetic mean; absent at corners
  bool is_corner = false;
};

// One sample of a 2-D boundary parametrization.
struct BoundarySample {
  Vec2 point = Vec2::Zero();
  Vec2 inward_normal = Vec2::Zero();
  double curvature = 0.0;  // inward convention, >= 0 on convex boundaries
  bool is_corner = false;
  int family = 0;  // contiguous C^1 run the sample belongs to
};

// A smooth 2-D boundary piece (circular arc, straight segment, or a whole
// ellipse perimeter).  `s` is arclength along the piece.
class BoundaryPiece {
public:
  virtual ~BoundaryPiece() = default;
  virtual double length() const = 0;
  virtual BoundarySample at(double s) const = 0;
  virtual double distance(const Vec2& x, Vec2* foot = nullptr, double* foot_s = nullptr) const = 0;
  virtual bool closed() const { return false; }
};

struct BoundaryLoop {
  // Pieces in positive (counterclockwise) order.  corner_after[i] marks a
  // tangent discontinuity between piece i and piece i+1.
  std::vector<std::shared_ptr<const BoundaryPiece>> pieces;
  std::vector<bool> corner_after;
  double total_length() const;
};

class Domain {
public:
  virtual ~Domain() = default;

  virtual std::string kind() const = 0;
  virtual int dimension() const = 0;

  DistanceResult signed_distance(const Eigen::VectorXd& x) const;
  virtual BoundaryProbe boundary_probe(const Eigen::VectorXd& b) const = 0;
  virtual double diameter() const = 0;
  virtual std::unique_ptr<Domain> smooth_approximation(double eps) const = 0;
  virtual std::unique_ptr<Domain> clone() const = 0;

  // Fast 2-D distance (throws for n != 2 kinds other than through
  // signed_distance).
  virtual DistanceResult2 distance2(const Vec2& x) const = 0;

  // 2-D boundary description used by the mesher and samplers.
  virtual std::vector<BoundaryLoop> boundary_loops() const = 0;

  // Radius of the largest inscribed ball.
  virtual double inradius() const;

  // True if some boundary portion has zero curvature (flat pieces).
  virtual bool has_flat_boundary() const { return false; }

  // Largest |principal curvature| over the boundary (the paper's Lambda).
  virtual double max_abs_curvature() const = 0;

  void append_json(JsonWriter& w) const { append_json_impl(w); }
  std::string normalized_json() const;

  // Signed distance value: positive inside, negative outside.  Smooth across
  // smooth boundary pieces, so central differences of it are valid there.
  double signed_value(const Vec2& x) const {
    DistanceResult2 r = distance2(x);
    return r.inside ? r.d : -r.d;
  }

protected:
  virtual void append_json_impl(JsonWriter& w) const = 0;
  // n-dimensional distance for kinds supporting n != 2 (ball); default
  // rejects.
  virtual DistanceResult distance_nd(const Eigen::VectorXd& x) const;
};

// --- concrete kinds -------------------------------------------------------

class BallDomain final : public Domain {
public:
  BallDomain(Eigen::VectorXd center, double radius);
  std::string kind() const override { return "ball"; }
  int dimension() const override { return static_cast<int>(center_.size()); }
  BoundaryProbe boundary_probe(const Eigen::VectorXd& b) const override;
  double diameter() const override { return 2.0 * radius_; }
  std::unique_ptr<Domain> smooth_approximation(double eps) const override;
  std::unique_ptr<Domain> clone() const override;
  DistanceResult2 distance2(const Vec2& x) const override;
  std::vector<BoundaryLoop> boundary_loops() const override;
  double inradius() const override { return radius_; }
  double max_abs_curvature() const override { return 1.0 / radius_; }

  double radius() const { return radius_; }
  const Eigen::VectorXd& center() const { return center_; }

protected:
  void append_json_impl(JsonWriter& w) const override;
  DistanceResult distance_nd(const Eigen::VectorXd& x) const override;

private:
  Eigen::VectorXd center_;
  double radius_;
};

class EllipseDomain final : public Domain {
public:
  EllipseDomain(double a, double b, Vec2 center = Vec2::Zero());
  std::string kind() const override { return "ellipse"; }
  int dimension() const override { return 2; }
  BoundaryProbe boundary_probe(const Eigen::VectorXd& b) const override;
  double diameter() const override { return 2.0 * std::max(a_, b_); }
  std::unique_ptr<Domain> smooth_approximation(double eps) const override;
  std::unique_ptr<Domain> clone() const override;
  DistanceResult2 distance2(const Vec2& x) const override;
  std::vector<BoundaryLoop> boundary_loops() const override;
  double inradius() const override { return std::min(a_, b_); }
  double max_abs_curvature() const override;

  double semi_a() const { return a_; }
  double semi_b() const { return b_; }
  // Nearest point on the ellipse; accurate to ~1e-14.
  Vec2 project(const Vec2& x) const;
  double curvature_at_param(double theta) const;

protected:
  void append_json_impl(JsonWriter& w) const override;

private:
  double a_, b_;
  Vec2 center_;
};

// Closed convex C^1 chain of straight segments and circular arcs.  Stadium,
// rounded polygons and smoothed intersections all reduce to this.
class ArcChainDomain final : public Domain {
public:
  struct Piece {
    bool is_arc = false;
    // segment: p0 -> p1; arc: centered at c, radius r, ccw angles a0 -> a1
    Vec2 p0 = Vec2::Zero(), p1 = Vec2::Zero();
    Vec2 c = Vec2::Zero();
    double r = 0.0, a0 = 0.0, a1 = 0.0;
  };

  ArcChainDomain(std::vector<Piece> pieces, std::string display_kind,
                 std::string parameter_json_fragment);
  std::string kind() const override { return display_kind_; }
  int dimension() const override { return 2; }
  BoundaryProbe boundary_probe(const Eigen::VectorXd& b) const override;
  double diameter() const override;
  std::unique_ptr<Domain> smooth_approximation(double eps) const override;
  std::unique_ptr<Domain> clone() const override;
  DistanceResult2 distance2(const Vec2& x) const override;
  std::vector<BoundaryLoop> boundary_loops() const override;
  bool has_flat_boundary() const override;
  double max_abs_curvature() const override;

  const std::vector<Piece>& pieces() const { return pieces_; }

protected:
  void append_json_impl(JsonWriter& w) const override;

private:
  std::vector<Piece> pieces_;
  std::vector<std::shared_ptr<const BoundaryPiece>> built_;
  std::string display_kind_;
  std::string parameter_json_;
  mutable double cached_diameter_ = -1.0;
};

// Intersection of finitely many disks with strictly positive boundary
// curvature; the boundary is a corner loop of circular arcs.
class IntersectionDomain final : public Domain {
public:
  struct Member {
    Vec2 center;
    double radius;
  };

  explicit IntersectionDomain(std::vector<Member> members);
  std::string kind() const override { return "convex_intersection"; }
  int dimension() const override { return 2; }
  BoundaryProbe boundary_probe(const Eigen::VectorXd& b) const override;
  double diameter() const override;
  std::unique_ptr<Domain> smooth_approximation(double eps) const override;
  std::unique_ptr<Domain> clone() const override;
  DistanceResult2 distance2(const Vec2& x) const override;
  std::vector<BoundaryLoop> boundary_loops() const override;
  double max_abs_curvature() const override;

  const std::vector<Member>& members() const { return members_; }
  const std::vector<Vec2>& corners() const { return corners_; }

protected:
  void append_json_impl(JsonWriter& w) const override;

private:
  struct BoundaryArc {
    int member;
    double a0, a1;  // ccw angle range on the member circle
  };
  std::vector<Member> members_;
  std::vector<BoundaryArc> arcs_;  // ordered along the loop
  std::vector<Vec2> corners_;      // corner after arcs_[i]
  mutable double cached_diameter_ = -1.0;
};

// --- factories and serialization ------------------------------------------

std::unique_ptr<Domain> make_ball(const Eigen::VectorXd& center, double radius);
std::unique_ptr<Domain> make_ball2(const Vec2& center, double radius);
std::unique_ptr<Domain> make_ellipse(double a, double b, Vec2 center = Vec2::Zero());
std::unique_ptr<Domain> make_stadium(double length, double cap_radius);
std::unique_ptr<Domain> make_rounded_polygon(const std::vector<Vec2>& vertices, double fillet_radius);
std::unique_ptr<Domain> make_intersection(const std::vector<IntersectionDomain::Member>& members);

std::unique_ptr<Domain> domain_from_json(const std::string& json_text);
std::unique_ptr<Domain> domain_from_file(const std::string& path);

// Generic helpers shared by kinds.
double generic_diameter(const std::vector<BoundaryLoop>& loops, double rel_tol = 1e-7);
double generic_inradius(const Domain& dom);

// Uniformly spaced boundary sampling (arclength step ~ h); corner points of
// intersection loops are always included and flagged.
std::vector<BoundarySample> sample_boundary(const Domain& dom, double h);

} // namespace hmg

#endif

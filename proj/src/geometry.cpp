#include "hmg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hmg {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a, double lo) {
  // representative of a in [lo, lo + 2*pi)
  double t = std::fmod(a - lo, 2.0 * kPi);
  if (t < 0) t += 2.0 * kPi;
  return lo + t;
}

Vec2 dir(double angle) { return Vec2(std::cos(angle), std::sin(angle)); }

Vec2 as_vec2(const Eigen::VectorXd& x) {
  if (x.size() != 2) fail_invalid("expected a 2-D point");
  return Vec2(x[0], x[1]);
}

Eigen::VectorXd as_dyn(const Vec2& x) {
  Eigen::VectorXd v(2);
  v << x[0], x[1];
  return v;
}

// --- boundary pieces -------------------------------------------------------

class SegmentPiece final : public BoundaryPiece {
public:
  SegmentPiece(Vec2 p0, Vec2 p1) : p0_(p0), p1_(p1) {
    len_ = (p1_ - p0_).norm();
    if (len_ <= 0) fail_invalid("degenerate segment piece");
    tangent_ = (p1_ - p0_) / len_;
    normal_ = Vec2(-tangent_.y(), tangent_.x());  // interior on the left of a ccw loop
  }
  double length() const override { return len_; }
  BoundarySample at(double s) const override {
    BoundarySample b;
    b.point = p0_ + std::clamp(s, 0.0, len_) * tangent_;
    b.inward_normal = normal_;
    b.curvature = 0.0;
    return b;
  }
  double distance(const Vec2& x, Vec2* foot, double* foot_s) const override {
    double s = std::clamp((x - p0_).dot(tangent_), 0.0, len_);
    Vec2 f = p0_ + s * tangent_;
    if (foot) *foot = f;
    if (foot_s) *foot_s = s;
    return (x - f).norm();
  }

private:
  Vec2 p0_, p1_, tangent_, normal_;
  double len_;
};

class ArcPiece final : public BoundaryPiece {
public:
  // ccw arc of a convex boundary: the disk center lies on the interior side
  ArcPiece(Vec2 c, double r, double a0, double a1) : c_(c), r_(r), a0_(a0), a1_(a1) {
    if (r <= 0) fail_invalid("arc radius must be positive");
    if (a1_ <= a0_) fail_invalid("arc angles must be increasing");
  }
  double length() const override { return r_ * (a1_ - a0_); }
  bool closed() const override { return a1_ - a0_ >= 2.0 * kPi - 1e-12; }
  BoundarySample at(double s) const override {
    double phi = a0_ + std::clamp(s, 0.0, length()) / r_;
    BoundarySample b;
    b.point = c_ + r_ * dir(phi);
    b.inward_normal = -dir(phi);
    b.curvature = 1.0 / r_;
    return b;
  }
  double distance(const Vec2& x, Vec2* foot, double* foot_s) const override {
    Vec2 rel = x - c_;
    double rho = rel.norm();
    double phi = (rho > 0) ? std::atan2(rel.y(), rel.x()) : a0_;
    if (closed()) {
      phi = wrap_angle(phi, a0_);
      if (foot) *foot = c_ + r_ * dir(phi);
      if (foot_s) *foot_s = (phi - a0_) * r_;
      return std::abs(rho - r_);
    }
    double mid = 0.5 * (a0_ + a1_);
    phi = wrap_angle(phi, mid - kPi);
    if (phi >= a0_ && phi <= a1_) {
      if (foot) *foot = c_ + r_ * dir(phi);
      if (foot_s) *foot_s = (phi - a0_) * r_;
      return std::abs(rho - r_);
    }
    Vec2 e0 = c_ + r_ * dir(a0_), e1 = c_ + r_ * dir(a1_);
    double d0 = (x - e0).norm(), d1 = (x - e1).norm();
    if (d0 <= d1) {
      if (foot) *foot = e0;
      if (foot_s) *foot_s = 0.0;
      return d0;
    }
    if (foot) *foot = e1;
    if (foot_s) *foot_s = length();
    return d1;
  }

private:
  Vec2 c_;
  double r_, a0_, a1_;
};

// Whole ellipse perimeter as a single closed piece with a cached arclength
// table for sampling.
class EllipsePerimeterPiece final : public BoundaryPiece {
public:
  EllipsePerimeterPiece(const EllipseDomain* owner, double a, double b, Vec2 c)
      : owner_(owner), a_(a), b_(b), c_(c) {
    const int n = 8192;
    cum_.resize(n + 1);
    cum_[0] = 0.0;
    double prev = speed(0.0);
    for (int i = 1; i <= n; ++i) {
      double t = 2.0 * kPi * i / n;
      double cur = speed(t);
      cum_[i] = cum_[i - 1] + 0.5 * (prev + cur) * (2.0 * kPi / n);
      prev = cur;
    }
  }
  double length() const override { return cum_.back(); }
  bool closed() const override { return true; }
  BoundarySample at(double s) const override {
    double theta = param_of_arclength(s);
    BoundarySample out;
    out.point = c_ + Vec2(a_ * std::cos(theta), b_ * std::sin(theta));
    Vec2 outward(std::cos(theta) / a_, std::sin(theta) / b_);
    out.inward_normal = -outward.normalized();
    out.curvature = owner_->curvature_at_param(theta);
    return out;
  }
  double distance(const Vec2& x, Vec2* foot, double* foot_s) const override {
    Vec2 f = owner_->project(x);
    if (foot) *foot = f;
    if (foot_s) {
      Vec2 rel = f - c_;
      double theta = std::atan2(rel.y() / b_, rel.x() / a_);
      *foot_s = arclength_of_param(wrap_angle(theta, 0.0));
    }
    return (x - f).norm();
  }

private:
  double speed(double t) const {
    double st = std::sin(t), ct = std::cos(t);
    return std::sqrt(a_ * a_ * st * st + b_ * b_ * ct * ct);
  }
  double arclength_of_param(double theta) const {
    double u = theta / (2.0 * kPi) * (cum_.size() - 1);
    int i = std::clamp(static_cast<int>(u), 0, static_cast<int>(cum_.size()) - 2);
    double frac = u - i;
    return cum_[i] + frac * (cum_[i + 1] - cum_[i]);
  }
  double param_of_arclength(double s) const {
    s = std::fmod(s, length());
    if (s < 0) s += length();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    int i = std::clamp(static_cast<int>(it - cum_.begin()) - 1, 0,
                       static_cast<int>(cum_.size()) - 2);
    double dt = 2.0 * kPi / (cum_.size() - 1);
    return dt * i + (s - cum_[i]) / std::max(1e-300, cum_[i + 1] - cum_[i]) * dt;
  }
  const EllipseDomain* owner_;
  double a_, b_;
  Vec2 c_;
  std::vector<double> cum_;
};

} // namespace

double BoundaryLoop::total_length() const {
  double L = 0;
  for (const auto& p : pieces) L += p->length();
  return L;
}

// --- Domain base ------------------------------------------------------------

DistanceResult Domain::signed_distance(const Eigen::VectorXd& x) const {
  for (int i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i])) fail_invalid("signed_distance: point has non-finite coordinates");
  if (x.size() == 2 && dimension() == 2) {
    DistanceResult2 r = distance2(Vec2(x[0], x[1]));
    DistanceResult out;
    out.d = r.d;
    out.nearest = as_dyn(r.nearest);
    out.inside = r.inside;
    return out;
  }
  return distance_nd(x);
}

DistanceResult Domain::distance_nd(const Eigen::VectorXd&) const {
  fail_unsupported("domain kind " + kind() + " supports only n = 2");
}

std::string Domain::normalized_json() const {
  JsonWriter w;
  append_json(w);
  return w.take();
}

double Domain::inradius() const { return generic_inradius(*this); }

// --- BallDomain --------------------------------------------------------------

BallDomain::BallDomain(Eigen::VectorXd center, double radius)
    : center_(std::move(center)), radius_(radius) {
  if (center_.size() < 2) fail_invalid("ball dimension must be >= 2");
  if (!(radius_ > 0) || !std::isfinite(radius_)) fail_invalid("ball radius must be positive");
}

DistanceResult2 BallDomain::distance2(const Vec2& x) const {
  if (center_.size() != 2) fail_unsupported("2-D query on a ball of dimension != 2");
  Vec2 c(center_[0], center_[1]);
  Vec2 rel = x - c;
  double rho = rel.norm();
  DistanceResult2 out;
  out.inside = rho <= radius_;
  out.d = std::abs(radius_ - rho);
  out.nearest = rho > 1e-300 ? Vec2(c + (radius_ / rho) * rel) : Vec2(c + Vec2(radius_, 0));
  return out;
}

DistanceResult BallDomain::distance_nd(const Eigen::VectorXd& x) const {
  if (x.size() != center_.size()) fail_invalid("point dimension mismatch");
  Eigen::VectorXd rel = x - center_;
  double rho = rel.norm();
  DistanceResult out;
  out.inside = rho <= radius_;
  out.d = std::abs(radius_ - rho);
  if (rho > 1e-300) {
    out.nearest = center_ + (radius_ / rho) * rel;
  } else {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(center_.size());
    e[0] = radius_;
    out.nearest = center_ + e;
  }
  return out;
}

BoundaryProbe BallDomain::boundary_probe(const Eigen::VectorXd& b) const {
  if (b.size() != center_.size()) fail_invalid("point dimension mismatch");
  Eigen::VectorXd rel = b - center_;
  double rho = rel.norm();
  if (std::abs(rho - radius_) > 1e-8) fail_invalid("probe point is not on the ball boundary");
  BoundaryProbe p;
  p.point = b;
  p.inward_normal = -rel / rho;
  p.principal_curvatures.assign(center_.size() - 1, 1.0 / radius_);
  p.mean_curvature = 1.0 / radius_;
  p.is_corner = false;
  return p;
}

std::unique_ptr<Domain> BallDomain::smooth_approximation(double eps) const {
  if (!(eps > 0)) fail_invalid("smoothing eps must be positive");
  return clone();
}

std::unique_ptr<Domain> BallDomain::clone() const {
  return std::make_unique<BallDomain>(center_, radius_);
}

std::vector<BoundaryLoop> BallDomain::boundary_loops() const {
  if (center_.size() != 2) fail_unsupported("boundary loops are only available for 2-D domains");
  BoundaryLoop loop;
  loop.pieces.push_back(
      std::make_shared<ArcPiece>(Vec2(center_[0], center_[1]), radius_, 0.0, 2.0 * kPi));
  loop.corner_after.push_back(false);
  return {loop};
}

void BallDomain::append_json_impl(JsonWriter& w) const {
  w.begin_object();
  w.kv("kind", "ball");
  w.kv("n", static_cast<int>(center_.size()));
  w.key("center").begin_array();
  for (int i = 0; i < center_.size(); ++i) w.value(center_[i]);
  w.end_array();
  w.kv("radius", radius_);
  w.end_object();
}

// --- EllipseDomain ------------------------------------------------------------

EllipseDomain::EllipseDomain(double a, double b, Vec2 center) : a_(a), b_(b), center_(center) {
  if (!(a > 0) || !(b > 0)) fail_invalid("ellipse semi-axes must be positive");
}

double EllipseDomain::curvature_at_param(double theta) const {
  double st = std::sin(theta), ct = std::cos(theta);
  double m = a_ * a_ * st * st + b_ * b_ * ct * ct;
  return a_ * b_ / (m * std::sqrt(m));
}

double EllipseDomain::max_abs_curvature() const {
  return std::max(a_ / (b_ * b_), b_ / (a_ * a_));
}

Vec2 EllipseDomain::project(const Vec2& x) const {
  // Robust nearest-point computation: bisection on the radial multiplier
  // (Eberly's scheme), working in the frame with e0 >= e1.
  Vec2 q = x - center_;
  bool swapped = a_ < b_;
  double e0 = swapped ? b_ : a_;
  double e1 = swapped ? a_ : b_;
  double y0 = swapped ? q.y() : q.x();
  double y1 = swapped ? q.x() : q.y();
  double s0 = y0 < 0 ? -1.0 : 1.0;
  double s1 = y1 < 0 ? -1.0 : 1.0;
  y0 = std::abs(y0);
  y1 = std::abs(y1);

  double fx0, fx1;  // foot in the normalized quadrant
  if (y1 > 1e-300) {
    if (y0 > 1e-300) {
      auto F = [&](double t) {
        double r0 = e0 * y0 / (t + e0 * e0);
        double r1 = e1 * y1 / (t + e1 * e1);
        return r0 * r0 + r1 * r1 - 1.0;
      };
      // F decreases on (-e1^2, inf); bracket then bisect
      double t_lo = -e1 * e1 + e1 * y1;
      double t_hi = -e1 * e1 + std::sqrt(e0 * e0 * y0 * y0 + e1 * e1 * y1 * y1);
      if (t_hi <= t_lo) t_hi = t_lo + std::max(1.0, std::abs(t_lo)) * 1e-3;
      int it = 0;
      for (; it < 200; ++it) {
        double t = 0.5 * (t_lo + t_hi);
        if (t == t_lo || t == t_hi) break;
        if (F(t) >= 0)
          t_lo = t;
        else
          t_hi = t;
      }
      double t = 0.5 * (t_lo + t_hi);
      if (!std::isfinite(t))
        fail(ErrorCode::runtime, "ellipse projection failed to converge; last iterate t=" +
                                     JsonWriter::format_double(t));
      fx0 = e0 * e0 * y0 / (t + e0 * e0);
      fx1 = e1 * e1 * y1 / (t + e1 * e1);
    } else {
      fx0 = 0.0;
      fx1 = e1;
    }
  } else {
    double crit = (e0 * e0 - e1 * e1) / e0;
    if (y0 < crit) {
      fx0 = e0 * e0 * y0 / (e0 * e0 - e1 * e1);
      double r = fx0 / e0;
      fx1 = e1 * std::sqrt(std::max(0.0, 1.0 - r * r));
    } else {
      fx0 = e0;
      fx1 = 0.0;
    }
  }
  fx0 *= s0;
  fx1 *= s1;
  Vec2 foot = swapped ? Vec2(fx1, fx0) : Vec2(fx0, fx1);
  return foot + center_;
}

DistanceResult2 EllipseDomain::distance2(const Vec2& x) const {
  Vec2 f = project(x);
  DistanceResult2 out;
  out.d = (x - f).norm();
  out.nearest = f;
  Vec2 rel = x - center_;
  double level = rel.x() * rel.x() / (a_ * a_) + rel.y() * rel.y() / (b_ * b_);
  out.inside = level <= 1.0 + 1e-14;
  return out;
}

BoundaryProbe EllipseDomain::boundary_probe(const Eigen::VectorXd& bd) const {
  Vec2 b = as_vec2(bd);
  Vec2 f = project(b);
  if ((b - f).norm() > 1e-8) fail_invalid("probe point is not on the ellipse boundary");
  Vec2 rel = f - center_;
  double theta = std::atan2(rel.y() / b_, rel.x() / a_);
  BoundaryProbe p;
  p.point = as_dyn(f);
  Vec2 outward(std::cos(theta) / a_, std::sin(theta) / b_);
  p.inward_normal = as_dyn(Vec2(-outward.normalized()));
  p.principal_curvatures = {curvature_at_param(theta)};
  p.mean_curvature = p.principal_curvatures[0];
  p.is_corner = false;
  return p;
}

std::unique_ptr<Domain> EllipseDomain::smooth_approximation(double eps) const {
  if (!(eps > 0)) fail_invalid("smoothing eps must be positive");
  return clone();
}

std::unique_ptr<Domain> EllipseDomain::clone() const {
  return std::make_unique<EllipseDomain>(a_, b_, center_);
}

std::vector<BoundaryLoop> EllipseDomain::boundary_loops() const {
  BoundaryLoop loop;
  loop.pieces.push_back(std::make_shared<EllipsePerimeterPiece>(this, a_, b_, center_));
  loop.corner_after.push_back(false);
  return {loop};
}

void EllipseDomain::append_json_impl(JsonWriter& w) const {
  w.begin_object();
  w.kv("kind", "ellipse");
  w.kv("n", 2);
  w.key("center").begin_array().value(center_.x()).value(center_.y()).end_array();
  w.key("semi_axes").begin_array().value(a_).value(b_).end_array();
  w.end_object();
}

// --- ArcChainDomain ------------------------------------------------------------

namespace {

Vec2 piece_start(const ArcChainDomain::Piece& p) {
  return p.is_arc ? Vec2(p.c + p.r * dir(p.a0)) : p.p0;
}
Vec2 piece_end(const ArcChainDomain::Piece& p) {
  return p.is_arc ? Vec2(p.c + p.r * dir(p.a1)) : p.p1;
}
Vec2 piece_start_tangent(const ArcChainDomain::Piece& p) {
  if (!p.is_arc) return (p.p1 - p.p0).normalized();
  return Vec2(-std::sin(p.a0), std::cos(p.a0));
}
Vec2 piece_end_tangent(const ArcChainDomain::Piece& p) {
  if (!p.is_arc) return (p.p1 - p.p0).normalized();
  return Vec2(-std::sin(p.a1), std::cos(p.a1));
}

std::shared_ptr<const BoundaryPiece> build_piece(const ArcChainDomain::Piece& p) {
  if (p.is_arc) return std::make_shared<ArcPiece>(p.c, p.r, p.a0, p.a1);
  return std::make_shared<SegmentPiece>(p.p0, p.p1);
}

} // namespace

ArcChainDomain::ArcChainDomain(std::vector<Piece> pieces, std::string display_kind,
                               std::string parameter_json_fragment)
    : pieces_(std::move(pieces)),
      display_kind_(std::move(display_kind)),
      parameter_json_(std::move(parameter_json_fragment)) {
  if (pieces_.empty()) fail_invalid("arc chain needs at least one piece");
  const std::size_t m = pieces_.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Piece& cur = pieces_[i];
    const Piece& nxt = pieces_[(i + 1) % m];
    if ((piece_end(cur) - piece_start(nxt)).norm() > 1e-9)
      fail_invalid("arc chain pieces do not connect");
    if (m > 1 && (piece_end_tangent(cur) - piece_start_tangent(nxt)).norm() > 1e-7)
      fail_invalid("arc chain is not C^1 at a junction");
  }
  for (const auto& p : pieces_) built_.push_back(build_piece(p));
}

DistanceResult2 ArcChainDomain::distance2(const Vec2& x) const {
  double best = std::numeric_limits<double>::infinity();
  Vec2 best_foot = Vec2::Zero();
  Vec2 best_normal = Vec2::Zero();
  for (const auto& bp : built_) {
    Vec2 foot;
    double s;
    double d = bp->distance(x, &foot, &s);
    if (d < best) {
      best = d;
      best_foot = foot;
      best_normal = bp->at(s).inward_normal;
    }
  }
  DistanceResult2 out;
  out.d = best;
  out.nearest = best_foot;
  out.inside = (x - best_foot).dot(best_normal) >= -1e-14;
  return out;
}

BoundaryProbe ArcChainDomain::boundary_probe(const Eigen::VectorXd& bd) const {
  Vec2 b = as_vec2(bd);
  double best = std::numeric_limits<double>::infinity();
  BoundarySample sample;
  for (const auto& bp : built_) {
    Vec2 foot;
    double s;
    double d = bp->distance(b, &foot, &s);
    if (d < best) {
      best = d;
      sample = bp->at(s);
    }
  }
  if (best > 1e-8) fail_invalid("probe point is not on the boundary");
  BoundaryProbe p;
  p.point = as_dyn(sample.point);
  p.inward_normal = as_dyn(sample.inward_normal);
  p.principal_curvatures = {sample.curvature};
  p.mean_curvature = sample.curvature;
  p.is_corner = false;
  return p;
}

double ArcChainDomain::diameter() const {
  if (cached_diameter_ < 0) cached_diameter_ = generic_diameter(boundary_loops());
  return cached_diameter_;
}

std::unique_ptr<Domain> ArcChainDomain::smooth_approximation(double eps) const {
  if (!(eps > 0)) fail_invalid("smoothing eps must be positive");
  // Already C^1 with piecewise-constant curvature: its own approximation.
  return clone();
}

std::unique_ptr<Domain> ArcChainDomain::clone() const {
  return std::make_unique<ArcChainDomain>(pieces_, display_kind_, parameter_json_);
}

std::vector<BoundaryLoop> ArcChainDomain::boundary_loops() const {
  BoundaryLoop loop;
  for (const auto& bp : built_) {
    loop.pieces.push_back(bp);
    loop.corner_after.push_back(false);
  }
  return {loop};
}

bool ArcChainDomain::has_flat_boundary() const {
  for (const auto& p : pieces_)
    if (!p.is_arc) return true;
  return false;
}

double ArcChainDomain::max_abs_curvature() const {
  double m = 0;
  for (const auto& p : pieces_)
    if (p.is_arc) m = std::max(m, 1.0 / p.r);
  return m;
}

void ArcChainDomain::append_json_impl(JsonWriter& w) const {
  w.begin_object();
  w.kv("kind", display_kind_);
  w.kv("n", 2);
  if (!parameter_json_.empty()) {
    w.raw_members(parameter_json_);
    w.end_object();
    return;
  }
  w.key("pieces").begin_array();
  for (const auto& p : pieces_) {
    w.begin_object();
    if (p.is_arc) {
      w.kv("type", "arc");
      w.key("center").begin_array().value(p.c.x()).value(p.c.y()).end_array();
      w.kv("radius", p.r);
      w.kv("a0", p.a0);
      w.kv("a1", p.a1);
    } else {
      w.kv("type", "segment");
      w.key("p0").begin_array().value(p.p0.x()).value(p.p0.y()).end_array();
      w.key("p1").begin_array().value(p.p1.x()).value(p.p1.y()).end_array();
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
}

// --- IntersectionDomain ---------------------------------------------------------

namespace {

struct AngleInterval {
  double lo, hi;  // hi > lo, hi - lo <= 2*pi
};

std::vector<AngleInterval> intersect_intervals(const std::vector<AngleInterval>& full,
                                               const AngleInterval& cut) {
  std::vector<AngleInterval> out;
  for (const auto& iv : full) {
    for (int shift = -1; shift <= 1; ++shift) {
      double lo = cut.lo + 2.0 * kPi * shift;
      double hi = cut.hi + 2.0 * kPi * shift;
      double a = std::max(iv.lo, lo), b = std::min(iv.hi, hi);
      if (b - a > 1e-12) out.push_back({a, b});
    }
  }
  return out;
}

// Merge intervals that abut (possibly across the 2*pi wrap) so that smooth
// points of the boundary are not split into fake corners.
std::vector<AngleInterval> merge_intervals(std::vector<AngleInterval> in) {
  if (in.empty()) return in;
  for (auto& iv : in) {
    double w = iv.hi - iv.lo;
    iv.lo = wrap_angle(iv.lo, 0.0);
    iv.hi = iv.lo + w;
  }
  std::sort(in.begin(), in.end(), [](const AngleInterval& a, const AngleInterval& b) {
    return a.lo < b.lo;
  });
  std::vector<AngleInterval> out;
  for (const auto& iv : in) {
    if (!out.empty() && iv.lo <= out.back().hi + 1e-9) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  // wrap merge
  if (out.size() > 1) {
    if (out.front().lo + 2.0 * kPi <= out.back().hi + 1e-9) {
      out.front().lo = out.back().lo - 2.0 * kPi;
      out.front().hi = std::max(out.front().hi, out.back().hi - 2.0 * kPi);
      out.pop_back();
    }
  }
  return out;
}

} // namespace

IntersectionDomain::IntersectionDomain(std::vector<Member> members)
    : members_(std::move(members)) {
  if (members_.size() < 2) fail_invalid("convex_intersection needs at least two members");
  for (const auto& m : members_) {
    if (!(m.radius > 0) || !std::isfinite(m.radius))
      fail_invalid("convex_intersection members must have strictly positive boundary mean "
                   "curvature (finite positive radius)");
  }

  struct RawArc {
    int member;
    double a0, a1;
  };
  std::vector<RawArc> raw;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    std::vector<AngleInterval> vis = {{0.0, 2.0 * kPi}};
    bool empty = false;
    for (std::size_t j = 0; j < members_.size() && !empty; ++j) {
      if (i == j) continue;
      Vec2 delta = members_[j].center - members_[i].center;
      double D = delta.norm();
      double Ri = members_[i].radius, Rj = members_[j].radius;
      if (D + Ri <= Rj + 1e-14) continue;  // disk j contains circle i
      if (D >= Ri + Rj - 1e-14) fail_invalid("convex_intersection members do not overlap");
      if (D + Rj <= Ri + 1e-14) {
        empty = true;  // disk j inside disk i: circle i is not on the boundary
        break;
      }
      double alpha = std::atan2(delta.y(), delta.x());
      double c = (D * D + Ri * Ri - Rj * Rj) / (2.0 * D * Ri);
      c = std::clamp(c, -1.0, 1.0);
      double theta = std::acos(c);
      vis = intersect_intervals(vis, {alpha - theta, alpha + theta});
      empty = vis.empty();
    }
    if (!empty)
      for (const auto& iv : merge_intervals(vis))
        raw.push_back({static_cast<int>(i), iv.lo, iv.hi});
  }
  if (raw.empty()) fail_invalid("convex_intersection is empty or degenerate");

  auto endpoint = [&](const RawArc& a, bool start) {
    const Member& m = members_[a.member];
    return Vec2(m.center + m.radius * dir(start ? a.a0 : a.a1));
  };
  std::vector<bool> used(raw.size(), false);
  std::vector<RawArc> ordered;
  ordered.push_back(raw[0]);
  used[0] = true;
  for (std::size_t step = 1; step < raw.size(); ++step) {
    Vec2 tail = endpoint(ordered.back(), false);
    double best = 1e-6;
    int pick = -1;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (used[k]) continue;
      double d = (endpoint(raw[k], true) - tail).norm();
      if (d < best) {
        best = d;
        pick = static_cast<int>(k);
      }
    }
    if (pick < 0) fail_invalid("convex_intersection boundary does not form a closed loop");
    ordered.push_back(raw[pick]);
    used[pick] = true;
  }
  if ((endpoint(ordered.back(), false) - endpoint(ordered.front(), true)).norm() > 1e-6)
    fail_invalid("convex_intersection boundary does not close");

  for (const auto& a : ordered) {
    arcs_.push_back({a.member, a.a0, a.a1});
    corners_.push_back(endpoint(a, false));
  }
}

DistanceResult2 IntersectionDomain::distance2(const Vec2& x) const {
  double min_signed = std::numeric_limits<double>::infinity();
  int argmin = 0;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    double s = members_[i].radius - (x - members_[i].center).norm();
    if (s < min_signed) {
      min_signed = s;
      argmin = static_cast<int>(i);
    }
  }
  DistanceResult2 out;
  if (min_signed >= 0) {
    // Inside: radial projection onto the closest member circle lies on the
    // intersection boundary (convexity).
    const Member& m = members_[argmin];
    Vec2 rel = x - m.center;
    double rho = rel.norm();
    out.nearest =
        rho > 1e-300 ? Vec2(m.center + (m.radius / rho) * rel) : Vec2(m.center + Vec2(m.radius, 0));
    out.d = min_signed;
    out.inside = true;
    return out;
  }
  // Outside: per-member projections that stay inside all other members,
  // plus the corners.
  double best = std::numeric_limits<double>::infinity();
  Vec2 best_foot = corners_.empty() ? members_[0].center : corners_[0];
  for (const auto& m : members_) {
    Vec2 rel = x - m.center;
    double rho = rel.norm();
    if (rho < 1e-300) continue;
    Vec2 foot = m.center + (m.radius / rho) * rel;
    bool ok = true;
    for (const auto& o : members_)
      if ((foot - o.center).norm() > o.radius + 1e-12) {
        ok = false;
        break;
      }
    if (!ok) continue;
    double d = (x - foot).norm();
    if (d < best) {
      best = d;
      best_foot = foot;
    }
  }
  for (const auto& c : corners_) {
    double d = (x - c).norm();
    if (d < best) {
      best = d;
      best_foot = c;
    }
  }
  out.d = best;
  out.nearest = best_foot;
  out.inside = false;
  return out;
}

BoundaryProbe IntersectionDomain::boundary_probe(const Eigen::VectorXd& bd) const {
  Vec2 b = as_vec2(bd);
  DistanceResult2 dr = distance2(b);
  if (dr.d > 1e-8) fail_invalid("probe point is not on the boundary");
  std::vector<int> on;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    double s = std::abs(members_[i].radius - (b - members_[i].center).norm());
    if (s <= 1e-8) on.push_back(static_cast<int>(i));
  }
  BoundaryProbe p;
  p.point = bd;
  if (on.size() >= 2) {
    p.is_corner = true;
    Vec2 nsum = Vec2::Zero();
    for (int i : on) nsum += (members_[i].center - b).normalized();
    p.inward_normal = as_dyn(Vec2(nsum.normalized()));
    return p;
  }
  int i = on.empty() ? 0 : on[0];
  const Member& m = members_[i];
  p.inward_normal = as_dyn(Vec2((m.center - b).normalized()));
  p.principal_curvatures = {1.0 / m.radius};
  p.mean_curvature = 1.0 / m.radius;
  p.is_corner = false;
  return p;
}

double IntersectionDomain::diameter() const {
  if (cached_diameter_ < 0) cached_diameter_ = generic_diameter(boundary_loops());
  return cached_diameter_;
}

std::unique_ptr<Domain> IntersectionDomain::smooth_approximation(double eps) const {
  if (!(eps > 0)) fail_invalid("smoothing eps must be positive");
  // Replace each corner by a fillet arc tangent to both adjacent member
  // circles; fillet radius is proportional to eps and capped so the Hausdorff
  // distance to the original stays below eps.
  const std::size_t m = arcs_.size();
  std::vector<double> trim_end(m, 0.0), trim_start(m, 0.0);
  std::vector<ArcChainDomain::Piece> fillets(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& cur = arcs_[k];
    const auto& nxt = arcs_[(k + 1) % m];
    Vec2 corner = corners_[k];
    const Member& mi = members_[cur.member];
    const Member& mj = members_[nxt.member];
    Vec2 t_in(-std::sin(cur.a1), std::cos(cur.a1));
    Vec2 t_out(-std::sin(nxt.a0), std::cos(nxt.a0));
    double turn = std::atan2(t_in.x() * t_out.y() - t_in.y() * t_out.x(), t_in.dot(t_out));
    double interior = kPi - std::abs(turn);
    double half = 0.5 * interior;
    double rf = eps * std::min(1.0, std::sin(half) / std::max(1e-12, 1.0 - std::sin(half)));
    rf = std::min(rf, 0.4 * std::min(mi.radius, mj.radius));
    Vec2 ci = mi.center, cj = mj.center;
    double ri = mi.radius - rf, rj = mj.radius - rf;
    Vec2 dvec = cj - ci;
    double D = dvec.norm();
    double xx = (D * D + ri * ri - rj * rj) / (2.0 * D);
    double y2 = ri * ri - xx * xx;
    if (y2 <= 0) fail(ErrorCode::runtime, "fillet construction failed (radius too large)");
    Vec2 u = dvec / D, v(-u.y(), u.x());
    Vec2 cand1 = ci + xx * u + std::sqrt(y2) * v;
    Vec2 cand2 = ci + xx * u - std::sqrt(y2) * v;
    Vec2 cf = ((cand1 - corner).norm() < (cand2 - corner).norm()) ? cand1 : cand2;
    double phi_i = wrap_angle(std::atan2((cf - ci).y(), (cf - ci).x()), cur.a1 - kPi);
    double phi_j = wrap_angle(std::atan2((cf - cj).y(), (cf - cj).x()), nxt.a0 - kPi);
    trim_end[k] = cur.a1 - phi_i;
    trim_start[(k + 1) % m] = phi_j - nxt.a0;
    if (trim_end[k] < -1e-9 || trim_start[(k + 1) % m] < -1e-9)
      fail(ErrorCode::runtime, "fillet construction failed (tangency outside arc)");
    trim_end[k] = std::max(0.0, trim_end[k]);
    trim_start[(k + 1) % m] = std::max(0.0, trim_start[(k + 1) % m]);
    Vec2 ti = ci + mi.radius * dir(phi_i);
    Vec2 tj = cj + mj.radius * dir(phi_j);
    double b0 = std::atan2((ti - cf).y(), (ti - cf).x());
    double b1 = wrap_angle(std::atan2((tj - cf).y(), (tj - cf).x()), b0);
    ArcChainDomain::Piece fp;
    fp.is_arc = true;
    fp.c = cf;
    fp.r = rf;
    fp.a0 = b0;
    fp.a1 = b1;
    fillets[k] = fp;
  }
  std::vector<ArcChainDomain::Piece> pieces;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& a = arcs_[k];
    ArcChainDomain::Piece ap;
    ap.is_arc = true;
    ap.c = members_[a.member].center;
    ap.r = members_[a.member].radius;
    ap.a0 = a.a0 + trim_start[k];
    ap.a1 = a.a1 - trim_end[k];
    if (ap.a1 <= ap.a0)
      fail(ErrorCode::runtime, "fillet construction consumed a whole boundary arc");
    pieces.push_back(ap);
    pieces.push_back(fillets[k]);
  }
  return std::make_unique<ArcChainDomain>(std::move(pieces), "arc_chain", "");
}

std::unique_ptr<Domain> IntersectionDomain::clone() const {
  return std::make_unique<IntersectionDomain>(members_);
}

std::vector<BoundaryLoop> IntersectionDomain::boundary_loops() const {
  BoundaryLoop loop;
  for (const auto& a : arcs_) {
    loop.pieces.push_back(std::make_shared<ArcPiece>(members_[a.member].center,
                                                     members_[a.member].radius, a.a0, a.a1));
    loop.corner_after.push_back(true);
  }
  return {loop};
}

double IntersectionDomain::max_abs_curvature() const {
  double m = 0;
  for (const auto& mem : members_) m = std::max(m, 1.0 / mem.radius);
  return m;
}

void IntersectionDomain::append_json_impl(JsonWriter& w) const {
  w.begin_object();
  w.kv("kind", "convex_intersection");
  w.kv("n", 2);
  w.key("members").begin_array();
  for (const auto& m : members_) {
    w.begin_object();
    w.kv("kind", "ball");
    w.kv("n", 2);
    w.key("center").begin_array().value(m.center.x()).value(m.center.y()).end_array();
    w.kv("radius", m.radius);
    w.end_object();
  }
  w.end_array();
  w.end_object();
}

// --- factories --------------------------------------------------------------

std::unique_ptr<Domain> make_ball(const Eigen::VectorXd& center, double radius) {
  return std::make_unique<BallDomain>(center, radius);
}

std::unique_ptr<Domain> make_ball2(const Vec2& center, double radius) {
  return std::make_unique<BallDomain>(as_dyn(center), radius);
}

std::unique_ptr<Domain> make_ellipse(double a, double b, Vec2 center) {
  return std::make_unique<EllipseDomain>(a, b, center);
}

std::unique_ptr<Domain> make_stadium(double length, double cap_radius) {
  if (!(length > 0) || !(cap_radius > 0))
    fail_invalid("stadium needs positive length and cap radius");
  double hl = 0.5 * length, r = cap_radius;
  std::vector<ArcChainDomain::Piece> pieces(4);
  pieces[0].is_arc = false;
  pieces[0].p0 = Vec2(-hl, -r);
  pieces[0].p1 = Vec2(hl, -r);
  pieces[1].is_arc = true;
  pieces[1].c = Vec2(hl, 0);
  pieces[1].r = r;
  pieces[1].a0 = -kPi / 2;
  pieces[1].a1 = kPi / 2;
  pieces[2].is_arc = false;
  pieces[2].p0 = Vec2(hl, r);
  pieces[2].p1 = Vec2(-hl, r);
  pieces[3].is_arc = true;
  pieces[3].c = Vec2(-hl, 0);
  pieces[3].r = r;
  pieces[3].a0 = kPi / 2;
  pieces[3].a1 = 3 * kPi / 2;
  std::ostringstream params;
  params << "\"length\":" << JsonWriter::format_double(length)
         << ",\"cap_radius\":" << JsonWriter::format_double(cap_radius);
  return std::make_unique<ArcChainDomain>(std::move(pieces), "stadium", params.str());
}

std::unique_ptr<Domain> make_rounded_polygon(const std::vector<Vec2>& vertices,
                                             double fillet_radius) {
  const std::size_t m = vertices.size();
  if (m < 3) fail_invalid("rounded_polygon needs at least three vertices");
  if (!(fillet_radius > 0)) fail_invalid("rounded_polygon fillet radius must be positive");
  double area2 = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % m];
    area2 += a.x() * b.y() - b.x() * a.y();
  }
  std::vector<Vec2> vs = vertices;
  if (area2 < 0) std::reverse(vs.begin(), vs.end());
  for (std::size_t i = 0; i < m; ++i) {
    Vec2 u = (vs[(i + 1) % m] - vs[i]).normalized();
    Vec2 w = (vs[(i + 2) % m] - vs[(i + 1) % m]).normalized();
    double cross = u.x() * w.y() - u.y() * w.x();
    if (cross <= 1e-12) fail_invalid("rounded_polygon vertices must be strictly convex");
  }
  std::vector<Vec2> t_in(m), t_out(m);
  std::vector<ArcChainDomain::Piece> arcs(m);
  for (std::size_t i = 0; i < m; ++i) {
    Vec2 prev = vs[(i + m - 1) % m], cur = vs[i], next = vs[(i + 1) % m];
    Vec2 u = (cur - prev).normalized();
    Vec2 w = (next - cur).normalized();
    double turn = std::atan2(u.x() * w.y() - u.y() * w.x(), u.dot(w));
    double setback = fillet_radius * std::tan(0.5 * turn);
    double lmin = std::min((cur - prev).norm(), (next - cur).norm());
    if (setback > 0.5 * lmin) fail_invalid("fillet radius too large for polygon edge length");
    t_in[i] = cur - setback * u;
    t_out[i] = cur + setback * w;
    Vec2 bisector = (w - u).normalized();
    double cdist = fillet_radius / std::cos(0.5 * turn);
    Vec2 center = cur + cdist * bisector;
    double a0 = std::atan2((t_in[i] - center).y(), (t_in[i] - center).x());
    double a1 = wrap_angle(std::atan2((t_out[i] - center).y(), (t_out[i] - center).x()), a0);
    arcs[i].is_arc = true;
    arcs[i].c = center;
    arcs[i].r = fillet_radius;
    arcs[i].a0 = a0;
    arcs[i].a1 = a1;
  }
  std::vector<ArcChainDomain::Piece> pieces;
  for (std::size_t i = 0; i < m; ++i) {
    pieces.push_back(arcs[i]);
    ArcChainDomain::Piece seg;
    seg.is_arc = false;
    seg.p0 = t_out[i];
    seg.p1 = t_in[(i + 1) % m];
    pieces.push_back(seg);
  }
  std::ostringstream params;
  params << "\"vertices\":[";
  for (std::size_t i = 0; i < m; ++i) {
    if (i) params << ",";
    params << "[" << JsonWriter::format_double(vs[i].x()) << ","
           << JsonWriter::format_double(vs[i].y()) << "]";
  }
  params << "],\"fillet_radius\":" << JsonWriter::format_double(fillet_radius);
  return std::make_unique<ArcChainDomain>(std::move(pieces), "rounded_polygon", params.str());
}

std::unique_ptr<Domain> make_intersection(const std::vector<IntersectionDomain::Member>& members) {
  return std::make_unique<IntersectionDomain>(members);
}

// --- JSON parsing -------------------------------------------------------------

namespace {

using nlohmann::json;

Vec2 parse_vec2(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) fail_invalid(std::string("expected [x, y] for ") + what);
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

std::unique_ptr<Domain> parse_domain(const json& j) {
  if (!j.is_object() || !j.contains("kind")) fail_invalid("domain JSON must have a \"kind\" field");
  std::string kind = j["kind"].get<std::string>();
  int n = j.value("n", 2);
  if (n < 2) fail_invalid("domain dimension must be >= 2");
  if (kind == "ball") {
    double radius = j.value("radius", 0.0);
    Eigen::VectorXd center = Eigen::VectorXd::Zero(n);
    if (j.contains("center")) {
      const auto& c = j["center"];
      if (!c.is_array() || static_cast<int>(c.size()) != n)
        fail_invalid("ball center must have n entries");
      for (int i = 0; i < n; ++i) center[i] = c[i].get<double>();
    }
    return make_ball(center, radius);
  }
  if (n != 2) fail_unsupported("only ball domains support n != 2");
  if (kind == "ellipse") {
    if (!j.contains("semi_axes")) fail_invalid("ellipse needs semi_axes");
    Vec2 ax = parse_vec2(j["semi_axes"], "semi_axes");
    Vec2 c = j.contains("center") ? parse_vec2(j["center"], "center") : Vec2::Zero();
    return make_ellipse(ax.x(), ax.y(), c);
  }
  if (kind == "stadium") {
    return make_stadium(j.value("length", 0.0), j.value("cap_radius", 0.0));
  }
  if (kind == "rounded_polygon") {
    if (!j.contains("vertices")) fail_invalid("rounded_polygon needs vertices");
    std::vector<Vec2> vs;
    for (const auto& v : j["vertices"]) vs.push_back(parse_vec2(v, "vertex"));
    return make_rounded_polygon(vs, j.value("fillet_radius", 0.0));
  }
  if (kind == "convex_intersection") {
    if (!j.contains("members")) fail_invalid("convex_intersection needs members");
    std::vector<IntersectionDomain::Member> ms;
    for (const auto& mj : j["members"]) {
      std::string mk = mj.value("kind", "ball");
      if (mk == "halfplane" || mk == "slab")
        fail_invalid("convex_intersection member \"" + mk +
                     "\" has zero boundary mean curvature; members require H > 0");
      if (mk != "ball") fail_unsupported("convex_intersection members must be balls");
      IntersectionDomain::Member m;
      m.center = mj.contains("center") ? parse_vec2(mj["center"], "member center") : Vec2::Zero();
      m.radius = mj.value("radius", 0.0);
      ms.push_back(m);
    }
    return make_intersection(ms);
  }
  if (kind == "arc_chain") {
    if (!j.contains("pieces")) fail_invalid("arc_chain needs pieces");
    std::vector<ArcChainDomain::Piece> ps;
    for (const auto& pj : j["pieces"]) {
      ArcChainDomain::Piece p;
      std::string type = pj.value("type", "");
      if (type == "segment") {
        p.is_arc = false;
        p.p0 = parse_vec2(pj["p0"], "p0");
        p.p1 = parse_vec2(pj["p1"], "p1");
      } else if (type == "arc") {
        p.is_arc = true;
        p.c = parse_vec2(pj["center"], "center");
        p.r = pj.value("radius", 0.0);
        p.a0 = pj.value("a0", 0.0);
        p.a1 = pj.value("a1", 0.0);
      } else {
        fail_invalid("arc_chain piece type must be segment or arc");
      }
      ps.push_back(p);
    }
    return std::make_unique<ArcChainDomain>(std::move(ps), "arc_chain", "");
  }
  fail_unsupported("unknown domain kind: " + kind);
}

} // namespace

std::unique_ptr<Domain> domain_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail_invalid(std::string("domain JSON parse error: ") + e.what());
  }
  return parse_domain(j);
}

std::unique_ptr<Domain> domain_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_invalid("cannot open domain file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return domain_from_json(ss.str());
}

// --- generic helpers -----------------------------------------------------------

double generic_diameter(const std::vector<BoundaryLoop>& loops, double rel_tol) {
  std::vector<std::pair<const BoundaryPiece*, double>> where;
  std::vector<Vec2> pts;
  const int target = 1024;
  double total = 0;
  for (const auto& loop : loops) total += loop.total_length();
  for (const auto& loop : loops) {
    for (const auto& p : loop.pieces) {
      int m = std::max(4, static_cast<int>(std::round(target * p->length() / total)));
      for (int i = 0; i < m; ++i) {
        double s = p->length() * i / m;
        pts.push_back(p->at(s).point);
        where.push_back({p.get(), s});
      }
    }
  }
  double best = 0;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d2 = (pts[i] - pts[j]).squaredNorm();
      if (d2 > best) {
        best = d2;
        bi = i;
        bj = j;
      }
    }
  best = std::sqrt(best);
  auto [pa, sa] = where[bi];
  auto [pb, sb] = where[bj];
  double wa = pa->length() / 128.0, wb = pb->length() / 128.0;
  for (int round = 0; round < 10; ++round) {
    double cur_best = best;
    double csa = sa, csb = sb;
    for (int ia = -8; ia <= 8; ++ia)
      for (int ib = -8; ib <= 8; ++ib) {
        double ta = std::clamp(sa + wa * ia / 8.0, 0.0, pa->length());
        double tb = std::clamp(sb + wb * ib / 8.0, 0.0, pb->length());
        double d = (pa->at(ta).point - pb->at(tb).point).norm();
        if (d > cur_best) {
          cur_best = d;
          csa = ta;
          csb = tb;
        }
      }
    sa = csa;
    sb = csb;
    best = cur_best;
    wa *= 0.25;
    wb *= 0.25;
    if (wa < rel_tol * best && wb < rel_tol * best) break;
  }
  return best;
}

double generic_inradius(const Domain& dom) {
  auto loops = dom.boundary_loops();
  Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
  for (const auto& loop : loops)
    for (const auto& p : loop.pieces) {
      int m = 64;
      for (int i = 0; i < m; ++i) {
        Vec2 q = p->at(p->length() * i / m).point;
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
      }
    }
  double best = 0;
  Vec2 bestx = 0.5 * (lo + hi);
  const int g = 48;
  for (int i = 0; i <= g; ++i)
    for (int j = 0; j <= g; ++j) {
      Vec2 q(lo.x() + (hi.x() - lo.x()) * i / g, lo.y() + (hi.y() - lo.y()) * j / g);
      double s = dom.signed_value(q);
      if (s > best) {
        best = s;
        bestx = q;
      }
    }
  double step = (hi - lo).maxCoeff() / g;
  int guard = 0;
  while (step > 1e-10 && guard++ < 10000) {
    bool improved = false;
    for (int k = 0; k < 4; ++k) {
      Vec2 q = bestx + step * dir(kPi * k / 2.0);
      double s = dom.signed_value(q);
      if (s > best) {
        best = s;
        bestx = q;
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

std::vector<BoundarySample> sample_boundary(const Domain& dom, double h) {
  if (!(h > 0)) fail_invalid("boundary sampling step must be positive");
  std::vector<BoundarySample> out;
  int family = 0;
  for (const auto& loop : dom.boundary_loops()) {
    const std::size_t np = loop.pieces.size();
    for (std::size_t pi = 0; pi < np; ++pi) {
      const auto& piece = loop.pieces[pi];
      bool corner_before = loop.corner_after[(pi + np - 1) % np];
      int m =
          std::max(piece->closed() ? 16 : 2, static_cast<int>(std::round(piece->length() / h)));
      for (int i = 0; i < m; ++i) {
        BoundarySample s = piece->at(piece->length() * i / m);
        s.family = family;
        if (i == 0 && corner_before && np > 1) {
          s.is_corner = true;
          const auto& prev = loop.pieces[(pi + np - 1) % np];
          Vec2 nprev = prev->at(prev->length()).inward_normal;
          s.inward_normal = (s.inward_normal + nprev).normalized();
        }
        out.push_back(s);
      }
      if (loop.corner_after[pi]) ++family;
    }
    ++family;
  }
  return out;
}

} // namespace hmg

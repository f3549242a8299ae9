#include "hmg/mesh.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hmg {

namespace {

struct CandidateSet {
  std::vector<int> ids;
  void add(int id) {
    if (id < 0) return;
    for (int existing : ids)
      if (existing == id) return;
    ids.push_back(id);
  }
};

} // namespace

std::size_t Mesh::interior_count() const {
  std::size_t c = 0;
  for (auto b : boundary_flag)
    if (!b) ++c;
  return c;
}

void Mesh::build_grid() {
  Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
  for (const auto& p : pos) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  grid_.cell = std::max(target_h, 1e-12);
  grid_.origin = lo - Vec2(grid_.cell, grid_.cell);
  grid_.nx = static_cast<int>((hi.x() - grid_.origin.x()) / grid_.cell) + 3;
  grid_.ny = static_cast<int>((hi.y() - grid_.origin.y()) / grid_.cell) + 3;
  grid_.cells.assign(static_cast<std::size_t>(grid_.nx) * grid_.ny, {});
  for (std::size_t i = 0; i < pos.size(); ++i) {
    int ix = static_cast<int>((pos[i].x() - grid_.origin.x()) / grid_.cell);
    int iy = static_cast<int>((pos[i].y() - grid_.origin.y()) / grid_.cell);
    ix = std::clamp(ix, 0, grid_.nx - 1);
    iy = std::clamp(iy, 0, grid_.ny - 1);
    grid_.cells[static_cast<std::size_t>(iy) * grid_.nx + ix].push_back(static_cast<int>(i));
  }
}

template <typename Pred>
int Mesh::nearest_node_if(const Vec2& x, Pred&& keep) const {
  int cx = std::clamp(static_cast<int>((x.x() - grid_.origin.x()) / grid_.cell), 0, grid_.nx - 1);
  int cy = std::clamp(static_cast<int>((x.y() - grid_.origin.y()) / grid_.cell), 0, grid_.ny - 1);
  int best = -1;
  double best_d2 = 1e300;
  for (int ring = 0; ring < std::max(grid_.nx, grid_.ny) + 1; ++ring) {
    bool any_cell = false;
    for (int iy = cy - ring; iy <= cy + ring; ++iy) {
      if (iy < 0 || iy >= grid_.ny) continue;
      for (int ix = cx - ring; ix <= cx + ring; ++ix) {
        if (ix < 0 || ix >= grid_.nx) continue;
        if (std::max(std::abs(ix - cx), std::abs(iy - cy)) != ring) continue;
        any_cell = true;
        for (int id : grid_.cells[static_cast<std::size_t>(iy) * grid_.nx + ix]) {
          if (!keep(id)) continue;
          double d2 = (pos[id] - x).squaredNorm();
          if (d2 < best_d2) {
            best_d2 = d2;
            best = id;
          }
        }
      }
    }
    // one extra ring after the first hit guarantees correctness
    if (best >= 0 && ring >= 1 &&
        std::sqrt(best_d2) <= (ring - 1) * grid_.cell)
      break;
    if (!any_cell && best >= 0) break;
  }
  return best;
}

int Mesh::nearest_node(const Vec2& x) const {
  return nearest_node_if(x, [](int) { return true; });
}

int Mesh::nearest_interior_node(const Vec2& x) const {
  return nearest_node_if(x, [this](int id) { return boundary_flag[id] == 0; });
}

double Mesh::value_at(const std::vector<double>& values, const Vec2& x) const {
  int c = nearest_interior_node(x);
  if (c < 0) fail(ErrorCode::runtime, "interpolation failed: no interior node found");
  const Stencil& st = stencil[c];
  Vec2 delta = x - pos[c];
  double g0 = 0, g1 = 0, hxx = 0, hxy = 0, hyy = 0;
  for (std::int64_t m = st.begin; m < st.end; ++m) {
    double df = values[st_nbr[m]] - values[c];
    g0 += st_wx[m] * df;
    g1 += st_wy[m] * df;
    hxx += st_wxx[m] * df;
    hxy += st_wxy[m] * df;
    hyy += st_wyy[m] * df;
  }
  return values[c] + g0 * delta.x() + g1 * delta.y() +
         0.5 * (hxx * delta.x() * delta.x() + 2 * hxy * delta.x() * delta.y() +
                hyy * delta.y() * delta.y());
}

double Mesh::linear_value_at(const std::vector<double>& values, const Vec2& x) const {
  int c = nearest_interior_node(x);
  if (c < 0) fail(ErrorCode::runtime, "interpolation failed: no interior node found");
  const Stencil& st = stencil[c];
  Vec2 delta = x - pos[c];
  double g0 = 0, g1 = 0;
  for (std::int64_t m = st.begin; m < st.end; ++m) {
    double df = values[st_nbr[m]] - values[c];
    g0 += st_wx[m] * df;
    g1 += st_wy[m] * df;
  }
  return values[c] + g0 * delta.x() + g1 * delta.y();
}

void Mesh::write_mesh_txt(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::runtime, "cannot open mesh output file: " + path);
  out << "# hmg mesh\n";
  out << "# nodes " << node_count() << "\n";
  out << "# columns: id x y d boundary corner\n";
  char buf[256];
  for (std::size_t i = 0; i < pos.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu %.17g %.17g %.17g %d %d\n", i, pos[i].x(), pos[i].y(),
                  dist[i], static_cast<int>(boundary_flag[i]), static_cast<int>(corner_flag[i]));
    out << buf;
  }
  out << "# adjacency: id: neighbors\n";
  for (std::size_t i = 0; i < pos.size(); ++i) {
    out << i << ":";
    for (std::int64_t m = stencil[i].begin; m < stencil[i].end; ++m) out << ' ' << st_nbr[m];
    out << '\n';
  }
}

double Field::max_value() const {
  double m = -1e300;
  for (double v : values) m = std::max(m, v);
  return m;
}

double Field::min_interior_value() const {
  double m = 1e300;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mesh->is_interior(i)) m = std::min(m, values[i]);
  return m;
}

void write_field_csv(const Field& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::runtime, "cannot open field output file: " + path);
  out << "x1,x2,value,d\n";
  char buf[256];
  const Mesh& mesh = *field.mesh;
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", mesh.pos[i].x(), mesh.pos[i].y(),
                  field.values[i], mesh.dist[i]);
    out << buf;
  }
}

Field read_field_csv(std::shared_ptr<const Mesh> mesh, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::invalid_argument, "cannot open field file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("x1,", 0) != 0)
    fail(ErrorCode::artifact_mismatch, "field CSV header mismatch in " + path);
  Field f;
  f.mesh = mesh;
  f.values.reserve(mesh->node_count());
  std::size_t idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x1, x2, v, d;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg", &x1, &x2, &v, &d) != 4)
      fail(ErrorCode::artifact_mismatch, "malformed field CSV row in " + path);
    if (idx >= mesh->node_count())
      fail(ErrorCode::artifact_mismatch, "field CSV has more rows than mesh nodes");
    if ((mesh->pos[idx] - Vec2(x1, x2)).norm() > 1e-9)
      fail(ErrorCode::artifact_mismatch, "field CSV node positions do not match the mesh");
    f.values.push_back(v);
    ++idx;
  }
  if (idx != mesh->node_count())
    fail(ErrorCode::artifact_mismatch, "field CSV has fewer rows than mesh nodes");
  return f;
}

// --- mesh builder -----------------------------------------------------------

class MeshBuilder {
public:
  MeshBuilder(std::shared_ptr<const Domain> domain, const MeshOptions& opts)
      : domain_(std::move(domain)), opts_(opts) {}

  std::shared_ptr<const Mesh> build() {
    validate();
    auto mesh = std::make_shared<Mesh>();
    mesh_ = mesh.get();
    mesh_->domain = domain_;
    mesh_->target_h = opts_.target_h;
    mesh_->grading = opts_.grading;
    make_layers();
    place_boundary_nodes();
    place_collar_nodes();
    place_core_nodes();
    mesh_->build_grid();
    build_stencils();
    compute_hash();
    return mesh;
  }

private:
  void validate() {
    if (!(opts_.target_h > 0)) fail_invalid("target_h must be positive");
    if (!(opts_.grading >= 1.0)) fail_invalid("grading exponent must be >= 1");
    if (domain_->dimension() != 2) fail_unsupported("field meshes require a 2-D domain");
    double inr = domain_->inradius();
    if (inr < 3.0 * opts_.target_h)
      fail_invalid("target_h too coarse to resolve the domain interior (inradius " +
                   JsonWriter::format_double(inr) + " < 3 h)");
    for (const auto& loop : domain_->boundary_loops())
      for (const auto& p : loop.pieces)
        if (p->length() < 0.5 * opts_.target_h && !p->closed())
          fail_invalid("target_h too coarse to resolve a boundary piece of length " +
                       JsonWriter::format_double(p->length()));
  }

  void make_layers() {
    const double h = opts_.target_h;
    const double gamma = opts_.grading;
    const double diam = domain_->diameter();
    double inr = domain_->inradius();
    double collar = std::min(opts_.collar_fraction * diam, 0.5 * inr);
    // graded schedule d(k) = diam (k h / (gamma diam))^gamma, i.e. spacing
    // h (d/diam)^(1-1/gamma) in the continuum limit
    std::vector<double>& depths = mesh_->layer_depths;
    depths.push_back(0.0);
    double c = h / (gamma * diam);
    for (std::int64_t k = 1;; ++k) {
      double d = diam * std::pow(k * c, gamma);
      if (d > collar) break;
      depths.push_back(d);
      if (depths.size() > 2000000) fail(ErrorCode::runtime, "grading produced too many layers");
    }
    if (depths.size() < 4)
      fail_invalid("target_h too coarse for a graded collar (fewer than 4 layers)");
    mesh_->collar_depth = depths.back();
    // transition: grow spacing geometrically up to h, stop before the inradius
    double spacing = depths.back() - depths[depths.size() - 2];
    double d = depths.back();
    while (spacing < h) {
      spacing = std::min(spacing * opts_.transition_growth, h);
      double nd = d + spacing;
      if (nd > inr - 1.5 * h) break;
      depths.push_back(nd);
      d = nd;
    }
    mesh_->layered_depth = depths.back();
  }

  void place_boundary_nodes() {
    samples_ = sample_boundary(*domain_, opts_.target_h);
    if (samples_.size() < 16) fail_invalid("target_h too coarse for the boundary perimeter");
    for (const auto& s : samples_) {
      mesh_->pos.push_back(s.point);
      mesh_->dist.push_back(0.0);
      mesh_->nearest.push_back(s.point);
      mesh_->normal.push_back(s.inward_normal);
      mesh_->boundary_flag.push_back(1);
      mesh_->corner_flag.push_back(s.is_corner ? 1 : 0);
      mesh_->ray.push_back(static_cast<int>(mesh_->ray.size()));
      mesh_->layer.push_back(0);
    }
  }

  void place_collar_nodes() {
    const std::size_t B = samples_.size();
    const std::size_t K = mesh_->layer_depths.size();
    node_of_.assign(B * K, -1);
    for (std::size_t j = 0; j < B; ++j) node_of_[j * K] = static_cast<int>(j);
    for (std::size_t j = 0; j < B; ++j) {
      if (samples_[j].is_corner) continue;
      for (std::size_t k = 1; k < K; ++k) {
        double dk = mesh_->layer_depths[k];
        Vec2 x = samples_[j].point + dk * samples_[j].inward_normal;
        DistanceResult2 dr = domain_->distance2(x);
        if (!dr.inside || std::abs(dr.d - dk) > std::max(1e-9, 1e-6 * dk)) break;
        node_of_[j * K + k] = static_cast<int>(mesh_->pos.size());
        mesh_->pos.push_back(x);
        mesh_->dist.push_back(dk);
        mesh_->nearest.push_back(samples_[j].point);
        mesh_->normal.push_back(samples_[j].inward_normal);
        mesh_->boundary_flag.push_back(0);
        mesh_->corner_flag.push_back(0);
        mesh_->ray.push_back(static_cast<int>(j));
        mesh_->layer.push_back(static_cast<int>(k));
      }
    }
  }

  void place_core_nodes() {
    const double h = opts_.target_h;
    Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
    for (const auto& s : samples_) {
      lo = lo.cwiseMin(s.point);
      hi = hi.cwiseMax(s.point);
    }
    double cut = mesh_->layered_depth;
    std::int64_t nx = static_cast<std::int64_t>((hi.x() - lo.x()) / h) + 1;
    std::int64_t ny = static_cast<std::int64_t>((hi.y() - lo.y()) / h) + 1;
    core_origin_ = lo;
    core_nx_ = nx + 1;
    core_index_.assign(static_cast<std::size_t>((nx + 1) * (ny + 1)), -1);
    for (std::int64_t iy = 0; iy <= ny; ++iy)
      for (std::int64_t ix = 0; ix <= nx; ++ix) {
        Vec2 x = lo + Vec2(ix * h, iy * h);
        DistanceResult2 dr = domain_->distance2(x);
        if (!dr.inside || dr.d <= cut + 0.4 * h) continue;
        core_index_[static_cast<std::size_t>(iy * (nx + 1) + ix)] =
            static_cast<int>(mesh_->pos.size());
        mesh_->pos.push_back(x);
        mesh_->dist.push_back(dr.d);
        mesh_->nearest.push_back(dr.nearest);
        Vec2 nrm = dr.d > 1e-300 ? Vec2((x - dr.nearest) / dr.d) : Vec2(0, 1);
        mesh_->normal.push_back(nrm);
        mesh_->boundary_flag.push_back(0);
        mesh_->corner_flag.push_back(0);
        mesh_->ray.push_back(-1);
        mesh_->layer.push_back(-1);
      }
    // ensure the deep interior is not empty when the domain allows it
    if (mesh_->node_count() == samples_.size() + collar_count()) {
      double inr = domain_->inradius();
      if (inr > cut + 0.5 * h)
        fail(ErrorCode::runtime, "core region unexpectedly empty; refine target_h");
    }
  }

  std::size_t collar_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < mesh_->node_count(); ++i)
      if (mesh_->layer[i] > 0) ++c;
    return c;
  }

  void structured_candidates(std::size_t i, CandidateSet& cs) const {
    const std::size_t B = samples_.size();
    const std::size_t K = mesh_->layer_depths.size();
    if (mesh_->layer[i] > 0) {
      int j = mesh_->ray[i];
      int k = mesh_->layer[i];
      for (int dj = -1; dj <= 1; ++dj)
        for (int dk = -1; dk <= 1; ++dk) {
          if (dj == 0 && dk == 0) continue;
          int jj = (j + dj + static_cast<int>(B)) % static_cast<int>(B);
          int kk = k + dk;
          if (kk < 0 || kk >= static_cast<int>(K)) continue;
          cs.add(node_of_[static_cast<std::size_t>(jj) * K + kk]);
        }
    } else if (mesh_->ray[i] < 0 && mesh_->layer[i] < 0) {
      // core node: lattice neighbors
      Vec2 rel = (mesh_->pos[i] - core_origin_) / opts_.target_h;
      std::int64_t ix = std::llround(rel.x());
      std::int64_t iy = std::llround(rel.y());
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          std::int64_t jx = ix + dx, jy = iy + dy;
          std::size_t idx = static_cast<std::size_t>(jy * core_nx_ + jx);
          if (jx < 0 || jy < 0 || idx >= core_index_.size()) continue;
          cs.add(core_index_[idx]);
        }
    }
  }

  void radius_candidates(std::size_t i, double radius, CandidateSet& cs) const {
    const Mesh::Grid& g = mesh_->grid();
    const Vec2& x = mesh_->pos[i];
    int r = static_cast<int>(radius / g.cell) + 1;
    int cx = std::clamp(static_cast<int>((x.x() - g.origin.x()) / g.cell), 0, g.nx - 1);
    int cy = std::clamp(static_cast<int>((x.y() - g.origin.y()) / g.cell), 0, g.ny - 1);
    for (int iy = std::max(0, cy - r); iy <= std::min(g.ny - 1, cy + r); ++iy)
      for (int ix = std::max(0, cx - r); ix <= std::min(g.nx - 1, cx + r); ++ix)
        for (int id : g.cells[static_cast<std::size_t>(iy) * g.nx + ix]) {
          if (static_cast<std::size_t>(id) == i) continue;
          if ((mesh_->pos[id] - x).norm() <= radius) cs.add(id);
        }
  }

  // local scales for anisotropic fitting
  void local_scales(std::size_t i, double* st, double* sn) const {
    const double h = opts_.target_h;
    if (mesh_->layer[i] > 0) {
      int k = mesh_->layer[i];
      const auto& depths = mesh_->layer_depths;
      double lo = depths[k] - depths[k - 1];
      double hi = (k + 1 < static_cast<int>(depths.size())) ? depths[k + 1] - depths[k] : lo;
      *sn = 0.5 * (lo + hi);
      *st = h;
    } else {
      *sn = h;
      *st = h;
    }
  }

  void build_stencils() {
    const std::size_t N = mesh_->node_count();
    mesh_->stencil.assign(N, {});
    for (std::size_t i = 0; i < N; ++i) {
      if (mesh_->boundary_flag[i]) continue;
      CandidateSet cs;
      structured_candidates(i, cs);
      double st, sn;
      local_scales(i, &st, &sn);
      if (cs.ids.size() < 8) {
        double radius = 1.8 * std::max(st, sn);
        for (int grow = 0; grow < 6 && cs.ids.size() < 8; ++grow) {
          radius *= 1.5;
          radius_candidates(i, radius, cs);
        }
      }
      if (!try_fit(i, cs, st, sn)) {
        // widen once more before giving up
        double radius = 3.0 * std::max(st, sn);
        for (int grow = 0; grow < 6; ++grow) {
          radius *= 1.6;
          radius_candidates(i, radius, cs);
          if (try_fit(i, cs, st, sn)) break;
        }
        if (mesh_->stencil[i].end == mesh_->stencil[i].begin) {
          std::ostringstream os;
          os << "stencil construction failed at node " << i << " (" << mesh_->pos[i].x() << ", "
             << mesh_->pos[i].y() << "): " << cs.ids.size() << " candidate neighbors";
          fail(ErrorCode::runtime, os.str());
        }
      }
    }
  }

  bool try_fit(std::size_t i, const CandidateSet& cs, double st, double sn) {
    if (cs.ids.size() < 5) return false;
    const Vec2& xc = mesh_->pos[i];
    Vec2 en = mesh_->normal[i];
    if (en.norm() < 0.5) en = Vec2(0, 1);
    Vec2 et(-en.y(), en.x());

    // select up to max_stencil nearest by scaled distance
    struct Cand {
      int id;
      double rho2;
      Vec2 xi;
    };
    std::vector<Cand> cands;
    cands.reserve(cs.ids.size());
    for (int id : cs.ids) {
      Vec2 delta = mesh_->pos[id] - xc;
      Vec2 xi(delta.dot(et) / st, delta.dot(en) / sn);
      double rho2 = xi.squaredNorm();
      if (rho2 > 36.0) continue;  // sanity: drop far-away strays
      cands.push_back({id, rho2, xi});
    }
    if (cands.size() < 5) return false;
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return a.rho2 < b.rho2;
    });
    if (static_cast<int>(cands.size()) > opts_.max_stencil) cands.resize(opts_.max_stencil);

    const int M = static_cast<int>(cands.size());
    Eigen::MatrixXd A(M, 5);
    Eigen::VectorXd sw(M);
    for (int m = 0; m < M; ++m) {
      double w = 1.0 / (1.0 + cands[m].rho2 * cands[m].rho2);
      double s = std::sqrt(w);
      sw[m] = s;
      const Vec2& xi = cands[m].xi;
      A(m, 0) = s * xi.x();
      A(m, 1) = s * xi.y();
      A(m, 2) = s * 0.5 * xi.x() * xi.x();
      A(m, 3) = s * xi.x() * xi.y();
      A(m, 4) = s * 0.5 * xi.y() * xi.y();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-9);
    if (qr.rank() < 5) return false;
    // solver matrix: coefficients = Sol * (sqrt(w) .* df)
    Eigen::MatrixXd sol = qr.solve(Eigen::MatrixXd::Identity(M, M));

    // transform scaled-frame derivatives back to x-frame
    Eigen::Matrix2d R;
    R.col(0) = et;
    R.col(1) = en;
    Eigen::Matrix2d Sinv = Eigen::Vector2d(1.0 / st, 1.0 / sn).asDiagonal();

    Mesh::Stencil stn;
    stn.begin = static_cast<std::int64_t>(mesh_->st_nbr.size());
    for (int m = 0; m < M; ++m) {
      Eigen::VectorXd theta = sol.col(m) * sw[m];  // contribution of df_m to coefficients
      Eigen::Vector2d gxi(theta[0], theta[1]);
      Eigen::Vector2d g = R * Sinv * gxi;
      Eigen::Matrix2d Hxi;
      Hxi << theta[2], theta[3], theta[3], theta[4];
      Eigen::Matrix2d H = R * Sinv * Hxi * Sinv * R.transpose();
      mesh_->st_nbr.push_back(cands[m].id);
      mesh_->st_wx.push_back(g[0]);
      mesh_->st_wy.push_back(g[1]);
      mesh_->st_wxx.push_back(H(0, 0));
      mesh_->st_wxy.push_back(0.5 * (H(0, 1) + H(1, 0)));
      mesh_->st_wyy.push_back(H(1, 1));
    }
    stn.end = static_cast<std::int64_t>(mesh_->st_nbr.size());
    mesh_->stencil[i] = stn;
    return true;
  }

  void compute_hash() {
    std::ostringstream os;
    os << domain_->normalized_json() << '|' << JsonWriter::format_double(opts_.target_h) << '|'
       << JsonWriter::format_double(opts_.grading) << '|' << mesh_->node_count() << '|'
       << mesh_->layer_depths.size();
    mesh_->hash = fnv1a64(os.str());
  }

  std::shared_ptr<const Domain> domain_;
  MeshOptions opts_;
  Mesh* mesh_ = nullptr;
  std::vector<BoundarySample> samples_;
  std::vector<int> node_of_;  // ray-major [j * K + k]
  std::vector<int> core_index_;
  Vec2 core_origin_ = Vec2::Zero();
  std::int64_t core_nx_ = 0;
};

std::shared_ptr<const Mesh> build_mesh(std::shared_ptr<const Domain> domain,
                                       const MeshOptions& opts) {
  return MeshBuilder(std::move(domain), opts).build();
}

} // namespace hmg

#include "qcbound/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "qcbound/error.hpp"

namespace qcb {

namespace {

double extent_scale(std::span<const Point> pts) {
  Point lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return std::max((hi - lo).norm(), 1e-300);
}

double cross2(const Point& o, const Point& a, const Point& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double shoelace(std::span<const Point> poly) {
  double s = 0.0;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % m];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

// Andrew's monotone chain; collinear points are dropped. Returns CCW order.
std::vector<Point> hull2d(std::vector<Point> pts, double eps) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) { return a.x() == b.x() && a.y() == b.y(); }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], p) <= eps) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

using Face = std::array<int, 3>;

Point face_normal(const std::vector<Point>& pts, const Face& f) {
  return (pts[f[1]] - pts[f[0]]).cross(pts[f[2]] - pts[f[0]]);
}

// Incremental convex hull in 3D. Faces are outward oriented. Throws when the
// point set is (numerically) planar.
std::vector<Face> hull3d(const std::vector<Point>& pts, double eps) {
  const int m = static_cast<int>(pts.size());
  if (m < 4) throw InputError("3D cell needs at least 4 vertices");
  int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
  double best = 0;
  for (int i = 0; i < m; ++i) {
    const double d = (pts[i] - pts[i0]).norm();
    if (d > best) best = d, i1 = i;
  }
  if (best <= eps) throw InputError("degenerate 3D cell: all vertices coincide");
  best = 0;
  const Point dir = (pts[i1] - pts[i0]).normalized();
  for (int i = 0; i < m; ++i) {
    const Point v = pts[i] - pts[i0];
    const double d = (v - v.dot(dir) * dir).norm();
    if (d > best) best = d, i2 = i;
  }
  if (best <= eps) throw InputError("degenerate 3D cell: vertices are collinear");
  best = 0;
  const Point nrm = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
  for (int i = 0; i < m; ++i) {
    const double d = std::abs(nrm.dot(pts[i] - pts[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (best <= eps) throw InputError("degenerate 3D cell: vertices are coplanar");

  const Point inner = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
  std::vector<Face> faces;
  auto add_oriented = [&](int a, int b, int c) {
    Face f{a, b, c};
    if (face_normal(pts, f).dot(pts[a] - inner) < 0) std::swap(f[1], f[2]);
    faces.push_back(f);
  };
  add_oriented(i0, i1, i2);
  add_oriented(i0, i1, i3);
  add_oriented(i0, i2, i3);
  add_oriented(i1, i2, i3);

  auto signed_dist = [&](const Face& f, const Point& p) {
    const Point n = face_normal(pts, f);
    const double len = n.norm();
    return len > 0 ? n.dot(p - pts[f[0]]) / len : 0.0;
  };

  for (int i = 0; i < m; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    std::vector<char> visible(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (signed_dist(faces[f], pts[i]) > eps) visible[f] = 1, any = true;
    }
    if (!any) continue;
    std::map<std::pair<int, int>, int> edge_face;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      for (int e = 0; e < 3; ++e) edge_face[{faces[f][e], faces[f][(e + 1) % 3]}] = static_cast<int>(f);
    }
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      for (int e = 0; e < 3; ++e) {
        const int a = faces[f][e], b = faces[f][(e + 1) % 3];
        auto it = edge_face.find({b, a});
        if (it != edge_face.end() && !visible[it->second]) horizon.emplace_back(a, b);
      }
    }
    std::vector<Face> kept;
    kept.reserve(faces.size() + horizon.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) kept.push_back(faces[f]);
    }
    for (const auto& [a, b] : horizon) kept.push_back({a, b, i});
    faces = std::move(kept);
  }
  return faces;
}

std::vector<Point> clip_polygon(std::vector<Point> poly, const HalfSpace& h, double tol) {
  std::vector<Point> out;
  const std::size_t m = poly.size();
  if (m == 0) return out;
  out.reserve(m + 1);
  for (std::size_t i = 0; i < m; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % m];
    const double da = h.normal.dot(a) - h.offset;
    const double db = h.normal.dot(b) - h.offset;
    const bool ina = da <= tol, inb = db <= tol;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

}  // namespace

ConvexCell::ConvexCell(int dim, std::vector<Point> vertices)
    : ConvexCell(dim, std::move(vertices), true) {}

ConvexCell::ConvexCell(int dim, std::vector<Point> vertices, bool require_boundary_vertices)
    : dim_(dim), vertices_(std::move(vertices)) {
  if (dim_ != 2 && dim_ != 3) throw InputError("cell dimension must be 2 or 3");
  if (vertices_.empty()) throw InputError("cell has no vertices");
  for (const auto& v : vertices_) {
    if (!v.allFinite()) throw InputError("cell vertex is not finite");
    if (dim_ == 2 && v.z() != 0.0) throw InputError("2D cell vertex has a third coordinate");
  }
  const double scale = extent_scale(vertices_);
  const double tol = 1e-9 * scale;

  if (dim_ == 2) {
    polygon_ = hull2d(vertices_, 1e-14 * scale * scale);
    volume_ = polygon_.size() >= 3 ? shoelace(polygon_) : 0.0;
    if (volume_ <= kDegenerateVolume) throw InputError("degenerate 2D cell (area <= 1e-12)");
    for (std::size_t i = 0; i < polygon_.size(); ++i) {
      const Point& a = polygon_[i];
      const Point& b = polygon_[(i + 1) % polygon_.size()];
      Point n(b.y() - a.y(), a.x() - b.x(), 0.0);
      n.normalize();
      halfspaces_.push_back({n, n.dot(a)});
    }
    if (require_boundary_vertices) {
      for (const auto& v : vertices_) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < polygon_.size(); ++i) {
          dmin = std::min(dmin, point_segment_distance(v, polygon_[i], polygon_[(i + 1) % polygon_.size()]));
        }
        if (dmin > tol) throw InputError("cell is not convex: a vertex lies inside the hull");
      }
    }
  } else {
    std::vector<Face> faces;
    try {
      faces = hull3d(vertices_, 1e-10 * scale);
    } catch (const InputError&) {
      throw InputError("degenerate 3D cell (volume <= 1e-12)");
    }
    Point inner = Point::Zero();
    for (const auto& v : vertices_) inner += v;
    inner /= static_cast<double>(vertices_.size());
    for (const auto& f : faces) {
      const Point& a = vertices_[f[0]];
      const Point& b = vertices_[f[1]];
      const Point& c = vertices_[f[2]];
      triangles_.push_back({a, b, c});
      volume_ += (a - inner).dot((b - inner).cross(c - inner)) / 6.0;
      const Point n = (b - a).cross(c - a).normalized();
      const double off = n.dot(a);
      const bool dup = std::any_of(halfspaces_.begin(), halfspaces_.end(), [&](const HalfSpace& h) {
        return (h.normal - n).norm() < 1e-9 && std::abs(h.offset - off) < tol;
      });
      if (!dup) halfspaces_.push_back({n, off});
    }
    if (volume_ <= kDegenerateVolume) throw InputError("degenerate 3D cell (volume <= 1e-12)");
    if (require_boundary_vertices) {
      for (const auto& v : vertices_) {
        double dmax = -std::numeric_limits<double>::infinity();
        for (const auto& h : halfspaces_) dmax = std::max(dmax, h.normal.dot(v) - h.offset);
        if (dmax < -tol) throw InputError("cell is not convex: a vertex lies inside the hull");
      }
    }
  }

  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices_.size(); ++j) {
      diameter_ = std::max(diameter_, (vertices_[i] - vertices_[j]).norm());
    }
  }
}

ConvexCell ConvexCell::from_coordinates(const std::vector<std::vector<double>>& coords) {
  if (coords.empty()) throw InputError("cell has no vertices");
  const std::size_t dim = coords.front().size();
  if (dim != 2 && dim != 3) throw InputError("vertex coordinates must have length 2 or 3");
  std::vector<Point> pts;
  pts.reserve(coords.size());
  for (const auto& c : coords) {
    if (c.size() != dim) throw InputError("vertices of one cell must share a dimension");
    pts.emplace_back(c[0], c[1], dim == 3 ? c[2] : 0.0);
  }
  return ConvexCell(static_cast<int>(dim), std::move(pts));
}

ConvexCell ConvexCell::rectangle(double x0, double y0, double x1, double y1) {
  return ConvexCell(2, {Point(x0, y0, 0), Point(x1, y0, 0), Point(x1, y1, 0), Point(x0, y1, 0)});
}

ConvexCell ConvexCell::hull_of(int dim, std::vector<Point> points) {
  ConvexCell raw(dim, std::move(points), false);
  // Keep only the extreme points so that the vertex invariant holds.
  std::vector<Point> extreme;
  if (dim == 2) {
    extreme = raw.polygon_;
  } else {
    for (const auto& t : raw.triangles_) {
      for (const auto& v : t) {
        const bool seen = std::any_of(extreme.begin(), extreme.end(),
                                      [&](const Point& e) { return (e - v).norm() == 0.0; });
        if (!seen) extreme.push_back(v);
      }
    }
  }
  return ConvexCell(dim, std::move(extreme), false);
}

Point ConvexCell::centroid() const {
  Point c = Point::Zero();
  for (const auto& v : vertices_) c += v;
  return c / static_cast<double>(vertices_.size());
}

bool ConvexCell::contains(const Point& x, double tol) const {
  return std::all_of(halfspaces_.begin(), halfspaces_.end(),
                     [&](const HalfSpace& h) { return h.normal.dot(x) - h.offset <= tol; });
}

ConvexCell ConvexCell::transformed(double scale, const Point& shift) const {
  if (!(scale > 0)) throw InputError("cell scale factor must be positive");
  std::vector<Point> v;
  v.reserve(vertices_.size());
  for (const auto& p : vertices_) {
    Point q = scale * p + shift;
    if (dim_ == 2) q.z() = 0.0;
    v.push_back(q);
  }
  return ConvexCell(dim_, std::move(v));
}

std::pair<Point, Point> ConvexCell::bounding_box() const {
  Point lo = vertices_.front(), hi = vertices_.front();
  for (const auto& v : vertices_) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

double cell_volume(const ConvexCell& cell) { return cell.volume(); }
double cell_diameter(const ConvexCell& cell) { return cell.diameter(); }

std::optional<ConvexCell> intersect_cells(const ConvexCell& c1, const ConvexCell& c2) {
  if (c1.dim() != c2.dim()) throw InputError("intersection of cells with different dimensions");
  std::vector<Point> all(c1.vertices().begin(), c1.vertices().end());
  all.insert(all.end(), c2.vertices().begin(), c2.vertices().end());
  const double scale = extent_scale(all);
  const double tol = 1e-12 * scale;

  std::vector<Point> pts;
  if (c1.dim() == 2) {
    pts.assign(c1.polygon().begin(), c1.polygon().end());
    for (const auto& h : c2.halfspaces()) {
      pts = clip_polygon(std::move(pts), h, tol);
      if (pts.size() < 3) return std::nullopt;
    }
    if (shoelace(pts) <= kDegenerateVolume) return std::nullopt;
  } else {
    const double ptol = 1e-10 * scale;
    auto push_unique = [&](const Point& p) {
      for (const auto& q : pts) {
        if ((q - p).norm() <= ptol) return;
      }
      pts.push_back(p);
    };
    auto inside_both = [&](const Point& p) { return c1.contains(p, ptol) && c2.contains(p, ptol); };
    for (const auto& v : c1.vertices()) {
      if (inside_both(v)) push_unique(v);
    }
    for (const auto& v : c2.vertices()) {
      if (inside_both(v)) push_unique(v);
    }
    auto edge_cuts = [&](const ConvexCell& edges_of, const ConvexCell& planes_of) {
      for (const auto& t : edges_of.triangles()) {
        for (int e = 0; e < 3; ++e) {
          const Point& a = t[e];
          const Point& b = t[(e + 1) % 3];
          for (const auto& h : planes_of.halfspaces()) {
            const double da = h.normal.dot(a) - h.offset;
            const double db = h.normal.dot(b) - h.offset;
            if ((da < 0) == (db < 0) || da == db) continue;
            const Point x = a + (da / (da - db)) * (b - a);
            if (inside_both(x)) push_unique(x);
          }
        }
      }
    };
    edge_cuts(c1, c2);
    edge_cuts(c2, c1);
    if (pts.size() < 4) return std::nullopt;
  }
  try {
    ConvexCell cell = ConvexCell::hull_of(c1.dim(), std::move(pts));
    return cell;
  } catch (const InputError&) {
    return std::nullopt;
  }
}

double intersection_volume(const ConvexCell& c1, const ConvexCell& c2) {
  const auto cell = intersect_cells(c1, c2);
  return cell ? cell->volume() : 0.0;
}

MonteCarloEstimate intersection_volume_mc(const ConvexCell& c1, const ConvexCell& c2,
                                          std::uint64_t samples, std::uint64_t seed) {
  if (c1.dim() != c2.dim()) throw InputError("intersection of cells with different dimensions");
  if (samples == 0) throw InputError("Monte-Carlo sample count must be positive");
  const auto [lo1, hi1] = c1.bounding_box();
  const auto [lo2, hi2] = c2.bounding_box();
  const Point lo = lo1.cwiseMax(lo2);
  const Point hi = hi1.cwiseMin(hi2);
  const int d = c1.dim();
  double box = 1.0;
  for (int k = 0; k < d; ++k) {
    if (hi[k] <= lo[k]) return {0.0, 0.0, samples};
    box *= hi[k] - lo[k];
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uint64_t hits = 0;
  Point x = Point::Zero();
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (int k = 0; k < d; ++k) x[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
    if (c1.contains(x) && c2.contains(x)) ++hits;
  }
  const double f = static_cast<double>(hits) / static_cast<double>(samples);
  return {box * f, box * std::sqrt(f * (1.0 - f) / static_cast<double>(samples)), samples};
}

namespace {

void inclusion_exclusion(std::span<const ConvexCell> cells, std::size_t start,
                         const std::optional<ConvexCell>& current, int order, double& total) {
  for (std::size_t i = start; i < cells.size(); ++i) {
    std::optional<ConvexCell> next = current ? intersect_cells(*current, cells[i]) : cells[i];
    if (!next) continue;
    total += (order % 2 == 1 ? 1.0 : -1.0) * next->volume();
    inclusion_exclusion(cells, i + 1, next, order + 1, total);
  }
}

}  // namespace

double union_volume(std::span<const ConvexCell> cells) {
  double total = 0.0;
  inclusion_exclusion(cells, 0, std::nullopt, 1, total);
  return total;
}

double union_intersection_volume(std::span<const ConvexCell> a, std::span<const ConvexCell> b) {
  std::vector<ConvexCell> pieces;
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (auto c = intersect_cells(x, y)) pieces.push_back(std::move(*c));
    }
  }
  return union_volume(pieces);
}

// ---------------------------------------------------------------------------

WhitneyTriple WhitneyTriple::make(ConvexCell q1, ConvexCell r2, ConvexCell q3) {
  const double v12 = intersection_volume(q1, r2);
  const double v23 = intersection_volume(r2, q3);
  if (!(v12 > 0)) throw InputError("Whitney triple: |Q1 ∩ R2| must be positive");
  if (!(v23 > 0)) throw InputError("Whitney triple: |R2 ∩ Q3| must be positive");
  const double v13 = intersection_volume(q1, q3);
  if (v13 >= 1e-9 * std::min(q1.volume(), q3.volume())) {
    throw InputError("Whitney triple: Q1 and Q3 must be disjoint");
  }
  return WhitneyTriple{std::move(q1), std::move(r2), std::move(q3), v12, v23};
}

double WhitneyTriple::volume() const {
  const auto c = cells();
  return union_volume(c);
}

void WhitneyChain::validate() const {
  const std::size_t J = triples.size();
  if (J == 0) throw InputError("Whitney chain is empty");
  if (link_volumes.size() != J - 1) throw InputError("Whitney chain needs J-1 link volumes");
  if (triple_volumes.size() != J) throw InputError("Whitney chain needs J triple volumes");
  for (double v : link_volumes) {
    if (!(v > 0)) throw InputError("Whitney chain link volume must be positive");
  }
  for (double v : triple_volumes) {
    if (!(v > 0)) throw InputError("Whitney chain triple volume must be positive");
  }
  if (multiplicity < 1 || static_cast<std::size_t>(multiplicity) > J) {
    throw InputError("Whitney chain multiplicity must satisfy 1 <= m <= J");
  }
}

WhitneyChain WhitneyChain::make(std::vector<WhitneyTriple> triples, std::optional<int> multiplicity) {
  WhitneyChain chain;
  const std::size_t J = triples.size();
  if (J == 0) throw InputError("Whitney chain is empty");
  std::vector<std::array<ConvexCell, 3>> cells;
  for (const auto& t : triples) {
    cells.push_back(t.cells());
    chain.triple_volumes.push_back(t.volume());
  }
  for (std::size_t j = 0; j + 1 < J; ++j) {
    chain.link_volumes.push_back(union_intersection_volume(cells[j], cells[j + 1]));
  }
  if (multiplicity) {
    chain.multiplicity = *multiplicity;
  } else {
    int degree = 0;
    for (std::size_t i = 0; i < J; ++i) {
      int d = 0;
      for (std::size_t k = 0; k < J; ++k) {
        if (k == i) continue;
        const double v = (k + 1 == i || i + 1 == k) ? chain.link_volumes[std::min(i, k)]
                                                    : union_intersection_volume(cells[i], cells[k]);
        if (v > 0) ++d;
      }
      degree = std::max(degree, d);
    }
    chain.multiplicity = 1 + degree;
  }
  chain.triples = std::move(triples);
  chain.validate();
  return chain;
}

// ---------------------------------------------------------------------------

double StarDomainSpec::alpha() const { return delta * (std::sqrt(3.0) - 1.0) / 2.0; }

StarDomain build_star_domain(const StarDomainSpec& spec) {
  if (spec.n != 2 && spec.n != 3) throw InputError("star domain dimension must be 2 or 3");
  if (!(spec.delta > 0)) throw InputError("star domain needs delta > 0");
  const double d = spec.delta;
  const double a = spec.alpha();
  if (spec.n == 2) {
    ConvexCell o1(2, {Point(-(d - a), -a, 0), Point(d - a, -a, 0), Point(d + a, a, 0), Point(-(d + a), a, 0)});
    ConvexCell o2(2, {Point(-(d + a), -a, 0), Point(d + a, -a, 0), Point(d - a, a, 0), Point(-(d - a), a, 0)});
    return StarDomain{std::move(o1), std::move(o2), a, 2, 0.0};
  }
  const int M = spec.polygon_sides;
  if (M < 3) throw InputError("star domain polygon_sides must be at least 3");
  auto frustum = [&](double r_bottom, double r_top) {
    std::vector<Point> v;
    v.reserve(2 * M);
    for (int k = 0; k < M; ++k) {
      const double t = 2.0 * std::numbers::pi * k / M;
      v.emplace_back(r_bottom * std::cos(t), r_bottom * std::sin(t), -a);
    }
    for (int k = 0; k < M; ++k) {
      const double t = 2.0 * std::numbers::pi * k / M;
      v.emplace_back(r_top * std::cos(t), r_top * std::sin(t), a);
    }
    return ConvexCell(3, std::move(v));
  };
  const double deficit = 1.0 - M * std::sin(2.0 * std::numbers::pi / M) / (2.0 * std::numbers::pi);
  return StarDomain{frustum(d - a, d + a), frustum(d + a, d - a), a, 3, deficit};
}

std::vector<Eigen::Vector2d> star_union_polygon(double delta) {
  if (!(delta > 0)) throw InputError("star domain needs delta > 0");
  const double a = StarDomainSpec{delta, 2}.alpha();
  return {{-delta, 0.0}, {-(delta + a), -a}, {delta + a, -a}, {delta, 0.0}, {delta + a, a}, {-(delta + a), a}};
}

// ---------------------------------------------------------------------------

TreeLevel FractalTree::level_data(const FractalTreeSpec& spec, int j) {
  if (j < 0) throw InputError("tree level must be non-negative");
  if (j > 63) throw InputError("tree level too deep: cell count 3*2^(j-1) overflows 64 bits");
  const double c = spec.overlap_fraction;
  TreeLevel L{};
  L.level = j;
  L.count = j == 0 ? 1 : std::uint64_t{3} << (j - 1);
  L.side = spec.a * std::pow(FractalTreeSpec::scale, j);
  L.area = std::sqrt(3.0) * L.side * L.side / 4.0;
  if (j == 0) {
    L.extended_area = L.area;
    L.extended_diameter = L.side;
    L.overlap = 0.0;
  } else {
    L.extended_area = (1.0 + c) * L.area;
    L.extended_diameter = std::sqrt(1.0 + c) * L.side;
    L.overlap = c * L.area;
  }
  return L;
}

double FractalTree::descendants(int j, int i) const {
  if (i < j) return 0.0;
  if (i == j) return 1.0;
  if (j == 0) return static_cast<double>(level_data(spec, i).count);
  return std::ldexp(1.0, i - j);
}

namespace {

// Triangle erected outward on the middle third of side (p, q) of a triangle
// with centroid c. Returns {base_left, base_right, apex}.
std::array<Point, 3> erect_child(const Point& p, const Point& q, const Point& c) {
  const Point u = p + (q - p) / 3.0;
  const Point v = p + 2.0 * (q - p) / 3.0;
  const Point mid = 0.5 * (u + v);
  Point n(-(q - p).y(), (q - p).x(), 0.0);
  n.normalize();
  if (n.dot(mid - c) < 0) n = -n;
  const double h = (v - u).norm() * std::sqrt(3.0) / 2.0;
  return {u, v, mid + h * n};
}

}  // namespace

FractalTree build_snowflake_tree(const FractalTreeSpec& spec) {
  if (spec.depth < 0) throw InputError("tree depth must be non-negative");
  if (!(spec.a > 0)) throw InputError("snowflake side length must be positive");
  if (!(spec.overlap_fraction > 0 && spec.overlap_fraction < 1)) {
    throw InputError("overlap_fraction must lie in (0, 1)");
  }
  FractalTree tree;
  tree.spec = spec;
  for (int j = 0; j <= spec.depth; ++j) tree.levels.push_back(FractalTree::level_data(spec, j));
  tree.multiplicity = (spec.depth == 0 && !spec.fractal_limit) ? 1 : 2;

  const int mat = std::min(spec.depth, std::max(spec.materialize_depth, 0));
  const double a = spec.a;
  const double t = std::sqrt(1.0 + spec.overlap_fraction);
  // Triangles as {base_left, base_right, apex}; the root's "base" is arbitrary.
  std::vector<std::array<Point, 3>> current{{Point(0, 0, 0), Point(a, 0, 0), Point(a / 2, a * std::sqrt(3.0) / 2, 0)}};
  {
    const auto& r = current.front();
    ConvexCell root(2, {r[0], r[1], r[2]});
    tree.cells.push_back({TreeCell{root, root, -1}});
  }
  for (int j = 1; j <= mat; ++j) {
    std::vector<std::array<Point, 3>> next;
    std::vector<TreeCell> level_cells;
    for (std::size_t k = 0; k < current.size(); ++k) {
      const auto& tri = current[k];
      const Point c = (tri[0] + tri[1] + tri[2]) / 3.0;
      std::vector<std::pair<Point, Point>> sides;
      if (j == 1) {
        sides = {{tri[0], tri[1]}, {tri[1], tri[2]}, {tri[2], tri[0]}};
      } else {
        sides = {{tri[0], tri[2]}, {tri[2], tri[1]}};
      }
      for (const auto& [p, q] : sides) {
        const auto child = erect_child(p, q, c);
        const Point& apex = child[2];
        ConvexCell base(2, {child[0], child[1], apex});
        ConvexCell ext(2, {apex + t * (child[0] - apex), apex + t * (child[1] - apex), apex});
        level_cells.push_back(TreeCell{std::move(base), std::move(ext), static_cast<int>(k)});
        next.push_back(child);
      }
    }
    tree.cells.push_back(std::move(level_cells));
    current = std::move(next);
  }
  return tree;
}

}  // namespace qcb

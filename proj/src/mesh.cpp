#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "json_io.hpp"
#include "qcbound/error.hpp"
#include "qcbound/oracle.hpp"

namespace qcb {

namespace {

using Edge = std::pair<int, int>;

Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

double signed_area(const TriangleMesh& m, const std::array<int, 3>& e) {
  const auto& a = m.nodes[e[0]];
  const auto& b = m.nodes[e[1]];
  const auto& c = m.nodes[e[2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

std::map<Edge, int> edge_counts(const TriangleMesh& m) {
  std::map<Edge, int> counts;
  for (const auto& e : m.elements) {
    for (int k = 0; k < 3; ++k) ++counts[make_edge(e[k], e[(k + 1) % 3])];
  }
  return counts;
}

std::size_t count_components(const TriangleMesh& m) {
  std::vector<int> parent(m.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<char> used(m.nodes.size(), 0);
  for (const auto& e : m.elements) {
    for (int k = 0; k < 3; ++k) {
      used[e[k]] = 1;
      parent[find(e[k])] = find(e[(k + 1) % 3]);
    }
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (used[i] && find(int(i)) == int(i)) ++roots;
  }
  return roots;
}

// Orients every element counter-clockwise.
void orient(TriangleMesh& m) {
  for (auto& e : m.elements) {
    if (signed_area(m, e) < 0) std::swap(e[1], e[2]);
  }
}

// Equal subdivision of [a, b] into pieces no longer than h.
void subdivide(double a, double b, double h, std::vector<double>& out) {
  const int k = std::max(1, int(std::ceil((b - a) / h - 1e-12)));
  for (int i = 0; i < k; ++i) out.push_back(a + (b - a) * i / k);
}

TriangleMesh mesh_rect_union(const std::vector<RectangleShape>& rects, double h) {
  if (rects.empty()) throw InputError("rectangle union is empty");
  std::vector<double> bx, by;
  for (const auto& r : rects) {
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) throw InputError("rectangle must have x1 > x0 and y1 > y0");
    bx.insert(bx.end(), {r.x0, r.x1});
    by.insert(by.end(), {r.y0, r.y1});
  }
  std::sort(bx.begin(), bx.end());
  bx.erase(std::unique(bx.begin(), bx.end()), bx.end());
  std::sort(by.begin(), by.end());
  by.erase(std::unique(by.begin(), by.end()), by.end());
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i + 1 < bx.size(); ++i) subdivide(bx[i], bx[i + 1], h, xs);
  xs.push_back(bx.back());
  for (std::size_t i = 0; i + 1 < by.size(); ++i) subdivide(by[i], by[i + 1], h, ys);
  ys.push_back(by.back());

  auto inside = [&](double x, double y) {
    for (const auto& r : rects) {
      if (x > r.x0 && x < r.x1 && y > r.y0 && y < r.y1) return true;
    }
    return false;
  };
  TriangleMesh m;
  const std::size_t nx = xs.size();
  std::vector<int> id(nx * ys.size(), -1);
  auto node = [&](std::size_t i, std::size_t j) {
    int& slot = id[j * nx + i];
    if (slot < 0) {
      slot = int(m.nodes.size());
      m.nodes.emplace_back(xs[i], ys[j]);
    }
    return slot;
  };
  for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      if (!inside(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]))) continue;
      const int a = node(i, j), b = node(i + 1, j), c = node(i + 1, j + 1), d = node(i, j + 1);
      m.elements.push_back({a, b, c});
      m.elements.push_back({a, c, d});
    }
  }
  return m;
}

TriangleMesh mesh_fan(const PolygonShape& poly, double h) {
  const auto& v = poly.vertices;
  const std::size_t nv = v.size();
  if (nv < 3) throw InputError("polygon needs at least 3 vertices");
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  if (poly.center) {
    c = *poly.center;
  } else {
    for (const auto& x : v) c += x;
    c /= double(nv);
  }
  double longest = 0.0;
  for (std::size_t i = 0; i < nv; ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % nv];
    const double cross = (a - c).x() * (b - c).y() - (a - c).y() * (b - c).x();
    if (!(cross > 0.0)) throw InputError("polygon is not CCW and star-shaped with respect to its center");
    longest = std::max({longest, (a - c).norm(), (b - a).norm()});
  }
  const int k = std::max(1, int(std::ceil(longest / h - 1e-12)));

  TriangleMesh m;
  m.nodes.push_back(c);
  // ray[i][t], t = 1..k: nodes on the segment c -> v_i
  std::vector<std::vector<int>> ray(nv, std::vector<int>(k + 1, 0));
  for (std::size_t i = 0; i < nv; ++i) {
    for (int t = 1; t <= k; ++t) {
      ray[i][t] = int(m.nodes.size());
      m.nodes.push_back(c + (double(t) / k) * (v[i] - c));
    }
  }
  for (std::size_t i = 0; i < nv; ++i) {
    const std::size_t i1 = (i + 1) % nv;
    const Eigen::Vector2d ea = (v[i] - c) / double(k);
    const Eigen::Vector2d eb = (v[i1] - c) / double(k);
    // barycentric lattice (a, b), a + b <= k; a = 0 or b = 0 on the rays
    std::map<std::pair<int, int>, int> local;
    auto at = [&](int a, int b) -> int {
      if (a == 0 && b == 0) return 0;
      if (b == 0) return ray[i][a];
      if (a == 0) return ray[i1][b];
      auto [it, fresh] = local.try_emplace({a, b}, int(m.nodes.size()));
      if (fresh) m.nodes.push_back(c + double(a) * ea + double(b) * eb);
      return it->second;
    };
    for (int a = 0; a < k; ++a) {
      for (int b = 0; a + b < k; ++b) {
        m.elements.push_back({at(a, b), at(a + 1, b), at(a, b + 1)});
        if (a + b + 2 <= k) m.elements.push_back({at(a + 1, b), at(a + 1, b + 1), at(a, b + 1)});
      }
    }
  }
  return m;
}

TriangleMesh mesh_disk(const DiskShape& d, double h) {
  if (!(d.radius > 0.0)) throw InputError("disk radius must be positive");
  const int rings = std::max(1, int(std::ceil(d.radius / h - 1e-12)));
  TriangleMesh m;
  m.nodes.emplace_back(d.cx, d.cy);
  std::vector<int> prev{0};
  for (int i = 1; i <= rings; ++i) {
    const int count = 6 * i;
    const double r = d.radius * i / rings;
    std::vector<int> ring(count);
    for (int k = 0; k < count; ++k) {
      const double t = 2.0 * std::numbers::pi * k / count;
      ring[k] = int(m.nodes.size());
      m.nodes.emplace_back(d.cx + r * std::cos(t), d.cy + r * std::sin(t));
    }
    if (i == 1) {
      for (int k = 0; k < count; ++k) m.elements.push_back({0, ring[k], ring[(k + 1) % count]});
    } else {
      // zipper by angle between the two rings
      const int na = int(prev.size());
      int a = 0, b = 0;
      while (a < na || b < count) {
        const double ta = a < na ? double(a + 1) / na : 2.0;
        const double tb = b < count ? double(b + 1) / count : 2.0;
        if (tb <= ta) {
          m.elements.push_back({prev[a % na], ring[b], ring[(b + 1) % count]});
          ++b;
        } else {
          m.elements.push_back({prev[a % na], ring[b % count], prev[(a + 1) % na]});
          ++a;
        }
      }
    }
    prev = std::move(ring);
  }
  return m;
}

}  // namespace

void TriangleMesh::validate() const {
  if (nodes.empty() || elements.empty()) throw InputError("mesh has no nodes or elements");
  const int n = int(nodes.size());
  for (const auto& x : nodes) {
    if (!x.allFinite()) throw InputError("mesh node coordinates must be finite");
  }
  for (const auto& e : elements) {
    for (int k : e) {
      if (k < 0 || k >= n) throw InputError("mesh element references a missing node");
    }
    if (!(signed_area(*this, e) > 0.0)) throw InputError("mesh element with nonpositive signed area");
  }
  for (const auto& [edge, c] : edge_counts(*this)) {
    if (c > 2) throw InputError("mesh edge shared by more than two elements");
  }
  if (count_components(*this) != 1) throw InputError("mesh is not connected");
}

double TriangleMesh::area() const {
  double a = 0.0;
  for (const auto& e : elements) a += signed_area(*this, e);
  return a;
}

double TriangleMesh::max_edge() const {
  double h = 0.0;
  for (const auto& e : elements) {
    for (int k = 0; k < 3; ++k) h = std::max(h, (nodes[e[k]] - nodes[e[(k + 1) % 3]]).norm());
  }
  return h;
}

ConformityAudit audit_mesh(const TriangleMesh& mesh) {
  ConformityAudit a;
  std::vector<Edge> boundary;
  for (const auto& [edge, c] : edge_counts(mesh)) {
    if (c == 1) {
      ++a.boundary_edges;
      boundary.push_back(edge);
    } else if (c == 2) {
      ++a.interior_edges;
    } else {
      ++a.overloaded_edges;
    }
  }
  std::vector<char> used(mesh.nodes.size(), 0);
  for (const auto& e : mesh.elements) {
    for (int k : e) used[k] = 1;
  }
  for (const auto& [i, j] : boundary) {
    const Eigen::Vector2d p = mesh.nodes[i], q = mesh.nodes[j];
    const Eigen::Vector2d d = q - p;
    const double len2 = d.squaredNorm();
    const Eigen::Vector2d lo = p.cwiseMin(q), hi = p.cwiseMax(q);
    for (std::size_t k = 0; k < mesh.nodes.size(); ++k) {
      if (!used[k] || int(k) == i || int(k) == j) continue;
      const Eigen::Vector2d& x = mesh.nodes[k];
      if ((x.array() < lo.array() - 1e-12).any() || (x.array() > hi.array() + 1e-12).any()) continue;
      const double t = (x - p).dot(d) / len2;
      const double off = std::abs(d.x() * (x - p).y() - d.y() * (x - p).x()) / std::sqrt(len2);
      if (t > 1e-9 && t < 1 - 1e-9 && off < 1e-10 * std::sqrt(len2)) ++a.hanging_nodes;
    }
  }
  a.components = count_components(mesh);
  return a;
}

TriangleMesh mesh_domain(const DomainShape& shape, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InputError("mesh size h must be positive");
  TriangleMesh m = std::visit(
      [&](const auto& s) -> TriangleMesh {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RectangleShape>) {
          return mesh_rect_union({s}, h);
        } else if constexpr (std::is_same_v<T, RectUnionShape>) {
          return mesh_rect_union(s.rects, h);
        } else if constexpr (std::is_same_v<T, PolygonShape>) {
          return mesh_fan(s, h);
        } else {
          return mesh_disk(s, h);
        }
      },
      shape);
  orient(m);
  m.validate();
  return m;
}

double shape_area(const DomainShape& shape) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RectangleShape>) {
          return (s.x1 - s.x0) * (s.y1 - s.y0);
        } else if constexpr (std::is_same_v<T, RectUnionShape>) {
          // exact on the breakpoint grid
          TriangleMesh m = mesh_rect_union(s.rects, std::numeric_limits<double>::infinity());
          return m.area();
        } else if constexpr (std::is_same_v<T, PolygonShape>) {
          double a = 0.0;
          const auto& v = s.vertices;
          for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& p = v[i];
            const auto& q = v[(i + 1) % v.size()];
            a += p.x() * q.y() - p.y() * q.x();
          }
          return 0.5 * a;
        } else {
          return std::numbers::pi * s.radius * s.radius;
        }
      },
      shape);
}

std::string mesh_to_json(const TriangleMesh& mesh) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& x : mesh.nodes) j["nodes"].push_back({x.x(), x.y()});
  j["elements"] = nlohmann::json::array();
  for (const auto& e : mesh.elements) j["elements"].push_back({e[0], e[1], e[2]});
  return j.dump();
}

TriangleMesh mesh_from_json(const std::string& text) {
  const auto j = detail::parse_json(text, "mesh");
  TriangleMesh m;
  try {
    for (const auto& x : j.at("nodes")) {
      if (x.size() != 2) throw InputError("mesh node must have two coordinates");
      m.nodes.emplace_back(x.at(0).get<double>(), x.at(1).get<double>());
    }
    for (const auto& e : j.at("elements")) {
      if (e.size() != 3) throw InputError("mesh element must have three indices");
      m.elements.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("mesh: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace qcb

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <doctest.h>

#include "qcbound/error.hpp"
#include "qcbound/oracle.hpp"
#include "qcbound/poincare.hpp"

using namespace qcb;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDiskMu = 3.3899577166718887;

const TriangleMesh& square(double h) {
  static std::map<double, TriangleMesh> cache;
  auto it = cache.find(h);
  if (it == cache.end()) it = cache.emplace(h, mesh_domain(RectangleShape{0, 0, 1, 1}, h)).first;
  return it->second;
}

GridFunction nodal(const TriangleMesh& mesh, auto&& f) {
  GridFunction g(mesh.dof());
  for (std::size_t i = 0; i < mesh.dof(); ++i) g(i) = f(mesh.nodes[i].x(), mesh.nodes[i].y());
  return g;
}

}  // namespace

TEST_CASE("structured square mesh") {
  const TriangleMesh& m = square(0.1);
  CHECK(m.elements.size() == 200);
  CHECK(m.area() == doctest::Approx(1.0).epsilon(1e-14));
  for (const auto& e : m.elements) {
    const auto& a = m.nodes[e[0]];
    const auto& b = m.nodes[e[1]];
    const auto& c = m.nodes[e[2]];
    CHECK((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x() > 0);
  }
  CHECK(m.max_edge() <= 1.5 * 0.1);
  CHECK(audit_mesh(m).conforming());
  CHECK(audit_mesh(m).boundary_edges == 40);
}

TEST_CASE("disk mesh follows the circle") {
  const TriangleMesh m = mesh_domain(DiskShape{0, 0, 1}, 0.05);
  const ConformityAudit audit = audit_mesh(m);
  CHECK(audit.conforming());
  CHECK(m.max_edge() <= 2 * 0.05);
  // boundary edges: midpoints lie within 1e-3 of the circle
  std::map<std::pair<int, int>, int> count;
  for (const auto& e : m.elements) {
    for (int k = 0; k < 3; ++k) {
      const int a = e[k], b = e[(k + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  double worst = 0;
  std::size_t boundary = 0;
  for (const auto& [edge, c] : count) {
    if (c != 1) continue;
    ++boundary;
    worst = std::max(worst, 1.0 - (0.5 * (m.nodes[edge.first] + m.nodes[edge.second])).norm());
    CHECK(m.nodes[edge.first].norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(boundary == audit.boundary_edges);
  CHECK(worst < 1e-3);
  CHECK(m.area() == doctest::Approx(kPi).epsilon(2e-3));
}

TEST_CASE("rectangle unions and star polygons are conforming") {
  const RectUnionShape u{{{0, 0, 1, 1}, {0.5, 0.3, 1.7, 1.4}}};
  const TriangleMesh m = mesh_domain(u, 0.05);
  CHECK(audit_mesh(m).conforming());
  CHECK(audit_mesh(m).hanging_nodes == 0);
  CHECK(m.area() == doctest::Approx(shape_area(u)).epsilon(1e-12));
  CHECK(shape_area(u) == doctest::Approx(1 + 1.2 * 1.1 - 0.5 * 0.7).epsilon(1e-14));

  const double s3 = std::sqrt(3.0);
  const double a = (s3 - 1) / 2;
  PolygonShape star;
  star.vertices = {{-1, 0}, {-(1 + a), -a}, {1 + a, -a}, {1, 0}, {1 + a, a}, {-(1 + a), a}};
  star.center = Eigen::Vector2d(0, 0);
  const TriangleMesh sm = mesh_domain(star, 0.05);
  CHECK(audit_mesh(sm).conforming());
  CHECK(sm.area() == doctest::Approx(s3).epsilon(1e-12));

  // disjoint rectangles: two components
  CHECK_THROWS_AS(mesh_domain(RectUnionShape{{{0, 0, 1, 1}, {2, 0, 3, 1}}}, 0.1), InputError);
  CHECK_THROWS_AS(mesh_domain(RectangleShape{0, 0, 1, 1}, 0.0), InputError);
}

TEST_CASE("mesh validation") {
  TriangleMesh m;
  m.nodes = {{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}};
  m.elements = {{0, 1, 2}, {3, 4, 5}};
  CHECK_THROWS_AS(m.validate(), InputError);  // disconnected
  m.elements = {{0, 2, 1}};
  m.nodes.resize(3);
  CHECK_THROWS_AS(m.validate(), InputError);  // clockwise
  m.elements = {{0, 1, 7}};
  CHECK_THROWS_AS(m.validate(), InputError);  // out of range
  CHECK_THROWS_AS(neumann_mu2(m), InputError);
}

TEST_CASE("mesh JSON round trip is bit exact") {
  const TriangleMesh m = mesh_domain(DiskShape{0.3, -0.2, 0.7}, 0.1);
  const TriangleMesh back = mesh_from_json(mesh_to_json(m));
  REQUIRE(back.nodes.size() == m.nodes.size());
  REQUIRE(back.elements == m.elements);
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    CHECK(back.nodes[i].x() == m.nodes[i].x());
    CHECK(back.nodes[i].y() == m.nodes[i].y());
  }
  CHECK(mesh_to_json(back) == mesh_to_json(m));
  CHECK_THROWS_AS(mesh_from_json("{\"nodes\": [[0, 0]"), InputError);
  CHECK_THROWS_AS(mesh_from_json("{\"nodes\": [[0, 0]], \"elements\": [[0, 0, 0]]}"), InputError);
}

TEST_CASE("square calibration converges from above") {
  double prev = std::numeric_limits<double>::infinity();
  double prev_err = 0;
  for (double h : {0.1, 0.05, 0.025}) {
    const EigenResult r = neumann_mu2(square(h));
    CHECK(r.mu2 < prev);
    CHECK(r.mu2 > kPi * kPi);
    CHECK(r.residual <= 1e-8);
    CHECK(std::abs(r.mean) <= 1e-10);
    const double err = r.mu2 - kPi * kPi;
    if (prev_err > 0) CHECK(prev_err / err == doctest::Approx(4.0).epsilon(0.1));
    prev = r.mu2;
    prev_err = err;
  }
  CHECK(prev == doctest::Approx(kPi * kPi).epsilon(0.01));
  CHECK(poincare_constant_p2(square(0.025)) == doctest::Approx(1 / kPi).epsilon(0.01));
}

TEST_CASE("dense and iterative eigensolvers agree") {
  // 11x11 nodes: dense path; 21x21: iterative path
  const TriangleMesh& coarse = square(0.1);
  REQUIRE(coarse.dof() <= 400);
  const FemMatrices fm = assemble_p1(coarse);
  const Eigen::MatrixXd K(fm.stiffness), M(fm.mass);
  CHECK(M.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((K * Eigen::VectorXd::Ones(K.rows())).norm() < 1e-12);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
  CHECK(neumann_mu2(coarse).mu2 == doctest::Approx(es.eigenvalues()(1)).epsilon(1e-12));

  const TriangleMesh& fine = square(0.05);
  REQUIRE(fine.dof() > 400);
  const FemMatrices ff = assemble_p1(fine);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ef(Eigen::MatrixXd(ff.stiffness), Eigen::MatrixXd(ff.mass));
  CHECK(neumann_mu2(fine).mu2 == doctest::Approx(ef.eigenvalues()(1)).epsilon(1e-10));
}

TEST_CASE("rectangle and disk calibration") {
  const TriangleMesh rect = mesh_domain(RectangleShape{0, 0, 2, 1}, 0.025);
  CHECK(neumann_mu2(rect).mu2 == doctest::Approx(kPi * kPi / 4).epsilon(0.01));
  CHECK(poincare_constant_p2(rect) == doctest::Approx(2 / kPi).epsilon(0.01));
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {0.1, 0.05, 0.025}) {
    const double mu = neumann_mu2(mesh_domain(DiskShape{0, 0, 1}, h)).mu2;
    CHECK(mu < prev);
    prev = mu;
  }
  CHECK(prev == doctest::Approx(kDiskMu).epsilon(0.02));
  CHECK(prev == doctest::Approx(3.38994).epsilon(0.02));
  CHECK(poincare_constant_p2(mesh_domain(DiskShape{0, 0, 1}, 0.05)) == doctest::Approx(0.54323).epsilon(0.02));
}

TEST_CASE("Rayleigh quotient") {
  const TriangleMesh& m = square(0.025);
  const GridFunction c = nodal(m, [](double x, double) { return std::cos(kPi * x); });
  CHECK(rayleigh_quotient(m, c, 2.0) == doctest::Approx(kPi * kPi).epsilon(2e-3));
  CHECK(rayleigh_quotient(m, -3.5 * c, 2.0) == doctest::Approx(rayleigh_quotient(m, c, 2.0)).epsilon(1e-12));
  const EigenResult er = neumann_mu2(m);
  CHECK(rayleigh_quotient(m, er.eigenvector, 2.0) == doctest::Approx(er.mu2).epsilon(1e-8));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 20; ++k) {
    const double a = u(rng), b = u(rng), w = 1 + 3 * std::abs(u(rng));
    const GridFunction f = nodal(m, [&](double x, double y) { return a * std::sin(w * x + b) + b * x * y * y + u(rng) * 1e-3; });
    CHECK(rayleigh_quotient(m, f, 2.0, true) >= er.mu2 - 1e-8);
  }
  const GridFunction xy = nodal(m, [](double x, double y) { return x + y * y; });
  CHECK_THROWS_AS(rayleigh_quotient(m, xy, 2.0), InputError);
  CHECK_THROWS_AS(rayleigh_quotient(m, GridFunction::Constant(m.dof(), 2.0), 2.0, true), InputError);
  CHECK_THROWS_AS(rayleigh_quotient(m, GridFunction::Zero(3), 2.0), InputError);
}

TEST_CASE("constraint shift") {
  const TriangleMesh& m = square(0.05);
  const GridFunction f = nodal(m, [](double x, double y) { return std::exp(2 * x) + y; });
  for (double p : {1.5, 2.0, 3.0, 6.0}) {
    const double c = constraint_shift(m, f, p);
    const GridFunction g = f.array() - c;
    // once shifted the constraint holds, so no projection is required
    CHECK_NOTHROW(rayleigh_quotient(m, g, p));
    CHECK(rayleigh_quotient(m, g, p) == doctest::Approx(rayleigh_quotient(m, f, p, true)).epsilon(1e-12));
  }
}

TEST_CASE("p-Rayleigh minimization") {
  const TriangleMesh& m = square(0.1);
  const double mu2 = neumann_mu2(m).mu2;
  const RayleighEstimate e2 = minimize_rayleigh_p(m, 2.0, 40, 5, 2);
  CHECK(e2.value == doctest::Approx(mu2).epsilon(0.01));
  CHECK(e2.value >= mu2 - 1e-8);

  const RayleighEstimate e3 = minimize_rayleigh_p(m, 3.0, 60, 5, 2);
  CHECK(e3.value >= std::pow(pi_p(3.0) / std::sqrt(2.0), 3.0));
  CHECK(e3.value == doctest::Approx(rayleigh_quotient(m, e3.minimizer, 3.0)).epsilon(1e-10));
  const RayleighEstimate again = minimize_rayleigh_p(m, 3.0, 60, 5, 2);
  CHECK(again.value == e3.value);
  CHECK(again.minimizer == e3.minimizer);
  CHECK_THROWS_AS(minimize_rayleigh_p(m, 1.0, 10, 5), InputError);
}

TEST_CASE("domination checks") {
  const TriangleMesh& m = square(0.025);
  PoincareBound b = convex_cell_constant(ConvexCell::rectangle(0, 0, 1, 1), {2.0, 2});
  const DominationReport ok = check_domination(b, m);
  CHECK(ok.pass);
  CHECK(ok.method == "fem-p1-neumann");
  CHECK(ok.margin == doctest::Approx(std::sqrt(2.0) / kPi - 1 / kPi).epsilon(0.01));
  CHECK(ok.flags.empty());

  b.value *= 0.5;
  const DominationReport bad = check_domination(b, m);
  CHECK_FALSE(bad.pass);
  CHECK(bad.margin < 0);

  const WhitneyTriple t = WhitneyTriple::make(ConvexCell::rectangle(0, 0, 1, 1), ConvexCell::rectangle(0.5, 0, 1.5, 1),
                                              ConvexCell::rectangle(1, 0, 2, 1));
  const PoincareBound cb = convex_cell_constant(t.q1, {2.0, 2});
  const PoincareBound tri = triple_constant(t, cb, cb, cb, 2.0);
  const DominationReport row = check_domination(tri, mesh_domain(RectangleShape{0, 0, 2, 1}, 0.05));
  CHECK(row.pass);
  CHECK(row.margin > 10);

  EigenBound mu;
  mu.p = 2.0;
  mu.mu_lower = 9.0;
  CHECK(check_domination(mu, m).pass);
  mu.mu_lower = 10.0;
  CHECK_FALSE(check_domination(mu, m).pass);

  // area mismatch is flagged
  b = convex_cell_constant(ConvexCell::rectangle(0, 0, 1, 1), {2.0, 2});
  b.domain_volume = 2.0;
  CHECK_FALSE(check_domination(b, m).flags.empty());
  b.r = 3.0;
  CHECK_THROWS_AS(check_domination(b, m), InputError);
}

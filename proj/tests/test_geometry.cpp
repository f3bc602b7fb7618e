#include <cmath>
#include <random>

#include <doctest.h>

#include "qcbound/error.hpp"
#include "qcbound/geometry.hpp"

using namespace qcb;

namespace {

const double kSqrt3 = std::sqrt(3.0);

ConvexCell triangle(double a, double dx = 0.0) {
  return ConvexCell(2, {Point(dx, 0, 0), Point(dx + a, 0, 0), Point(dx + a / 2, a * kSqrt3 / 2, 0)});
}

ConvexCell cube(double x0, double y0, double z0, double s) {
  std::vector<Point> v;
  for (int i = 0; i < 8; ++i) v.emplace_back(x0 + s * (i & 1), y0 + s * ((i >> 1) & 1), z0 + s * ((i >> 2) & 1));
  return ConvexCell(3, v);
}

// barycentric sign test, independent of the half-space description
bool in_triangle(double x, double y, const Point& a, const Point& b, const Point& c) {
  auto side = [&](const Point& p, const Point& q) {
    return (q.x() - p.x()) * (y - p.y()) - (q.y() - p.y()) * (x - p.x());
  };
  const double s1 = side(a, b), s2 = side(b, c), s3 = side(c, a);
  return (s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0);
}

struct Estimate {
  double value, se;
};

// Uniform sampling of [x0,x1]x[y0,y1] against an indicator.
template <class F>
Estimate sample_area(F inside, double x0, double x1, double y0, double y1, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += inside(ux(rng), uy(rng)) ? 1 : 0;
  const double box = (x1 - x0) * (y1 - y0);
  const double f = double(hits) / n;
  return {box * f, box * std::sqrt(f * (1 - f) / n)};
}

}  // namespace

TEST_CASE("unit square volume and diameter") {
  const ConvexCell sq = ConvexCell::rectangle(0, 0, 1, 1);
  CHECK(cell_volume(sq) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cell_diameter(sq) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("equilateral triangle") {
  for (double a : {1.0, 0.3, 7.0}) {
    const ConvexCell t = triangle(a);
    CHECK(cell_volume(t) == doctest::Approx(kSqrt3 / 4 * a * a).epsilon(1e-14));
    CHECK(cell_diameter(t) == doctest::Approx(a).epsilon(1e-14));
  }
}

TEST_CASE("degenerate and non-convex vertex lists are rejected") {
  CHECK_THROWS_AS(ConvexCell(2, {Point(0, 0, 0), Point(1, 1, 0), Point(2, 2, 0)}), InputError);
  CHECK_THROWS_AS(ConvexCell(2, {Point(0, 0, 0), Point(1, 0, 0)}), InputError);
  CHECK_THROWS_AS(ConvexCell(2, {}), InputError);
  // interior vertex
  CHECK_THROWS_AS(ConvexCell(2, {Point(0, 0, 0), Point(1, 0, 0), Point(0, 1, 0), Point(0.2, 0.2, 0)}),
                  InputError);
  // the hull builder drops it instead
  CHECK(ConvexCell::hull_of(2, {Point(0, 0, 0), Point(1, 0, 0), Point(0, 1, 0), Point(0.2, 0.2, 0)}).volume() ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(ConvexCell::from_coordinates({{0, 0}, {1, 0, 0}, {0, 1}}), InputError);
  // flat tetrahedron
  CHECK_THROWS_AS(ConvexCell(3, {Point(0, 0, 0), Point(1, 0, 0), Point(0, 1, 0), Point(1, 1, 0)}), InputError);
}

TEST_CASE("rectangle intersections") {
  const ConvexCell a = ConvexCell::rectangle(0, 0, 1, 1);
  CHECK(intersection_volume(a, ConvexCell::rectangle(0.5, 0, 1.5, 1)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(intersection_volume(a, ConvexCell::rectangle(2, 0, 3, 1)) == 0.0);
  // touching along an edge has no area
  CHECK(intersection_volume(a, ConvexCell::rectangle(1, 0, 2, 1)) == doctest::Approx(0.0).scale(1.0));
  CHECK_FALSE(intersect_cells(a, ConvexCell::rectangle(2, 0, 3, 1)).has_value());
}

TEST_CASE("shifted triangles against independent sampling") {
  const ConvexCell t1 = triangle(1.0);
  const ConvexCell t2 = triangle(1.0, 0.5);
  const double exact = intersection_volume(t1, t2);
  // overlap is an equilateral triangle of side 1/2
  CHECK(exact == doctest::Approx(kSqrt3 / 16).epsilon(1e-13));
  const auto v1 = t1.vertices();
  const auto v2 = t2.vertices();
  const Estimate est = sample_area(
      [&](double x, double y) { return in_triangle(x, y, v1[0], v1[1], v1[2]) && in_triangle(x, y, v2[0], v2[1], v2[2]); },
      0.0, 1.5, 0.0, kSqrt3 / 2, 2'000'000, 17);
  CHECK(std::abs(est.value - exact) < 3 * est.se);
  const MonteCarloEstimate mc = intersection_volume_mc(t1, t2, 2'000'000, 5);
  CHECK(std::abs(mc.value - exact) < 3 * mc.std_error);
}

TEST_CASE("intersection is symmetric, idempotent and bounded") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 50; ++k) {
    std::vector<Point> p1, p2;
    for (int i = 0; i < 7; ++i) {
      p1.emplace_back(u(rng), u(rng), 0);
      p2.emplace_back(0.5 + u(rng), u(rng), 0);
    }
    const ConvexCell c1 = ConvexCell::hull_of(2, p1);
    const ConvexCell c2 = ConvexCell::hull_of(2, p2);
    const double v12 = intersection_volume(c1, c2);
    CHECK(v12 == doctest::Approx(intersection_volume(c2, c1)).epsilon(1e-12));
    CHECK(intersection_volume(c1, c1) == doctest::Approx(c1.volume()).epsilon(1e-12));
    CHECK(v12 <= std::min(c1.volume(), c2.volume()) + 1e-12);
    const double u12 = union_volume(std::vector<ConvexCell>{c1, c2});
    CHECK(u12 == doctest::Approx(c1.volume() + c2.volume() - v12).epsilon(1e-12));
  }
}

TEST_CASE("homothety scales volume by lambda^n and diameter by lambda") {
  const ConvexCell t = triangle(1.0);
  const ConvexCell c = cube(0, 0, 0, 1);
  for (double lam : {0.5, 2.0, 3.0}) {
    const ConvexCell ts = t.transformed(lam, Point(1, -2, 0));
    CHECK(ts.volume() == doctest::Approx(lam * lam * t.volume()).epsilon(1e-13));
    CHECK(ts.diameter() == doctest::Approx(lam * t.diameter()).epsilon(1e-13));
    const ConvexCell cs = c.transformed(lam);
    CHECK(cs.volume() == doctest::Approx(lam * lam * lam).epsilon(1e-13));
    CHECK(cs.diameter() == doctest::Approx(lam * std::sqrt(3.0)).epsilon(1e-13));
  }
}

TEST_CASE("three-dimensional cells") {
  const ConvexCell c = cube(0, 0, 0, 1);
  CHECK(c.volume() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(intersection_volume(c, cube(0.5, 0, 0, 1)) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(intersection_volume(c, cube(0.5, 0.5, 0.5, 1)) == doctest::Approx(0.125).epsilon(1e-13));
  CHECK(intersection_volume(c, cube(2, 0, 0, 1)) == 0.0);
  const ConvexCell tet(3, {Point(0, 0, 0), Point(1, 0, 0), Point(0, 1, 0), Point(0, 0, 1)});
  CHECK(tet.volume() == doctest::Approx(1.0 / 6).epsilon(1e-14));
  const ConvexCell tet2 = tet.transformed(1.0, Point(0.2, 0.1, 0.1));
  const double exact = intersection_volume(tet, tet2);
  // the overlap is a scaled copy: x+y+z <= 1 with x>=.2, y>=.1, z>=.1
  CHECK(exact == doctest::Approx(std::pow(0.6, 3) / 6).epsilon(1e-12));
  const MonteCarloEstimate mc = intersection_volume_mc(tet, tet2, 1'000'000, 11);
  CHECK(std::abs(mc.value - exact) < 3 * mc.std_error);
}

TEST_CASE("star domain pieces") {
  const StarDomain d = build_star_domain({1.0, 2, 64});
  const double alpha = (kSqrt3 - 1) / 2;
  CHECK(d.alpha == doctest::Approx(alpha).epsilon(1e-15));
  const auto [lo, hi] = d.omega1.bounding_box();
  CHECK(hi.y() - lo.y() == doctest::Approx(kSqrt3 - 1).epsilon(1e-14));
  CHECK(d.omega1.volume() == doctest::Approx(2 * (kSqrt3 - 1)).epsilon(1e-14));
  CHECK(d.omega2.volume() == doctest::Approx(2 * (kSqrt3 - 1)).epsilon(1e-14));
  CHECK(d.discretization_error == 0.0);
}

TEST_CASE("star domain volumes against the defining inequalities") {
  const double delta = 1.0;
  const double alpha = delta * (kSqrt3 - 1) / 2;
  auto in1 = [&](double x, double y) { return std::max(std::abs(x) - delta, -alpha) < y && y < alpha; };
  auto in2 = [&](double x, double y) { return -alpha < y && y < std::min(delta - std::abs(x), alpha); };
  const StarDomain d = build_star_domain({delta, 2, 64});
  const double w = delta + alpha;
  const int n = 4'000'000;

  const Estimate e1 = sample_area(in1, -w, w, -alpha, alpha, n, 1);
  CHECK(std::abs(e1.value - d.omega1.volume()) < 1e-3);
  CHECK(std::abs(e1.value - d.omega1.volume()) < 4 * e1.se);

  const double exact_union = union_volume(std::vector<ConvexCell>{d.omega1, d.omega2});
  CHECK(exact_union == doctest::Approx(kSqrt3).epsilon(1e-13));
  const Estimate eu = sample_area([&](double x, double y) { return in1(x, y) || in2(x, y); }, -w, w, -alpha, alpha, n, 2);
  CHECK(std::abs(eu.value - exact_union) < 4 * eu.se);

  const Estimate ei = sample_area([&](double x, double y) { return in1(x, y) && in2(x, y); }, -w, w, -alpha, alpha, n, 3);
  CHECK(std::abs(ei.value - intersection_volume(d.omega1, d.omega2)) < 4 * ei.se);

  // boundary polygon of the union
  double area = 0;
  const auto poly = star_union_polygon(delta);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    area += a.x() * b.y() - a.y() * b.x();
  }
  CHECK(area / 2 == doctest::Approx(kSqrt3).epsilon(1e-13));
}

TEST_CASE("star domain volumes scale with delta squared") {
  const StarDomain d1 = build_star_domain({1.0, 2, 64});
  const StarDomain d2 = build_star_domain({2.0, 2, 64});
  CHECK(d2.omega1.volume() == doctest::Approx(4 * d1.omega1.volume()).epsilon(1e-13));
  CHECK(intersection_volume(d2.omega1, d2.omega2) ==
        doctest::Approx(4 * intersection_volume(d1.omega1, d1.omega2)).epsilon(1e-13));
  CHECK_THROWS_AS(build_star_domain({-1.0, 2, 64}), InputError);
  CHECK_THROWS_AS(build_star_domain({1.0, 4, 64}), InputError);
}

TEST_CASE("three-dimensional star pieces converge with the cross-section") {
  const StarDomain coarse = build_star_domain({1.0, 3, 16});
  const StarDomain fine = build_star_domain({1.0, 3, 128});
  CHECK(fine.discretization_error < coarse.discretization_error);
  CHECK(fine.discretization_error < 1e-3);
  CHECK(fine.omega1.volume() < build_star_domain({1.0, 3, 256}).omega1.volume());
}

TEST_CASE("snowflake levels") {
  FractalTreeSpec spec;
  spec.depth = 3;
  spec.materialize_depth = 3;
  const FractalTree tree = build_snowflake_tree(spec);
  CHECK(tree.levels[0].count == 1);
  CHECK(tree.levels[0].side == 1.0);
  CHECK(tree.levels[1].count == 3);
  CHECK(tree.levels[1].side == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(tree.levels[1].area == doctest::Approx(kSqrt3 / 36).epsilon(1e-14));
  CHECK(tree.levels[3].count == 12);
  for (int j = 1; j <= 3; ++j) {
    CHECK(tree.cells[j].size() == tree.levels[j].count);
    for (const TreeCell& c : tree.cells[j]) {
      CHECK(c.base.volume() == doctest::Approx(tree.levels[j].area).epsilon(1e-12));
      CHECK(c.extended.volume() == doctest::Approx(tree.levels[j].extended_area).epsilon(1e-12));
      CHECK(c.extended.diameter() == doctest::Approx(tree.levels[j].extended_diameter).epsilon(1e-12));
      const ConvexCell& parent = tree.cells[j - 1][c.parent].base;
      CHECK(intersection_volume(parent, c.extended) == doctest::Approx(tree.levels[j].overlap).epsilon(1e-10));
    }
    // triangles of one level do not overlap
    for (std::size_t a = 0; a < tree.cells[j].size(); ++a) {
      for (std::size_t b = a + 1; b < tree.cells[j].size(); ++b) {
        CHECK(intersection_volume(tree.cells[j][a].base, tree.cells[j][b].base) < 1e-14);
      }
    }
  }
  for (int j = 1; j < 40; ++j) {
    const TreeLevel L = FractalTree::level_data(spec, j);
    CHECK(L.count == 3ull << (j - 1));
    CHECK(L.area == doctest::Approx(kSqrt3 / (4 * std::pow(9.0, j))).epsilon(1e-13));
  }
  CHECK_THROWS_AS(FractalTree::level_data(spec, 64), InputError);
  CHECK(tree.descendants(0, 3) == 12);
  CHECK(tree.descendants(1, 3) == 4);
  spec.overlap_fraction = 1.5;
  CHECK_THROWS_AS(build_snowflake_tree(spec), InputError);
}

TEST_CASE("whitney triple and chain construction") {
  const WhitneyTriple t = WhitneyTriple::make(ConvexCell::rectangle(0, 0, 1, 1), ConvexCell::rectangle(0.5, 0, 1.5, 1),
                                              ConvexCell::rectangle(1, 0, 2, 1));
  CHECK(t.v_q1r2 == doctest::Approx(0.5));
  CHECK(t.v_r2q3 == doctest::Approx(0.5));
  CHECK(t.volume() == doctest::Approx(2.0).epsilon(1e-14));
  // Q1 and Q3 overlap
  CHECK_THROWS_AS(WhitneyTriple::make(ConvexCell::rectangle(0, 0, 1, 1), ConvexCell::rectangle(0.5, 0, 1.5, 1),
                                      ConvexCell::rectangle(0.8, 0, 1.8, 1)),
                  InputError);
  // R2 misses Q3
  CHECK_THROWS_AS(WhitneyTriple::make(ConvexCell::rectangle(0, 0, 1, 1), ConvexCell::rectangle(0.5, 0, 1.5, 1),
                                      ConvexCell::rectangle(3, 0, 4, 1)),
                  InputError);

  const WhitneyTriple t2 =
      WhitneyTriple::make(ConvexCell::rectangle(1.5, 0, 2.5, 1), ConvexCell::rectangle(2, 0, 3, 1),
                          ConvexCell::rectangle(2.5, 0, 3.5, 1));
  const WhitneyChain chain = WhitneyChain::make({t, t2});
  REQUIRE(chain.link_volumes.size() == 1);
  CHECK(chain.link_volumes[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(chain.multiplicity == 2);
  CHECK_THROWS_AS(WhitneyChain::make({t, t2}, 3), InputError);

  WhitneyChain broken = chain;
  broken.link_volumes.clear();
  CHECK_THROWS_AS(broken.validate(), InputError);
}

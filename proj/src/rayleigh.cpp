#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>
#include <boost/math/tools/roots.hpp>

#include "qcbound/error.hpp"
#include "qcbound/oracle.hpp"

namespace qcb {

namespace {

// Degree-5 seven-point rule on the reference triangle; weights sum to 1.
struct TriangleRule {
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> weight;
  TriangleRule() {
    const double s = std::sqrt(15.0);
    const double b1 = (6.0 + s) / 21.0, a1 = 1.0 - 2.0 * b1, w1 = (155.0 + s) / 1200.0;
    const double b2 = (6.0 - s) / 21.0, a2 = 1.0 - 2.0 * b2, w2 = (155.0 - s) / 1200.0;
    bary = {{{1.0 / 3, 1.0 / 3, 1.0 / 3},
             {a1, b1, b1},
             {b1, a1, b1},
             {b1, b1, a1},
             {a2, b2, b2},
             {b2, a2, b2},
             {b2, b2, a2}}};
    weight = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
  }
};

const TriangleRule& rule() {
  static const TriangleRule r;
  return r;
}

struct ElementData {
  std::array<int, 3> nodes;
  double area;
  Eigen::Matrix<double, 3, 2> grad;  // rows: ∇λ_i
};

std::vector<ElementData> element_data(const TriangleMesh& mesh) {
  std::vector<ElementData> out;
  out.reserve(mesh.elements.size());
  for (const auto& e : mesh.elements) {
    const Eigen::Vector2d& a = mesh.nodes[e[0]];
    const Eigen::Vector2d& b = mesh.nodes[e[1]];
    const Eigen::Vector2d& c = mesh.nodes[e[2]];
    ElementData d;
    d.nodes = e;
    d.area = 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
    d.grad << b.y() - c.y(), c.x() - b.x(), c.y() - a.y(), a.x() - c.x(), a.y() - b.y(), b.x() - a.x();
    d.grad /= 2.0 * d.area;
    out.push_back(d);
  }
  return out;
}

double signed_pow(double t, double e) { return t < 0 ? -std::pow(-t, e) : std::pow(t, e); }

// Discrete functionals of a P1 function; `c` is subtracted before evaluation.
class Functionals {
 public:
  Functionals(const TriangleMesh& mesh, double p) : elems_(element_data(mesh)), p_(p), n_(mesh.nodes.size()) {}

  double exponent() const { return p_; }

  double gradient_integral(const Eigen::VectorXd& u) const {
    double s = 0.0;
    for (const auto& e : elems_) s += e.area * std::pow(grad(e, u).norm(), p_);
    return s;
  }

  double power_integral(const Eigen::VectorXd& u, double c) const {
    double s = 0.0;
    for_quadrature(u, c, [&](double area_w, double v, int, const ElementData&, int) {
      s += area_w * std::pow(std::abs(v), p_);
    });
    return s;
  }

  // ∫|u - c|^{p-2}(u - c) and the scale ∫|u - c|^{p-1} for relative checks.
  std::pair<double, double> constraint(const Eigen::VectorXd& u, double c) const {
    double s = 0.0, scale = 0.0;
    for_quadrature(u, c, [&](double area_w, double v, int, const ElementData&, int) {
      s += area_w * signed_pow(v, p_ - 1.0);
      scale += area_w * std::pow(std::abs(v), p_ - 1.0);
    });
    return {s, scale};
  }

  double shift(const Eigen::VectorXd& u) const {
    double lo = u.minCoeff(), hi = u.maxCoeff();
    if (!(hi - lo > 1e-14 * std::max(std::abs(lo), std::abs(hi)))) throw InputError("function is constant");
    if (p_ == 2.0) {
      double s = 0.0, v = 0.0;
      for_quadrature(u, 0.0, [&](double area_w, double x, int, const ElementData&, int) {
        s += area_w * x;
        v += area_w;
      });
      return s / v;
    }
    auto g = [&](double c) { return constraint(u, c).first; };
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, g(lo), g(hi),
                                                    boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (a + b);
  }

  // d/du ∫|∇u|^p
  Eigen::VectorXd gradient_integral_derivative(const Eigen::VectorXd& u) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(Eigen::Index(n_));
    for (const auto& e : elems_) {
      const Eigen::Vector2d g = grad(e, u);
      const double norm = g.norm();
      if (norm == 0.0) continue;
      const Eigen::Vector3d local = e.area * p_ * std::pow(norm, p_ - 2.0) * (e.grad * g);
      for (int i = 0; i < 3; ++i) d(e.nodes[i]) += local(i);
    }
    return d;
  }

  // d/du ∫|u - c|^p at fixed c
  Eigen::VectorXd power_integral_derivative(const Eigen::VectorXd& u, double c) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(Eigen::Index(n_));
    for_quadrature(u, c, [&](double area_w, double v, int q, const ElementData& e, int) {
      const double f = area_w * p_ * signed_pow(v, p_ - 1.0);
      for (int i = 0; i < 3; ++i) d(e.nodes[i]) += f * rule().bary[q][i];
    });
    return d;
  }

 private:
  static Eigen::Vector2d grad(const ElementData& e, const Eigen::VectorXd& u) {
    const Eigen::Vector3d ul(u(e.nodes[0]), u(e.nodes[1]), u(e.nodes[2]));
    return e.grad.transpose() * ul;
  }

  template <class F>
  void for_quadrature(const Eigen::VectorXd& u, double c, F&& f) const {
    const auto& r = rule();
    int k = 0;
    for (const auto& e : elems_) {
      const double u0 = u(e.nodes[0]), u1 = u(e.nodes[1]), u2 = u(e.nodes[2]);
      for (int q = 0; q < 7; ++q) {
        const double v = r.bary[q][0] * u0 + r.bary[q][1] * u1 + r.bary[q][2] * u2 - c;
        f(e.area * r.weight[q], v, q, e, k);
      }
      ++k;
    }
  }

  std::vector<ElementData> elems_;
  double p_;
  std::size_t n_;
};

void require_function(const TriangleMesh& mesh, const GridFunction& f) {
  if (std::size_t(f.size()) != mesh.nodes.size()) throw InputError("grid function length does not match the mesh");
  if (!f.allFinite()) throw InputError("grid function has non-finite values");
}

// Smooth seeded start: random combination of low-order polynomials and
// cosine modes on the bounding box.
Eigen::VectorXd smooth_start(const TriangleMesh& mesh, std::mt19937_64& rng) {
  Eigen::Vector2d lo = mesh.nodes[0], hi = mesh.nodes[0];
  for (const auto& x : mesh.nodes) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  const Eigen::Vector2d span = (hi - lo).cwiseMax(1e-300);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 8> a;
  for (auto& v : a) v = normal(rng);
  Eigen::VectorXd u(Eigen::Index(mesh.nodes.size()));
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const double x = (mesh.nodes[i].x() - lo.x()) / span.x();
    const double y = (mesh.nodes[i].y() - lo.y()) / span.y();
    const double pi = std::numbers::pi;
    u(Eigen::Index(i)) = a[0] * x + a[1] * y + a[2] * x * x + a[3] * x * y + a[4] * y * y +
                         a[5] * std::cos(pi * x) + a[6] * std::cos(pi * y) + 0.25 * a[7] * std::cos(pi * x) * std::cos(pi * y);
  }
  return u;
}

struct DescentOutcome {
  double value;
  int iterations;
  double step;
  Eigen::VectorXd u;
};

DescentOutcome descend(const Functionals& fn, const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& precond,
                       Eigen::VectorXd u, int iterations) {
  auto normalize = [&](Eigen::VectorXd& v) {
    v.array() -= fn.shift(v);
    // the constraint is positively homogeneous, so scaling keeps it
    v /= std::pow(fn.power_integral(v, 0.0), 1.0 / fn.exponent());
  };
  normalize(u);
  auto quotient = [&](const Eigen::VectorXd& v) { return fn.gradient_integral(v) / fn.power_integral(v, 0.0); };
  double F = quotient(u);
  double t = 0.5;
  int it = 0;
  int stalled = 0;
  for (; it < iterations; ++it) {
    const double B = fn.power_integral(u, 0.0);
    const Eigen::VectorXd g = (fn.gradient_integral_derivative(u) - F * fn.power_integral_derivative(u, 0.0)) / B;
    const Eigen::VectorXd d = precond.solve(g);
    const double slope = g.dot(d);
    if (!(slope > 0.0)) break;
    bool accepted = false;
    for (int halvings = 0; halvings < 50; ++halvings) {
      Eigen::VectorXd trial = u - t * d;
      try {
        normalize(trial);
      } catch (const InputError&) {
        t *= 0.5;
        continue;
      }
      const double Ft = quotient(trial);
      if (std::isfinite(Ft) && Ft <= F - 1e-4 * t * slope) {
        stalled = (F - Ft) <= 1e-13 * F ? stalled + 1 : 0;
        u = std::move(trial);
        F = Ft;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || stalled >= 5) break;
    t = std::min(t * 1.5, 1e6);
  }
  return {F, it, t, std::move(u)};
}

}  // namespace

double constraint_shift(const TriangleMesh& mesh, const GridFunction& f, double p) {
  if (!(p > 1.0)) throw InputError("p must exceed 1");
  require_function(mesh, f);
  return Functionals(mesh, p).shift(f);
}

double rayleigh_quotient(const TriangleMesh& mesh, const GridFunction& f, double p, bool project) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("p must satisfy 1 < p < inf");
  require_function(mesh, f);
  const Functionals fn(mesh, p);
  GridFunction u = f;
  if (project) {
    u.array() -= fn.shift(u);
  } else {
    const double lo = u.minCoeff(), hi = u.maxCoeff();
    if (!(hi - lo > 1e-14 * std::max(std::abs(lo), std::abs(hi)))) throw InputError("function is constant");
    const auto [c, scale] = fn.constraint(u, 0.0);
    if (std::abs(c) > 1e-8 * scale) throw InputError("constraint int |f|^{p-2} f = 0 violated");
  }
  const double num = fn.gradient_integral(u);
  const double den = fn.power_integral(u, 0.0);
  if (!(den > 0.0)) throw InputError("function is constant");
  return num / den;
}

RayleighEstimate minimize_rayleigh_p(const TriangleMesh& mesh, double p, int iterations, std::uint64_t seed,
                                     int starts) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("p must satisfy 1 < p < inf");
  if (iterations < 0 || starts < 0) throw InputError("iterations and starts must be nonnegative");
  mesh.validate();
  const Functionals fn(mesh, p);
  const FemMatrices fm = assemble_p1(mesh);
  Eigen::SparseMatrix<double> h1 = fm.stiffness + fm.mass;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> precond(h1);
  if (precond.info() != Eigen::Success) throw NumericError("factorization of the H^1 preconditioner failed");

  std::vector<Eigen::VectorXd> initial;
  initial.push_back(neumann_mu2(mesh).eigenvector);
  std::mt19937_64 rng(seed);
  for (int s = 0; s < starts; ++s) initial.push_back(smooth_start(mesh, rng));

  RayleighEstimate best;
  best.value = std::numeric_limits<double>::infinity();
  for (auto& u0 : initial) {
    auto out = descend(fn, precond, std::move(u0), iterations);
    best.iterations += out.iterations;
    ++best.starts;
    if (out.value < best.value) {
      best.value = out.value;
      best.final_step = out.step;
      best.minimizer = std::move(out.u);
    }
  }
  return best;
}

namespace {

void flag_area(const std::optional<double>& volume, const TriangleMesh& mesh, double tol,
               std::vector<std::string>& flags) {
  if (!volume) return;
  const double a = mesh.area();
  if (std::abs(*volume - a) > tol * std::max(*volume, a)) {
    flags.push_back("domain mismatch: certificate volume " + std::to_string(*volume) + " vs mesh area " +
                    std::to_string(a));
  }
}

// Oracle value of μ_p on the mesh and the method label.
std::pair<double, std::string> oracle_mu(const TriangleMesh& mesh, double p, const DominationOptions& opts) {
  if (p == 2.0) return {neumann_mu2(mesh).mu2, "fem-p1-neumann"};
  const auto est = minimize_rayleigh_p(mesh, p, opts.iterations, opts.seed, opts.starts);
  return {est.value, "rayleigh-descent (estimate, not certificate)"};
}

}  // namespace

DominationReport check_domination(const PoincareBound& bound, const TriangleMesh& mesh,
                                  const DominationOptions& opts) {
  if (std::abs(bound.r - bound.p) > 1e-12 * bound.p) throw InputError("oracle covers only r = p constants");
  DominationReport rep;
  flag_area(bound.domain_volume, mesh, opts.area_tolerance, rep.flags);
  const auto [mu, method] = oracle_mu(mesh, bound.p, opts);
  rep.method = method;
  rep.bound_value = bound.value;
  rep.oracle_value = std::pow(mu, -1.0 / bound.p);
  rep.margin = bound.value - rep.oracle_value;
  rep.pass = bound.value >= rep.oracle_value;
  return rep;
}

DominationReport check_domination(const EigenBound& bound, const TriangleMesh& mesh, const DominationOptions& opts) {
  DominationReport rep;
  flag_area(bound.domain_volume, mesh, opts.area_tolerance, rep.flags);
  const auto [mu, method] = oracle_mu(mesh, bound.p, opts);
  rep.method = method;
  rep.bound_value = bound.mu_lower;
  rep.oracle_value = mu;
  rep.margin = mu - bound.mu_lower;
  rep.pass = bound.mu_lower <= mu;
  return rep;
}

}  // namespace qcb

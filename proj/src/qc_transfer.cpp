#include "qcbound/qc_transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <boost/math/tools/roots.hpp>

#include "qcbound/error.hpp"
#include "qcbound/poincare.hpp"

namespace qcb {

namespace {

constexpr int kGridInterior = 64;
constexpr double kGridGap = 1e-6;

bool is_inf(double x) { return std::isinf(x) && x > 0; }

void require_exponent(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("exponent p must satisfy 1 < p < inf");
}

template <class F>
auto visit_derivative(const QCMapData& map, F&& f) {
  return std::visit(std::forward<F>(f), map.derivative);
}

// ∫ |Dφ|^e dx over Ω.
double derivative_power_integral(const QCMapData& map, double e) {
  return visit_derivative(map, [&](const auto& d) -> double {
    using T = std::decay_t<decltype(d)>;
    if constexpr (std::is_same_v<T, ClosedFormDerivative>) {
      return std::pow(d.norm, e) * map.domain_volume;
    } else {
      double s = 0.0;
      for (std::size_t i = 0; i < d.weights.size(); ++i) s += d.weights[i] * std::pow(d.dphi[i], e);
      return s;
    }
  });
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

void check_base(const QCMapData& map, const PoincareBound& base) {
  if (!(base.value > 0.0) || !std::isfinite(base.value)) throw InputError("base constant must be positive and finite");
  if (!(base.p >= 1.0) || !(base.r >= base.p)) throw InputError("base exponents must satisfy 1 <= q <= r");
  if (base.domain_volume && relative_gap(*base.domain_volume, map.domain_volume) > 1e-9) {
    throw InputError("base constant and map refer to domains of different volume");
  }
}

// s = (α - n) r / α; α = inf gives s = r.
double transferred_exponent(double alpha, int n, double r) { return is_inf(alpha) ? r : (alpha - n) * r / alpha; }

struct TransferFactors {
  double k_factor;
  double q_norm;
  double alpha_factor;
  double base;
  double holder;
  double product() const { return k_factor * q_norm * alpha_factor * base * holder; }
};

TransferFactors transfer_factors(const QCMapData& map, const PoincareBound& base, double p, double q,
                                 double alpha) {
  const double s = transferred_exponent(alpha, map.n, base.r);
  TransferFactors f;
  f.k_factor = std::pow(map.K, 1.0 / p);
  f.q_norm = q_pq_norm(map, p, q);
  f.alpha_factor = std::pow(map.derivative_lnorm(alpha), map.n / s);
  f.base = base.value;
  f.holder = std::pow(map.domain_volume, 1.0 / base.p - 1.0 / q);
  return f;
}

struct GridMin {
  double q;
  TransferFactors factors;
};

GridMin grid_min(const QCMapData& map, const PoincareBound& base, double p, double alpha) {
  const auto grid = q_grid(base.p, p);
  GridMin best{grid.front(), transfer_factors(map, base, p, grid.front(), alpha)};
  for (std::size_t i = 1; i < grid.size(); ++i) {
    auto f = transfer_factors(map, base, p, grid[i], alpha);
    if (f.product() < best.factors.product()) best = {grid[i], f};
  }
  return best;
}

}  // namespace

void QCMapData::validate() const {
  if (n != 2 && n != 3) throw InputError("dimension n must be 2 or 3");
  if (!(K >= 1.0 - 1e-12) || !std::isfinite(K)) throw InputError("K must satisfy 1 <= K < inf");
  if (!(domain_volume > 0.0) || !std::isfinite(domain_volume)) throw InputError("domain volume must be positive");
  if (!(alpha > n)) throw InputError("integrability exponent alpha must exceed n");
  auto check = [&](double d, double j) {
    if (!(j > 0.0) || !std::isfinite(j)) throw InputError("Jacobian samples must be positive");
    if (!(d >= 0.0) || !std::isfinite(d)) throw InputError("|Dphi| samples must be finite and nonnegative");
    const double kj = K * j;
    if (std::pow(d, n) > kj + 1e-9 * std::max(1.0, kj)) {
      throw InputError("quasiconformality violated: |Dphi|^n > K |J|");
    }
  };
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ClosedFormDerivative>) {
          check(d.norm, d.jacobian);
        } else {
          const auto m = d.weights.size();
          if (m == 0) throw InputError("sampled derivative field is empty");
          if (d.dphi.size() != m || d.jac.size() != m) throw InputError("sampled derivative arrays differ in length");
          if (!d.nodes.empty() && d.nodes.size() != m) throw InputError("node count does not match weights");
          for (std::size_t i = 0; i < m; ++i) {
            if (!(d.weights[i] > 0.0) || !std::isfinite(d.weights[i])) throw InputError("weights must be positive");
            check(d.dphi[i], d.jac[i]);
          }
        }
      },
      derivative);
}

QCMapData QCMapData::linear(const Eigen::MatrixXd& matrix, double domain_volume, std::optional<double> K_override) {
  if (matrix.rows() != matrix.cols() || (matrix.rows() != 2 && matrix.rows() != 3)) {
    throw InputError("linear map must be a 2x2 or 3x3 matrix");
  }
  QCMapData m;
  m.n = static_cast<int>(matrix.rows());
  m.domain_volume = domain_volume;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix);
  const double L = svd.singularValues()(0);
  const double J = std::abs(matrix.determinant());
  if (!(J > 0.0)) throw InputError("linear map is singular");
  m.derivative = ClosedFormDerivative{L, J};
  m.K = K_override.value_or(std::max(1.0, std::pow(L, m.n) / J));
  m.validate();
  return m;
}

QCMapData QCMapData::identity(int n, double domain_volume) {
  QCMapData m;
  m.n = n;
  m.domain_volume = domain_volume;
  m.derivative = ClosedFormDerivative{1.0, 1.0};
  m.validate();
  return m;
}

QCMapData QCMapData::sampled(int n, SampledDerivative data, std::optional<double> K_override, double alpha,
                             bool lipschitz) {
  QCMapData m;
  m.n = n;
  m.alpha = alpha;
  m.lipschitz = lipschitz;
  double vol = 0.0;
  double kmax = 1.0;
  for (std::size_t i = 0; i < data.weights.size(); ++i) {
    vol += data.weights[i];
    if (i < data.dphi.size() && i < data.jac.size() && data.jac[i] > 0.0) {
      kmax = std::max(kmax, std::pow(data.dphi[i], n) / data.jac[i]);
    }
  }
  m.domain_volume = vol;
  m.K = K_override.value_or(kmax);
  m.derivative = std::move(data);
  m.validate();
  return m;
}

double QCMapData::sup_norm() const {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ClosedFormDerivative>) {
          return d.norm;
        } else {
          return *std::max_element(d.dphi.begin(), d.dphi.end());
        }
      },
      derivative);
}

double QCMapData::derivative_lnorm(double a) const {
  if (is_inf(a)) {
    if (!lipschitz) throw InputError("map is not Lipschitz");
    return sup_norm();
  }
  if (!(a >= 1.0)) throw InputError("Lebesgue exponent must be >= 1");
  if (a > alpha && !lipschitz) throw InputError("|Dphi| is not known to be integrable to this power");
  const double v = derivative_power_integral(*this, a);
  if (!std::isfinite(v)) throw NumericError("||Dphi | L_a|| diverges");
  return std::pow(v, 1.0 / a);
}

double q_pq_norm(const QCMapData& map, double p, double q) {
  require_exponent(p);
  if (!(q >= 1.0)) throw InputError("q must be >= 1");
  if (!(q < p)) throw InputError("Q_{p,q} requires q < p");
  const double e = (p - map.n) * q / (p - q);
  const double outer = (p - q) / (p * q);
  // log-sum-exp: e grows like 1/(p - q) on the upper end of the q-grid
  const double log_v = visit_derivative(map, [&](const auto& d) -> double {
    using T = std::decay_t<decltype(d)>;
    if (e == 0.0) return std::log(map.domain_volume);
    if constexpr (std::is_same_v<T, ClosedFormDerivative>) {
      return e * std::log(d.norm) + std::log(map.domain_volume);
    } else {
      std::vector<double> terms(d.weights.size());
      for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = std::log(d.weights[i]) + e * std::log(d.dphi[i]);
      const double top = *std::max_element(terms.begin(), terms.end());
      if (!std::isfinite(top)) return top;
      double s = 0.0;
      for (double t : terms) s += std::exp(t - top);
      return top + std::log(s);
    }
  });
  const double out = std::exp(outer * log_v);
  if (!std::isfinite(out) || !(out > 0.0)) throw NumericError("Q_{p,q} diverges");
  return out;
}

double q_p_sup_norm(const QCMapData& map, double p) {
  require_exponent(p);
  if (!map.lipschitz) throw InputError("Q_p requires a Lipschitz map");
  if (p == map.n) return 1.0;
  return std::pow(map.sup_norm(), (p - map.n) / p);
}

double lebesgue_comp_norm(const WeightedSamples& inverse_jacobian, double r, double s) {
  if (!(s >= 1.0) || !(r >= s) || !std::isfinite(r)) throw InputError("exponents must satisfy 1 <= s <= r < inf");
  const auto& w = inverse_jacobian.weights;
  const auto& v = inverse_jacobian.values;
  if (w.empty() || w.size() != v.size()) throw InputError("inverse Jacobian samples are empty or mismatched");
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0) || !(v[i] > 0.0)) throw InputError("samples and weights must be positive");
  }
  if (r == s) return std::pow(*std::max_element(v.begin(), v.end()), 1.0 / s);
  const double e = r / (r - s);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * std::pow(v[i], e);
  const double out = std::pow(acc, (r - s) / (r * s));
  if (!std::isfinite(out)) throw NumericError("composition norm diverges");
  return out;
}

double sobolev_comp_norm(const QCMapData& map, double p, double q) {
  return std::pow(map.K, 1.0 / p) * q_pq_norm(map, p, q);
}

std::vector<double> q_grid(double q_min, double p) {
  if (!(q_min >= 1.0)) throw InputError("q-grid must start at q >= 1");
  const double hi = p - kGridGap;
  if (!(hi > q_min)) throw InputError("empty q-grid: need q < p");
  std::vector<double> g;
  g.reserve(kGridInterior + 2);
  g.push_back(q_min);
  const double ratio = hi / q_min;
  for (int k = 1; k <= kGridInterior; ++k) g.push_back(q_min * std::pow(ratio, double(k) / (kGridInterior + 1)));
  g.push_back(hi);
  return g;
}

double poincare_transfer_at(const QCMapData& map, const PoincareBound& base, double p, double q, double alpha) {
  if (q < base.p) throw InputError("q below the base gradient exponent");
  return transfer_factors(map, base, p, q, alpha).product();
}

TransferResult poincare_transfer(const QCMapData& map, const PoincareBound& base, double p) {
  map.validate();
  require_exponent(p);
  check_base(map, base);
  const double s = transferred_exponent(map.alpha, map.n, base.r);
  if (!(s >= 1.0)) throw InputError("alpha too small: s = (alpha - n) r / alpha < 1");
  if (!(p > base.p)) throw InputError("p must exceed the base gradient exponent");
  const auto best = grid_min(map, base, p, map.alpha);
  const auto& f = best.factors;
  const double q = best.q;

  TransferResult res;
  res.q_star = q;
  res.s = s;
  res.chain.push_back({"K^{1/p}", {{"K", map.K}, {"p", p}}, f.k_factor});
  res.chain.push_back({"Q_{p,q} = (int |Dphi|^{(p-n)q/(p-q)} dx)^{(p-q)/(pq)}", {{"p", p}, {"q", q}}, f.q_norm});
  if (is_inf(map.alpha)) {
    res.chain.push_back({"||Dphi | L_inf||^{n/s} (alpha = inf: ess sup |Dphi|)", {{"n", double(map.n)}, {"s", s}},
                         f.alpha_factor});
  } else {
    res.chain.push_back({"||Dphi | L_alpha||^{n/s}", {{"alpha", map.alpha}, {"n", double(map.n)}, {"s", s}},
                         f.alpha_factor});
  }
  res.chain.push_back({"B_{r,q0}(Omega)", {{"r", base.r}, {"q0", base.p}}, f.base});
  res.chain.push_back(
      {"|Omega|^{1/q0 - 1/q} (Holder: B_{r,q} <= B_{r,q0} |Omega|^{1/q0-1/q})",
       {{"volume", map.domain_volume}, {"q0", base.p}, {"q", q}}, f.holder});
  res.bound = res.chain_product();
  flag_if_huge(res.flags, "transferred constant", res.bound);
  if (is_inf(map.alpha)) res.flags.push_back("alpha = inf: ||Dphi|L_alpha||^{n/s} replaced by (ess sup |Dphi|)^{n/s}");
  return res;
}

EigenBound eigen_transfer(const QCMapData& map, const PoincareBound& base, double p) {
  map.validate();
  require_exponent(p);
  check_base(map, base);
  if (!(base.r > p)) throw InputError("eigen transfer requires r > p");
  if (!(p > base.p)) throw InputError("p must exceed the base gradient exponent");
  const double alpha = map.n * base.r / (base.r - p);
  if (!is_inf(map.alpha) && map.alpha < alpha && !map.lipschitz) {
    throw InputError("|Dphi| is not known to be in L_alpha for alpha = n r/(r - p)");
  }
  QCMapData m = map;
  m.alpha = std::max(map.alpha, alpha);
  const auto best = grid_min(m, base, p, alpha);
  const auto& f = best.factors;
  const double B = f.product();

  EigenBound e;
  e.p = p;
  e.domain_volume = std::nullopt;
  e.provenance.push_back({"K", "quasiconformality coefficient", map.K});
  e.provenance.push_back({"alpha", "n r / (r - p)", alpha});
  e.provenance.push_back({"q_star", "grid minimizer of Q_{p,q}^p ||Dphi|L_alpha||^n B_{r,q}^p", best.q});
  e.provenance.push_back({"Q_pq^p", "Q_{p,q}^p", std::pow(f.q_norm, p)});
  e.provenance.push_back({"Dphi_alpha^n", "||Dphi | L_alpha||^n", std::pow(f.alpha_factor, p)});
  e.provenance.push_back({"B_rq^p", "(B_{r,q0} |Omega|^{1/q0-1/q})^p", std::pow(f.base * f.holder, p)});
  e.provenance.push_back({"inverse_mu", "K min_q (Q_{p,q}^p ||Dphi|L_alpha||^n) B_{r,q}^p", std::pow(B, p)});
  e.mu_lower = std::pow(B, -p);
  flag_if_huge(e.flags, "1/mu", std::pow(B, p));
  if (!(e.mu_lower > 0.0)) throw NumericError("eigenvalue bound underflowed to zero");
  return e;
}

EigenBound eigen_transfer_lipschitz(const QCMapData& map, const EigenBound& base_mu, double p) {
  map.validate();
  require_exponent(p);
  if (!map.lipschitz) throw InputError("Lipschitz transfer requires a Lipschitz map");
  if (!(base_mu.mu_lower > 0.0)) throw InputError("base eigenvalue bound must be positive");
  if (std::abs(base_mu.p - p) > 1e-12 * p) throw InputError("base eigenvalue exponent does not match p");
  const double L = map.sup_norm();
  const double qp_p = std::pow(q_p_sup_norm(map, p), p);
  const double l_n = std::pow(L, map.n);
  const double l_p = std::pow(L, p);
  const double identity_gap = relative_gap(qp_p * l_n, l_p);
  if (identity_gap > 1e-12) throw NumericError("Q_p^p L^n != L^p");
  const double denom = map.K * qp_p * l_n;

  EigenBound e;
  e.p = p;
  e.provenance = base_mu.provenance;
  e.provenance.push_back({"base_mu", "lower bound for mu_p(Omega)", base_mu.mu_lower});
  e.provenance.push_back({"K", "quasiconformality coefficient", map.K});
  e.provenance.push_back({"Q_p^p", "(ess sup |Dphi|)^{p-n}", qp_p});
  e.provenance.push_back({"L^n", "|| |Dphi|^n | L_inf ||", l_n});
  e.provenance.push_back({"Q_p^p L^n - L^p", "relative gap (asserted <= 1e-12)", identity_gap});
  e.provenance.push_back({"denominator", "K Q_p^p || |Dphi|^n | L_inf ||", denom});
  e.mu_lower = base_mu.mu_lower / denom;
  e.flags = base_mu.flags;
  flag_if_huge(e.flags, "transfer denominator", denom);
  if (!(e.mu_lower > 0.0)) throw NumericError("eigenvalue bound underflowed to zero");
  return e;
}

double neumann_ball_zero(int n) {
  if (n < 2) throw InputError("dimension must be >= 2");
  const double nu = 0.5 * n;
  // (t^{1-ν} J_ν)' = t^{-ν} (t J_{ν-1}(t) - (2ν-1) J_ν(t)).
  auto g = [nu](double t) { return t * std::cyl_bessel_j(nu - 1.0, t) - (2.0 * nu - 1.0) * std::cyl_bessel_j(nu, t); };
  double a = 0.1;
  const double step = 0.01;
  while (g(a) * g(a + step) > 0.0) {
    a += step;
    if (a > 50.0) throw NumericError("no Bessel-derivative zero bracketed");
  }
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(52);
  auto [lo, hi] = boost::math::tools::toms748_solve(g, a, a + step, tol, iters);
  return 0.5 * (lo + hi);
}

EigenBound ball_lower_bound(int n, double p, BallBranch branch) {
  require_exponent(p);
  if (n < 2) throw InputError("dimension must be >= 2");
  if (p < 2.0) throw InputError("no bound implemented for p < 2");
  if (branch == BallBranch::automatic) branch = p == 2.0 ? BallBranch::exact : BallBranch::ent;
  EigenBound e;
  e.p = p;
  if (branch == BallBranch::exact) {
    if (p != 2.0) throw InputError("exact ball eigenvalue is only available at p = 2");
    const double z = neumann_ball_zero(n);
    e.provenance.push_back({"zero", "first positive zero of (t^{1-n/2} J_{n/2}(t))'", z});
    e.provenance.push_back({"mu_2", "zero^2", z * z});
    e.mu_lower = z * z;
  } else {
    const double pp = pi_p(p);
    e.provenance.push_back({"pi_p", "2 pi (p-1)^{1/p} / (p sin(pi/p))", pp});
    e.provenance.push_back({"mu_p", "(pi_p / 2)^p", std::pow(pp / 2.0, p)});
    e.mu_lower = std::pow(pp / 2.0, p);
  }
  e.domain_volume = std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
  return e;
}

ExampleCConstants example_c_constants() {
  const double s6 = std::sqrt(6.0);
  const double s2 = std::sqrt(2.0);
  ExampleCConstants c;
  c.K_squared = 2.0 * std::sqrt(4.0 + s6 + s2) / (4.0 - s6 - s2);
  c.K = std::sqrt(c.K_squared);
  c.L_per_delta = 2.0 * (std::sqrt(4.0 + s6 - s2) + std::sqrt(4.0 - s6 + s2)) / (s6 - s2);
  return c;
}

EigenBound example_c(double delta, double p, const EigenBound& base_mu) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw InputError("delta must be positive");
  if (!(p > 3.0)) throw InputError("the star-domain transfer requires p > 3");
  const auto c = example_c_constants();
  QCMapData map;
  map.n = 3;
  map.K = c.K;
  map.domain_volume = 4.0 * std::numbers::pi / 3.0;
  map.derivative = ClosedFormDerivative{c.L_per_delta * delta, std::pow(c.L_per_delta * delta, 3) / c.K};
  map.lipschitz = true;
  EigenBound e = eigen_transfer_lipschitz(map, base_mu, p);
  e.provenance.push_back({"K^2", "2 sqrt(4+sqrt6+sqrt2) / (4-sqrt6-sqrt2)", c.K_squared});
  e.provenance.push_back({"L", "2 delta (sqrt(4+sqrt6-sqrt2) + sqrt(4-sqrt6+sqrt2)) / (sqrt6-sqrt2)",
                          c.L_per_delta * delta});
  // alternate closed form with sqrt(4-sqrt6-sqrt2) in the second radical;
  // recorded for audit only
  const double s6 = std::sqrt(6.0);
  const double s2 = std::sqrt(2.0);
  const double variant = 2.0 * delta * (std::sqrt(4.0 + s6 - s2) + std::sqrt(4.0 - s6 - s2)) / (s6 - s2);
  e.provenance.push_back({"L_display_variant", "2 delta (sqrt(4+sqrt6-sqrt2) + sqrt(4-sqrt6-sqrt2)) / (sqrt6-sqrt2)",
                          variant});
  e.flags.push_back("L variant with sqrt(4-sqrt6-sqrt2) recorded, not used; bound routed through K and L");
  return e;
}

EigenBound whitney_qc_bound(const PoincareBound& chain_bound, const QCMapData& map, double p) {
  require_exponent(p);
  if (std::abs(chain_bound.p - p) > 1e-12 * p || std::abs(chain_bound.r - p) > 1e-12 * p) {
    throw InputError("chain bound must be a (p,p) constant");
  }
  if (!(chain_bound.value > 0.0) || !std::isfinite(chain_bound.value)) {
    throw InputError("chain bound must be positive and finite");
  }
  EigenBound base;
  base.p = p;
  base.mu_lower = std::pow(chain_bound.value, -p);
  base.provenance.push_back({"B_pp(W)", "chain constant", chain_bound.value});
  base.provenance.push_back({"mu_p(W)", "B_pp(W)^{-p}", base.mu_lower});
  base.flags = chain_bound.flags;
  return eigen_transfer_lipschitz(map, base, p);
}

}  // namespace qcb

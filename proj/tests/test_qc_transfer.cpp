#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "qcbound/error.hpp"
#include "qcbound/poincare.hpp"
#include "qcbound/qc_transfer.hpp"

using namespace qcb;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd diag(double a, double b) {
  Eigen::MatrixXd m(2, 2);
  m << a, 0, 0, b;
  return m;
}

PoincareBound base_bound(double value, double r, double q, std::optional<double> volume = std::nullopt) {
  PoincareBound b;
  b.value = value;
  b.r = r;
  b.p = q;
  b.domain_volume = volume;
  return b;
}

EigenBound base_mu(double mu, double p) {
  EigenBound e;
  e.mu_lower = mu;
  e.p = p;
  return e;
}

// piecewise-constant samples of a linear map on a 20x20 grid of the unit square
QCMapData sampled_linear(double a) {
  SampledDerivative d;
  for (int i = 0; i < 400; ++i) {
    d.weights.push_back(1.0 / 400);
    d.dphi.push_back(a);
    d.jac.push_back(a);
  }
  return QCMapData::sampled(2, d);
}

}  // namespace

TEST_CASE("linear map data") {
  const QCMapData m = QCMapData::linear(diag(2, 1), 1.0);
  CHECK(m.K == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(m.sup_norm() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(m.derivative_lnorm(2.0) == doctest::Approx(2.0).epsilon(1e-14));
  Eigen::MatrixXd rot(2, 2);
  rot << 0.6, -0.8, 0.8, 0.6;
  const QCMapData r = QCMapData::linear(3.0 * rot, 1.0);
  CHECK(r.K == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.sup_norm() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(QCMapData::linear(diag(1, 0), 1.0), InputError);
  CHECK_THROWS_AS(QCMapData::linear(diag(2, 1), 1.0, 1.5), InputError);  // K below |Dphi|^n/|J|
  SampledDerivative bad;
  bad.weights = {1.0};
  bad.dphi = {1.0};
  bad.jac = {-1.0};
  CHECK_THROWS_AS(QCMapData::sampled(2, bad), InputError);
}

TEST_CASE("Q_{p,q} norm") {
  const QCMapData m = QCMapData::linear(diag(2, 1), 1.0);
  CHECK(q_pq_norm(m, 3.0, 2.0) == doctest::Approx(std::pow(4.0, 1.0 / 6)).epsilon(1e-14));
  CHECK(q_pq_norm(sampled_linear(2.0), 3.0, 2.0) == doctest::Approx(q_pq_norm(m, 3.0, 2.0)).epsilon(1e-10));
  const QCMapData big = QCMapData::linear(diag(2, 1), 3.0);
  CHECK(q_pq_norm(big, 2.0, 1.5) == doctest::Approx(std::pow(3.0, 0.5 / 3.0)).epsilon(1e-14));
  for (double V : {0.5, 1.0, 4.0}) {
    const QCMapData id = QCMapData::identity(3, V);
    CHECK(q_pq_norm(id, 4.0, 1.5) == doctest::Approx(std::pow(V, 2.5 / 6.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(q_pq_norm(m, 3.0, 3.0), InputError);
  CHECK_THROWS_AS(q_pq_norm(m, 3.0, 0.5), InputError);
  // p < n: negative exponent on a vanishing derivative sample
  SampledDerivative d;
  d.weights = {0.5, 0.5};
  d.dphi = {0.0, 1.0};
  d.jac = {1.0, 1.0};
  CHECK_THROWS_AS(q_pq_norm(QCMapData::sampled(2, d), 1.5, 1.2), NumericError);
}

TEST_CASE("Q_p sup norm") {
  QCMapData m;
  m.n = 3;
  m.K = 1.0;
  m.derivative = ClosedFormDerivative{2.0, 8.0};
  CHECK(q_p_sup_norm(m, 4.0) == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-15));
  CHECK(q_p_sup_norm(m, 3.0) == 1.0);
  for (double p : {1.5, 2.0, 7.0}) CHECK(q_p_sup_norm(QCMapData::identity(2, 1.0), p) == 1.0);
  m.lipschitz = false;
  CHECK_THROWS_AS(q_p_sup_norm(m, 4.0), InputError);
}

TEST_CASE("composition operator norms") {
  const double c = 0.7, V = 3.0;
  const WeightedSamples constant{{V / 2, V / 2}, {c, c}};
  CHECK(lebesgue_comp_norm(constant, 2.0, 1.0) == doctest::Approx(std::sqrt(c * c * V)).epsilon(1e-14));
  CHECK(lebesgue_comp_norm(constant, 3.0, 3.0) == doctest::Approx(std::pow(c, 1.0 / 3)).epsilon(1e-14));
  const WeightedSamples stretched{{2.0}, {0.5}};
  CHECK(lebesgue_comp_norm(stretched, 2.0, 1.0) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(lebesgue_comp_norm(constant, 2.0, 3.0), InputError);

  CHECK(sobolev_comp_norm(QCMapData::identity(2, 1.0), 3.0, 2.0) == 1.0);
  const QCMapData m = QCMapData::linear(diag(2, 1), 1.0);
  CHECK(sobolev_comp_norm(m, 3.0, 2.0) == doctest::Approx(std::cbrt(2.0) * std::pow(4.0, 1.0 / 6)).epsilon(1e-14));
  CHECK(sobolev_comp_norm(m, 3.0, 2.0) == doctest::Approx(1.5874010519681994).epsilon(1e-14));
  const QCMapData looser = QCMapData::linear(diag(2, 1), 1.0, 3.0);
  CHECK(sobolev_comp_norm(looser, 3.0, 2.0) > sobolev_comp_norm(m, 3.0, 2.0));
}

TEST_CASE("q grid") {
  const auto g = q_grid(1.0, 3.0);
  CHECK(g.size() == 66);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == doctest::Approx(3.0 - 1e-6).epsilon(1e-15));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK(g[2] / g[1] == doctest::Approx(g[1] / g[0]).epsilon(1e-12));
  CHECK_THROWS_AS(q_grid(3.0, 3.0), InputError);
  CHECK_THROWS_AS(q_grid(0.5, 3.0), InputError);
}

TEST_CASE("transferred exponent and identity transfer") {
  QCMapData m = QCMapData::identity(2, 1.0);
  m.alpha = 4.0;
  const TransferResult t = poincare_transfer(m, base_bound(0.4, 4.0, 1.5), 3.0);
  CHECK(t.s == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(t.bound == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(t.bound == doctest::Approx(t.chain_product()).epsilon(1e-15));

  const QCMapData lip = QCMapData::identity(2, 1.0);
  CHECK(poincare_transfer(lip, base_bound(0.3, 2.0, 1.5), 2.0).s == 2.0);
  CHECK(poincare_transfer(lip, base_bound(0.3, 2.0, 1.5), 2.0).bound == doctest::Approx(0.3).epsilon(1e-14));

  // identity on a domain of volume V, against its closed form
  for (double V : {0.3, 2.0, 5.0}) {
    QCMapData id = QCMapData::identity(2, V);
    id.alpha = 6.0;
    const double r = 3.0, q0 = 1.2, p = 2.5, B = 0.8;
    const double s = (6.0 - 2.0) * r / 6.0;
    const double expected = B * std::pow(V, 1 / q0 - 1 / p) * std::pow(V, 2.0 / (6.0 * s));
    CHECK(poincare_transfer(id, base_bound(B, r, q0, V), p).bound == doctest::Approx(expected).epsilon(1e-13));
  }

  QCMapData thin = QCMapData::identity(2, 1.0);
  thin.alpha = 2.2;
  CHECK_THROWS_AS(poincare_transfer(thin, base_bound(0.3, 1.0, 1.0), 2.0), InputError);
  CHECK_THROWS_AS(poincare_transfer(lip, base_bound(0.3, 2.0, 2.0), 2.0), InputError);
  CHECK_THROWS_AS(poincare_transfer(QCMapData::identity(2, 2.0), base_bound(0.3, 2.0, 1.5, 1.0), 2.0), InputError);
}

TEST_CASE("grid minimum is below every grid point") {
  const QCMapData m = QCMapData::linear(diag(3, 1), 2.0);
  const PoincareBound base = base_bound(0.5, 3.0, 1.1);
  const TransferResult t = poincare_transfer(m, base, 2.5);
  for (double q : q_grid(1.1, 2.5)) CHECK(t.bound <= poincare_transfer_at(m, base, 2.5, q, kInf) * (1 + 1e-14));
  CHECK(t.bound == doctest::Approx(poincare_transfer_at(m, base, 2.5, t.q_star, kInf)).epsilon(1e-14));
  CHECK_THROWS_AS(poincare_transfer_at(m, base, 2.5, 1.0, kInf), InputError);

  const EigenBound e = eigen_transfer(m, base_bound(0.5, 4.0, 1.1), 2.0);
  const double alpha = 2.0 * 4.0 / (4.0 - 2.0);
  for (double q : q_grid(1.1, 2.0)) {
    const double at = poincare_transfer_at(m, base_bound(0.5, 4.0, 1.1), 2.0, q, alpha);
    CHECK(e.mu_lower >= std::pow(at, -2.0) * (1 - 1e-13));
  }
}

TEST_CASE("eigenvalue transfer") {
  const PoincareBound base = base_bound(0.6, 4.0, 1.5, 1.0);
  const EigenBound e = eigen_transfer(QCMapData::identity(2, 1.0), base, 2.0);
  // identity on the unit square: every factor but the base is 1
  CHECK(e.mu_lower == doctest::Approx(std::pow(0.6, -2.0)).epsilon(1e-13));
  CHECK(e.mu_lower <= kPi * kPi);

  const QCMapData m = QCMapData::linear(diag(2, 1), 1.0);
  const QCMapData m2 = QCMapData::linear(diag(2, 1), 1.0, 4.0);
  const double mu1 = eigen_transfer(m, base, 2.0).mu_lower;
  CHECK(eigen_transfer(m2, base, 2.0).mu_lower == doctest::Approx(mu1 / 2).epsilon(1e-13));
  CHECK_THROWS_AS(eigen_transfer(m, base_bound(0.6, 2.0, 1.5, 1.0), 2.0), InputError);
}

TEST_CASE("Lipschitz eigenvalue transfer") {
  const EigenBound b = base_mu(kPi * kPi, 2.0);
  CHECK(eigen_transfer_lipschitz(QCMapData::identity(2, 1.0), b, 2.0).mu_lower == kPi * kPi);
  for (double a : {1.0, 2.0, 4.0}) {
    const EigenBound t = eigen_transfer_lipschitz(QCMapData::linear(diag(a, 1), 1.0), b, 2.0);
    CHECK(t.mu_lower == doctest::Approx(kPi * kPi / (a * a * a)).epsilon(1e-14));
    CHECK(t.mu_lower <= kPi * kPi / (a * a) * (1 + 1e-14));
  }
  // doubling L at fixed K multiplies the denominator by 2^p
  for (double p : {2.0, 3.5}) {
    QCMapData m;
    m.n = 2;
    m.K = 2.0;
    m.derivative = ClosedFormDerivative{1.5, 1.5 * 1.5 / 2.0};
    QCMapData m2 = m;
    m2.derivative = ClosedFormDerivative{3.0, 9.0 / 2.0};
    const double r = eigen_transfer_lipschitz(m, base_mu(1.0, p), p).mu_lower /
                     eigen_transfer_lipschitz(m2, base_mu(1.0, p), p).mu_lower;
    CHECK(r == doctest::Approx(std::pow(2.0, p)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(eigen_transfer_lipschitz(QCMapData::identity(2, 1.0), base_mu(1.0, 3.0), 2.0), InputError);
}

TEST_CASE("unit ball eigenvalue bounds") {
  // first zeros of (t^{1-n/2} J_{n/2})', frozen from an independent root finder
  CHECK(neumann_ball_zero(2) == doctest::Approx(1.8411837813406593).epsilon(1e-14));
  CHECK(neumann_ball_zero(3) == doctest::Approx(2.0815759778181006).epsilon(1e-13));
  const EigenBound disk = ball_lower_bound(2, 2.0);
  CHECK(disk.mu_lower == doctest::Approx(3.3899577166718887).epsilon(1e-12));
  CHECK(disk.mu_lower == doctest::Approx(1.84118 * 1.84118).epsilon(1e-5));
  CHECK(disk.domain_volume.value() == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(ball_lower_bound(3, 2.0).domain_volume.value() == doctest::Approx(4 * kPi / 3).epsilon(1e-15));
  for (int n : {2, 3}) {
    const double ent = ball_lower_bound(n, 2.0, BallBranch::ent).mu_lower;
    CHECK(ent == doctest::Approx(kPi * kPi / 4).epsilon(1e-15));
    CHECK(ent <= ball_lower_bound(n, 2.0).mu_lower);
  }
  CHECK(ball_lower_bound(3, 3.0).mu_lower == doctest::Approx(std::pow(pi_p_quadrature(3.0) / 2, 3.0)).epsilon(1e-10));
  CHECK_THROWS_AS(ball_lower_bound(2, 1.5), InputError);
  CHECK_THROWS_AS(ball_lower_bound(2, 3.0, BallBranch::exact), InputError);
}

TEST_CASE("star-domain map constants") {
  const double s6 = std::sqrt(6.0), s2 = std::sqrt(2.0);
  const ExampleCConstants c = example_c_constants();
  CHECK(std::abs(c.K_squared - 2 * std::sqrt(4 + s6 + s2) / (4 - s6 - s2)) < 1e-9);
  CHECK(c.K_squared == doctest::Approx(41.148900078833836).epsilon(1e-13));
  CHECK(c.K == doctest::Approx(std::sqrt(41.148900078833836)).epsilon(1e-13));
  CHECK(c.L_per_delta == doctest::Approx(7.661297575540392).epsilon(1e-13));

  const EigenBound ball = ball_lower_bound(3, 4.0);
  const EigenBound e1 = example_c(1.0, 4.0, ball);
  CHECK(e1.mu_lower == doctest::Approx(ball.mu_lower / (c.K * std::pow(c.L_per_delta, 4))).epsilon(1e-13));
  CHECK(e1.mu_lower == doctest::Approx(2.066104725331157e-4).epsilon(1e-12));
  CHECK(example_c(2.0, 4.0, ball).mu_lower == doctest::Approx(e1.mu_lower / 16).epsilon(1e-13));
  CHECK_THROWS_AS(example_c(1.0, 3.0, ball_lower_bound(3, 3.0)), InputError);
  CHECK_THROWS_AS(example_c(0.0, 4.0, ball), InputError);
}

TEST_CASE("image of a Whitney complex") {
  PoincareBound chain;
  chain.value = 2.0;
  chain.p = chain.r = 2.0;
  CHECK(whitney_qc_bound(chain, QCMapData::identity(2, 1.0), 2.0).mu_lower == doctest::Approx(0.25).epsilon(1e-15));
  const QCMapData m = QCMapData::linear(diag(2, 1), 2.0);
  double prev = kInf;
  for (double v : {0.5, 1.0, 2.0, 4.0}) {
    chain.value = v;
    const double mu = whitney_qc_bound(chain, m, 2.0).mu_lower;
    CHECK(mu < prev);
    prev = mu;
  }
  chain.r = 3.0;
  CHECK_THROWS_AS(whitney_qc_bound(chain, m, 2.0), InputError);
}

TEST_CASE("random identity and grid-minimum draws") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 100; ++k) {
    const int n = u(rng) < 0.5 ? 2 : 3;
    const double p = 1.3 + 4 * u(rng);
    const double q0 = 1.0 + (p - 1.05) * u(rng);
    const double r = q0 + 4 * u(rng);
    const double B = 0.1 + 3 * u(rng);
    const PoincareBound base = base_bound(B, r, q0, 1.0);
    CHECK(poincare_transfer(QCMapData::identity(n, 1.0), base, p).bound == doctest::Approx(B).epsilon(1e-12));
    const EigenBound mu = base_mu(0.1 + 10 * u(rng), p);
    CHECK(eigen_transfer_lipschitz(QCMapData::identity(n, 1.0), mu, p).mu_lower ==
          doctest::Approx(mu.mu_lower).epsilon(1e-12));

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) A(i, i) = 0.5 + 2 * u(rng);
    A(0, 1) = u(rng) - 0.5;
    const QCMapData m = QCMapData::linear(A, 1.0);
    const TransferResult t = poincare_transfer(m, base, p);
    for (double q : q_grid(q0, p)) CHECK(t.bound <= poincare_transfer_at(m, base, p, q, kInf) * (1 + 1e-14));
  }
}

#pragma once

#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "qcbound/certificate.hpp"

namespace qcb {

/// Constant derivative data: |Dφ| = norm and |J(x, φ)| = jacobian everywhere.
struct ClosedFormDerivative {
  double norm;
  double jacobian;
};

/// Derivative data at quadrature nodes of Ω (e.g. element midpoints).
struct SampledDerivative {
  std::vector<std::vector<double>> nodes;  // optional, for bookkeeping only
  std::vector<double> weights;
  std::vector<double> dphi;  // operator norm |Dφ(x_i)|
  std::vector<double> jac;   // |J(x_i, φ)|
};

/// Weighted samples of a positive function, e.g. |J(y, φ^{-1})| on the image.
struct WeightedSamples {
  std::vector<double> weights;
  std::vector<double> values;
};

/// Analytic data of a K-quasiconformal map φ : Ω -> Ω̃.
struct QCMapData {
  int n = 2;
  double K = 1.0;
  double domain_volume = 1.0;
  std::variant<ClosedFormDerivative, SampledDerivative> derivative = ClosedFormDerivative{1.0, 1.0};
  /// Integrability exponent of |Dφ| (> n), or infinity.
  double alpha = std::numeric_limits<double>::infinity();
  bool lipschitz = true;

  /// K >= 1, |J| > 0 and |Dφ|^n <= K |J| + 1e-9 at every sample.
  void validate() const;

  /// Linear map x -> A x on a domain of the given volume: |Dφ| is the largest
  /// singular value, |J| = |det A|, and K defaults to |Dφ|^n / |J|.
  static QCMapData linear(const Eigen::MatrixXd& matrix, double domain_volume,
                          std::optional<double> K_override = std::nullopt);
  static QCMapData identity(int n, double domain_volume);
  /// Sampled data; the domain volume is the sum of the weights and K
  /// defaults to max |Dφ|^n / |J|.
  static QCMapData sampled(int n, SampledDerivative data, std::optional<double> K_override = std::nullopt,
                           double alpha = std::numeric_limits<double>::infinity(), bool lipschitz = true);

  /// ess sup |Dφ|.
  double sup_norm() const;
  /// ||Dφ | L_a(Ω)||; a = inf gives sup_norm().
  double derivative_lnorm(double a) const;
};

/// Q_{p,q}(Ω) = (∫ |Dφ|^{(p-n)q/(p-q)} dx)^{(p-q)/(pq)}, 1 <= q < p.
double q_pq_norm(const QCMapData& map, double p, double q);

/// Q_p(Ω) = ess sup |Dφ|^{(p-n)/p} for Lipschitz maps.
double q_p_sup_norm(const QCMapData& map, double p);

/// Norm of φ*: L_r(Ω̃) -> L_s(Ω): (∫ |J(y, φ^{-1})|^{r/(r-s)} dy)^{(r-s)/(rs)},
/// or ess sup |J(y, φ^{-1})|^{1/s} when s = r.
double lebesgue_comp_norm(const WeightedSamples& inverse_jacobian, double r, double s);

/// K^{1/p} Q_{p,q}(Ω): bound for φ*: L^1_p(Ω̃) -> L^1_q(Ω).
double sobolev_comp_norm(const QCMapData& map, double p, double q);

/// Geometric q-grid on [q_min, p): 64 interior points plus the endpoints
/// q_min and p - 1e-6.
std::vector<double> q_grid(double q_min, double p);

/// Transferred Sobolev-Poincaré constant
/// B_{s,p}(Ω̃) <= K^{1/p} min_q (Q_{p,q} ||Dφ|L_α||^{n/s}) B_{r,q}(Ω),  s = (α-n) r / α.
/// `base` is a B_{r,q0} constant (base.r = r, base.p = q0); for q >= q0 it
/// is extended by Hölder, B_{r,q} <= B_{r,q0} |Ω|^{1/q0 - 1/q}, and the min is
/// taken over q_grid(q0, p).
TransferResult poincare_transfer(const QCMapData& map, const PoincareBound& base, double p);

/// Value of the transferred product at a single q (for auditing the min).
double poincare_transfer_at(const QCMapData& map, const PoincareBound& base, double p, double q, double alpha);

/// 1/μ_p(Ω̃) <= K min_q (Q_{p,q}^p ||Dφ|L_α||^n) B_{r,q}^p with α = n r/(r - p).
EigenBound eigen_transfer(const QCMapData& map, const PoincareBound& base, double p);

/// 1/μ_p(Ω̃) <= K Q_p^p || |Dφ|^n |L_∞|| / μ_p(Ω) for Lipschitz maps.
EigenBound eigen_transfer_lipschitz(const QCMapData& map, const EigenBound& base_mu, double p);

enum class BallBranch {
  automatic,  // exact at p = 2, (π_p/2)^p for p > 2
  exact,
  ent,
};

/// First positive zero of (t^{1-n/2} J_{n/2}(t))'.
double neumann_ball_zero(int n);

/// Lower bound for μ_p of the unit ball B^n(0, 1).
EigenBound ball_lower_bound(int n, double p, BallBranch branch = BallBranch::automatic);

struct ExampleCConstants {
  double K_squared;
  double K;
  double L_per_delta;  // L / δ
};

ExampleCConstants example_c_constants();

/// μ_p(Ω_δ) lower bound for the 3D star domain from a unit-ball bound,
/// via the Lipschitz transfer with K and |Dφ| <= L.
EigenBound example_c(double delta, double p, const EigenBound& base_mu);

/// μ_p(W̃) >= ... for the image of a Whitney complex under a Lipschitz
/// K-quasiconformal map, starting from μ_p(W) >= chain_bound^{-p}.
EigenBound whitney_qc_bound(const PoincareBound& chain_bound, const QCMapData& map, double p);

}  // namespace qcb

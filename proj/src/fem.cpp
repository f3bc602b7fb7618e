#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "qcbound/error.hpp"
#include "qcbound/oracle.hpp"

namespace qcb {

namespace {

constexpr std::size_t kDenseLimit = 400;
constexpr int kBlock = 8;
constexpr int kMaxIterations = 2000;
constexpr double kResidualTarget = 1e-10;
constexpr std::uint64_t kStartSeed = 0x5eed;

double relative_residual(const FemMatrices& fm, const Eigen::VectorXd& x, double mu) {
  const Eigen::VectorXd kx = fm.stiffness * x;
  const Eigen::VectorXd mx = fm.mass * x;
  return (kx - mu * mx).norm() / (kx.norm() + std::abs(mu) * mx.norm());
}

// Removes the constant component in the M inner product.
struct Deflator {
  Eigen::VectorXd m_ones;
  double volume;

  explicit Deflator(const FemMatrices& fm) {
    m_ones = fm.mass * Eigen::VectorXd::Ones(fm.mass.rows());
    volume = m_ones.sum();
  }
  double mean(const Eigen::VectorXd& x) const { return m_ones.dot(x) / volume; }
  void apply(Eigen::MatrixXd& X) const {
    for (Eigen::Index j = 0; j < X.cols(); ++j) X.col(j).array() -= mean(X.col(j));
  }
};

EigenResult finish(const FemMatrices& fm, const Deflator& defl, Eigen::VectorXd x, double mu, int iterations) {
  x /= std::sqrt(x.dot(fm.mass * x));
  // fix the sign for reproducible output
  Eigen::Index imax;
  x.cwiseAbs().maxCoeff(&imax);
  if (x(imax) < 0) x = -x;
  EigenResult r;
  r.mu2 = mu;
  r.residual = relative_residual(fm, x, mu);
  r.dof = std::size_t(x.size());
  r.iterations = iterations;
  r.mean = defl.mean(x);
  r.eigenvector = std::move(x);
  return r;
}

EigenResult solve_dense(const FemMatrices& fm, const Deflator& defl) {
  const Eigen::MatrixXd K(fm.stiffness);
  const Eigen::MatrixXd M(fm.mass);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
  if (es.info() != Eigen::Success) throw NumericError("dense generalized eigensolver failed");
  Eigen::MatrixXd v = es.eigenvectors().col(1);
  defl.apply(v);
  return finish(fm, defl, v.col(0), es.eigenvalues()(1), 0);
}

EigenResult solve_iterative(const TriangleMesh& mesh, const FemMatrices& fm, const Deflator& defl) {
  const Eigen::Index n = fm.mass.rows();
  const int b = int(std::min<Eigen::Index>(kBlock, n - 1));
  Eigen::SparseMatrix<double> shifted = fm.stiffness + fm.mass;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw NumericError("factorization of K + M failed");

  Eigen::MatrixXd X(n, b);
  std::mt19937_64 rng(kStartSeed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = mesh.nodes[i].x();
    if (b > 1) X(i, 1) = mesh.nodes[i].y();
    for (int j = 2; j < b; ++j) X(i, j) = u(rng);
  }
  defl.apply(X);

  double mu = 0.0;
  double res = 1.0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    Eigen::MatrixXd Y = ldlt.solve(fm.mass * X);
    defl.apply(Y);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    Y = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
    const Eigen::MatrixXd Kr = Y.transpose() * (fm.stiffness * Y);
    const Eigen::MatrixXd Mr = Y.transpose() * (fm.mass * Y);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kr, Mr);
    if (es.info() != Eigen::Success) throw NumericError("Rayleigh-Ritz step failed");
    X = Y * es.eigenvectors();
    mu = es.eigenvalues()(0);
    res = relative_residual(fm, X.col(0), mu);
    if (res <= kResidualTarget) return finish(fm, defl, X.col(0), mu, it);
  }
  throw NumericError("eigensolver did not converge: relative residual " + std::to_string(res));
}

}  // namespace

FemMatrices assemble_p1(const TriangleMesh& mesh) {
  const auto n = Eigen::Index(mesh.nodes.size());
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(9 * mesh.elements.size());
  mt.reserve(9 * mesh.elements.size());
  for (const auto& e : mesh.elements) {
    const Eigen::Vector2d& a = mesh.nodes[e[0]];
    const Eigen::Vector2d& b = mesh.nodes[e[1]];
    const Eigen::Vector2d& c = mesh.nodes[e[2]];
    const double area = 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
    // ∇λ_i = rot90(opposite edge) / (2 area)
    Eigen::Matrix<double, 3, 2> g;
    g << b.y() - c.y(), c.x() - b.x(), c.y() - a.y(), a.x() - c.x(), a.y() - b.y(), b.x() - a.x();
    g /= 2.0 * area;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        kt.emplace_back(e[i], e[j], area * g.row(i).dot(g.row(j)));
        mt.emplace_back(e[i], e[j], area / 12.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  FemMatrices fm;
  fm.stiffness.resize(n, n);
  fm.mass.resize(n, n);
  fm.stiffness.setFromTriplets(kt.begin(), kt.end());
  fm.mass.setFromTriplets(mt.begin(), mt.end());
  return fm;
}

EigenResult neumann_mu2(const TriangleMesh& mesh) {
  mesh.validate();
  if (mesh.nodes.size() < 3) throw InputError("mesh too small for an eigenvalue");
  const FemMatrices fm = assemble_p1(mesh);
  const Deflator defl(fm);
  return mesh.nodes.size() <= kDenseLimit ? solve_dense(fm, defl) : solve_iterative(mesh, fm, defl);
}

double poincare_constant_p2(const TriangleMesh& mesh) { return 1.0 / std::sqrt(neumann_mu2(mesh).mu2); }

}  // namespace qcb

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "qcbound/certificate.hpp"

namespace qcb {

/// P1 triangulation of a planar domain; the boundary is implicit (pure Neumann).
struct TriangleMesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> elements;

  /// Throws InputError unless indices are in range, every element has
  /// positive signed area, the mesh is connected and every edge is shared
  /// by at most two elements.
  void validate() const;
  double area() const;
  double max_edge() const;
  std::size_t dof() const { return nodes.size(); }
};

struct ConformityAudit {
  std::size_t interior_edges = 0;
  std::size_t boundary_edges = 0;
  std::size_t overloaded_edges = 0;  // shared by more than two elements
  std::size_t hanging_nodes = 0;     // nodes lying inside a boundary edge
  std::size_t components = 0;
  bool conforming() const { return overloaded_edges == 0 && hanging_nodes == 0 && components == 1; }
};

ConformityAudit audit_mesh(const TriangleMesh& mesh);

struct RectangleShape {
  double x0, y0, x1, y1;
};

struct RectUnionShape {
  std::vector<RectangleShape> rects;
};

/// Polygon that is star-shaped with respect to `center` (convex polygons
/// may leave center at the vertex average). Vertices in CCW order.
struct PolygonShape {
  std::vector<Eigen::Vector2d> vertices;
  std::optional<Eigen::Vector2d> center;
};

struct DiskShape {
  double cx = 0.0, cy = 0.0, radius = 1.0;
};

using DomainShape = std::variant<RectangleShape, RectUnionShape, PolygonShape, DiskShape>;

/// Conforming triangulation with max edge <= 2 h. Rectangles and unions of
/// axis-aligned rectangles use a tensor grid through all breakpoints,
/// polygons a subdivided fan from the center, disks concentric rings.
TriangleMesh mesh_domain(const DomainShape& shape, double h);

/// Exact area of the shape (for disks, of the disk itself).
double shape_area(const DomainShape& shape);

/// {"nodes":[[x,y],...],"elements":[[i,j,k],...]}.
std::string mesh_to_json(const TriangleMesh& mesh);
TriangleMesh mesh_from_json(const std::string& text);

/// P1 stiffness and consistent mass matrices, assembled in element order.
struct FemMatrices {
  Eigen::SparseMatrix<double> stiffness;
  Eigen::SparseMatrix<double> mass;
};

FemMatrices assemble_p1(const TriangleMesh& mesh);

using GridFunction = Eigen::VectorXd;

struct EigenResult {
  double mu2 = 0.0;
  double residual = 0.0;  // ||K x - mu M x|| / (||K x|| + mu ||M x||)
  GridFunction eigenvector;
  std::size_t dof = 0;
  int iterations = 0;
  double mean = 0.0;  // 1^T M x / |Ω| for the M-normalized eigenvector
};

/// Smallest nonzero eigenvalue of K x = μ M x in the M-orthogonal
/// complement of the constants. Dense for small meshes, otherwise block
/// shifted-inverse subspace iteration on K + M with Rayleigh-Ritz.
EigenResult neumann_mu2(const TriangleMesh& mesh);

/// ∫|∇f|^p / ∫|f|^p with per-element gradients and a degree-5 rule for the
/// denominator. Requires ∫|f|^{p-2} f = 0 to 1e-8 relative unless `project`
/// shifts f by the constant that enforces it.
double rayleigh_quotient(const TriangleMesh& mesh, const GridFunction& f, double p, bool project = false);

/// Constant c with ∫|f - c|^{p-2}(f - c) = 0.
double constraint_shift(const TriangleMesh& mesh, const GridFunction& f, double p);

/// μ2^{-1/2}.
double poincare_constant_p2(const TriangleMesh& mesh);

struct RayleighEstimate {
  double value = 0.0;  // upper estimate of the discrete μ_p
  int iterations = 0;
  double final_step = 0.0;
  int starts = 0;
  GridFunction minimizer;
};

/// Best Rayleigh quotient found by H^1-preconditioned descent from smooth
/// seeded starts, with the constraint re-imposed by a constant shift after
/// every step. An estimate, not a certificate.
RayleighEstimate minimize_rayleigh_p(const TriangleMesh& mesh, double p, int iterations, std::uint64_t seed,
                                     int starts = 4);

struct DominationOptions {
  std::uint64_t seed = 0;
  int iterations = 200;
  int starts = 4;
  /// Relative area mismatch between certificate and mesh that raises a flag.
  double area_tolerance = 1e-2;
};

struct DominationReport {
  bool pass = false;
  double bound_value = 0.0;
  double oracle_value = 0.0;
  double margin = 0.0;  // positive when the bound is on the safe side
  std::string method;
  std::vector<std::string> flags;
};

/// Poincaré constants must be >= the oracle constant μ^{-1/p}.
DominationReport check_domination(const PoincareBound& bound, const TriangleMesh& mesh,
                                  const DominationOptions& opts = {});
/// Eigenvalue lower bounds must be <= the oracle μ.
DominationReport check_domination(const EigenBound& bound, const TriangleMesh& mesh,
                                  const DominationOptions& opts = {});

}  // namespace qcb

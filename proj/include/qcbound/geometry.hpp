#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace qcb {

/// Points are stored in 3-vectors; two-dimensional cells keep z = 0.
using Point = Eigen::Vector3d;

/// Closed half-space { x : normal . x <= offset } with a unit normal.
struct HalfSpace {
  Point normal;
  double offset;
};

/// Absolute volume below which a cell counts as degenerate.
inline constexpr double kDegenerateVolume = 1e-12;

/// A bounded convex polytope in dimension 2 or 3.
///
/// The cell is given by its vertex list. On construction the convex hull is
/// computed, every vertex is checked to lie on the hull boundary, and cells
/// with volume <= kDegenerateVolume are rejected. The hull also yields a
/// half-space description, which the exact intersection routines use.
class ConvexCell {
 public:
  ConvexCell(int dim, std::vector<Point> vertices);

  /// Builds a cell from coordinate arrays; the dimension is the common
  /// length of the arrays.
  static ConvexCell from_coordinates(const std::vector<std::vector<double>>& coords);
  static ConvexCell rectangle(double x0, double y0, double x1, double y1);
  /// Convex hull of an arbitrary point cloud; interior points are dropped
  /// instead of rejected.
  static ConvexCell hull_of(int dim, std::vector<Point> points);

  int dim() const { return dim_; }
  std::span<const Point> vertices() const { return vertices_; }
  /// Hull boundary: CCW polygon in 2D; unused in 3D.
  std::span<const Point> polygon() const { return polygon_; }
  /// Outward-oriented boundary triangles (3D only).
  std::span<const std::array<Point, 3>> triangles() const { return triangles_; }
  std::span<const HalfSpace> halfspaces() const { return halfspaces_; }

  double volume() const { return volume_; }
  double diameter() const { return diameter_; }
  Point centroid() const;

  bool contains(const Point& x, double tol = 0.0) const;

  /// Image under x -> scale * x + shift.
  ConvexCell transformed(double scale, const Point& shift = Point::Zero()) const;
  /// Axis-aligned bounding box (lo, hi).
  std::pair<Point, Point> bounding_box() const;

 private:
  ConvexCell(int dim, std::vector<Point> vertices, bool require_boundary_vertices);

  int dim_;
  std::vector<Point> vertices_;
  std::vector<Point> polygon_;
  std::vector<std::array<Point, 3>> triangles_;
  std::vector<HalfSpace> halfspaces_;
  double volume_ = 0.0;
  double diameter_ = 0.0;
};

double cell_volume(const ConvexCell& cell);
double cell_diameter(const ConvexCell& cell);

/// Exact volume of c1 ∩ c2 by convex clipping (polygon clipping in 2D,
/// half-space clipping of the hull descriptions in 3D).
double intersection_volume(const ConvexCell& c1, const ConvexCell& c2);

/// The convex set c1 ∩ c2, or nullopt when it has no volume.
std::optional<ConvexCell> intersect_cells(const ConvexCell& c1, const ConvexCell& c2);

struct MonteCarloEstimate {
  double value;
  double std_error;
  std::uint64_t samples;
};

/// Monte-Carlo estimate of |c1 ∩ c2| by uniform sampling of the overlap of
/// the bounding boxes. Reproducible for a fixed seed.
MonteCarloEstimate intersection_volume_mc(const ConvexCell& c1, const ConvexCell& c2,
                                          std::uint64_t samples, std::uint64_t seed);

/// Volume of a finite union of convex cells by inclusion-exclusion.
/// Intended for the handful of cells in a Whitney triple or link.
double union_volume(std::span<const ConvexCell> cells);

/// |(∪ a_i) ∩ (∪ b_k)|.
double union_intersection_volume(std::span<const ConvexCell> a, std::span<const ConvexCell> b);

// ---------------------------------------------------------------------------
// Whitney triples and chains

/// A = Q1 ∪ R2 ∪ Q3 with |Q1∩R2| > 0, |R2∩Q3| > 0 and Q1, Q3 disjoint.
struct WhitneyTriple {
  ConvexCell q1;
  ConvexCell r2;
  ConvexCell q3;
  double v_q1r2;
  double v_r2q3;

  /// Computes the overlaps and checks the triple conditions. Q1 and Q3 count
  /// as disjoint when |Q1∩Q3| < 1e-9 min(|Q1|, |Q3|).
  static WhitneyTriple make(ConvexCell q1, ConvexCell r2, ConvexCell q3);

  std::array<ConvexCell, 3> cells() const { return {q1, r2, q3}; }
  double volume() const;
};

/// W = A_1 ∪ ... ∪ A_J with |A_j ∩ A_{j+1}| > 0.
struct WhitneyChain {
  std::vector<WhitneyTriple> triples;
  std::vector<double> link_volumes;  // |A_j ∩ A_{j+1}|, length J-1
  std::vector<double> triple_volumes;  // |A_j|
  int multiplicity = 1;

  /// Validates the stored data (link count, positivity, 1 <= m <= J).
  void validate() const;

  /// Computes triple and link volumes geometrically. When multiplicity is
  /// not given, uses 1 + max_i #{j != i : |A_i ∩ A_j| > 0}, which is never
  /// smaller than the true cover multiplicity.
  static WhitneyChain make(std::vector<WhitneyTriple> triples,
                           std::optional<int> multiplicity = std::nullopt);

  std::size_t size() const { return triples.size(); }
};

// ---------------------------------------------------------------------------
// Star-shaped domain Ω_δ = Ω1 ∪ Ω2

struct StarDomainSpec {
  double delta = 1.0;
  int n = 2;
  /// Cross-section polygon sides for the 3D polytopal pieces.
  int polygon_sides = 64;

  double alpha() const;
};

struct StarDomain {
  ConvexCell omega1;
  ConvexCell omega2;
  double alpha;
  int n;
  /// Relative volume deficit of the inscribed cross-section polygon
  /// (0 in 2D, O(1/M^2) in 3D).
  double discretization_error;
};

/// Ω1 = { max(|x'| - δ, -α) < x_n < α },  Ω2 = { -α < x_n < min(δ - |x'|, α) }.
StarDomain build_star_domain(const StarDomainSpec& spec);

/// Boundary of Ω1 ∪ Ω2 in 2D as a star-shaped hexagon (CCW, origin in kernel).
std::vector<Eigen::Vector2d> star_union_polygon(double delta);

// ---------------------------------------------------------------------------
// Snowflake-type fractal tree

struct FractalTreeSpec {
  double a = 1.0;
  int depth = 0;
  /// c1 = c2 in c1|Δ_j| <= |Δ_{j-1} ∩ Δ_j*| <= c2|Δ_j|.
  double overlap_fraction = 0.25;
  /// Levels up to this depth get explicit polygons.
  int materialize_depth = 4;
  /// When true the tree stands for the full infinite fractal and levels
  /// beyond `depth` are covered by tail bounds; otherwise it is exactly
  /// levels 0..depth.
  bool fractal_limit = true;

  static constexpr double scale = 1.0 / 3.0;
  static constexpr int root_branching = 3;
  static constexpr int branching = 2;
};

struct TreeLevel {
  int level;
  std::uint64_t count;      // cells on this level
  double side;              // side length of Δ_j
  double area;              // |Δ_j|
  double extended_area;     // |Δ_j*|, equal to |Δ_j| at the root
  double extended_diameter; // diam Δ_j*
  double overlap;           // |Δ_{j-1} ∩ Δ_j*|, 0 at the root
};

/// One materialized element: the triangle Δ and its extension Δ*.
struct TreeCell {
  ConvexCell base;
  ConvexCell extended;
  int parent;  // index into the previous level, -1 for the root
};

struct FractalTree {
  FractalTreeSpec spec;
  std::vector<TreeLevel> levels;             // 0..depth
  std::vector<std::vector<TreeCell>> cells;  // 0..min(depth, materialize_depth)
  int multiplicity;

  /// Level-i descendants of one level-j cell (the cell itself for i == j).
  double descendants(int j, int i) const;
  /// Analytic level data for any level, materialized or not.
  static TreeLevel level_data(const FractalTreeSpec& spec, int j);
};

FractalTree build_snowflake_tree(const FractalTreeSpec& spec);

}  // namespace qcb

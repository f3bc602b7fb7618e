#pragma once

#include <span>
#include <vector>

#include "qcbound/certificate.hpp"
#include "qcbound/geometry.hpp"

namespace qcb {

struct SpectralParams {
  double p = 2.0;
  int n = 2;

  /// Throws InputError unless p > 1 and n ∈ {2, 3}.
  void validate() const;
};

/// Generalized π: 2π (p-1)^{1/p} / (p sin(π/p)).
double pi_p(double p);

/// π_p from its integral definition 2 ∫_0^{(p-1)^{1/p}} dt / (1 - t^p/(p-1))^{1/p},
/// evaluated by tanh-sinh quadrature. Independent of pi_p().
double pi_p_quadrature(double p);

/// B(cell) <= diam(cell) / π_p (inf-over-constants form).
PoincareBound convex_cell_constant(const ConvexCell& cell, const SpectralParams& params);

/// 2 (|Ω|/|A|)^{1/p}: ||f - f_A||_{L_p(Ω)} <= factor * ||f - c||_{L_p(Ω)} for any c.
double lemma1_factor(double volume_ratio, double p);

/// Re-expresses a bound in deviation-from-mean form. At p = 2 the mean is the
/// optimal constant and the value is unchanged; otherwise the subset-average
/// factor with A = Ω (= 2) is applied.
PoincareBound as_mean_deviation(const PoincareBound& b);

/// Union of two overlapping cells:
/// B^p = 2^{2p-1}/|Q1∩Q2| (|Q1| b1^p + |Q2| b2^p).
PoincareBound pair_constant(const ConvexCell& q1, const ConvexCell& q2, double overlap,
                            const PoincareBound& b1, const PoincareBound& b2, double p);

/// Whitney triple A = Q1 ∪ R2 ∪ Q3:
/// B^p = 2^{4p-1} [ (|Q1∪R2|/|R2|)(|Q1|/|Q1∩R2|) b1^p
///                 + (|Q1∪R2|/|Q1∩R2| + |Q3∪R2|/|Q3∩R2|) b2^p
///                 + (|Q3∪R2|/|R2|)(|Q3|/|Q3∩R2|) b3^p ].
PoincareBound triple_constant(const WhitneyTriple& t, const PoincareBound& b1, const PoincareBound& b2,
                              const PoincareBound& b3, double p);

/// Per-triple coefficients C_i of a Whitney chain in the single-sum form
/// C_i = 2^{p-1} B_i^p + 2^{2p} (Σ_{k>=i} k^{p-1} |A_k|) B_i^p / |A_i ∩ A_{i+1}|.
/// The last triple reuses the link |A_{J-1} ∩ A_J|; a single triple keeps
/// only the first term.
std::vector<double> chain_coefficients(const WhitneyChain& chain, std::span<const double> triple_bound_pow,
                                       double p);

/// The same coefficients from the double-sum arrangement
/// Σ_j |A_j| j^{p-1} Σ_{μ<=j} (...), for cross-checking.
std::vector<double> chain_coefficients_double_sum(const WhitneyChain& chain,
                                                  std::span<const double> triple_bound_pow, double p);

/// B^p(W) = m · max_i C_i (inf-over-constants form, c = f_{A_1}).
PoincareBound chain_constant(const WhitneyChain& chain, std::span<const PoincareBound> triple_bounds, double p);

/// Fractal tree bound. `cell_bounds[j]` is the constant of a level-j element
/// Δ_j* (level 0 is the root). With spec.fractal_limit the levels beyond the
/// tree depth are covered by ratio-test tail bounds, which requires the
/// element constants to scale by spec.scale per level past the last given
/// level.
PoincareBound tree_constant(const FractalTree& tree, std::span<const PoincareBound> cell_bounds, double p);

/// Convex-cell constants for every level of a snowflake tree.
std::vector<PoincareBound> snowflake_cell_bounds(const FractalTree& tree, double p);

/// Level term T_j (j >= 1) of the snowflake series
/// T_j = #Δ_j · 2^{p-1} (B^p(Δ_j*)/|Δ_j*|) Σ_{i>=j} 2^{i-j} i^{p-1} |Δ_i*|,
/// with B(Δ_j*) = diam(Δ_j*)/π_p and the inner sum bounded rigorously.
double snowflake_level_term(const FractalTreeSpec& spec, double p, int level);

/// Rigorous upper bound for Σ_{j >= start_level} T_j. Terms are added until
/// the majorant ratio ρ_j = max(1, ((j+1)/j)^{p-1}) · 2/3^p drops below 1,
/// then the remainder is bounded by T_j ρ_j / (1 - ρ_j). Throws NumericError
/// ("series not summable at this p") when ρ_j >= 1 up to the level cap.
double snowflake_tail(const FractalTreeSpec& spec, double p, int start_level);

struct SnowflakeSeries {
  std::vector<double> level_terms;  // T_1..T_depth
  double finite_part;                // Σ_{j<=depth} T_j
  double tail;                       // bound for Σ_{j>depth} T_j
  double total() const { return finite_part + tail; }
};

SnowflakeSeries snowflake_series(const FractalTreeSpec& spec, double p, int depth);

}  // namespace qcb

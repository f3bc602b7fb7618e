#include "qcbound/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "qcbound/error.hpp"

namespace qcb {

namespace {

constexpr int kSeriesCap = 100000;

void require_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InputError("exponent p must satisfy 1 < p < inf");
}

void require_matching_p(const PoincareBound& b, double p) {
  if (std::abs(b.p - p) > 1e-12 * p) throw InputError("bound exponent does not match p");
}

// Σ_{i>=first} term(i) given a majorant ratio(i) >= term(i+1)/term(i) that is
// nonincreasing in i. Once ratio(i) < 1 the remainder from i on is at most
// term(i) / (1 - ratio(i)). With `refine`, summation continues until the
// current term is negligible before the remainder bound is applied.
template <class Term, class Ratio>
double ratio_test_sum(int first, Term&& term, Ratio&& ratio, bool refine) {
  double sum = 0.0;
  for (int i = first; i < first + kSeriesCap; ++i) {
    const double t = term(i);
    const double rho = ratio(i);
    if (rho < 1.0 && (!refine || t <= 1e-17 * (sum + t))) return sum + t / (1.0 - rho);
    sum += t;
  }
  throw NumericError("series not summable at this p");
}

// max(1, ((i+1)/i)^{p-1}): bound on (i+1+k)^{p-1} / (i+k)^{p-1} for k >= 0.
double power_step(int i, double p) { return std::max(1.0, std::pow((i + 1.0) / i, p - 1.0)); }

}  // namespace

void SpectralParams::validate() const {
  require_p(p);
  if (n != 2 && n != 3) throw InputError("dimension n must be 2 or 3");
}

double pi_p(double p) {
  require_p(p);
  return 2.0 * std::numbers::pi * std::pow(p - 1.0, 1.0 / p) / (p * std::sin(std::numbers::pi / p));
}

double pi_p_quadrature(double p) {
  require_p(p);
  const double b = std::pow(p - 1.0, 1.0 / p);
  boost::math::quadrature::tanh_sinh<double> integrator;
  // The two-argument form receives the signed distance to the nearest
  // endpoint, which keeps 1 - t^p/(p-1) accurate near t = b.
  auto f = [&](double t, double tc) {
    double gap;
    if (tc > 0 && t > 0.5 * b) {
      gap = -std::expm1(p * std::log1p(-tc / b));
    } else {
      gap = 1.0 - std::pow(t, p) / (p - 1.0);
    }
    return std::pow(gap, -1.0 / p);
  };
  return 2.0 * integrator.integrate(f, 0.0, b, 1e-15);
}

PoincareBound convex_cell_constant(const ConvexCell& cell, const SpectralParams& params) {
  params.validate();
  if (cell.dim() != params.n) throw InputError("cell dimension does not match n");
  const double p = params.p;
  const double pp = pi_p(p);
  PoincareBound b;
  b.p = p;
  b.r = p;
  b.form = BoundForm::inf_over_constants;
  b.value = cell.diameter() / pp;
  b.terms.push_back({"(diam/pi_p)^p", "convex-diameter", std::pow(b.value, p)});
  b.details.push_back({"diameter", "convex-diameter", cell.diameter()});
  b.details.push_back({"pi_p", "generalized-pi", pp});
  b.domain_volume = cell.volume();
  return b;
}

double lemma1_factor(double volume_ratio, double p) {
  if (!(p >= 1.0)) throw InputError("subset-average factor needs p >= 1");
  if (!(volume_ratio >= 1.0)) throw InputError("volume ratio |Ω|/|A| must be >= 1 (A must be a subset)");
  return 2.0 * std::pow(volume_ratio, 1.0 / p);
}

PoincareBound as_mean_deviation(const PoincareBound& b) {
  if (b.form == BoundForm::deviation_from_mean) return b;
  PoincareBound out = b;
  out.form = BoundForm::deviation_from_mean;
  if (b.r == 2.0) {
    out.details.push_back({"mean is the optimal L2 constant", "subset-average", 1.0});
    return out;
  }
  const double factor = lemma1_factor(1.0, b.r);
  out.value = factor * b.value;
  const double scale = std::pow(factor, b.p);
  for (auto& t : out.terms) t.value *= scale;
  out.details.push_back({"mean-deviation factor 2 (A = Ω)", "subset-average", factor});
  return out;
}

PoincareBound pair_constant(const ConvexCell& q1, const ConvexCell& q2, double overlap, const PoincareBound& b1,
                            const PoincareBound& b2, double p) {
  require_p(p);
  require_matching_p(b1, p);
  require_matching_p(b2, p);
  if (!(overlap > 0)) throw InputError("pair constant needs |Q1 ∩ Q2| > 0");
  const PoincareBound m1 = as_mean_deviation(b1);
  const PoincareBound m2 = as_mean_deviation(b2);
  const double pre = std::pow(2.0, 2.0 * p - 1.0) / overlap;
  PoincareBound out;
  out.p = p;
  out.r = p;
  out.form = BoundForm::deviation_from_mean;
  out.terms.push_back({"2^{2p-1} |Q1| B(Q1)^p / |Q1∩Q2|", "two-cell-union", pre * q1.volume() * std::pow(m1.value, p)});
  out.terms.push_back({"2^{2p-1} |Q2| B(Q2)^p / |Q1∩Q2|", "two-cell-union", pre * q2.volume() * std::pow(m2.value, p)});
  out.value = std::pow(out.term_sum(), 1.0 / p);
  out.details.push_back({"|Q1|", "volume", q1.volume()});
  out.details.push_back({"|Q2|", "volume", q2.volume()});
  out.details.push_back({"|Q1∩Q2|", "volume", overlap});
  out.details.push_back({"B(Q1)", "cell-constant", m1.value});
  out.details.push_back({"B(Q2)", "cell-constant", m2.value});
  out.domain_volume = q1.volume() + q2.volume() - overlap;
  flag_if_huge(out.flags, "B^p", out.term_sum());
  return out;
}

PoincareBound triple_constant(const WhitneyTriple& t, const PoincareBound& b1, const PoincareBound& b2,
                              const PoincareBound& b3, double p) {
  require_p(p);
  require_matching_p(b1, p);
  require_matching_p(b2, p);
  require_matching_p(b3, p);
  if (!(t.v_q1r2 > 0) || !(t.v_r2q3 > 0)) throw InputError("Whitney triple overlaps must be positive");
  const double vq1 = t.q1.volume(), vr2 = t.r2.volume(), vq3 = t.q3.volume();
  const double u12 = vq1 + vr2 - t.v_q1r2;
  const double u32 = vq3 + vr2 - t.v_r2q3;
  const double pre = std::pow(2.0, 4.0 * p - 1.0);
  const double c1 = std::pow(as_mean_deviation(b1).value, p);
  const double c2 = std::pow(as_mean_deviation(b2).value, p);
  const double c3 = std::pow(as_mean_deviation(b3).value, p);

  PoincareBound out;
  out.p = p;
  out.r = p;
  out.form = BoundForm::deviation_from_mean;
  out.terms.push_back({"2^{4p-1} (|Q1∪R2|/|R2|)(|Q1|/|Q1∩R2|) B(Q1)^p", "whitney-triple",
                       pre * (u12 / vr2) * (vq1 / t.v_q1r2) * c1});
  out.terms.push_back({"2^{4p-1} (|Q1∪R2|/|Q1∩R2| + |Q3∪R2|/|Q3∩R2|) B(R2)^p", "whitney-triple",
                       pre * (u12 / t.v_q1r2 + u32 / t.v_r2q3) * c2});
  out.terms.push_back({"2^{4p-1} (|Q3∪R2|/|R2|)(|Q3|/|Q3∩R2|) B(Q3)^p", "whitney-triple",
                       pre * (u32 / vr2) * (vq3 / t.v_r2q3) * c3});
  out.value = std::pow(out.term_sum(), 1.0 / p);
  out.details.push_back({"|Q1∩R2|", "volume", t.v_q1r2});
  out.details.push_back({"|R2∩Q3|", "volume", t.v_r2q3});
  out.details.push_back({"|Q1∪R2|", "volume", u12});
  out.details.push_back({"|Q3∪R2|", "volume", u32});
  out.domain_volume = t.volume();
  flag_if_huge(out.flags, "B^p", out.term_sum());
  return out;
}

std::vector<double> chain_coefficients(const WhitneyChain& chain, std::span<const double> bpow, double p) {
  chain.validate();
  const std::size_t J = chain.size();
  if (bpow.size() != J) throw InputError("need one bound per Whitney triple");
  std::vector<double> suffix(J + 1, 0.0);
  for (std::size_t i = J; i-- > 0;) {
    suffix[i] = suffix[i + 1] + std::pow(static_cast<double>(i + 1), p - 1.0) * chain.triple_volumes[i];
  }
  std::vector<double> c(J);
  const double first = std::pow(2.0, p - 1.0);
  const double second = std::pow(2.0, 2.0 * p);
  for (std::size_t i = 0; i < J; ++i) {
    c[i] = first * bpow[i];
    if (J > 1) {
      const double link = i + 1 < J ? chain.link_volumes[i] : chain.link_volumes[J - 2];
      c[i] += second * suffix[i] * bpow[i] / link;
    }
  }
  return c;
}

std::vector<double> chain_coefficients_double_sum(const WhitneyChain& chain, std::span<const double> bpow,
                                                  double p) {
  chain.validate();
  const std::size_t J = chain.size();
  if (bpow.size() != J) throw InputError("need one bound per Whitney triple");
  std::vector<double> c(J);
  const double first = std::pow(2.0, p - 1.0);
  const double second = std::pow(2.0, 2.0 * p);
  for (std::size_t i = 0; i < J; ++i) c[i] = first * bpow[i];
  if (J == 1) return c;
  for (std::size_t j = 0; j < J; ++j) {
    const double outer = chain.triple_volumes[j] * std::pow(static_cast<double>(j + 1), p - 1.0);
    for (std::size_t mu = 0; mu <= j; ++mu) {
      const double link = mu + 1 < J ? chain.link_volumes[mu] : chain.link_volumes[J - 2];
      c[mu] += second * outer * bpow[mu] / link;
    }
  }
  return c;
}

PoincareBound chain_constant(const WhitneyChain& chain, std::span<const PoincareBound> triple_bounds, double p) {
  require_p(p);
  chain.validate();
  const std::size_t J = chain.size();
  if (triple_bounds.size() != J) throw InputError("need one bound per Whitney triple");
  std::vector<double> bpow;
  for (const auto& b : triple_bounds) {
    require_matching_p(b, p);
    bpow.push_back(std::pow(as_mean_deviation(b).value, p));
  }
  const auto coeff = chain_coefficients(chain, bpow, p);
  const auto check = chain_coefficients_double_sum(chain, bpow, p);
  const std::size_t imax = static_cast<std::size_t>(std::max_element(coeff.begin(), coeff.end()) - coeff.begin());
  const double m = chain.multiplicity;

  PoincareBound out;
  out.p = p;
  out.r = p;
  out.form = BoundForm::inf_over_constants;
  out.multiplicity = chain.multiplicity;
  const double first = m * std::pow(2.0, p - 1.0) * bpow[imax];
  out.terms.push_back({"m 2^{p-1} B(A_" + std::to_string(imax + 1) + ")^p", "chain-sum", first});
  if (J > 1) {
    out.terms.push_back({"m 2^{2p} (Σ_{k>=i} k^{p-1}|A_k|) B(A_i)^p / |A_i∩A_{i+1}|, i=" + std::to_string(imax + 1),
                         "chain-sum", m * coeff[imax] - first});
  }
  out.value = std::pow(out.term_sum(), 1.0 / p);

  double worst = 0.0;
  for (std::size_t i = 0; i < J; ++i) {
    out.details.push_back({"C_" + std::to_string(i + 1), "chain-sum", coeff[i]});
    worst = std::max(worst, std::abs(coeff[i] - check[i]) / coeff[i]);
  }
  out.details.push_back({"multiplicity", "cover-multiplicity", m});
  out.details.push_back({"double-sum cross-check max relative difference", "chain-double-sum", worst});
  if (worst > 1e-12) out.flags.push_back("chain single-sum and double-sum arrangements differ beyond reordering");
  if (J > 1) {
    out.details.push_back({"last triple uses link |A_{J-1}∩A_J|", "chain-sum", chain.link_volumes[J - 2]});
  } else {
    out.details.push_back({"single triple: no link term", "chain-sum", 0.0});
  }
  double total = 0.0;
  for (double v : chain.triple_volumes) total += v;
  out.details.push_back({"Σ|A_j|", "volume", total});
  flag_if_huge(out.flags, "B^p", out.term_sum());
  return out;
}

std::vector<PoincareBound> snowflake_cell_bounds(const FractalTree& tree, double p) {
  require_p(p);
  const double pp = pi_p(p);
  std::vector<PoincareBound> out;
  const int top = std::max(tree.spec.depth, 1);
  for (int j = 0; j <= top; ++j) {
    const TreeLevel L = FractalTree::level_data(tree.spec, j);
    PoincareBound b;
    b.p = p;
    b.r = p;
    b.value = L.extended_diameter / pp;
    b.terms.push_back({"(diam/pi_p)^p", "convex-diameter", std::pow(b.value, p)});
    b.details.push_back({"diameter", "convex-diameter", L.extended_diameter});
    b.details.push_back({"pi_p", "generalized-pi", pp});
    b.domain_volume = L.extended_area;
    out.push_back(std::move(b));
  }
  return out;
}

PoincareBound tree_constant(const FractalTree& tree, std::span<const PoincareBound> cell_bounds, double p) {
  require_p(p);
  const int J = tree.spec.depth;
  if (tree.levels.empty() || static_cast<int>(tree.levels.size()) != J + 1) {
    throw InputError("fractal tree has no cells");
  }
  const bool limit = tree.spec.fractal_limit;
  const std::size_t needed = static_cast<std::size_t>(limit ? std::max(J, 1) : J) + 1;
  if (cell_bounds.size() < needed) throw InputError("tree_constant needs a bound for every level");
  std::vector<double> bpow;
  for (std::size_t j = 0; j < cell_bounds.size(); ++j) {
    require_matching_p(cell_bounds[j], p);
    bpow.push_back(std::pow(as_mean_deviation(cell_bounds[j]).value, p));
  }
  const auto& spec = tree.spec;
  auto volume = [&](int i) { return FractalTree::level_data(spec, std::min(i, 63)).extended_area *
                                    (i > 63 ? std::pow(spec.scale * spec.scale, i - 63) : 1.0); };
  const double half = std::pow(2.0, p - 1.0);
  const double level_ratio = 2.0 * spec.scale * spec.scale;  // descendants double, volumes shrink by 1/9

  // Descendant sums Σ_{i>=max(j,1)} desc(j,i) i^{p-1} |Δ_i*| for the cell itself.
  std::vector<double> coeff(J + 1), inner(J + 1);
  for (int j = 0; j <= J; ++j) {
    double s = 0.0;
    for (int i = std::max(j, 1); i <= J; ++i) s += tree.descendants(j, i) * std::pow(i, p - 1.0) * volume(i);
    if (limit) {
      const int first = J + 1;
      s += ratio_test_sum(
          first,
          [&](int i) {
            const double desc = j == 0 ? 3.0 * std::ldexp(1.0, i - 1) : std::ldexp(1.0, i - j);
            return desc * std::pow(i, p - 1.0) * volume(i);
          },
          [&](int i) { return power_step(i, p) * level_ratio; }, true);
    }
    inner[j] = s;
    const double cell_volume = volume(j);
    coeff[j] = half * bpow[j] + half * s * bpow[j] / cell_volume;
  }

  // Levels beyond the depth: C_{j+1}/C_j <= scale^p max(1, ((j+1)/j)^{p-1}) < 1,
  // so the supremum over j > J is C_{J+1}.
  double beyond = 0.0;
  double beyond_first = 0.0;
  if (limit) {
    const int ref = std::max(J, 1);
    const int j = J + 1;
    const double bj = bpow[ref] * std::pow(spec.scale, p * (j - ref));
    const double x = ratio_test_sum(
        0, [&](int k) { return std::pow(level_ratio, k) * std::pow(j + k, p - 1.0); },
        [&](int k) { return power_step(j + k, p) * level_ratio; }, true);
    beyond_first = half * bj;
    beyond = half * bj * (1.0 + x);
  }

  const int imax = static_cast<int>(std::max_element(coeff.begin(), coeff.end()) - coeff.begin());
  const double m = tree.multiplicity;
  PoincareBound out;
  out.p = p;
  out.r = p;
  out.form = BoundForm::inf_over_constants;
  out.multiplicity = tree.multiplicity;
  if (limit && beyond > coeff[imax]) {
    out.terms.push_back({"m 2^{p-1} B(Δ_j*)^p, j=" + std::to_string(J + 1) + " (unmaterialized levels)",
                         "tree-sum", m * beyond_first});
    out.terms.push_back({"m 2^{p-1} Σ desc steps^{p-1}|Δ| B^p/|Δ_j*|, j=" + std::to_string(J + 1) +
                             " (unmaterialized levels)",
                         "tree-sum", m * (beyond - beyond_first)});
  } else {
    const double first = m * half * bpow[imax];
    out.terms.push_back({"m 2^{p-1} B(Δ_" + std::to_string(imax) + ")^p", "tree-sum", first});
    out.terms.push_back({"m 2^{p-1} Σ desc steps^{p-1}|Δ| B(Δ_k)^p/|Δ_k|, level " + std::to_string(imax),
                         "tree-sum", m * coeff[imax] - first});
  }
  out.value = std::pow(out.term_sum(), 1.0 / p);
  for (int j = 0; j <= J; ++j) out.details.push_back({"C_level_" + std::to_string(j), "tree-sum", coeff[j]});
  if (limit) out.details.push_back({"sup_{j>depth} C_j", "tree-sum", beyond});
  out.details.push_back({"multiplicity", "cover-multiplicity", m});
  out.details.push_back({"overlap_fraction", "extended-cell", spec.overlap_fraction});
  flag_if_huge(out.flags, "B^p", out.term_sum());
  return out;
}

namespace {

struct LevelGeometry {
  double count;
  double ext_area;
  double ext_diameter;
};

LevelGeometry snowflake_level(const FractalTreeSpec& spec, int j) {
  const double side = spec.a * std::pow(spec.scale, j);
  const double area = std::sqrt(3.0) * side * side / 4.0;
  const double c = spec.overlap_fraction;
  return {3.0 * std::ldexp(1.0, j - 1), (1.0 + c) * area, std::sqrt(1.0 + c) * side};
}

void require_series_p(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) throw InputError("series exponent must be positive and finite");
}

}  // namespace

double snowflake_level_term(const FractalTreeSpec& spec, double p, int level) {
  require_p(p);
  if (level < 1) throw InputError("snowflake series starts at level 1");
  const double ratio = 2.0 * spec.scale * spec.scale;
  const LevelGeometry g = snowflake_level(spec, level);
  const double inner = ratio_test_sum(
      level,
      [&](int i) { return std::ldexp(1.0, i - level) * std::pow(i, p - 1.0) * snowflake_level(spec, i).ext_area; },
      [&](int i) { return power_step(i, p) * ratio; }, true);
  const double pp = pi_p(p);
  const double bpow = std::pow(g.ext_diameter / pp, p);
  return g.count * std::pow(2.0, p - 1.0) * (bpow / g.ext_area) * inner;
}

double snowflake_tail(const FractalTreeSpec& spec, double p, int start_level) {
  require_series_p(p);
  if (start_level < 1) throw InputError("snowflake tail starts at level >= 1");
  const double base_ratio = 2.0 * std::pow(spec.scale, p);
  // The exact term ratio tends to 2 scale^p; at or above 1 the terms do not decay.
  if (base_ratio >= 1.0) throw NumericError("series not summable at this p");
  require_p(p);
  return ratio_test_sum(
      start_level, [&](int j) { return snowflake_level_term(spec, p, j); },
      [&](int j) { return power_step(j, p) * base_ratio; }, false);
}

SnowflakeSeries snowflake_series(const FractalTreeSpec& spec, double p, int depth) {
  require_p(p);
  if (depth < 0) throw InputError("series depth must be non-negative");
  SnowflakeSeries s{};
  s.finite_part = 0.0;
  for (int j = 1; j <= depth; ++j) {
    s.level_terms.push_back(snowflake_level_term(spec, p, j));
    s.finite_part += s.level_terms.back();
  }
  s.tail = snowflake_tail(spec, p, depth + 1);
  return s;
}

}  // namespace qcb

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace qcb {

/// One line of a certificate: what the number is, which formula produced it,
/// and its value.
struct CertificateTerm {
  std::string label;
  std::string formula;
  double value;
};

enum class BoundForm {
  /// inf_c ||f - c||_r <= B ||grad f||_q
  inf_over_constants,
  /// ||f - f_Ω||_r <= B ||grad f||_q
  deviation_from_mean,
};

/// A Sobolev-Poincaré constant B_{r,q} together with its derivation.
///
/// `terms` are the summands that add up to value^p (for chain and tree
/// bounds they already include the multiplicity factor). `details` hold
/// auxiliary quantities (diameters, per-cell coefficients, ...) that are not
/// part of the sum. `flags` carry warnings such as overflow of intermediate
/// powers.
struct PoincareBound {
  double value = 0.0;
  double p = 2.0;  // gradient exponent q
  double r = 2.0;  // deviation exponent
  BoundForm form = BoundForm::inf_over_constants;
  std::vector<CertificateTerm> terms;
  std::vector<CertificateTerm> details;
  std::vector<std::string> flags;
  int multiplicity = 1;
  std::optional<double> domain_volume;

  /// Sum of the certificate terms; equals value^p for assembled bounds.
  double term_sum() const;
};

/// A certified lower bound for the first nontrivial Neumann eigenvalue.
struct EigenBound {
  double mu_lower = 0.0;
  double p = 2.0;
  std::vector<CertificateTerm> provenance;
  std::vector<std::string> flags;
  std::optional<double> domain_volume;
};

struct TransferFactor {
  std::string formula;
  std::vector<std::pair<std::string, double>> inputs;
  double value;
};

/// Result of a quasiconformal transfer: bound = product of chain values.
struct TransferResult {
  double bound = 0.0;
  std::vector<TransferFactor> chain;
  double q_star = 0.0;
  double s = 0.0;
  std::vector<std::string> flags;

  double chain_product() const;
};

const char* to_string(BoundForm form);

/// Appends a flag when |x| exceeds 1e300 (loss of relative accuracy).
void flag_if_huge(std::vector<std::string>& flags, const std::string& what, double x);

}  // namespace qcb

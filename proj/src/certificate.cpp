#include "qcbound/certificate.hpp"

#include <cmath>

namespace qcb {

double PoincareBound::term_sum() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.value;
  return s;
}

double TransferResult::chain_product() const {
  double prod = 1.0;
  for (const auto& f : chain) prod *= f.value;
  return prod;
}

const char* to_string(BoundForm form) {
  switch (form) {
    case BoundForm::inf_over_constants:
      return "inf-over-constants";
    case BoundForm::deviation_from_mean:
      return "deviation-from-mean";
  }
  return "unknown";
}

void flag_if_huge(std::vector<std::string>& flags, const std::string& what, double x) {
  if (!std::isfinite(x) || std::abs(x) > 1e300) {
    flags.push_back("relative-error: " + what + " exceeds 1e300");
  }
}

}  // namespace qcb

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fbmrds {

struct GronwallInstance {
  double lambda = 1.0;
  double v0 = 0.0, k0 = 0.0, k1 = 0.5, k2 = 0.0;
  std::vector<double> t;  // t_0 = 0 < t_1 < ...

  // Throws std::invalid_argument on constant violations and GronwallStepError on the step condition.
  void validate(std::size_t i_max) const;
  double step_limit() const;  // -(2/lambda) log k1
};

struct GronwallStepError : std::invalid_argument {
  std::size_t index;
  explicit GronwallStepError(std::size_t i);
};

// S_1..S_{i_max}; element k holds S_{k+1}.
std::vector<double> gronwall_bound(const GronwallInstance& g, std::size_t i_max);
// Extremal sequence Z_i by direct recursion.
std::vector<double> gronwall_oracle(const GronwallInstance& g, std::size_t i_max);
// Same recursion with the equality relaxed: U_i = frac_i * RHS_i(U), frac_i in [0, 1].
std::vector<double> gronwall_admissible(const GronwallInstance& g, const std::vector<double>& frac);
// Right-hand side of the recursion at index i (1-based) given U_1..U_{i-1}.
double gronwall_rhs(const GronwallInstance& g, const std::vector<double>& U, std::size_t i);

struct KeyInequality {
  double lhs = 0.0, rhs = 0.0;
  bool holds = false;
};
// k1 + e^{-x} <= (1 + k1) e^{-x/2}
KeyInequality key_inequality_check(double k1, double x);

// a <= b allowing `ulps` units in the last place of max(|a|, |b|).
bool leq_ulps(double a, double b, int ulps = 8);

}  // namespace fbmrds

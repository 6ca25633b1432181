#include "fbmrds/gronwall.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fbmrds {

namespace {

// Neumaier compensated sum.
class Sum {
 public:
  void add(double x) {
    const double t = s_ + x;
    c_ += std::abs(s_) >= std::abs(x) ? (s_ - t) + x : (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

}  // namespace

GronwallStepError::GronwallStepError(std::size_t i)
    : std::invalid_argument("Gronwall step condition failed at i = " + std::to_string(i)), index(i) {}

double GronwallInstance::step_limit() const { return -(2.0 / lambda) * std::log(k1); }

void GronwallInstance::validate(std::size_t i_max) const {
  if (!(lambda > 0.0)) throw std::invalid_argument("Gronwall lambda must be positive");
  if (!(v0 >= 0.0 && k0 >= 0.0 && k2 >= 0.0)) throw std::invalid_argument("Gronwall v0, k0, k2 must be non-negative");
  if (!(k1 > 0.0 && k1 < 1.0)) throw std::invalid_argument("Gronwall k1 must lie in (0, 1)");
  if (t.empty() || t[0] != 0.0) throw std::invalid_argument("Gronwall times must start at t_0 = 0");
  if (i_max >= 1 && t.size() < i_max) throw std::invalid_argument("Gronwall times too short: need t_0..t_{i_max-1}");
  for (std::size_t k = 1; k < t.size(); ++k)
    if (!(t[k] > t[k - 1])) throw std::invalid_argument("Gronwall times must be increasing");
  const double lim = step_limit();
  // t_{i-1} - t_{i-2} <= limit for i >= 2; the difference carries rounding of order ulp(t_{i-1})
  for (std::size_t i = 2; i <= i_max; ++i) {
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t[i - 1]), lim);
    if (t[i - 1] - t[i - 2] > lim + slack) throw GronwallStepError(i);
  }
}

std::vector<double> gronwall_bound(const GronwallInstance& g, std::size_t i_max) {
  g.validate(i_max);
  std::vector<double> S(i_max);
  const double h = 0.5 * g.lambda;
  for (std::size_t i = 1; i <= i_max; ++i) {
    Sum s;
    s.add((g.k0 * g.v0 + g.k2) * std::pow(1.0 + g.k1, static_cast<double>(i - 1)) * std::exp(-h * g.t[i - 1]));
    for (std::size_t m = 1; m + 1 <= i; ++m)
      s.add(2.0 * g.k2 * std::pow(1.0 + g.k1, static_cast<double>(i - 1 - m)) * std::exp(-h * (g.t[i - 1] - g.t[m])));
    S[i - 1] = s.value();
  }
  return S;
}

double gronwall_rhs(const GronwallInstance& g, const std::vector<double>& U, std::size_t i) {
  Sum s;
  s.add(g.k0 * g.v0 * std::exp(-g.lambda * g.t[i - 1]));
  for (std::size_t m = 1; m + 1 <= i; ++m) {
    const double e = std::exp(-g.lambda * (g.t[i - 1] - g.t[m]));
    s.add(g.k1 * U[m - 1] * e);
    s.add(e * g.k2);
  }
  s.add(g.k2);
  return s.value();
}

std::vector<double> gronwall_admissible(const GronwallInstance& g, const std::vector<double>& frac) {
  g.validate(frac.size());
  std::vector<double> U;
  U.reserve(frac.size());
  for (std::size_t i = 1; i <= frac.size(); ++i) {
    if (!(frac[i - 1] >= 0.0 && frac[i - 1] <= 1.0)) throw std::invalid_argument("fractions must lie in [0, 1]");
    U.push_back(frac[i - 1] * gronwall_rhs(g, U, i));
  }
  return U;
}

std::vector<double> gronwall_oracle(const GronwallInstance& g, std::size_t i_max) {
  return gronwall_admissible(g, std::vector<double>(i_max, 1.0));
}

KeyInequality key_inequality_check(double k1, double x) {
  KeyInequality r;
  r.lhs = k1 + std::exp(-x);
  r.rhs = (1.0 + k1) * std::exp(-0.5 * x);
  r.holds = leq_ulps(r.lhs, r.rhs);
  return r;
}

bool leq_ulps(double a, double b, int ulps) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return a <= b + ulps * std::numeric_limits<double>::epsilon() * scale;
}

}  // namespace fbmrds

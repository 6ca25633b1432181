#pragma once

#include "fbmrds/holder_paths.hpp"

#include <cstddef>
#include <vector>

namespace fbmrds {

class SpectralOperator;
class NonlinearityG;

struct FractionalOrder {
  double alpha;
  explicit FractionalOrder(double a);
};

// Matrix-valued path on a uniform grid; entry (j, i) is the coefficient of e_j (x) e_i.
struct OperatorPath {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<Matrix> values;

  OperatorPath() = default;
  OperatorPath(double t0_, double dt_, std::vector<Matrix> v);
  std::size_t steps() const { return values.size() - 1; }
  std::size_t dim() const { return values.empty() ? 0 : static_cast<std::size_t>(values.front().rows()); }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  // Constant operator on the grid of p.
  static OperatorPath constant(const DiscretePath& p, const Matrix& K);
};

// All derivatives and integrals below act on the piecewise-linear interpolant of the grid data and
// are exact for it: the singular kernels are integrated in closed form cell by cell.

// Left Weyl derivative D^alpha_{a+} f at grid point r (a < r).
Vector weyl_left_derivative(const DiscretePath& f, FractionalOrder alpha, std::size_t a, std::size_t r);
Matrix weyl_left_derivative(const OperatorPath& K, FractionalOrder alpha, std::size_t a, std::size_t r);

// Right Weyl derivative D^{1-alpha}_{b-} of w_{b-} = w - w(b) at grid point r (r < b), real convention:
// for w(t) = t on [0, 1] it equals (1 - r)^alpha / Gamma(1 + alpha).
Vector weyl_right_derivative(const DiscretePath& w, FractionalOrder alpha, std::size_t r, std::size_t b);

// Left Riemann-Liouville integral I^alpha_{a+} f at grid point x; zero when x = a.
Vector rl_integral_left(const DiscretePath& f, FractionalOrder alpha, std::size_t x, std::size_t a = 0);
// I^alpha_{a+} f at every grid point a..end, as a path on the same grid.
DiscretePath rl_integral_path(const DiscretePath& f, FractionalOrder alpha, std::size_t a = 0);

// Pathwise integral of k against zeta over grid points [i1, i2], computed as the pairing
// int D^alpha_{i1+} k * D^{1-alpha}_{i2-} zeta dr. For smooth data it agrees with Riemann-Stieltjes.
double zaehle_integral_scalar(const DiscretePath& k, const DiscretePath& zeta, FractionalOrder alpha, std::size_t i1,
                              std::size_t i2);
// Same, after checking 1 - beta' < alpha < beta.
double zaehle_integral_scalar(const DiscretePath& k, const DiscretePath& zeta, const HolderParams& hp, std::size_t i1,
                              std::size_t i2);

// Mode expansion: component j = sum_i int D^alpha K_{ji} * D^{1-alpha} w_i dr.
Vector zaehle_integral_hilbert(const OperatorPath& K, const DiscretePath& w, FractionalOrder alpha, std::size_t i1,
                               std::size_t i2);
Vector zaehle_integral_hilbert(const OperatorPath& K, const DiscretePath& w, const HolderParams& hp, std::size_t i1,
                               std::size_t i2);
// int ||D^alpha K||_HS * |D^{1-alpha} w| dr, an upper bound for the norm of the Hilbert-valued integral.
double zaehle_hilbert_norm_bound(const OperatorPath& K, const DiscretePath& w, FractionalOrder alpha, std::size_t i1,
                                 std::size_t i2);

struct DerivativeBoundReport {
  double lhs;    // ||D^alpha_{T1+} S(t - .) G(u(.)) [r]||_HS
  double rhs;    // (1 + ||u||_beta) (r - T1)^-alpha (1 + (r - T1)^beta + (r - T1)^beta / (t - r)^beta)
  double ratio;  // lhs / rhs
};
// T1 is the start of u; r is a grid index of u, t > time(r) a real time.
DerivativeBoundReport semigroup_integrand_derivative_bound(const DiscretePath& u, const NonlinearityG& G,
                                                           const SpectralOperator& S, double t, std::size_t r,
                                                           FractionalOrder alpha, const HolderParams& hp);

// Constant from the definition of the right derivative:
// |D^{1-alpha}_{b-} w_{b-}[r]| <= c |||w|||_{beta', r, b} (b - r)^{beta' + alpha - 1}.
double right_derivative_constant(FractionalOrder alpha, double beta_prime);

}  // namespace fbmrds

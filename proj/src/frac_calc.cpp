#include "fbmrds/frac_calc.hpp"

#include "fbmrds/spectral_operator.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <stdexcept>

namespace fbmrds {

FractionalOrder::FractionalOrder(double a) : alpha(a) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("fractional order alpha must lie in (0, 1)");
}

OperatorPath::OperatorPath(double t0_, double dt_, std::vector<Matrix> v) : t0(t0_), dt(dt_), values(std::move(v)) {
  if (!(dt > 0.0)) throw std::invalid_argument("operator path step must be positive");
  if (values.empty()) throw std::invalid_argument("operator path needs at least one grid point");
  const auto n = values.front().rows();
  for (const auto& m : values)
    if (m.rows() != n || m.cols() != n) throw std::invalid_argument("operator path matrices must be square, same size");
}

OperatorPath OperatorPath::constant(const DiscretePath& p, const Matrix& K) {
  return OperatorPath(p.t0(), p.dt(), std::vector<Matrix>(p.size(), K));
}

namespace {

const double kGauss[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};

void check_pair(std::size_t lo, std::size_t hi, std::size_t last, const char* what) {
  if (lo >= hi) throw std::invalid_argument(what);
  if (hi > last) throw std::invalid_argument("index outside grid");
}

// Pairing of a left derivative (integrand) with a right derivative (integrator) on cells [0, N) of width h.
// The integrator enters through its increments dz (N x n). Produces
//   y (N x n): I_rest = sum_l (f_{l+1} - f_l) . y_l
//   s (n):     I_sing = f_0 . s
// so that the integral of any integrand sampled on the nodes is sum_l df_l y_l + f_0 s.
//
// For interpolants, D^alpha_{a+} f = f_0 (r-a)^-alpha / Gamma(1-alpha) + I^{1-alpha}_{a+} f' and
// D^{1-alpha}_{b-} z_{b-} = I^alpha_{b-} z', with f', z' constant on cells. Moving I^{1-alpha}_{a+} across the
// pairing and using I^{1-alpha}_{b-} I^alpha_{b-} = I^1_{b-} leaves integrals of step functions:
//   int_{cell l} I^1_{b-} 1_{cell l'} = h^2 [l' > l] + h^2/2 [l' = l],
// and the f_0 term pairs to z(b) - z(a). The result does not depend on alpha.
struct Pairing {
  RowMatrix y;
  Vector s;
};

Pairing build_pairing(const RowMatrix& dz, double /*h*/, double /*alpha*/) {
  const auto N = dz.rows();
  Pairing out{RowMatrix::Zero(N, dz.cols()), Vector::Zero(dz.cols())};
  Eigen::RowVectorXd tail = Eigen::RowVectorXd::Zero(dz.cols());
  for (Eigen::Index l = N - 1; l >= 0; --l) {
    out.y.row(l) = tail + 0.5 * dz.row(l);
    tail += dz.row(l);
  }
  out.s = tail.transpose();
  return out;
}

RowMatrix increments(const RowMatrix& v, std::size_t i1, std::size_t i2) {
  const auto N = static_cast<Eigen::Index>(i2 - i1);
  return v.middleRows(static_cast<Eigen::Index>(i1) + 1, N) - v.middleRows(static_cast<Eigen::Index>(i1), N);
}

void check_window(FractionalOrder alpha, const HolderParams& hp) {
  if (!(1.0 - hp.beta_prime < alpha.alpha && alpha.alpha < hp.beta))
    throw std::invalid_argument("fractional order incompatible with Hölder exponents");
}

// Weights on the increments df_l (l < p) plus the cell containing r, for the regular part of the left
// derivative at r = x_p + g h (0 < g <= 1), excluding the singular f_0 term.
std::vector<double> left_weights(std::size_t p, double g, double h, double alpha) {
  const double kL = std::pow(h, -alpha) / ((1.0 - alpha) * std::tgamma(1.0 - alpha));
  std::vector<double> w(p + 1);
  for (std::size_t l = 0; l <= p; ++l) {
    const double e = static_cast<double>(p - l);
    const double hi = std::pow(e + g, 1.0 - alpha);
    const double lo = (l == p) ? 0.0 : std::pow(e + g - 1.0, 1.0 - alpha);
    w[l] = kL * (hi - lo);
  }
  return w;
}

// Right derivative at r = x_p + g h (0 <= g < 1) against increments dz on cells [0, N).
Vector right_at(const RowMatrix& dz, std::size_t p, double g, double h, double alpha) {
  const double kR = std::pow(h, alpha - 1.0) / (alpha * std::tgamma(alpha));
  Vector out = Vector::Zero(dz.cols());
  for (std::size_t l = p; l < static_cast<std::size_t>(dz.rows()); ++l) {
    const double d = static_cast<double>(l - p);
    const double hi = std::pow(d + 1.0 - g, alpha);
    const double lo = (l == p) ? 0.0 : std::pow(d - g, alpha);
    out += kR * (hi - lo) * dz.row(static_cast<Eigen::Index>(l)).transpose();
  }
  return out;
}

}  // namespace

Vector weyl_left_derivative(const DiscretePath& f, FractionalOrder alpha, std::size_t a, std::size_t r) {
  if (r == a) throw std::invalid_argument("evaluation at left endpoint");
  check_pair(a, r, f.steps(), "left derivative needs a < r");
  const double al = alpha.alpha, h = f.dt();
  const double gl = std::tgamma(1.0 - al);
  const std::size_t q = r - a;
  Vector out = f.value(a) * std::pow(static_cast<double>(q) * h, -al) / gl;
  const double kL = std::pow(h, -al) / ((1.0 - al) * gl);
  for (std::size_t l = 0; l < q; ++l) {
    const double e = static_cast<double>(q - l);
    const double w = kL * (std::pow(e, 1.0 - al) - std::pow(e - 1.0, 1.0 - al));
    out += w * (f.values().row(static_cast<Eigen::Index>(a + l + 1)) - f.values().row(static_cast<Eigen::Index>(a + l))).transpose();
  }
  return out;
}

Matrix weyl_left_derivative(const OperatorPath& K, FractionalOrder alpha, std::size_t a, std::size_t r) {
  if (r == a) throw std::invalid_argument("evaluation at left endpoint");
  check_pair(a, r, K.steps(), "left derivative needs a < r");
  const double al = alpha.alpha, h = K.dt;
  const double gl = std::tgamma(1.0 - al);
  const std::size_t q = r - a;
  Matrix out = K.values[a] * (std::pow(static_cast<double>(q) * h, -al) / gl);
  const double kL = std::pow(h, -al) / ((1.0 - al) * gl);
  for (std::size_t l = 0; l < q; ++l) {
    const double e = static_cast<double>(q - l);
    out += kL * (std::pow(e, 1.0 - al) - std::pow(e - 1.0, 1.0 - al)) * (K.values[a + l + 1] - K.values[a + l]);
  }
  return out;
}

Vector weyl_right_derivative(const DiscretePath& w, FractionalOrder alpha, std::size_t r, std::size_t b) {
  if (r == b) throw std::invalid_argument("evaluation at right endpoint");
  check_pair(r, b, w.steps(), "right derivative needs r < b");
  const double al = alpha.alpha, h = w.dt();
  const double kR = std::pow(h, al - 1.0) / (al * std::tgamma(al));
  Vector out = Vector::Zero(static_cast<Eigen::Index>(w.dim()));
  for (std::size_t l = r; l < b; ++l) {
    const double d = static_cast<double>(l - r);
    out += kR * (std::pow(d + 1.0, al) - std::pow(d, al)) *
           (w.values().row(static_cast<Eigen::Index>(l + 1)) - w.values().row(static_cast<Eigen::Index>(l))).transpose();
  }
  return out;
}

Vector rl_integral_left(const DiscretePath& f, FractionalOrder alpha, std::size_t x, std::size_t a) {
  if (x > f.steps() || a > x) throw std::invalid_argument("index outside grid");
  const double al = alpha.alpha, h = f.dt();
  Vector out = Vector::Zero(static_cast<Eigen::Index>(f.dim()));
  for (std::size_t l = a; l < x; ++l) {
    const double U0 = static_cast<double>(x - l) * h, U1 = static_cast<double>(x - l - 1) * h;
    const Vector fl = f.value(l);
    const Vector sl = (f.value(l + 1) - fl) / h;
    const double m0 = (std::pow(U0, al) - std::pow(U1, al)) / al;
    const double m1 = (std::pow(U0, al + 1.0) - std::pow(U1, al + 1.0)) / (al + 1.0);
    out += (fl + sl * U0) * m0 - sl * m1;
  }
  return out / std::tgamma(al);
}

DiscretePath rl_integral_path(const DiscretePath& f, FractionalOrder alpha, std::size_t a) {
  if (a > f.steps()) throw std::invalid_argument("index outside grid");
  RowMatrix v(static_cast<Eigen::Index>(f.size() - a), static_cast<Eigen::Index>(f.dim()));
  for (std::size_t x = a; x <= f.steps(); ++x) v.row(static_cast<Eigen::Index>(x - a)) = rl_integral_left(f, alpha, x, a).transpose();
  return DiscretePath(f.time(a), f.dt(), std::move(v));
}

double zaehle_integral_scalar(const DiscretePath& k, const DiscretePath& zeta, FractionalOrder alpha, std::size_t i1,
                              std::size_t i2) {
  if (k.dim() != 1 || zeta.dim() != 1) throw std::invalid_argument("scalar integral needs one-dimensional paths");
  if (k.size() != zeta.size() || std::abs(k.dt() - zeta.dt()) > 1e-12 * zeta.dt())
    throw std::invalid_argument("integrand and integrator must share the grid");
  check_pair(i1, i2, k.steps(), "degenerate interval");
  const Pairing P = build_pairing(increments(zeta.values(), i1, i2), zeta.dt(), alpha.alpha);
  const RowMatrix dk = increments(k.values(), i1, i2);
  return (dk.col(0).array() * P.y.col(0).array()).sum() + k.values()(static_cast<Eigen::Index>(i1), 0) * P.s[0];
}

double zaehle_integral_scalar(const DiscretePath& k, const DiscretePath& zeta, const HolderParams& hp, std::size_t i1,
                              std::size_t i2) {
  const FractionalOrder a(hp.alpha);
  check_window(a, hp);
  return zaehle_integral_scalar(k, zeta, a, i1, i2);
}

Vector zaehle_integral_hilbert(const OperatorPath& K, const DiscretePath& w, FractionalOrder alpha, std::size_t i1,
                               std::size_t i2) {
  if (K.dim() != w.dim()) throw std::invalid_argument("dimension mismatch between operator path and integrator");
  if (K.values.size() != w.size()) throw std::invalid_argument("integrand and integrator must share the grid");
  check_pair(i1, i2, w.steps(), "degenerate interval");
  const Pairing P = build_pairing(increments(w.values(), i1, i2), w.dt(), alpha.alpha);
  Vector out = K.values[i1] * P.s;
  for (std::size_t l = 0; l < i2 - i1; ++l)
    out += (K.values[i1 + l + 1] - K.values[i1 + l]) * P.y.row(static_cast<Eigen::Index>(l)).transpose();
  return out;
}

Vector zaehle_integral_hilbert(const OperatorPath& K, const DiscretePath& w, const HolderParams& hp, std::size_t i1,
                               std::size_t i2) {
  const FractionalOrder a(hp.alpha);
  check_window(a, hp);
  return zaehle_integral_hilbert(K, w, a, i1, i2);
}

double zaehle_hilbert_norm_bound(const OperatorPath& K, const DiscretePath& w, FractionalOrder alpha, std::size_t i1,
                                 std::size_t i2) {
  if (K.dim() != w.dim()) throw std::invalid_argument("dimension mismatch between operator path and integrator");
  check_pair(i1, i2, w.steps(), "degenerate interval");
  const double al = alpha.alpha, h = w.dt();
  const double gl = std::tgamma(1.0 - al);
  const RowMatrix dz = increments(w.values(), i1, i2);
  const std::size_t N = i2 - i1;
  auto integrand = [&](std::size_t p, double g) {
    const double rho = (static_cast<double>(p) + g) * h;
    Matrix DL = K.values[i1] * (std::pow(rho, -al) / gl);
    const std::vector<double> lw = left_weights(p, g, h, al);
    for (std::size_t l = 0; l <= p; ++l) DL += lw[l] * (K.values[i1 + l + 1] - K.values[i1 + l]);
    return DL.norm() * right_at(dz, p, g, h, al).norm();
  };
  double total = 0.0;
  // First cell: substitute rho = h u^{1/(1-alpha)} to remove the endpoint singularity.
  const boost::math::quadrature::gauss<double, 20> gq;
  const double ex = 1.0 / (1.0 - al);
  total += gq.integrate(
      [&](double u) {
        if (u <= 0.0) return 0.0;
        const double g = std::pow(u, ex);
        return integrand(0, g) * h * ex * std::pow(u, ex - 1.0);
      },
      0.0, 1.0);
  for (std::size_t p = 1; p < N; ++p) total += 0.5 * h * (integrand(p, kGauss[0]) + integrand(p, kGauss[1]));
  return total;
}

DerivativeBoundReport semigroup_integrand_derivative_bound(const DiscretePath& u, const NonlinearityG& G,
                                                           const SpectralOperator& S, double t, std::size_t r,
                                                           FractionalOrder alpha, const HolderParams& hp) {
  if (r == 0 || r > u.steps()) throw std::invalid_argument("r must lie in (T1, t)");
  const double tr = u.time(r);
  if (!(t > tr)) throw std::invalid_argument("r must lie in (T1, t)");
  if (u.dim() != S.dim() || G.dim() != S.dim()) throw std::invalid_argument("dimension mismatch");
  std::vector<Matrix> K(r + 1);
  for (std::size_t k = 0; k <= r; ++k) K[k] = S.decay(t - u.time(k)).asDiagonal() * G(u.value(k));
  const OperatorPath KP(u.t0(), u.dt(), std::move(K));
  const double lhs = weyl_left_derivative(KP, alpha, 0, r).norm();
  const double x = tr - u.t0();
  const double norm = holder_norm(u, hp.beta, 0, u.steps());
  const double rhs = (1.0 + norm) * std::pow(x, -alpha.alpha) *
                     (1.0 + std::pow(x, hp.beta) + std::pow(x, hp.beta) / std::pow(t - tr, hp.beta));
  return {lhs, rhs, lhs / rhs};
}

double right_derivative_constant(FractionalOrder alpha, double beta_prime) {
  const double a = alpha.alpha;
  if (!(a + beta_prime > 1.0)) throw std::invalid_argument("right derivative bound needs alpha + beta' > 1");
  return (1.0 + (1.0 - a) / (a + beta_prime - 1.0)) / std::tgamma(a);
}

}  // namespace fbmrds

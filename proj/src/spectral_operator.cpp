#include "fbmrds/spectral_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace fbmrds {

SpectralOperator::SpectralOperator(Vector lambda) : lambda_(std::move(lambda)) {
  if (lambda_.size() == 0) throw std::invalid_argument("spectral operator needs at least one eigenvalue");
  for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
    if (!(lambda_[i] > 0.0) || !std::isfinite(lambda_[i])) throw std::invalid_argument("eigenvalues must be positive");
    if (i > 0 && lambda_[i] < lambda_[i - 1]) throw std::invalid_argument("eigenvalues must be non-decreasing");
  }
}

SpectralOperator SpectralOperator::squares(std::size_t n) {
  Vector l(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) l[static_cast<Eigen::Index>(i)] = static_cast<double>((i + 1) * (i + 1));
  return SpectralOperator(std::move(l));
}

Vector SpectralOperator::decay(double t) const {
  if (t < 0.0) throw std::invalid_argument("semigroup time must be non-negative");
  return (-t * lambda_.array()).exp().matrix();
}

Vector SpectralOperator::apply_semigroup(double t, const Vector& v) const {
  if (v.size() != lambda_.size()) throw std::invalid_argument("dimension mismatch in apply_semigroup");
  return decay(t).cwiseProduct(v);
}

double SpectralOperator::frac_power_norm(const Vector& v, double delta) const {
  if (delta < 0.0) throw std::invalid_argument("delta must be non-negative");
  if (v.size() != lambda_.size()) throw std::invalid_argument("dimension mismatch in frac_power_norm");
  if (delta == 0.0) return v.norm();
  return (lambda_.array().pow(delta) * v.array()).matrix().norm();
}

SmoothingReport verify_smoothing_estimates(const SpectralOperator& S, double gamma, double alpha_sp, double theta,
                                           double sigma, double mu, const std::vector<double>& t_grid, double eta) {
  if (gamma < alpha_sp) throw std::invalid_argument("smoothing estimate needs gamma >= alpha");
  if (theta < 0.0 || !(sigma > theta && sigma <= 1.0 + theta))
    throw std::invalid_argument("smoothing estimate needs theta >= 0 and sigma in (theta, 1 + theta]");
  if (!(mu > 0.0 && mu <= 1.0) || !(eta > 0.0 && eta <= 1.0))
    throw std::invalid_argument("difference exponents mu, eta must lie in (0, 1]");
  if (!(alpha_sp < gamma + mu)) throw std::invalid_argument("difference estimate needs alpha < gamma + mu");
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (t_grid[k] < 0.0) throw std::invalid_argument("t grid must be non-negative");
    if (k > 0 && t_grid[k] <= t_grid[k - 1]) throw std::invalid_argument("t grid must be strictly increasing");
  }
  const Eigen::ArrayXd lam = S.lambda().array();
  const double l1 = S.lambda1();
  SmoothingReport rep;
  rep.t = t_grid;
  for (double t : t_grid) {
    const Eigen::ArrayXd e = (-t * lam).exp();
    const double n1 = (lam.pow(gamma - alpha_sp) * e).maxCoeff();
    const double n2 = ((1.0 - e) / lam.pow(sigma - theta)).maxCoeff();
    rep.norm_eq1.push_back(n1);
    rep.norm_eq2.push_back(n2);
    if (t > 0.0) {
      rep.c_eq1 = std::max(rep.c_eq1, std::pow(t, gamma - alpha_sp) * std::exp(l1 * t) * n1);
      rep.c_eq2 = std::max(rep.c_eq2, n2 / std::pow(t, sigma - theta));
    }
  }
  const std::size_t K = t_grid.size();
  for (std::size_t iq = 0; iq < K; ++iq)
    for (std::size_t ir = iq + 1; ir < K; ++ir)
      for (std::size_t it = ir + 1; it < K; ++it) {
        const double q = t_grid[iq], r = t_grid[ir], t = t_grid[it];
        const double lhs = (lam.pow(gamma - alpha_sp) * ((-(t - r) * lam).exp() - (-(t - q) * lam).exp()).abs()).maxCoeff();
        const double rhs = std::pow(r - q, mu) * std::pow(t - r, -mu - gamma + alpha_sp);
        rep.c_diff = std::max(rep.c_diff, lhs / rhs);
        for (std::size_t is = ir + 1; is < it; ++is) {
          const double s = t_grid[is];
          const Eigen::ArrayXd v = (-(t - r) * lam).exp() - (-(s - r) * lam).exp() - (-(t - q) * lam).exp() +
                                   (-(s - q) * lam).exp();
          const double rhs2 = std::pow(t - s, mu) * std::pow(r - q, eta) * std::pow(s - r, -(mu + eta));
          rep.c_second_diff = std::max(rep.c_second_diff, v.abs().maxCoeff() / rhs2);
        }
      }
  rep.finite = std::isfinite(rep.c_eq1) && std::isfinite(rep.c_eq2) && std::isfinite(rep.c_diff) &&
               std::isfinite(rep.c_second_diff);
  return rep;
}

NonlinearityG::NonlinearityG(std::string kind, std::size_t n, Eval eval, Apply apply, double c_G, double c_DG,
                             double c_D2G, std::size_t samples)
    : kind_(std::move(kind)), n_(n), eval_(std::move(eval)), apply_(std::move(apply)), c_G_(c_G), c_DG_(c_DG),
      c_D2G_(c_D2G) {
  if (n_ == 0) throw std::invalid_argument("nonlinearity dimension must be positive");
  if (c_G < 0.0 || c_DG < 0.0 || c_D2G < 0.0) throw std::invalid_argument("nonlinearity constants must be >= 0");
  certify(samples);
}

void NonlinearityG::certify(std::size_t samples) {
  std::mt19937_64 gen(0x5eed6u + n_);
  std::normal_distribution<double> nd;
  const double scales[] = {1e-3, 0.1, 1.0, 10.0};
  const auto n = static_cast<Eigen::Index>(n_);
  auto draw = [&](double sc) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = sc * nd(gen);
    return v;
  };
  constexpr double slack = 1e-12;
  cert_ = {samples, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < samples; ++k) {
    const double sc = scales[k % 4];
    const Vector u1 = draw(sc), v1 = u1 + draw(sc * 0.5), u2 = u1 + draw(sc * 0.3), v2 = u2 + draw(sc * 0.5);
    const Matrix Gu1 = eval_(u1), Gv1 = eval_(v1), Gu2 = eval_(u2), Gv2 = eval_(v2);
    if (Gu1.rows() != n || Gu1.cols() != n) throw std::invalid_argument("nonlinearity returns wrong matrix size");
    const Vector probe = draw(1.0);
    if ((Gu1 * probe - apply_(u1, probe)).norm() > 1e-10 * (1.0 + Gu1.norm() * probe.norm()))
      throw std::invalid_argument("nonlinearity apply() disagrees with its matrix");

    auto ratio = [&](double lhs, double rhs) {
      if (rhs <= 0.0) return lhs > slack ? std::numeric_limits<double>::infinity() : 0.0;
      return lhs / rhs;
    };
    const double lip = ratio((Gu1 - Gv1).norm(), c_DG_ * (u1 - v1).norm());
    const double gro = ratio(Gu1.norm(), c_G_ + c_DG_ * u1.norm());
    const double sec = ratio((Gu1 - Gv1 - Gu2 + Gv2).norm(),
                             c_DG_ * (u1 - v1 - u2 + v2).norm() +
                                 c_D2G_ * (u1 - u2).norm() * ((u1 - v1).norm() + (u2 - v2).norm()));
    cert_.worst_lipschitz = std::max(cert_.worst_lipschitz, lip);
    cert_.worst_growth = std::max(cert_.worst_growth, gro);
    cert_.worst_second = std::max(cert_.worst_second, sec);
    if (lip > 1.0 + slack) throw std::invalid_argument("nonlinearity certification failed: Lipschitz bound c_DG");
    if (gro > 1.0 + slack) throw std::invalid_argument("nonlinearity certification failed: growth bound c_G");
    if (sec > 1.0 + slack) throw std::invalid_argument("nonlinearity certification failed: second-difference bound");
  }
}

NonlinearityG NonlinearityG::zero(std::size_t n) {
  const auto N = static_cast<Eigen::Index>(n);
  return NonlinearityG(
      "zero", n, [N](const Vector&) { return Matrix::Zero(N, N).eval(); },
      [N](const Vector&, const Vector&) { return Vector::Zero(N).eval(); }, 0.0, 0.0, 0.0);
}

NonlinearityG NonlinearityG::constant(const Matrix& K) {
  if (K.rows() != K.cols()) throw std::invalid_argument("constant nonlinearity must be square");
  const std::size_t n = static_cast<std::size_t>(K.rows());
  return NonlinearityG(
      "constant", n, [K](const Vector&) { return K; }, [K](const Vector&, const Vector& v) { return (K * v).eval(); },
      K.norm(), 0.0, 0.0);
}

NonlinearityG NonlinearityG::sine(std::size_t n, double amplitude, double phase, double g_decay, double d_decay) {
  if (n == 0) throw std::invalid_argument("nonlinearity dimension must be positive");
  if (amplitude < 0.0) throw std::invalid_argument("sine amplitude must be non-negative");
  const auto N = static_cast<Eigen::Index>(n);
  Vector g(N), d(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    g[i] = std::pow(static_cast<double>(i + 1), -g_decay);
    d[i] = std::pow(static_cast<double>(i + 1), -d_decay);
  }
  const double a = amplitude;
  auto eval = [g, d, a, phase](const Vector& u) {
    const Vector s = (a * (u.array() + phase).sin() * d.array()).matrix();
    return (g * s.transpose()).eval();
  };
  auto apply = [g, d, a, phase](const Vector& u, const Vector& v) {
    const double c = (a * (u.array() + phase).sin() * d.array() * v.array()).sum();
    return (c * g).eval();
  };
  const double lip = a * g.norm() * d.cwiseAbs().maxCoeff();
  return NonlinearityG("sine", n, eval, apply, a * std::abs(std::sin(phase)) * g.norm() * d.norm(), lip, lip);
}

}  // namespace fbmrds

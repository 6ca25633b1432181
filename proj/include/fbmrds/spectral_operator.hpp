#pragma once

#include "fbmrds/holder_paths.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fbmrds {

// Diagonal generator -A with eigenvalues lambda_i > 0 (non-decreasing), truncated to n modes.
class SpectralOperator {
 public:
  explicit SpectralOperator(Vector lambda);
  static SpectralOperator squares(std::size_t n);

  std::size_t dim() const { return static_cast<std::size_t>(lambda_.size()); }
  double lambda1() const { return lambda_[0]; }
  const Vector& lambda() const { return lambda_; }

  // e^{-lambda_i t}
  Vector decay(double t) const;
  Vector apply_semigroup(double t, const Vector& v) const;
  double frac_power_norm(const Vector& v, double delta) const;

 private:
  Vector lambda_;
};

inline Vector apply_semigroup(const SpectralOperator& S, double t, const Vector& v) { return S.apply_semigroup(t, v); }
inline double frac_power_norm(const SpectralOperator& S, const Vector& v, double delta) {
  return S.frac_power_norm(v, delta);
}

struct SmoothingReport {
  std::vector<double> t;
  std::vector<double> norm_eq1;  // |S(t)|_{L(V_alpha, V_gamma)}
  std::vector<double> norm_eq2;  // |S(t) - id|_{L(V_{sigma+mu}, V_{theta+mu})}
  double c_eq1 = 0.0;            // max_t t^{gamma-alpha} e^{lambda_1 t} norm_eq1
  double c_eq2 = 0.0;            // max_{t>0} norm_eq2 / t^{sigma-theta}
  double c_diff = 0.0;           // |S(t-r)-S(t-q)|_{L(V_alpha,V_gamma)} / ((r-q)^mu (t-r)^{-mu-gamma+alpha})
  double c_second_diff = 0.0;    // second difference in L(V) over (t-s)^mu (r-q)^eta (s-r)^{-(mu+eta)}
  bool finite = true;
};

// Diagonal operator norms are exact mode-wise sups. The difference estimates are fitted over ordered
// quadruples q < r < s < t drawn from t_grid.
SmoothingReport verify_smoothing_estimates(const SpectralOperator& S, double gamma, double alpha_sp, double theta,
                                           double sigma, double mu, const std::vector<double>& t_grid,
                                           double eta = 0.5);

// G: V -> Hilbert-Schmidt operators, with certified bounds
//   ||G(u) - G(v)||_HS <= c_DG |u - v|,  ||G(u)||_HS <= c_G + c_DG |u|,
//   ||G(u1) - G(v1) - G(u2) + G(v2)||_HS <= c_DG |u1 - v1 - u2 + v2| + c_D2G |u1 - u2| (|u1 - v1| + |u2 - v2|).
class NonlinearityG {
 public:
  using Eval = std::function<Matrix(const Vector&)>;
  using Apply = std::function<Vector(const Vector&, const Vector&)>;

  // Certifies the bounds on random samples; throws std::invalid_argument on any violation.
  NonlinearityG(std::string kind, std::size_t n, Eval eval, Apply apply, double c_G, double c_DG, double c_D2G,
                std::size_t samples = 1000);

  static NonlinearityG zero(std::size_t n);
  static NonlinearityG constant(const Matrix& K);
  // G_ij(u) = g_i * a sin(u_j + phase) * d_j with g_i = i^-g_decay, d_j = j^-d_decay.
  static NonlinearityG sine(std::size_t n, double amplitude, double phase, double g_decay = 1.0,
                            double d_decay = 1.0);

  Matrix operator()(const Vector& u) const { return eval_(u); }
  // G(u) v
  Vector apply(const Vector& u, const Vector& v) const { return apply_(u, v); }

  const std::string& kind() const { return kind_; }
  std::size_t dim() const { return n_; }
  bool is_zero() const { return kind_ == "zero"; }
  bool state_independent() const { return c_DG_ == 0.0; }
  double c_G() const { return c_G_; }
  double c_DG() const { return c_DG_; }
  double c_D2G() const { return c_D2G_; }

  struct Certificate {
    std::size_t samples;
    double worst_lipschitz;   // max ||G(u)-G(v)|| / (c_DG |u-v|)
    double worst_growth;      // max ||G(u)|| / (c_G + c_DG |u|)
    double worst_second;      // max of the four-point ratio
  };
  const Certificate& certificate() const { return cert_; }

 private:
  void certify(std::size_t samples);

  std::string kind_;
  std::size_t n_;
  Eval eval_;
  Apply apply_;
  double c_G_, c_DG_, c_D2G_;
  Certificate cert_{};
};

}  // namespace fbmrds

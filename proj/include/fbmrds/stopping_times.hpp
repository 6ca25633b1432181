#pragma once

#include "fbmrds/holder_paths.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbmrds {

class InsufficientHorizon : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoppingParams {
  double mu = 0.2;
  double beta_prime = 0.56;
  double beta_dprime = 0.7;
  double bisect_tol = 1e-8;

  void validate() const;
};

// T(theta_s w) = inf{tau > 0 : |||w|||_{beta', s, s+tau} + mu tau^{1-beta'} >= mu}, seminorm of the
// piecewise-linear interpolant. Result in (0, 1]. Throws "insufficient horizon" when the path ends first.
double forward_stopping_time(const DiscretePath& w, const StoppingParams& sp, double origin = 0.0);
// T^(theta_s w) = sup{tau < 0 : |||w|||_{beta', s+tau, s} + mu |tau|^{1-beta'} >= mu}. Result in [-1, 0).
double backward_stopping_time(const DiscretePath& w, const StoppingParams& sp, double origin = 0.0);

// g(tau) = |||w|||_{beta', s, s+dir*tau} + mu tau^{1-beta'} - mu; dir = +1 forward, -1 backward.
double stopping_objective(const DiscretePath& w, const StoppingParams& sp, double origin, int dir, double tau);

// T_i(theta_origin w) for i in [i_min, i_max]. Absolute times are accumulated step by step from the origin.
struct StoppingSequence {
  double origin = 0.0;
  int i_min = 0, i_max = 0;                   // reached range
  int requested_min = 0, requested_max = 0;
  bool truncated = false;
  std::vector<double> absolute;               // origin + T_i, index i - i_min

  double at(int i) const;                     // T_i relative to the origin
  double abs_at(int i) const;                 // origin + T_i
  bool contains(int i) const { return i >= i_min && i <= i_max; }
  // Largest i with abs_at(i) <= t (t inside the covered range).
  int index_at_or_before(double t) const;
};

StoppingSequence stopping_sequence(const DiscretePath& w, const StoppingParams& sp, int i_min, int i_max,
                                   double origin = 0.0);

struct OrderCheck {
  bool holds = true;           // t1 + T^(theta_t1 w) <= t2 + T^(theta_t2 w) within tolerance
  bool chain_checked = false;  // the interleaving chain applies (t2 + T^(theta_t2 w) <= t1)
  bool chain_holds = true;
  double lhs = 0.0, rhs = 0.0;
};
// Order property for t1 <= t2; when the chain applies, `levels` backward iterates are compared.
OrderCheck order_property_check(const DiscretePath& w, const StoppingParams& sp, double t1, double t2,
                                int levels = 3);

struct CountingReport {
  int N = 0;             // number of k >= 1 with T_{-k} >= -1
  double seminorm = 0.0; // |||w|||_{beta'', -1, 0}
  double bound = 0.0;    // ((seminorm + mu) / mu)^{1/(beta'' - beta')}
  bool holds = false;
};
CountingReport counting_bound_check(const DiscretePath& w, const StoppingParams& sp);

struct GrowthReport {
  double d_inverse_mc = 0.0;   // Monte Carlo mean of ((sup_r |||theta_r w|||_{beta'',-1,0} + mu)/mu)^{1/(beta''-beta')}
  double d_mc = 0.0;           // 1 / d_inverse_mc
  double d_proxy = 0.0;        // ensemble mean of min_{window} |T_k| / |k|
  double d_hat = 0.0;          // ensemble mean of window max of |T_k| / |k|
  double d_check = 0.0;        // ensemble mean of window min of |T_k| / |k| (same as d_proxy)
  double mean_step = 0.0;      // mean backward step length
  double subexp_slope = 0.0;   // regression slope of log+(|T(theta_{T_i} w)|^-beta) against |i|
  double subexp_slope_se = 0.0;
  double k1 = 0.0;
  bool mu_condition = false;           // 1 < -(2/lambda1) log k1
  bool smallness_mc = false, smallness_proxy = false;   // 1 > liminf >= d >= 2(log(1+k1)+nu)/lambda1 and nu < d lambda1 / 2
  bool growth_mc = false, growth_proxy = false;   // nu + d > 1
  int window = 0;
  std::size_t paths = 0;
};

struct GrowthSettings {
  double nu = 0.0;
  double lambda1 = 1.0;
  double c = 1.0;
  double beta = 0.52;
  int window = 32;             // backward indices used: -window .. -1; the proxy uses the second half
};

// Paths must cover [-(window + 1), 1] at least.
GrowthReport growth_rate_estimate(std::span<const DiscretePath> ensemble, const StoppingParams& sp,
                                  const GrowthSettings& gs);

// Flags for the smallness conditions at a given d.
bool smallness_holds(double d, double liminf, double k1, double nu, double lambda1);
bool mu_condition_holds(double k1, double lambda1);

}  // namespace fbmrds

#pragma once

#include "fbmrds/holder_paths.hpp"
#include "fbmrds/mild_solver.hpp"
#include "fbmrds/spectral_operator.hpp"
#include "fbmrds/stopping_times.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fbmrds {

using FiniteSet = std::vector<Vector>;

struct AbsorbConstants {
  double c = 1.0;
  double mu = 0.2;
  double nu = 0.0;
  double d = 1.0;
  double lambda1 = 1.0;
  double k0 = 0.0, k1 = 0.0, k2 = 0.0;
  bool mu_condition = false, smallness = false, growth_condition = false;

  // k0 = c/(1-c mu), k1 = k2 = c mu/(1-c mu); throws when c mu >= 1.
  static AbsorbConstants make(double c, double mu, double nu, double d, double lambda1);
  // Decay factor of the absorbing series, (1 + k1) e^{-lambda1 d / 2}.
  double series_ratio() const;
};

// mu with -(2/lambda1) log k1(mu) = target (target > 1 gives the margin).
double mu_for_margin(double c, double lambda1, double target = 1.25);
// (value - 1) / value for value = -(2/lambda1) log k1; negative when the condition fails.
double mu_condition_margin(double k1, double lambda1);

enum class CocycleMode { Composed, Single };

// Discrete cocycle over the stopping times of one path. T_i(theta_{T_j} w) = T_{i+j}(w) - T_j(w), so
// Phi(i, j, w, u0) is the solution on [T_j, T_{i+j}] driven by the increments of w there.
class CocycleSystem {
 public:
  CocycleSystem(DiscretePath w, SpectralOperator S, NonlinearityG G, HolderParams hp, StoppingParams sp,
                SolverConfig cfg, int i_min, int i_max);

  const StoppingSequence& sequence() const { return seq_; }
  const DiscretePath& path() const { return w_; }
  const SpectralOperator& op() const { return S_; }
  const NonlinearityG& nonlinearity() const { return G_; }
  const HolderParams& holder() const { return hp_; }
  const StoppingParams& stopping() const { return sp_; }
  const SolverConfig& solver() const { return cfg_; }

  Vector phi(int i, int j, const Vector& u0, CocycleMode mode = CocycleMode::Composed) const;
  // One solve on [T_j, T_{i+j}] with the intermediate stopping times as nodes.
  SolutionRecord trajectory(int i, int j, const Vector& u0) const;
  // Solution on the real window [a, b] with extra breakpoints.
  SolutionRecord solve_window(double a, double b, const Vector& u0, const std::vector<double>& breakpoints = {}) const;

 private:
  void check_range(int lo, int hi) const;

  DiscretePath w_;
  SpectralOperator S_;
  NonlinearityG G_;
  HolderParams hp_;
  StoppingParams sp_;
  SolverConfig cfg_;
  StoppingSequence seq_;
};

struct AprioriReport {
  std::vector<double> lhs;       // |Phi(i, j, w, u0)|, i = 1..I
  std::vector<double> rhs;       // bound with the instance constants
  bool holds = true;
  double worst_ratio = 0.0;      // max lhs / rhs
  std::vector<double> c_ratio;   // per-interval ||u||_beta / (unit-constant RHS of the interval estimate)
  double fitted_c = 0.0;         // max of c_ratio
};

// Per-interval ratios of the a priori interval estimate for a trajectory over the stopping times `stops`
// (absolute, stops[0] = start). The trajectory nodes must contain every stopping time.
std::vector<double> interval_estimate_ratios(const NodalPath& u, const std::vector<double>& stops, double u0_vbeta,
                                             double lambda1, double beta, double mu);

AprioriReport apriori_bound_check(const CocycleSystem& sys, int i_count, int j, const Vector& u0,
                                  const AbsorbConstants& k);

struct AbsorbingRadius {
  double value = 0.0;        // truncated sum plus tail bound
  double truncated = 0.0;    // sum over the computed terms
  double tail_bound = 0.0;   // geometric bound on the omitted terms
  int terms = 0;             // number of terms summed (m = 0 .. -(terms-1))
};

// R(i, w) = 2 sum_{m<=0} 2 k2 (1+k1)^{-m} e^{(lambda1/2) T_m(theta_{T_{i-1}} w)}, summing m = 0..-tail_terms
// where available and bounding the rest with steps >= k.d.
AbsorbingRadius absorbing_radius(const StoppingSequence& seq, const AbsorbConstants& k, int i, int tail_terms = 64);

// max_{x in X} min_{y in Y} |x - y|
double hausdorff_semidist(const FiniteSet& X, const FiniteSet& Y);
double diameter(const FiniteSet& X);

// Uniform samples in the ball of radius r; member k uses its own Gaussian stream.
FiniteSet sample_ball(std::size_t n, std::size_t count, double r, std::uint64_t seed);

struct PullbackDepth {
  int depth = 0;
  double T = 0.0;                 // T_{-depth}
  double ball_radius = 0.0;
  FiniteSet cloud;
  double diameter = 0.0;
  double max_norm = 0.0;
  double semidist_prev = -1.0;    // dist(cloud(depth), cloud(previous depth)); -1 for the first depth
  double invariance = -1.0;       // dist(Phi(1, 0, cloud), pullback cloud ending at T_1); -1 when not computed
};

struct PullbackSettings {
  std::vector<int> depths{4, 8, 16, 32};
  std::size_t ensemble = 64;
  std::uint64_t seed = 1;
  double fallback_radius = 2.0;
  int tail_terms = 64;
  bool invariance_probe = false;
};

struct PullbackReport {
  std::vector<PullbackDepth> depths;
  std::string radius_source;       // "absorbing" or "fallback"
  double series_ratio = 0.0;
  double decay_rate = 0.0;         // fitted -d log(diameter) / d|T|
  bool semidist_nonincreasing = false;  // from the second depth on
};

PullbackReport pullback_attractor_estimate(const CocycleSystem& sys, const AbsorbConstants& k,
                                           const PullbackSettings& ps);

struct TemperednessReport {
  double slope = 0.0;
  double slope_se = 0.0;
  double nu = 0.0;
  bool exp_growing = false;   // slope < nu
  bool tempered = false;      // slope within two standard errors of 0
};
// Regression of log+ r against |t|.
TemperednessReport temperedness_check(const std::vector<double>& t, const std::vector<double>& r, double nu);

struct SweepBoundReport {
  double sup = 0.0;       // sup over start times of |phi(s, theta_{-s} theta_{T_i} w, u0)|
  double u0_norm = 0.0;
  double rhs = 0.0;       // c|u0| + c mu (1 + c|u0|/(1-c mu) + c mu/(1-c mu))
  bool holds = false;
  double fitted_c = 0.0;  // smallest c with sup <= rhs(c)
  std::size_t starts = 0;
};

SweepBoundReport continuous_time_sweep_bound(const CocycleSystem& sys, int i, const Vector& u0, double c);
double sweep_rhs(double c, double mu, double u0_norm);

// Largest interval-estimate ratio over i_count stopping intervals from index j.
double calibrate_interval_constant(const CocycleSystem& sys, int i_count, int j, const Vector& u0);

}  // namespace fbmrds

#include "fbmrds/attractor.hpp"

#include "fbmrds/fbm_gen.hpp"
#include "fbmrds/gronwall.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fbmrds {

AbsorbConstants AbsorbConstants::make(double c, double mu, double nu, double d, double lambda1) {
  if (!(c > 0.0) || !(mu > 0.0)) throw std::invalid_argument("absorbing constants need c > 0 and mu > 0");
  if (!(c * mu < 1.0)) throw std::invalid_argument("absorbing constants need c mu < 1");
  if (!(lambda1 > 0.0)) throw std::invalid_argument("lambda1 must be positive");
  AbsorbConstants k;
  k.c = c;
  k.mu = mu;
  k.nu = nu;
  k.d = d;
  k.lambda1 = lambda1;
  k.k0 = c / (1.0 - c * mu);
  k.k1 = k.k2 = c * mu / (1.0 - c * mu);
  k.mu_condition = mu_condition_holds(k.k1, lambda1);
  k.smallness = smallness_holds(d, d, k.k1, nu, lambda1);
  k.growth_condition = nu + d > 1.0;
  return k;
}

double AbsorbConstants::series_ratio() const { return (1.0 + k1) * std::exp(-0.5 * lambda1 * d); }

double mu_for_margin(double c, double lambda1, double target) {
  const double k1 = std::exp(-0.5 * target * lambda1);
  return k1 / ((1.0 + k1) * c);
}

double mu_condition_margin(double k1, double lambda1) {
  const double v = -(2.0 / lambda1) * std::log(k1);
  if (!(v > 1.0)) return v - 1.0;  // k1 >= 1 makes v <= 0, where (v - 1) / v would turn positive
  return (v - 1.0) / v;
}

CocycleSystem::CocycleSystem(DiscretePath w, SpectralOperator S, NonlinearityG G, HolderParams hp, StoppingParams sp,
                             SolverConfig cfg, int i_min, int i_max)
    : w_(std::move(w)), S_(std::move(S)), G_(std::move(G)), hp_(hp), sp_(sp), cfg_(cfg) {
  if (w_.dim() != S_.dim() || G_.dim() != S_.dim())
    throw std::invalid_argument("path, operator and nonlinearity dimensions differ");
  hp_.validate();
  cfg_.validate();
  seq_ = stopping_sequence(w_, sp_, i_min, i_max, 0.0);
}

void CocycleSystem::check_range(int lo, int hi) const {
  if (!seq_.contains(lo) || !seq_.contains(hi))
    throw std::out_of_range("stopping sequence does not cover indices " + std::to_string(lo) + ".." +
                            std::to_string(hi));
}

SolutionRecord CocycleSystem::solve_window(double a, double b, const Vector& u0,
                                           const std::vector<double>& breakpoints) const {
  const std::vector<double> nodes = window_nodes(w_, a, b, breakpoints);
  return solve_mild_nodes(u0, nodes, sample_nodes(w_, nodes), S_, G_, hp_, cfg_);
}

Vector CocycleSystem::phi(int i, int j, const Vector& u0, CocycleMode mode) const {
  if (i < 0) throw std::invalid_argument("cocycle index i must be non-negative");
  check_range(j, i + j);
  if (i == 0) return u0;
  if (mode == CocycleMode::Single) return trajectory(i, j, u0).final_value();
  Vector u = u0;
  for (int k = j; k < i + j; ++k) u = solve_window(seq_.abs_at(k), seq_.abs_at(k + 1), u).final_value();
  return u;
}

SolutionRecord CocycleSystem::trajectory(int i, int j, const Vector& u0) const {
  if (i < 1) throw std::invalid_argument("trajectory needs at least one stopping interval");
  check_range(j, i + j);
  std::vector<double> bps;
  for (int k = j + 1; k < i + j; ++k) bps.push_back(seq_.abs_at(k));
  return solve_window(seq_.abs_at(j), seq_.abs_at(i + j), u0, bps);
}

namespace {

std::size_t node_index(const NodalPath& u, double t) {
  auto it = std::lower_bound(u.t.begin(), u.t.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
  if (it == u.t.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw std::invalid_argument("stopping time is not a node of the trajectory");
  return static_cast<std::size_t>(it - u.t.begin());
}

NodalPath nodal_slice(const NodalPath& u, std::size_t a, std::size_t b) {
  NodalPath s;
  s.t.assign(u.t.begin() + static_cast<std::ptrdiff_t>(a), u.t.begin() + static_cast<std::ptrdiff_t>(b) + 1);
  s.values = u.values.middleRows(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b - a + 1));
  return s;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y, double* se) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  const double b = sxx > 0.0 ? sxy / sxx : 0.0;
  if (se) {
    double sse = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double e = y[k] - my - b * (x[k] - mx);
      sse += e * e;
    }
    *se = (n > 2.0 && sxx > 0.0) ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
  }
  return b;
}

}  // namespace

std::vector<double> interval_estimate_ratios(const NodalPath& u, const std::vector<double>& stops, double u0_vbeta,
                                             double lambda1, double beta, double mu) {
  if (stops.size() < 2) throw std::invalid_argument("need at least one stopping interval");
  const std::size_t I = stops.size() - 1;
  std::vector<double> N(I + 1, 0.0), ratio;
  for (std::size_t i = 1; i <= I; ++i) {
    N[i] = holder_norm(nodal_slice(u, node_index(u, stops[i - 1]), node_index(u, stops[i])), beta);
    const double A = std::exp(-lambda1 * (stops[i - 1] - stops[0])) * u0_vbeta;
    double past = 0.0, decay = 0.0;
    for (std::size_t m = 1; m + 1 <= i; ++m) {
      const double e = std::exp(-lambda1 * (stops[i - 1] - stops[m]));
      past += e * N[m];
      decay += e;
    }
    const double B = mu * (N[i] + past + decay + 1.0);
    ratio.push_back(N[i] / (A + B));
  }
  return ratio;
}

AprioriReport apriori_bound_check(const CocycleSystem& sys, int i_count, int j, const Vector& u0,
                                  const AbsorbConstants& k) {
  const SolutionRecord traj = sys.trajectory(i_count, j, u0);
  const StoppingSequence& seq = sys.sequence();
  std::vector<double> stops;
  for (int i = 0; i <= i_count; ++i) stops.push_back(seq.abs_at(j + i));
  const double vb = sys.op().frac_power_norm(u0, sys.holder().beta);

  AprioriReport rep;
  for (int i = 1; i <= i_count; ++i) rep.lhs.push_back(traj.u.value(node_index(traj.u, stops[static_cast<std::size_t>(i)])).norm());

  GronwallInstance g;
  g.lambda = k.lambda1;
  g.v0 = vb;
  g.k0 = k.k0;
  g.k1 = k.k1;
  g.k2 = k.k2;
  for (int i = 0; i < i_count; ++i) g.t.push_back(stops[static_cast<std::size_t>(i)] - stops[0]);
  try {
    rep.rhs = gronwall_bound(g, static_cast<std::size_t>(i_count));
    for (std::size_t i = 0; i < rep.lhs.size(); ++i) {
      rep.worst_ratio = std::max(rep.worst_ratio, rep.lhs[i] / rep.rhs[i]);
      rep.holds = rep.holds && leq_ulps(rep.lhs[i], rep.rhs[i]);
    }
  } catch (const std::invalid_argument&) {
    rep.holds = false;
    rep.worst_ratio = std::numeric_limits<double>::infinity();
  }
  rep.c_ratio = interval_estimate_ratios(traj.u, stops, vb, k.lambda1, sys.holder().beta, sys.stopping().mu);
  rep.fitted_c = *std::max_element(rep.c_ratio.begin(), rep.c_ratio.end());
  return rep;
}

double calibrate_interval_constant(const CocycleSystem& sys, int i_count, int j, const Vector& u0) {
  const SolutionRecord traj = sys.trajectory(i_count, j, u0);
  std::vector<double> stops;
  for (int i = 0; i <= i_count; ++i) stops.push_back(sys.sequence().abs_at(j + i));
  const auto r = interval_estimate_ratios(traj.u, stops, sys.op().frac_power_norm(u0, sys.holder().beta),
                                          sys.op().lambda1(), sys.holder().beta, sys.stopping().mu);
  return *std::max_element(r.begin(), r.end());
}

AbsorbingRadius absorbing_radius(const StoppingSequence& seq, const AbsorbConstants& k, int i, int tail_terms) {
  if (tail_terms < 0) throw std::invalid_argument("tail_terms must be non-negative");
  const double x = k.series_ratio();
  if (!(x < 1.0)) throw std::domain_error("absorbing series diverges under estimated d");
  const int b = i - 1;
  if (!seq.contains(b)) throw std::out_of_range("stopping sequence does not contain index i - 1");
  const int m_last = std::max(-tail_terms, seq.i_min - b);
  AbsorbingRadius R;
  const double base = seq.abs_at(b);
  double term = 0.0;
  for (int m = 0; m >= m_last; --m) {
    term = 4.0 * k.k2 * std::pow(1.0 + k.k1, -m) * std::exp(0.5 * k.lambda1 * (seq.abs_at(b + m) - base));
    R.truncated += term;
    ++R.terms;
  }
  R.tail_bound = term * x / (1.0 - x);
  R.value = R.truncated + R.tail_bound;
  return R;
}

double hausdorff_semidist(const FiniteSet& X, const FiniteSet& Y) {
  if (X.empty() || Y.empty()) throw std::invalid_argument("semidistance of an empty set");
  double worst = 0.0;
  for (const Vector& x : X) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& y : Y) best = std::min(best, (x - y).squaredNorm());
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

double diameter(const FiniteSet& X) {
  double d = 0.0;
  for (std::size_t a = 0; a < X.size(); ++a)
    for (std::size_t b = a + 1; b < X.size(); ++b) d = std::max(d, (X[a] - X[b]).squaredNorm());
  return std::sqrt(d);
}

FiniteSet sample_ball(std::size_t n, std::size_t count, double r, std::uint64_t seed) {
  FiniteSet out;
  for (std::size_t k = 0; k < count; ++k) {
    const GaussianStream gs(seed, static_cast<std::uint32_t>(k), kPurposeInitial);
    Vector z(static_cast<Eigen::Index>(n));
    gs.fill_normal(z.data(), n);
    const double rad = r * std::pow(gs.uniform(n), 1.0 / static_cast<double>(n));
    out.push_back(z * (rad / z.norm()));
  }
  return out;
}

PullbackReport pullback_attractor_estimate(const CocycleSystem& sys, const AbsorbConstants& k,
                                           const PullbackSettings& ps) {
  if (ps.depths.empty() || ps.ensemble == 0) throw std::invalid_argument("pullback needs depths and an ensemble");
  std::vector<int> depths = ps.depths;
  std::sort(depths.begin(), depths.end());
  if (depths.front() < 1) throw std::invalid_argument("pullback depths must be positive");

  PullbackReport rep;
  rep.series_ratio = k.series_ratio();
  const bool absorbing = k.k2 > 0.0 && rep.series_ratio < 1.0;
  rep.radius_source = absorbing ? "absorbing" : "fallback";
  const std::size_t n = sys.op().dim();
  const FiniteSet unit = sample_ball(n, ps.ensemble, 1.0, ps.seed);

  for (int depth : depths) {
    PullbackDepth pd;
    pd.depth = depth;
    pd.T = sys.sequence().abs_at(-depth);
    pd.ball_radius = absorbing ? absorbing_radius(sys.sequence(), k, -depth, ps.tail_terms).value : ps.fallback_radius;
    for (const Vector& e : unit) pd.cloud.push_back(sys.phi(depth, -depth, pd.ball_radius * e));
    pd.diameter = diameter(pd.cloud);
    for (const Vector& x : pd.cloud) pd.max_norm = std::max(pd.max_norm, x.norm());
    if (!rep.depths.empty()) pd.semidist_prev = hausdorff_semidist(pd.cloud, rep.depths.back().cloud);
    if (ps.invariance_probe) {
      FiniteSet pushed, shifted;
      for (const Vector& x : pd.cloud) pushed.push_back(sys.phi(1, 0, x));
      const double r1 = absorbing ? absorbing_radius(sys.sequence(), k, 1 - depth, ps.tail_terms).value : ps.fallback_radius;
      for (const Vector& e : unit) shifted.push_back(sys.phi(depth, 1 - depth, r1 * e));
      pd.invariance = hausdorff_semidist(pushed, shifted);
    }
    rep.depths.push_back(std::move(pd));
  }

  std::vector<double> x, y;
  for (const auto& pd : rep.depths)
    if (pd.diameter > 0.0) {
      x.push_back(std::abs(pd.T));
      y.push_back(std::log(pd.diameter));
    }
  rep.decay_rate = x.size() >= 2 ? -ols_slope(x, y, nullptr) : 0.0;
  rep.semidist_nonincreasing = true;
  for (std::size_t q = 2; q < rep.depths.size(); ++q)
    rep.semidist_nonincreasing = rep.semidist_nonincreasing && rep.depths[q].semidist_prev <= rep.depths[q - 1].semidist_prev;
  return rep;
}

TemperednessReport temperedness_check(const std::vector<double>& t, const std::vector<double>& r, double nu) {
  if (t.size() != r.size() || t.size() < 2) throw std::invalid_argument("temperedness check needs matching samples");
  std::vector<double> x, y;
  for (std::size_t k = 0; k < t.size(); ++k) {
    x.push_back(std::abs(t[k]));
    y.push_back(r[k] > 1.0 ? std::log(r[k]) : 0.0);
  }
  TemperednessReport rep;
  rep.nu = nu;
  rep.slope = ols_slope(x, y, &rep.slope_se);
  rep.exp_growing = rep.slope < nu;
  rep.tempered = std::abs(rep.slope) <= 2.0 * rep.slope_se + 1e-12;
  return rep;
}

double sweep_rhs(double c, double mu, double u0_norm) {
  const double q = 1.0 - c * mu;
  return c * u0_norm + c * mu * (1.0 + c * u0_norm / q + c * mu / q);
}

SweepBoundReport continuous_time_sweep_bound(const CocycleSystem& sys, int i, const Vector& u0, double c) {
  const StoppingSequence& seq = sys.sequence();
  if (!seq.contains(i) || !seq.contains(i - 1)) throw std::out_of_range("stopping sequence does not cover interval i");
  const double a = seq.abs_at(i - 1), b = seq.abs_at(i);
  const DiscretePath& w = sys.path();
  std::vector<double> starts{a};
  for (std::size_t g = 0; g <= w.steps(); ++g) {
    const double t = w.time(g);
    if (t > a + 1e-6 * w.dt() && t < b - 1e-6 * w.dt()) starts.push_back(t);
  }
  SweepBoundReport rep;
  rep.u0_norm = u0.norm();
  rep.sup = rep.u0_norm;  // s = 0
  for (double s : starts) rep.sup = std::max(rep.sup, sys.solve_window(s, b, u0).final_value().norm());
  rep.starts = starts.size() + 1;
  const double mu = sys.stopping().mu;
  rep.rhs = c * mu < 1.0 ? sweep_rhs(c, mu, rep.u0_norm) : std::numeric_limits<double>::infinity();
  rep.holds = rep.sup <= rep.rhs * (1.0 + 1e-12);
  double lo = 0.0, hi = (1.0 - 1e-12) / mu;
  if (sweep_rhs(hi, mu, rep.u0_norm) < rep.sup) {
    rep.fitted_c = std::numeric_limits<double>::infinity();
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (sweep_rhs(mid, mu, rep.u0_norm) >= rep.sup ? hi : lo) = mid;
    }
    rep.fitted_c = hi;
  }
  return rep;
}

}  // namespace fbmrds

#include "fbmrds/stopping_times.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fbmrds {

void StoppingParams::validate() const {
  if (!(mu > 0.0)) throw std::invalid_argument("stopping parameter mu must be positive");
  if (!(beta_prime > 0.0 && beta_prime < 1.0)) throw std::invalid_argument("beta_prime must lie in (0, 1)");
  if (!(beta_dprime > beta_prime && beta_dprime < 1.0))
    throw std::invalid_argument("beta_dprime must lie in (beta_prime, 1)");
  if (!(bisect_tol > 0.0)) throw std::invalid_argument("bisect_tol must be positive");
}

namespace {

// Root of g along one direction from s. The seminorm of the interpolant on [s, s + dir*tau] is the max over
// pairs from {s, grid points strictly inside, endpoint}; it is built incrementally node by node.
class Scanner {
 public:
  Scanner(const DiscretePath& w, const StoppingParams& sp, double s, int dir) : w_(w), sp_(sp), s_(s), dir_(dir) {
    sp.validate();
    const double eps = 1e-12 * std::max(1.0, std::abs(s));
    if (s < w.t0() - eps || s > w.t_end() + eps) throw InsufficientHorizon("insufficient horizon: origin outside path");
    avail_ = dir > 0 ? w.t_end() - s : s - w.t0();
    dist_.push_back(0.0);
    vals_.push_back(w.value_at(std::clamp(s, w.t0(), w.t_end())));
  }

  double root() {
    const double mu = sp_.mu, bp = sp_.beta_prime;
    const double cap = std::min(1.0, avail_);
    const double node_eps = 1e-12 * w_.dt();
    // Nodes beyond s in the scan direction.
    const double x = (s_ - w_.t0()) / w_.dt();
    auto k = dir_ > 0 ? static_cast<std::ptrdiff_t>(std::floor(x)) + 1 : static_cast<std::ptrdiff_t>(std::ceil(x)) - 1;
    double lo = 0.0, glo = -mu, hi = -1.0, ghi = 0.0;
    while (k >= 0 && k <= static_cast<std::ptrdiff_t>(w_.steps())) {
      const double d = dir_ * (w_.time(static_cast<std::size_t>(k)) - s_);
      if (d > cap) break;
      if (d > node_eps) {
        const Vector v = w_.value(static_cast<std::size_t>(k));
        const double sm = std::max(sem_, new_pairs(v, d));
        const double g = sm + mu * std::pow(d, 1.0 - bp) - mu;
        guard(glo, g);
        if (g >= 0.0) {
          hi = d;
          ghi = g;
          break;
        }
        sem_ = sm;
        dist_.push_back(d);
        vals_.push_back(v);
        lo = d;
        glo = g;
      }
      k += dir_;
    }
    if (hi < 0.0) {
      if (cap <= lo) throw InsufficientHorizon("insufficient horizon");
      const double g = eval(cap);
      guard(glo, g);
      if (g < 0.0) throw InsufficientHorizon("insufficient horizon");
      hi = cap;
      ghi = g;
    }
    const double stop = sp_.bisect_tol * 1e-6;
    while (hi - lo > stop) {
      const double mid = lo + 0.5 * (hi - lo);
      if (!(mid > lo && mid < hi)) break;
      const double g = eval(mid);
      guard(glo, g);
      guard(g, ghi);
      if (g >= 0.0) {
        hi = mid;
        ghi = g;
      } else {
        lo = mid;
        glo = g;
      }
    }
    return hi;
  }

 private:
  double new_pairs(const Vector& v, double d) const {
    double best2 = 0.0;
    for (std::size_t p = 0; p < dist_.size(); ++p)
      best2 = std::max(best2, (v - vals_[p]).squaredNorm() * std::pow(d - dist_[p], -2.0 * sp_.beta_prime));
    return std::sqrt(best2);
  }

  // g at a distance inside the cell after the last accepted point.
  double eval(double d) const {
    const Vector v = w_.value_at(s_ + dir_ * d);
    return std::max(sem_, new_pairs(v, d)) + sp_.mu * std::pow(d, 1.0 - sp_.beta_prime) - sp_.mu;
  }

  // g must be non-decreasing along the scan; larger inversions than rounding noise are errors.
  void guard(double g_before, double g_after) const {
    const double noise = 1e-12 * (sp_.mu + sem_ + std::abs(g_before) + std::abs(g_after));
    if (g_after < g_before - noise) {
      std::ostringstream os;
      os << "stopping objective not monotone near origin " << s_ << " (" << g_before << " > " << g_after << ")";
      throw std::runtime_error(os.str());
    }
  }

  const DiscretePath& w_;
  const StoppingParams& sp_;
  double s_;
  int dir_;
  double avail_ = 0.0;
  double sem_ = 0.0;
  std::vector<double> dist_;
  std::vector<Vector> vals_;
};

}  // namespace

double forward_stopping_time(const DiscretePath& w, const StoppingParams& sp, double origin) {
  return Scanner(w, sp, origin, +1).root();
}

double backward_stopping_time(const DiscretePath& w, const StoppingParams& sp, double origin) {
  return -Scanner(w, sp, origin, -1).root();
}

double stopping_objective(const DiscretePath& w, const StoppingParams& sp, double origin, int dir, double tau) {
  sp.validate();
  if (!(tau > 0.0)) return -sp.mu;
  const double a = dir > 0 ? origin : origin - tau;
  const double b = dir > 0 ? origin + tau : origin;
  return interpolant_seminorm(w, sp.beta_prime, a, b) + sp.mu * std::pow(tau, 1.0 - sp.beta_prime) - sp.mu;
}

double StoppingSequence::at(int i) const { return abs_at(i) - origin; }

double StoppingSequence::abs_at(int i) const {
  if (!contains(i)) throw std::out_of_range("stopping index " + std::to_string(i) + " outside computed range");
  return absolute[static_cast<std::size_t>(i - i_min)];
}

int StoppingSequence::index_at_or_before(double t) const {
  auto it = std::upper_bound(absolute.begin(), absolute.end(), t);
  if (it == absolute.begin()) throw std::out_of_range("time before the first stopping time");
  return i_min + static_cast<int>(it - absolute.begin()) - 1;
}

StoppingSequence stopping_sequence(const DiscretePath& w, const StoppingParams& sp, int i_min, int i_max,
                                   double origin) {
  if (i_min > 0 || i_max < 0) throw std::invalid_argument("stopping index range must contain 0");
  sp.validate();
  StoppingSequence seq;
  seq.origin = origin;
  seq.requested_min = i_min;
  seq.requested_max = i_max;
  std::vector<double> fwd{origin}, bwd;
  for (int k = 1; k <= i_max; ++k) {
    try {
      fwd.push_back(fwd.back() + forward_stopping_time(w, sp, fwd.back()));
    } catch (const InsufficientHorizon&) {
      seq.truncated = true;
      break;
    }
  }
  double a = origin;
  for (int k = -1; k >= i_min; --k) {
    try {
      a = a + backward_stopping_time(w, sp, a);
      bwd.push_back(a);
    } catch (const InsufficientHorizon&) {
      seq.truncated = true;
      break;
    }
  }
  seq.i_max = static_cast<int>(fwd.size()) - 1;
  seq.i_min = -static_cast<int>(bwd.size());
  seq.absolute.assign(bwd.rbegin(), bwd.rend());
  seq.absolute.insert(seq.absolute.end(), fwd.begin(), fwd.end());
  return seq;
}

OrderCheck order_property_check(const DiscretePath& w, const StoppingParams& sp, double t1, double t2, int levels) {
  if (t1 > t2) throw std::invalid_argument("order check needs t1 <= t2");
  const double tol = 2.0 * sp.bisect_tol;
  OrderCheck rep;
  double a = t1 + backward_stopping_time(w, sp, t1);
  double b = t2 + backward_stopping_time(w, sp, t2);
  rep.lhs = a;
  rep.rhs = b;
  rep.holds = a <= b + tol;
  if (b <= t1 + tol) {
    rep.chain_checked = true;
    // a_k <= b_k <= a_{k-1} <= b_{k-1} for the backward iterates started at t1 and t2.
    rep.chain_holds = a <= b + tol && b <= t1 + tol;
    for (int l = 0; l < levels; ++l) {
      double a2, b2;
      try {
        a2 = a + backward_stopping_time(w, sp, a);
        b2 = b + backward_stopping_time(w, sp, b);
      } catch (const InsufficientHorizon&) {
        break;
      }
      rep.chain_holds = rep.chain_holds && a2 <= b2 + tol && b2 <= a + tol;
      a = a2;
      b = b2;
    }
  }
  return rep;
}

CountingReport counting_bound_check(const DiscretePath& w, const StoppingParams& sp) {
  sp.validate();
  if (w.t0() > -1.0 + 1e-12 || w.t_end() < 0.0) throw std::invalid_argument("counting check needs the path on [-1, 0]");
  CountingReport rep;
  double s = 0.0;
  while (s > -1.0) {
    double next;
    try {
      next = s + backward_stopping_time(w, sp, s);
    } catch (const InsufficientHorizon&) {
      break;
    }
    if (next < -1.0) break;
    s = next;
    ++rep.N;
  }
  rep.seminorm = interpolant_seminorm(w, sp.beta_dprime, -1.0, 0.0);
  rep.bound = std::pow((rep.seminorm + sp.mu) / sp.mu, 1.0 / (sp.beta_dprime - sp.beta_prime));
  rep.holds = static_cast<double>(rep.N) <= rep.bound * (1.0 + 1e-12);
  return rep;
}

bool mu_condition_holds(double k1, double lambda1) { return k1 > 0.0 && k1 < 1.0 && 1.0 < -(2.0 / lambda1) * std::log(k1); }

bool smallness_holds(double d, double liminf, double k1, double nu, double lambda1) {
  return 1.0 > liminf && liminf >= d && d >= 2.0 * (std::log1p(k1) + nu) / lambda1 && nu >= 0.0 &&
         nu < d * lambda1 / 2.0;
}

GrowthReport growth_rate_estimate(std::span<const DiscretePath> ensemble, const StoppingParams& sp,
                                  const GrowthSettings& gs) {
  sp.validate();
  if (ensemble.empty()) throw std::invalid_argument("growth estimate needs a non-empty ensemble");
  if (gs.window < 2) throw std::invalid_argument("growth window must be >= 2");
  GrowthReport rep;
  rep.window = gs.window;
  rep.paths = ensemble.size();
  const double expo = 1.0 / (sp.beta_dprime - sp.beta_prime);
  double inv_sum = 0.0, proxy_sum = 0.0, hat_sum = 0.0, step_sum = 0.0;
  std::size_t step_count = 0;
  std::vector<double> xs, ys;
  for (const DiscretePath& w : ensemble) {
    // sup over grid points r in [0, 1] of |||w|||_{beta'', r-1, r}
    const std::size_t i0 = w.index_of(0.0), i1 = w.index_of(1.0), im = w.index_of(-1.0);
    const std::size_t lag = i0 - im;
    double sup = 0.0;
    for (std::size_t r = i0; r <= i1; ++r) sup = std::max(sup, holder_seminorm(w, sp.beta_dprime, r - lag, r));
    inv_sum += std::pow((sup + sp.mu) / sp.mu, expo);

    const StoppingSequence seq = stopping_sequence(w, sp, -gs.window, 0);
    if (seq.i_min > -gs.window) throw std::invalid_argument("growth estimate: path too short for the window");
    double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
    for (int k = -gs.window; k <= -gs.window / 2; ++k) {
      const double r = std::abs(seq.at(k)) / std::abs(k);
      mn = std::min(mn, r);
      mx = std::max(mx, r);
    }
    proxy_sum += mn;
    hat_sum += mx;
    for (int i = -gs.window; i <= -1; ++i) {
      const double step = seq.at(i + 1) - seq.at(i);
      step_sum += step;
      ++step_count;
      xs.push_back(std::abs(i));
      ys.push_back(std::max(0.0, -gs.beta * std::log(step)));
    }
  }
  const auto P = static_cast<double>(ensemble.size());
  rep.d_inverse_mc = inv_sum / P;
  rep.d_mc = 1.0 / rep.d_inverse_mc;
  rep.d_proxy = proxy_sum / P;
  rep.d_check = rep.d_proxy;
  rep.d_hat = hat_sum / P;
  rep.mean_step = step_sum / static_cast<double>(step_count);

  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  rep.subexp_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  double sse = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - my - rep.subexp_slope * (xs[k] - mx);
    sse += e * e;
  }
  rep.subexp_slope_se = (n > 2.0 && sxx > 0.0) ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;

  const double cm = gs.c * sp.mu;
  rep.k1 = cm < 1.0 ? cm / (1.0 - cm) : std::numeric_limits<double>::infinity();
  rep.mu_condition = mu_condition_holds(rep.k1, gs.lambda1);
  rep.smallness_mc = smallness_holds(rep.d_mc, rep.d_proxy, rep.k1, gs.nu, gs.lambda1);
  rep.smallness_proxy = smallness_holds(rep.d_proxy, rep.d_proxy, rep.k1, gs.nu, gs.lambda1);
  rep.growth_mc = gs.nu + rep.d_mc > 1.0;
  rep.growth_proxy = gs.nu + rep.d_proxy > 1.0;
  return rep;
}

}  // namespace fbmrds

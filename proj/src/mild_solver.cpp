#include "fbmrds/mild_solver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace fbmrds {

void SolverConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("solver max_iters must be >= 1");
  if (!(fp_tol > 0.0)) throw std::invalid_argument("solver fp_tol must be positive");
  if (rho < 0.0) throw std::invalid_argument("solver rho must be non-negative");
  if (auto_rho && !(rho_cap >= rho)) throw std::invalid_argument("solver rho_cap must be >= rho");
  if (!(contraction_target > 0.0 && contraction_target < 1.0))
    throw std::invalid_argument("solver contraction_target must lie in (0, 1)");
}

namespace {

// (1 - e^{-x}) / x
double phi1(double x) { return x < 1e-300 ? 1.0 : -std::expm1(-x) / x; }

// (1 - e^{-x}(1 + x)) / x^2
double phi2(double x) {
  if (x < 0.1) {
    double term = 0.5, sum = 0.5;
    for (int k = 1; k < 10; ++k) {
      term *= -x / static_cast<double>(k + 2);
      sum += term;
    }
    return sum;
  }
  return (x + std::expm1(-x)) / (x * x);
}

// Weighted tilde norm on a fixed node set, with the pair weights tabulated once.
class TildeNorm {
 public:
  TildeNorm(const std::vector<double>& t, double beta, double rho) : M_(t.size()) {
    const double a = t.front();
    ew_.resize(M_);
    for (std::size_t k = 0; k < M_; ++k) ew_[k] = std::exp(-rho * (t[k] - a));
    pw_.assign(M_ * M_, 0.0);
    for (std::size_t k = 2; k < M_; ++k)
      for (std::size_t j = 1; j < k; ++j)
        pw_[k * M_ + j] = std::pow(t[j] - a, beta) * ew_[k] * std::pow(t[k] - t[j], -beta);
  }

  double operator()(const RowMatrix& v) const {
    double sup = 0.0;
    for (std::size_t k = 0; k < M_; ++k) sup = std::max(sup, ew_[k] * v.row(static_cast<Eigen::Index>(k)).norm());
    double semi2 = 0.0;
    for (std::size_t k = 2; k < M_; ++k) {
      const auto vk = v.row(static_cast<Eigen::Index>(k));
      for (std::size_t j = 1; j < k; ++j) {
        const double w = pw_[k * M_ + j];
        semi2 = std::max(semi2, w * w * (vk - v.row(static_cast<Eigen::Index>(j))).squaredNorm());
      }
    }
    return sup + std::sqrt(semi2);
  }

 private:
  std::size_t M_;
  std::vector<double> ew_, pw_;
};

class Picard {
 public:
  Picard(const Vector& u0, const std::vector<double>& t, const RowMatrix& w, const SpectralOperator& S,
         const NonlinearityG& G)
      : t_(t), G_(G), M_(t.size()), n_(static_cast<std::size_t>(u0.size())) {
    if (M_ < 2) throw std::invalid_argument("solver needs at least two nodes");
    if (static_cast<std::size_t>(w.rows()) != M_) throw std::invalid_argument("integrator must have one row per node");
    if (S.dim() != n_ || G.dim() != n_ || static_cast<std::size_t>(w.cols()) != n_)
      throw std::invalid_argument("dimension mismatch between u0, operator, nonlinearity and integrator");
    for (std::size_t k = 1; k < M_; ++k)
      if (!(t[k] > t[k - 1])) throw std::invalid_argument("solver nodes must be strictly increasing");
    const auto n = static_cast<Eigen::Index>(n_);
    const Eigen::ArrayXd lam = S.lambda().array();
    dw_ = w.bottomRows(static_cast<Eigen::Index>(M_ - 1)) - w.topRows(static_cast<Eigen::Index>(M_ - 1));
    W0_.resize(static_cast<Eigen::Index>(M_ - 1), n);
    W1_.resize(static_cast<Eigen::Index>(M_ - 1), n);
    for (std::size_t l = 0; l + 1 < M_; ++l) {
      const double h = t[l + 1] - t[l];
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = lam[i] * h;
        const double p2 = phi2(x);
        W0_(static_cast<Eigen::Index>(l), i) = p2;
        W1_(static_cast<Eigen::Index>(l), i) = phi1(x) - p2;
      }
    }
    E_.resize(M_ * (M_ - 1) / 2 * n_);
    for (std::size_t k = 1; k < M_; ++k)
      for (std::size_t l = 0; l < k; ++l) {
        double* e = &E_[(k * (k - 1) / 2 + l) * n_];
        for (std::size_t i = 0; i < n_; ++i) e[i] = std::exp(-lam[static_cast<Eigen::Index>(i)] * (t[k] - t[l + 1]));
      }
    base_.resize(static_cast<Eigen::Index>(M_), n);
    for (std::size_t k = 0; k < M_; ++k)
      base_.row(static_cast<Eigen::Index>(k)) = ((-(t[k] - t[0]) * lam).exp() * u0.array()).matrix().transpose();
  }

  RowMatrix apply(const RowMatrix& u) const {
    const auto n = static_cast<Eigen::Index>(n_);
    RowMatrix c(static_cast<Eigen::Index>(M_ - 1), n);
    if (G_.is_zero()) {
      c.setZero();
    } else {
      Vector prev = G_.apply(u.row(0).transpose(), dw_.row(0).transpose());
      for (std::size_t l = 0; l + 1 < M_; ++l) {
        const auto L = static_cast<Eigen::Index>(l);
        const Vector A = (l == 0) ? prev : G_.apply(u.row(L).transpose(), dw_.row(L).transpose());
        const Vector B = G_.apply(u.row(L + 1).transpose(), dw_.row(L).transpose());
        c.row(L) = (W0_.row(L).array() * A.transpose().array() + W1_.row(L).array() * B.transpose().array()).matrix();
      }
    }
    RowMatrix out = base_;
    for (std::size_t k = 1; k < M_; ++k) {
      auto row = out.row(static_cast<Eigen::Index>(k));
      for (std::size_t l = 0; l < k; ++l) {
        const double* e = &E_[(k * (k - 1) / 2 + l) * n_];
        const double* cl = c.row(static_cast<Eigen::Index>(l)).data();
        for (std::size_t i = 0; i < n_; ++i) row[static_cast<Eigen::Index>(i)] += e[i] * cl[i];
      }
    }
    return out;
  }

  RowMatrix constant_start(const Vector& u0) const { return u0.transpose().replicate(static_cast<Eigen::Index>(M_), 1); }
  const RowMatrix& semigroup_part() const { return base_; }

 private:
  const std::vector<double>& t_;
  const NonlinearityG& G_;
  std::size_t M_, n_;
  RowMatrix dw_, W0_, W1_, base_;
  std::vector<double> E_;
};

struct IterationOutcome {
  RowMatrix u;
  int iterations = 0;
  double residual = 0.0;
  double rho = 0.0;
  std::vector<double> distances;
};

// Picard iteration from the constant path. Convergence: the weighted distance of successive iterates is at
// most fp_tol times the weighted norm of the iterate, and the same holds without weight.
IterationOutcome iterate(const Picard& P, const Vector& u0, const std::vector<double>& t, const HolderParams& hp,
                         const SolverConfig& cfg, bool adapt_rho, bool keep_going_to_tol = true) {
  IterationOutcome out;
  double rho = cfg.rho;
  TildeNorm norm0(t, hp.beta, 0.0);
  auto normr = std::make_unique<TildeNorm>(t, hp.beta, rho);
  RowMatrix older = P.constant_start(u0);
  RowMatrix prev = older;
  double dprev = -1.0;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    RowMatrix cur = P.apply(prev);
    if (!cur.allFinite()) throw SolverError("mild solver diverged (non-finite iterate)", out.distances);
    const RowMatrix diff = cur - prev;
    double d = (*normr)(diff);
    if (adapt_rho && k >= 2 && dprev > 0.0) {
      while (d / dprev >= cfg.contraction_target && rho < cfg.rho_cap) {
        rho = std::min(cfg.rho_cap, rho == 0.0 ? 1.0 : 2.0 * rho);
        normr = std::make_unique<TildeNorm>(t, hp.beta, rho);
        dprev = (*normr)(prev - older);
        d = (*normr)(diff);
        if (dprev == 0.0) break;
      }
    }
    out.distances.push_back(d);
    if (d == 0.0) {
      out.u = std::move(cur);
      out.iterations = k - 1;
      out.residual = 0.0;
      out.rho = rho;
      return out;
    }
    const double nr = (*normr)(cur);
    const double rel = nr > 0.0 ? d / nr : d;
    const double nz = norm0(cur);
    const double rel0 = nz > 0.0 ? norm0(diff) / nz : 0.0;
    if (keep_going_to_tol && rel <= cfg.fp_tol && rel0 <= cfg.fp_tol) {
      out.u = std::move(cur);
      out.iterations = k;
      out.residual = rel;
      out.rho = rho;
      return out;
    }
    older = std::move(prev);
    prev = std::move(cur);
    dprev = d;
  }
  std::ostringstream os;
  os << "mild solver did not converge within " << cfg.max_iters << " iterations (last distance "
     << (out.distances.empty() ? 0.0 : out.distances.back()) << ")";
  throw SolverError(os.str(), out.distances);
}

}  // namespace

SolutionRecord solve_mild_nodes(const Vector& u0, const std::vector<double>& t, const RowMatrix& w_nodes,
                                const SpectralOperator& S, const NonlinearityG& G, const HolderParams& hp,
                                const SolverConfig& cfg) {
  cfg.validate();
  const Picard P(u0, t, w_nodes, S, G);
  IterationOutcome it = iterate(P, u0, t, hp, cfg, cfg.auto_rho);
  SolutionRecord rec;
  rec.u.t = t;
  rec.u.values = std::move(it.u);
  rec.iterations = it.iterations;
  rec.residual = it.residual;
  rec.rho = it.rho;
  rec.history = std::move(it.distances);
  rec.beta_norm = holder_norm(rec.u, hp.beta);
  rec.tilde_norm = weighted_tilde_norm(rec.u, hp.beta, 0.0);
  rec.regime = cfg.initial_space == InitialSpace::Vbeta ? "beta" : "tilde";
  return rec;
}

SolutionRecord solve_mild(const Vector& u0, const DiscretePath& w, std::size_t i1, std::size_t i2,
                          const SpectralOperator& S, const NonlinearityG& G, const HolderParams& hp,
                          const SolverConfig& cfg) {
  if (i1 >= i2 || i2 > w.steps()) throw std::invalid_argument("solver window outside grid");
  std::vector<double> t(i2 - i1 + 1);
  for (std::size_t k = i1; k <= i2; ++k) t[k - i1] = w.time(k);
  const RowMatrix wn = w.values().middleRows(static_cast<Eigen::Index>(i1), static_cast<Eigen::Index>(i2 - i1 + 1));
  return solve_mild_nodes(u0, t, wn, S, G, hp, cfg);
}

SolutionRecord solve_mild(const Vector& u0, const DiscretePath& w, const SpectralOperator& S, const NonlinearityG& G,
                          const HolderParams& hp, const SolverConfig& cfg) {
  return solve_mild(u0, w, 0, w.steps(), S, G, hp, cfg);
}

std::vector<double> window_nodes(const DiscretePath& w, double a, double b, const std::vector<double>& breakpoints,
                                 double merge_tol) {
  if (!(a < b)) throw std::invalid_argument("solver window must have a < b");
  const double tol = merge_tol * w.dt();
  if (a < w.t0() - tol || b > w.t_end() + tol) throw std::invalid_argument("solver window outside the path");
  std::vector<double> marks;
  for (double x : breakpoints)
    if (x > a + tol && x < b - tol) marks.push_back(x);
  std::vector<double> t{a, b};
  t.insert(t.end(), marks.begin(), marks.end());
  const auto k0 = static_cast<std::ptrdiff_t>(std::ceil((a - w.t0()) / w.dt()));
  const auto k1 = static_cast<std::ptrdiff_t>(std::floor((b - w.t0()) / w.dt()));
  for (auto k = std::max<std::ptrdiff_t>(k0, 0); k <= std::min<std::ptrdiff_t>(k1, static_cast<std::ptrdiff_t>(w.steps())); ++k) {
    const double tk = w.time(static_cast<std::size_t>(k));
    if (tk <= a + tol || tk >= b - tol) continue;
    bool near = false;
    for (double x : marks) near = near || std::abs(tk - x) <= tol;
    if (!near) t.push_back(tk);
  }
  std::sort(t.begin(), t.end());
  return t;
}

RowMatrix sample_nodes(const DiscretePath& w, const std::vector<double>& t) {
  RowMatrix v(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(w.dim()));
  for (std::size_t k = 0; k < t.size(); ++k) v.row(static_cast<Eigen::Index>(k)) = w.value_at(t[k]).transpose();
  return v;
}

ContractionReport contraction_probe(const Vector& u0, const DiscretePath& w, const SpectralOperator& S,
                                    const NonlinearityG& G, const HolderParams& hp, const SolverConfig& cfg) {
  cfg.validate();
  ContractionReport rep;
  std::vector<double> t(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) t[k] = w.time(k);
  const Picard P(u0, t, w.values(), S, G);
  SolverConfig fixed = cfg;
  if (cfg.auto_rho) fixed.rho = iterate(P, u0, t, hp, cfg, true).rho;
  rep.rho = fixed.rho;
  const IterationOutcome it = iterate(P, u0, t, hp, fixed, false);
  rep.distances = it.distances;
  for (std::size_t k = 1; k < rep.distances.size(); ++k)
    rep.ratios.push_back(rep.distances[k - 1] > 0.0 ? rep.distances[k] / rep.distances[k - 1] : 0.0);
  rep.exact_in_one_step = rep.distances.size() >= 2 && rep.distances[1] == 0.0;
  rep.success = true;
  for (std::size_t k = 1; k < rep.ratios.size(); ++k) {
    rep.success = rep.success && rep.ratios[k] < 1.0;
    rep.max_ratio = std::max(rep.max_ratio, rep.ratios[k]);
  }
  return rep;
}

namespace {

double safe_ratio(double lhs, double rhs) { return rhs > 0.0 ? lhs / rhs : 0.0; }

IntegralDiagnostics diagnostics_upto(const SolutionRecord& sol, const RowMatrix& w_nodes, const SpectralOperator& S,
                                     const HolderParams& hp, std::size_t last) {
  if (last < 1) throw std::invalid_argument("diagnostic window needs at least two nodes");
  const auto rows = static_cast<Eigen::Index>(last + 1);
  NodalPath u{std::vector<double>(sol.u.t.begin(), sol.u.t.begin() + rows), sol.u.values.topRows(rows)};
  NodalPath w{u.t, w_nodes.topRows(rows)};
  const Vector u0 = u.value(0);
  NodalPath I{u.t, u.values};
  for (std::size_t k = 0; k <= last; ++k)
    I.values.row(static_cast<Eigen::Index>(k)) -= S.apply_semigroup(u.t[k] - u.t[0], u0).transpose();
  IntegralDiagnostics d;
  d.T = u.t.back() - u.t.front();
  d.omega_seminorm = holder_seminorm(w, hp.beta_prime);
  const double ut = weighted_tilde_norm(u, hp.beta, 0.0);
  const double ub = holder_norm(u, hp.beta);
  d.tilde_lhs = weighted_tilde_norm(I, hp.beta, 0.0);
  d.tilde_rhs = d.omega_seminorm * (1.0 + ut);
  d.beta_lhs = holder_norm(I, hp.beta);
  d.beta_rhs = d.omega_seminorm * (1.0 + ub);
  d.end_lhs = S.frac_power_norm(I.back(), hp.beta);
  d.end_rhs = d.omega_seminorm * (1.0 + ub);
  d.reg_lhs = S.frac_power_norm(u.back(), hp.beta);
  d.reg_rhs = std::pow(d.T, -hp.beta) * u0.norm() + d.omega_seminorm * (1.0 + ut);
  d.c_tilde = safe_ratio(d.tilde_lhs, d.tilde_rhs);
  d.c_beta = safe_ratio(d.beta_lhs, d.beta_rhs);
  d.c_end = safe_ratio(d.end_lhs, d.end_rhs);
  d.c_reg = safe_ratio(d.reg_lhs, d.reg_rhs);
  return d;
}

}  // namespace

IntegralDiagnostics integral_norm_diagnostics(const SolutionRecord& sol, const RowMatrix& w_nodes,
                                              const SpectralOperator& S, const HolderParams& hp) {
  if (static_cast<std::size_t>(w_nodes.rows()) != sol.u.size())
    throw std::invalid_argument("integrator must have one row per solution node");
  return diagnostics_upto(sol, w_nodes, S, hp, sol.u.size() - 1);
}

std::vector<IntegralDiagnostics> integral_norm_sweep(const SolutionRecord& sol, const RowMatrix& w_nodes,
                                                     const SpectralOperator& S, const HolderParams& hp,
                                                     const std::vector<double>& horizons) {
  std::vector<IntegralDiagnostics> out;
  const double t0 = sol.u.t.front();
  for (double T : horizons) {
    const double target = t0 + T;
    auto it = std::min_element(sol.u.t.begin(), sol.u.t.end(),
                               [&](double x, double y) { return std::abs(x - target) < std::abs(y - target); });
    if (std::abs(*it - target) > 1e-9 * std::max(1.0, std::abs(target)))
      throw std::invalid_argument("horizon is not a solution node");
    out.push_back(diagnostics_upto(sol, w_nodes, S, hp, static_cast<std::size_t>(it - sol.u.t.begin())));
  }
  return out;
}

}  // namespace fbmrds

#pragma once

#include "fbmrds/holder_paths.hpp"
#include "fbmrds/spectral_operator.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace fbmrds {

enum class InitialSpace { V, Vbeta };

struct SolverConfig {
  int max_iters = 200;
  double fp_tol = 1e-10;      // relative distance of successive iterates
  double rho = 1.0;           // weight of the tilde norm (starting value when auto_rho)
  bool auto_rho = true;       // double rho until the observed ratio < contraction_target or rho_cap
  double rho_cap = 1024.0;
  double contraction_target = 0.9;
  InitialSpace initial_space = InitialSpace::Vbeta;

  void validate() const;
};

struct SolutionRecord {
  NodalPath u;
  int iterations = 0;
  double residual = 0.0;           // last iterate distance relative to the iterate norm (tilde norm, weight rho)
  double rho = 0.0;
  double beta_norm = 0.0;          // ||u||_beta on the window
  double tilde_norm = 0.0;         // ||u||_{beta,~} on the window
  std::vector<double> history;     // successive iterate distances
  std::string regime;              // "beta" (u0 in V_beta) or "tilde" (u0 in V)

  Vector final_value() const { return u.back(); }
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Fixed point of u -> S(. - t_0) u0 + int_{t_0}^. S(. - r) G(u(r)) dw on the node set t (t_0 = t.front()),
// where w is given by its values at the nodes and integrated as its piecewise-linear interpolant, with G(u)
// interpolated linearly between nodes. Every node value is a full quadrature over all earlier cells.
SolutionRecord solve_mild_nodes(const Vector& u0, const std::vector<double>& t, const RowMatrix& w_nodes,
                                const SpectralOperator& S, const NonlinearityG& G, const HolderParams& hp,
                                const SolverConfig& cfg);

// On the whole grid of w, starting at w.t0().
SolutionRecord solve_mild(const Vector& u0, const DiscretePath& w, const SpectralOperator& S, const NonlinearityG& G,
                          const HolderParams& hp, const SolverConfig& cfg);
// On grid points [i1, i2] of w.
SolutionRecord solve_mild(const Vector& u0, const DiscretePath& w, std::size_t i1, std::size_t i2,
                          const SpectralOperator& S, const NonlinearityG& G, const HolderParams& hp,
                          const SolverConfig& cfg);

// Node set for a real window [a, b] of w: a, the grid points strictly inside, and b. Grid points closer than
// merge_tol * dt to an endpoint are dropped. Extra breakpoints inside (a, b) are inserted as nodes as well.
std::vector<double> window_nodes(const DiscretePath& w, double a, double b, const std::vector<double>& breakpoints = {},
                                 double merge_tol = 1e-6);
RowMatrix sample_nodes(const DiscretePath& w, const std::vector<double>& t);

struct ContractionReport {
  double rho = 0.0;
  std::vector<double> distances;  // ||u^{k} - u^{k-1}||_{beta,rho,~}, k = 1, 2, ...
  std::vector<double> ratios;     // distances[k] / distances[k-1]
  bool exact_in_one_step = false; // second distance vanished
  bool success = false;           // every ratio from the second on is < 1
  double max_ratio = 0.0;
};

// Runs the Picard iteration with the rho chosen by solve_mild (or cfg.rho when auto_rho is off).
ContractionReport contraction_probe(const Vector& u0, const DiscretePath& w, const SpectralOperator& S,
                                    const NonlinearityG& G, const HolderParams& hp, const SolverConfig& cfg);

struct IntegralDiagnostics {
  double T = 0.0;
  double omega_seminorm = 0.0;   // |||w|||_{beta', 0, T}
  double tilde_lhs = 0.0, tilde_rhs = 0.0, c_tilde = 0.0;    // tilde-norm estimate of the integral
  double beta_lhs = 0.0, beta_rhs = 0.0, c_beta = 0.0;       // beta-norm estimate of the integral
  double end_lhs = 0.0, end_rhs = 0.0, c_end = 0.0;          // |integral(T)|_{V_beta}
  double reg_lhs = 0.0, reg_rhs = 0.0, c_reg = 0.0;          // |u(T)|_{V_beta} vs T^-beta |u0| + ...
};

// Implied constants (lhs / rhs with unit constants) for the integral estimates of the solution `sol` on its window.
// The integral path is u - S(. - t_0) u0.
IntegralDiagnostics integral_norm_diagnostics(const SolutionRecord& sol, const RowMatrix& w_nodes,
                                              const SpectralOperator& S, const HolderParams& hp);
// Same, on the sub-windows [t_0, t_0 + T] for each T in horizons (t_0 + T must be a node). The solution
// restricted to a sub-window is the solution there, so no re-solve is needed.
std::vector<IntegralDiagnostics> integral_norm_sweep(const SolutionRecord& sol, const RowMatrix& w_nodes,
                                                     const SpectralOperator& S, const HolderParams& hp,
                                                     const std::vector<double>& horizons);

}  // namespace fbmrds

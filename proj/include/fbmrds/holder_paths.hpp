#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fbmrds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Uniform-grid path t0 + k*dt, k = 0..m. Row k of values holds the sample at grid point k.
class DiscretePath {
 public:
  DiscretePath() = default;
  DiscretePath(double t0, double dt, RowMatrix values);

  static DiscretePath zeros(double t0, double dt, std::size_t m, std::size_t n);

  double t0() const { return t0_; }
  double dt() const { return dt_; }
  std::size_t steps() const { return static_cast<std::size_t>(values_.rows()) - 1; }
  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) * dt_; }
  double t_end() const { return time(steps()); }

  Vector value(std::size_t k) const { return values_.row(static_cast<Eigen::Index>(k)).transpose(); }
  const RowMatrix& values() const { return values_; }
  RowMatrix& values() { return values_; }

  // Grid index of t if t is a grid point (within a relative tolerance), otherwise throws.
  std::size_t index_of(double t) const;
  // Piecewise-linear interpolant; t must lie in [t0, t_end].
  Vector value_at(double t) const;
  // Single mode as a scalar path.
  DiscretePath component(std::size_t j) const;
  // Grid points i1..i2 as a new path.
  DiscretePath slice(std::size_t i1, std::size_t i2) const;
  // Every stride-th grid point.
  DiscretePath coarsen(std::size_t stride) const;

 private:
  double t0_ = 0.0;
  double dt_ = 1.0;
  RowMatrix values_;
};

// Path on an arbitrary increasing node set (used for solver windows between stopping times).
struct NodalPath {
  std::vector<double> t;
  RowMatrix values;

  std::size_t size() const { return t.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
  Vector value(std::size_t k) const { return values.row(static_cast<Eigen::Index>(k)).transpose(); }
  Vector back() const { return value(size() - 1); }
  Vector value_at(double s) const;
  static NodalPath from(const DiscretePath& p);
};

struct HolderParams {
  double beta = 0.52;
  double beta_prime = 0.56;
  double beta_dprime = 0.7;
  double H = 0.75;
  double alpha = 0.48;

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  static double default_alpha(double beta, double beta_prime) { return 0.5 * (1.0 - beta_prime + beta); }
};

double holder_seminorm(const DiscretePath& p, double beta, std::size_t i1, std::size_t i2);
double holder_seminorm(const DiscretePath& p, double beta);
double sup_norm(const DiscretePath& p, std::size_t i1, std::size_t i2);
double holder_norm(const DiscretePath& p, double beta, std::size_t i1, std::size_t i2);
double weighted_tilde_norm(const DiscretePath& p, double beta, double rho, std::size_t i1, std::size_t i2);

struct StridedSeminorm {
  double value;
  std::size_t stride;
  bool approximate;
};
// Pair scan restricted to lags that are multiples of stride plus all lags below stride. Lower bound.
StridedSeminorm holder_seminorm_strided(const DiscretePath& p, double beta, std::size_t i1, std::size_t i2,
                                        std::size_t stride);

// Same norms on arbitrary node sets.
double holder_seminorm(const NodalPath& p, double beta);
double holder_norm(const NodalPath& p, double beta);
double weighted_tilde_norm(const NodalPath& p, double beta, double rho);

// Seminorm of the piecewise-linear interpolant on the real window [a, b]. Exact for the interpolant:
// the supremum is attained on pairs drawn from {a, interior grid points, b}.
double interpolant_seminorm(const DiscretePath& p, double beta, double a, double b);

// Wiener shift by tau = k*dt: s -> p(tau + s) - p(tau). The grid must contain time 0 and tau.
// The whole stored grid is kept, so the result lives on [t0 - tau, t_end - tau].
DiscretePath shift(const DiscretePath& p, std::ptrdiff_t k);
// Grid index of time 0.
std::size_t origin_index(const DiscretePath& p);

void write_path_csv(std::ostream& os, const DiscretePath& p);
void write_path_csv(const std::string& file, const DiscretePath& p);
void write_path_csv(std::ostream& os, const NodalPath& p);
DiscretePath read_path_csv(std::istream& is);
DiscretePath read_path_csv(const std::string& file);

}  // namespace fbmrds

#include "fbmrds/holder_paths.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace fbmrds {

namespace {

void check_range(const DiscretePath& p, std::size_t i1, std::size_t i2) {
  if (p.size() < 2 || i1 >= i2) throw std::invalid_argument("degenerate interval");
  if (i2 > p.steps()) throw std::invalid_argument("index range outside grid");
}

// Squared Euclidean distance of two rows.
inline double row_dist2(const RowMatrix& v, Eigen::Index a, Eigen::Index b) {
  return (v.row(a) - v.row(b)).squaredNorm();
}

}  // namespace

DiscretePath::DiscretePath(double t0, double dt, RowMatrix values) : t0_(t0), dt_(dt), values_(std::move(values)) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw std::invalid_argument("path step dt must be positive");
  if (values_.rows() < 1) throw std::invalid_argument("path needs at least one grid point");
  if (values_.cols() < 1) throw std::invalid_argument("path dimension must be at least 1");
}

DiscretePath DiscretePath::zeros(double t0, double dt, std::size_t m, std::size_t n) {
  return DiscretePath(t0, dt, RowMatrix::Zero(static_cast<Eigen::Index>(m + 1), static_cast<Eigen::Index>(n)));
}

std::size_t DiscretePath::index_of(double t) const {
  const double x = (t - t0_) / dt_;
  const double k = std::round(x);
  if (std::abs(x - k) > 1e-9 * std::max(1.0, std::abs(x)) || k < 0 || k > static_cast<double>(steps()))
    throw std::invalid_argument("time " + std::to_string(t) + " is not a grid point of the path");
  return static_cast<std::size_t>(k);
}

Vector DiscretePath::value_at(double t) const {
  const double span = t_end() - t0_;
  const double tol = 1e-12 * std::max(1.0, std::abs(span));
  if (t < t0_ - tol || t > t_end() + tol) throw std::out_of_range("interpolation time outside path window");
  double x = (t - t0_) / dt_;
  x = std::clamp(x, 0.0, static_cast<double>(steps()));
  auto l = static_cast<std::size_t>(std::floor(x));
  if (l >= steps()) return value(steps());
  const double s = x - static_cast<double>(l);
  if (s == 0.0) return value(l);
  return ((1.0 - s) * values_.row(static_cast<Eigen::Index>(l)) + s * values_.row(static_cast<Eigen::Index>(l + 1)))
      .transpose();
}

DiscretePath DiscretePath::component(std::size_t j) const {
  if (j >= dim()) throw std::out_of_range("component index out of range");
  return DiscretePath(t0_, dt_, values_.col(static_cast<Eigen::Index>(j)));
}

DiscretePath DiscretePath::slice(std::size_t i1, std::size_t i2) const {
  if (i1 > i2 || i2 > steps()) throw std::out_of_range("slice outside grid");
  return DiscretePath(time(i1), dt_, values_.middleRows(static_cast<Eigen::Index>(i1), static_cast<Eigen::Index>(i2 - i1 + 1)));
}

DiscretePath DiscretePath::coarsen(std::size_t stride) const {
  if (stride == 0 || steps() % stride != 0) throw std::invalid_argument("stride must divide the number of steps");
  const std::size_t m = steps() / stride;
  RowMatrix v(static_cast<Eigen::Index>(m + 1), values_.cols());
  for (std::size_t k = 0; k <= m; ++k) v.row(static_cast<Eigen::Index>(k)) = values_.row(static_cast<Eigen::Index>(k * stride));
  return DiscretePath(t0_, dt_ * static_cast<double>(stride), std::move(v));
}

Vector NodalPath::value_at(double s) const {
  if (t.empty()) throw std::out_of_range("empty nodal path");
  if (s <= t.front()) return value(0);
  if (s >= t.back()) return back();
  auto it = std::upper_bound(t.begin(), t.end(), s);
  const std::size_t r = static_cast<std::size_t>(it - t.begin());
  const std::size_t l = r - 1;
  const double w = (s - t[l]) / (t[r] - t[l]);
  return ((1.0 - w) * values.row(static_cast<Eigen::Index>(l)) + w * values.row(static_cast<Eigen::Index>(r))).transpose();
}

NodalPath NodalPath::from(const DiscretePath& p) {
  NodalPath out;
  out.t.resize(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) out.t[k] = p.time(k);
  out.values = p.values();
  return out;
}

void HolderParams::validate() const {
  if (!(0.5 < H && H < 1.0)) throw std::invalid_argument("Hurst parameter H must lie in (1/2, 1)");
  if (!(0.5 < beta)) throw std::invalid_argument("constraint 1/2 < beta violated");
  if (!(beta < beta_prime)) throw std::invalid_argument("constraint beta < beta_prime violated");
  if (!(beta_prime < beta_dprime)) throw std::invalid_argument("constraint beta_prime < beta_dprime violated");
  if (!(beta_dprime < H)) throw std::invalid_argument("constraint beta_dprime < H violated");
  if (!(1.0 - beta_prime < alpha && alpha < beta))
    throw std::invalid_argument("fractional order incompatible with Hölder exponents (need 1 - beta_prime < alpha < beta)");
}

double holder_seminorm(const DiscretePath& p, double beta, std::size_t i1, std::size_t i2) {
  check_range(p, i1, i2);
  const std::size_t len = i2 - i1;
  std::vector<double> w(len + 1);
  for (std::size_t d = 1; d <= len; ++d) w[d] = std::pow(static_cast<double>(d) * p.dt(), -2.0 * beta);
  const RowMatrix& v = p.values();
  double best = 0.0;
  if (v.cols() == 1) {
    for (std::size_t k = i1 + 1; k <= i2; ++k) {
      const double vk = v(static_cast<Eigen::Index>(k), 0);
      for (std::size_t j = i1; j < k; ++j) {
        const double d = vk - v(static_cast<Eigen::Index>(j), 0);
        best = std::max(best, d * d * w[k - j]);
      }
    }
  } else {
    for (std::size_t k = i1 + 1; k <= i2; ++k)
      for (std::size_t j = i1; j < k; ++j)
        best = std::max(best, row_dist2(v, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * w[k - j]);
  }
  return std::sqrt(best);
}

double holder_seminorm(const DiscretePath& p, double beta) { return holder_seminorm(p, beta, 0, p.steps()); }

double sup_norm(const DiscretePath& p, std::size_t i1, std::size_t i2) {
  if (i2 > p.steps() || i1 > i2) throw std::invalid_argument("index range outside grid");
  return p.values().middleRows(static_cast<Eigen::Index>(i1), static_cast<Eigen::Index>(i2 - i1 + 1)).rowwise().norm().maxCoeff();
}

double holder_norm(const DiscretePath& p, double beta, std::size_t i1, std::size_t i2) {
  check_range(p, i1, i2);
  return sup_norm(p, i1, i2) + holder_seminorm(p, beta, i1, i2);
}

double weighted_tilde_norm(const DiscretePath& p, double beta, double rho, std::size_t i1, std::size_t i2) {
  check_range(p, i1, i2);
  if (rho < 0.0) throw std::invalid_argument("rho must be non-negative");
  const std::size_t len = i2 - i1;
  const double dt = p.dt();
  std::vector<double> lag(len + 1), ew(len + 1), sw(len + 1);
  for (std::size_t d = 0; d <= len; ++d) {
    const double x = static_cast<double>(d) * dt;
    lag[d] = d ? std::pow(x, -beta) : 0.0;
    sw[d] = std::pow(x, beta);
    ew[d] = std::exp(-rho * x);
  }
  const RowMatrix& v = p.values();
  double sup = 0.0;
  for (std::size_t k = i1; k <= i2; ++k) sup = std::max(sup, ew[k - i1] * v.row(static_cast<Eigen::Index>(k)).norm());
  double semi = 0.0;
  for (std::size_t k = i1 + 2; k <= i2; ++k) {
    for (std::size_t j = i1 + 1; j < k; ++j) {
      const double d = std::sqrt(row_dist2(v, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
      semi = std::max(semi, sw[j - i1] * ew[k - i1] * d * lag[k - j]);
    }
  }
  return sup + semi;
}

StridedSeminorm holder_seminorm_strided(const DiscretePath& p, double beta, std::size_t i1, std::size_t i2,
                                        std::size_t stride) {
  check_range(p, i1, i2);
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  const RowMatrix& v = p.values();
  double best = 0.0;
  for (std::size_t k = i1 + 1; k <= i2; ++k) {
    for (std::size_t d = 1; d <= k - i1; d = (d < stride ? d + 1 : d + stride)) {
      const std::size_t j = k - d;
      best = std::max(best, row_dist2(v, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) *
                                std::pow(static_cast<double>(d) * p.dt(), -2.0 * beta));
    }
  }
  return {std::sqrt(best), stride, stride > 1};
}

double holder_seminorm(const NodalPath& p, double beta) {
  if (p.size() < 2) throw std::invalid_argument("degenerate interval");
  double best = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k)
    for (std::size_t j = 0; j < k; ++j)
      best = std::max(best, row_dist2(p.values, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) *
                                std::pow(p.t[k] - p.t[j], -2.0 * beta));
  return std::sqrt(best);
}

double holder_norm(const NodalPath& p, double beta) {
  return p.values.rowwise().norm().maxCoeff() + holder_seminorm(p, beta);
}

double weighted_tilde_norm(const NodalPath& p, double beta, double rho) {
  if (p.size() < 2) throw std::invalid_argument("degenerate interval");
  const double a = p.t.front();
  const std::size_t M = p.size();
  std::vector<double> ew(M), sw(M);
  double sup = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    ew[k] = std::exp(-rho * (p.t[k] - a));
    sw[k] = std::pow(p.t[k] - a, beta);
    sup = std::max(sup, ew[k] * p.values.row(static_cast<Eigen::Index>(k)).norm());
  }
  double semi = 0.0;
  for (std::size_t k = 2; k < M; ++k)
    for (std::size_t j = 1; j < k; ++j) {
      const double d = std::sqrt(row_dist2(p.values, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
      semi = std::max(semi, sw[j] * ew[k] * d * std::pow(p.t[k] - p.t[j], -beta));
    }
  return sup + semi;
}

double interpolant_seminorm(const DiscretePath& p, double beta, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("degenerate interval");
  NodalPath q;
  q.t.push_back(a);
  const double x0 = (a - p.t0()) / p.dt();
  const double x1 = (b - p.t0()) / p.dt();
  auto first = static_cast<std::ptrdiff_t>(std::floor(x0)) + 1;
  auto last = static_cast<std::ptrdiff_t>(std::ceil(x1)) - 1;
  first = std::max<std::ptrdiff_t>(first, 0);
  last = std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(p.steps()));
  std::vector<std::size_t> idx;
  for (auto k = first; k <= last; ++k) {
    const double tk = p.time(static_cast<std::size_t>(k));
    if (tk > a && tk < b) idx.push_back(static_cast<std::size_t>(k));
  }
  q.values.resize(static_cast<Eigen::Index>(idx.size() + 2), static_cast<Eigen::Index>(p.dim()));
  q.values.row(0) = p.value_at(a).transpose();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    q.t.push_back(p.time(idx[r]));
    q.values.row(static_cast<Eigen::Index>(r + 1)) = p.values().row(static_cast<Eigen::Index>(idx[r]));
  }
  q.t.push_back(b);
  q.values.row(static_cast<Eigen::Index>(idx.size() + 1)) = p.value_at(b).transpose();
  return holder_seminorm(q, beta);
}

std::size_t origin_index(const DiscretePath& p) {
  if (p.t0() > 0.0 || p.t_end() < 0.0) throw std::invalid_argument("path grid does not contain time 0");
  return p.index_of(0.0);
}

DiscretePath shift(const DiscretePath& p, std::ptrdiff_t k) {
  const auto i0 = static_cast<std::ptrdiff_t>(origin_index(p));
  const std::ptrdiff_t target = i0 + k;
  if (target < 0 || target > static_cast<std::ptrdiff_t>(p.steps())) throw std::out_of_range("shift offset out of range");
  RowMatrix v = p.values().rowwise() - p.values().row(target);
  return DiscretePath(p.t0() - static_cast<double>(k) * p.dt(), p.dt(), std::move(v));
}

void write_path_csv(std::ostream& os, const DiscretePath& p) {
  os << "t";
  for (std::size_t j = 0; j < p.dim(); ++j) os << ",v" << j;
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < p.size(); ++k) {
    os << p.time(k);
    for (std::size_t j = 0; j < p.dim(); ++j) os << ',' << p.values()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    os << '\n';
  }
}

void write_path_csv(const std::string& file, const DiscretePath& p) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open " + file + " for writing");
  write_path_csv(os, p);
}

void write_path_csv(std::ostream& os, const NodalPath& p) {
  os << "t";
  for (std::size_t j = 0; j < p.dim(); ++j) os << ",v" << j;
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < p.size(); ++k) {
    os << p.t[k];
    for (std::size_t j = 0; j < p.dim(); ++j) os << ',' << p.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    os << '\n';
  }
}

DiscretePath read_path_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("t", 0) != 0) throw std::runtime_error("path CSV: missing header");
  const auto n = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (n == 0) throw std::runtime_error("path CSV: no value columns");
  std::vector<double> ts, vals;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      double x = std::stod(cell);
      if (col == 0) ts.push_back(x); else vals.push_back(x);
      ++col;
    }
    if (col != n + 1) throw std::runtime_error("path CSV: ragged row");
  }
  if (ts.size() < 2) throw std::runtime_error("path CSV: need at least two rows");
  const double dt = (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (std::abs(ts[k] - (ts.front() + static_cast<double>(k) * dt)) > 1e-9 * std::max(1.0, std::abs(ts[k])))
      throw std::runtime_error("path CSV: grid is not uniform");
  RowMatrix v(static_cast<Eigen::Index>(ts.size()), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < ts.size(); ++k)
    for (std::size_t j = 0; j < n; ++j) v(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = vals[k * n + j];
  return DiscretePath(ts.front(), dt, std::move(v));
}

DiscretePath read_path_csv(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open " + file);
  return read_path_csv(is);
}

}  // namespace fbmrds

#include "fbmrds/fbm_gen.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace fbmrds {

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u, W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += W0;
      k[1] += W1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) { return splitmix64(root ^ splitmix64(index)); }

GaussianStream::GaussianStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t purpose)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream), purpose_(purpose) {}

double GaussianStream::uniform(std::uint64_t index) const {
  const std::uint64_t block = index >> 1;
  const auto r = philox4x32_10({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), stream_, purpose_}, key_);
  const std::uint64_t bits = (index & 1u) ? (static_cast<std::uint64_t>(r[3]) << 32 | r[2])
                                          : (static_cast<std::uint64_t>(r[1]) << 32 | r[0]);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianStream::normal(std::uint64_t index) const {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * uniform(index));
}

void GaussianStream::fill_normal(double* out, std::size_t count, std::uint64_t first) const {
  for (std::size_t i = 0; i < count; ++i) out[i] = normal(first + i);
}

void FbmConfig::validate() const {
  if (!(H > 0.5 && H < 1.0)) throw std::invalid_argument("Hurst parameter H must lie in (1/2, 1)");
  if (m < 2) throw std::invalid_argument("fBm grid needs m >= 2");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("fBm grid step must be positive");
  const double x = -t0 / dt;
  if (t0 > 0.0 || t_end() < 0.0 || std::abs(x - std::round(x)) > 1e-9 * std::max(1.0, std::abs(x)))
    throw std::invalid_argument("fBm grid must contain time 0 as a grid point");
}

TraceClassQ::TraceClassQ(std::vector<double> eigenvalues) : q(std::move(eigenvalues)) {
  if (q.empty()) throw std::invalid_argument("covariance Q needs at least one mode");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0) || !std::isfinite(q[i])) throw std::invalid_argument("eigenvalues of Q must be positive");
    if (i > 0 && q[i] > q[i - 1]) throw std::invalid_argument("eigenvalues of Q must be non-increasing");
  }
}

double TraceClassQ::trace() const { return std::accumulate(q.begin(), q.end(), 0.0); }

TraceClassQ TraceClassQ::power_law(std::size_t n, double trace, double decay) {
  if (n == 0) throw std::invalid_argument("covariance Q needs at least one mode");
  if (!(trace > 0.0)) throw std::invalid_argument("trace of Q must be positive");
  std::vector<double> q(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += q[i] = std::pow(static_cast<double>(i + 1), -decay);
  for (double& x : q) x *= trace / s;
  return TraceClassQ(std::move(q));
}

double fbm_covariance(double H, double s, double t) {
  const double h2 = 2.0 * H;
  return 0.5 * (std::pow(std::abs(t), h2) + std::pow(std::abs(s), h2) - std::pow(std::abs(t - s), h2));
}

namespace {

double fgn_autocov(double H, double dt, std::size_t k) {
  const double h2 = 2.0 * H, x = static_cast<double>(k);
  const double v = std::pow(x + 1.0, h2) - 2.0 * std::pow(x, h2) + (k ? std::pow(x - 1.0, h2) : 1.0);
  return 0.5 * std::pow(dt, h2) * v;
}

void validate_factor(const Eigen::MatrixXd& L, double H, double dt) {
  const auto m = static_cast<std::size_t>(L.rows());
  const double scale = fgn_autocov(H, dt, 0);
  auto check = [&](std::size_t i, std::size_t j) {
    const std::size_t len = std::min(i, j) + 1;
    const double v = L.row(static_cast<Eigen::Index>(i)).head(static_cast<Eigen::Index>(len))
                         .dot(L.row(static_cast<Eigen::Index>(j)).head(static_cast<Eigen::Index>(len)));
    const double ref = fgn_autocov(H, dt, i > j ? i - j : j - i);
    if (std::abs(v - ref) > 1e-10 * scale) {
      std::ostringstream os;
      os << "Cholesky factor fails validation at (" << i << "," << j << "): " << v << " vs " << ref;
      throw std::runtime_error(os.str());
    }
  };
  if (m <= 384) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j <= i; ++j) check(i, j);
  } else {
    std::uint64_t x = 0x1234567u + m;
    for (int s = 0; s < 4096; ++s) {
      x = splitmix64(x);
      const std::size_t i = x % m;
      x = splitmix64(x);
      check(i, x % (i + 1));
    }
    for (std::size_t i = 0; i < m; ++i) check(i, i);
  }
}

}  // namespace

const Eigen::MatrixXd& fgn_cholesky(double H, double dt, std::size_t m) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, std::size_t>, Eigen::MatrixXd> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_tuple(H, dt, m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  const auto M = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd C(M, M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) C(i, j) = fgn_autocov(H, dt, static_cast<std::size_t>(std::abs(i - j)));
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-14 * fgn_autocov(H, dt, 0);
    C.diagonal().array() += jitter;
    llt.compute(C);
    if (llt.info() != Eigen::Success) {
      const double mineig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      std::ostringstream os;
      os << "fBm covariance not positive definite after regularization (H=" << H << ", m=" << m
         << ", smallest eigenvalue " << mineig << ")";
      throw std::runtime_error(os.str());
    }
  }
  Eigen::MatrixXd L = llt.matrixL();
  validate_factor(L, H, dt);
  return cache.emplace(key, std::move(L)).first->second;
}

namespace {

Eigen::VectorXd sample_mode(const FbmConfig& cfg, std::uint32_t mode, const Eigen::MatrixXd& L) {
  const auto m = static_cast<Eigen::Index>(cfg.m);
  Eigen::VectorXd z(m);
  GaussianStream(cfg.seed, mode, kPurposeFbm).fill_normal(z.data(), cfg.m);
  const Eigen::VectorXd inc = L.triangularView<Eigen::Lower>() * z;
  Eigen::VectorXd x(m + 1);
  x[0] = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) x[k + 1] = x[k] + inc[k];
  const auto i0 = static_cast<Eigen::Index>(std::llround(-cfg.t0 / cfg.dt));
  x.array() -= x[i0];
  x[i0] = 0.0;
  return x;
}

}  // namespace

DiscretePath sample_fbm_1d(const FbmConfig& cfg) {
  cfg.validate();
  const auto& L = fgn_cholesky(cfg.H, cfg.dt, cfg.m);
  RowMatrix v = sample_mode(cfg, 0, L);
  return DiscretePath(cfg.t0, cfg.dt, std::move(v));
}

DiscretePath sample_fbm_hilbert(const FbmConfig& cfg, const TraceClassQ& Q) {
  cfg.validate();
  if (Q.dim() == 0) throw std::invalid_argument("covariance Q needs at least one mode");
  const auto& L = fgn_cholesky(cfg.H, cfg.dt, cfg.m);
  RowMatrix v(static_cast<Eigen::Index>(cfg.m + 1), static_cast<Eigen::Index>(Q.dim()));
  for (std::size_t j = 0; j < Q.dim(); ++j)
    v.col(static_cast<Eigen::Index>(j)) = std::sqrt(Q.q[j]) * sample_mode(cfg, static_cast<std::uint32_t>(j), L);
  return DiscretePath(cfg.t0, cfg.dt, std::move(v));
}

HolderProbeReport holder_exponent_probe(const DiscretePath& path, double exponent, std::size_t levels) {
  HolderProbeReport rep{exponent, {}, {}, {}};
  if (levels == 0) levels = 1;
  for (std::size_t l = levels; l-- > 0;) {
    const std::size_t stride = std::size_t{1} << l;
    if (path.steps() % stride != 0 || path.steps() / stride < 1) continue;
    const DiscretePath c = path.coarsen(stride);
    rep.steps.push_back(c.steps());
    rep.seminorm.push_back(holder_seminorm(c, exponent));
  }
  for (std::size_t k = 1; k < rep.seminorm.size(); ++k)
    rep.ratio.push_back(rep.seminorm[k - 1] > 0.0 ? rep.seminorm[k] / rep.seminorm[k - 1] : 0.0);
  return rep;
}

HolderProbeReport holder_exponent_probe(const DiscretePath& path, const HolderParams& hp, std::size_t levels) {
  return holder_exponent_probe(path, hp.beta_dprime, levels);
}

}  // namespace fbmrds

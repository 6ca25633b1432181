#pragma once

#include "fbmrds/holder_paths.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace fbmrds {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// SplitMix64 finalizer; used to derive child seeds from a root seed.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

// Standard normals addressed by index. Stream layout: key = seed, counter = (block lo, block hi, stream, purpose).
// Each Philox block yields two 53-bit uniforms, mapped through the inverse normal CDF.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t purpose);
  double uniform(std::uint64_t index) const;  // in (0, 1)
  double normal(std::uint64_t index) const;
  void fill_normal(double* out, std::size_t count, std::uint64_t first = 0) const;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_, purpose_;
};

enum StreamPurpose : std::uint32_t { kPurposeFbm = 0, kPurposeInitial = 1, kPurposeTest = 2 };

struct FbmConfig {
  double H = 0.75;
  double t0 = 0.0;
  double dt = 1.0 / 256.0;
  std::size_t m = 256;
  std::uint64_t seed = 1;

  // H in (1/2, 1), m >= 2, dt > 0, and time 0 is a grid point.
  void validate() const;
  double t_end() const { return t0 + static_cast<double>(m) * dt; }
};

struct TraceClassQ {
  std::vector<double> q;

  TraceClassQ() = default;
  explicit TraceClassQ(std::vector<double> eigenvalues);
  double trace() const;
  std::size_t dim() const { return q.size(); }
  // q_i proportional to i^-decay, scaled to the given trace.
  static TraceClassQ power_law(std::size_t n, double trace, double decay = 2.0);
};

double fbm_covariance(double H, double s, double t);

// Exact sampler: Cholesky of the fractional Gaussian noise covariance, cumulative sums, then re-based so
// that the value at time 0 is exactly 0. Mode j uses stream j.
DiscretePath sample_fbm_1d(const FbmConfig& cfg);
DiscretePath sample_fbm_hilbert(const FbmConfig& cfg, const TraceClassQ& Q);

// Lower Cholesky factor of the increment covariance for (H, dt, m); cached and validated entrywise.
const Eigen::MatrixXd& fgn_cholesky(double H, double dt, std::size_t m);

struct HolderProbeReport {
  double exponent;
  std::vector<std::size_t> steps;    // coarse to fine
  std::vector<double> seminorm;      // seminorm at each level
  std::vector<double> ratio;         // seminorm[k+1] / seminorm[k] (0 when the coarse seminorm vanishes)
};
// Seminorm of the path and its dyadic coarsenings; the finest level is the path itself.
HolderProbeReport holder_exponent_probe(const DiscretePath& path, double exponent, std::size_t levels = 3);
HolderProbeReport holder_exponent_probe(const DiscretePath& path, const HolderParams& hp, std::size_t levels = 3);

}  // namespace fbmrds

#pragma once

// Pointwise sampling of the Wiener increments I_h dW on a uniform grid.
//
// Stationary Gaussian vectors are drawn by circulant embedding (one complex
// FFT yields two independent fields); weights are applied afterwards, which is
// exact because q(x,y) = w(x) q_s(x-y) w(y) factorizes through nodal values.
// A dense Cholesky sampler is kept as an oracle and fallback.

#include "heidih/kernels.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace heidih::noise {

/// Uniform grid x_j = j h on [0, D], j = 0..N.
class NoiseGrid {
 public:
  NoiseGrid(double length, std::size_t intervals);

  double length() const { return length_; }
  std::size_t intervals() const { return intervals_; }
  std::size_t node_count() const { return intervals_ + 1; }
  double h() const { return length_ / static_cast<double>(intervals_); }
  // Last node is exactly D.
  double node(std::size_t j) const;
  std::vector<double> nodes() const;

  friend bool operator==(const NoiseGrid&, const NoiseGrid&) = default;

 private:
  double length_;
  std::size_t intervals_;
};

/// Independent random lanes derived from one master seed.
enum class Lane : std::uint64_t { Wiener = 0, Beta = 1, Auxiliary = 2 };

/// Gaussian source bound to one (master seed, sample index, lane) triple.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Maps (master seed, sample index, lane) to a generator state through a
/// SplitMix64 finalizer, so a sample's noise does not depend on which worker
/// runs it or in what order.
class SeedPolicy {
 public:
  explicit SeedPolicy(std::uint64_t master_seed) : master_(master_seed) {}

  std::uint64_t master_seed() const { return master_; }
  std::uint64_t derive(std::uint64_t sample_index, Lane lane) const;
  RandomStream stream(std::uint64_t sample_index, Lane lane) const {
    return RandomStream(derive(sample_index, lane));
  }

 private:
  std::uint64_t master_;
};

struct CirculantOptions {
  int max_doublings = 8;
  double tolerance = 1e-8;  // allowed clipped negative mass / sum |lambda|
};

/// Spectral state for O(M log M) sampling of a stationary Gaussian vector
/// with covariance q_s((i - j) h), i, j = 0..N. Immutable and shareable.
class CirculantSampler {
 public:
  static CirculantSampler build(const kernels::MaternParams& stationary, double h,
                                std::size_t intervals, CirculantOptions options = {});
  static CirculantSampler build(const std::function<double(double)>& stationary, double h,
                                std::size_t intervals, CirculantOptions options = {});

  std::size_t intervals() const;
  std::size_t embedding_size() const;
  /// Eigenvalues of the embedded circulant after clipping (all >= 0).
  std::span<const double> spectrum() const;
  double clip_mass() const;
  /// clip_mass / sum |lambda| before clipping.
  double clip_fraction() const;

  /// First row of the covariance actually sampled, lags 0..N.
  std::vector<double> induced_covariance() const;

  struct Impl;
  const Impl& impl() const { return *impl_; }

 private:
  explicit CirculantSampler(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Per-sample draw state: FFT scratch plus the buffered second field.
class StationaryStream {
 public:
  explicit StationaryStream(const CirculantSampler& sampler);
  ~StationaryStream();
  StationaryStream(StationaryStream&&) noexcept;
  StationaryStream& operator=(StationaryStream&&) noexcept;
  StationaryStream(const StationaryStream&) = delete;
  StationaryStream& operator=(const StationaryStream&) = delete;

  /// Writes N+1 values with covariance q_s((i - j) h).
  void draw(RandomStream& rng, std::span<double> out);

  /// Drops the buffered second field so the next draw starts fresh.
  void reset() { have_spare_ = false; }

  const CirculantSampler& sampler() const { return sampler_; }
  std::size_t node_count() const { return sampler_.intervals() + 1; }

  /// Seconds spent inside FFT execution so far.
  double fft_seconds() const { return fft_seconds_; }
  std::size_t transforms() const { return transforms_; }

 private:
  CirculantSampler sampler_;
  struct Scratch;
  std::unique_ptr<Scratch> scratch_;
  std::vector<double> spare_;
  bool have_spare_ = false;
  double fft_seconds_ = 0.0;
  std::size_t transforms_ = 0;
};

std::vector<double> sample_stationary(StationaryStream& stream, RandomStream& rng);

/// Kernel + grid + circulant sampler + tabulated nodal weights.
class IncrementModel {
 public:
  static IncrementModel build(const kernels::KernelSpec& spec, const NoiseGrid& grid,
                              CirculantOptions options = {});

  const kernels::KernelSpec& spec() const { return spec_; }
  const NoiseGrid& grid() const { return grid_; }
  const CirculantSampler& sampler() const { return sampler_; }
  std::span<const double> weights() const { return weights_; }

  /// k * w_i w_j q_ind(|i - j|): the covariance actually sampled.
  Eigen::MatrixXd induced_covariance_matrix(double k) const;

 private:
  IncrementModel(kernels::KernelSpec spec, NoiseGrid grid, CirculantSampler sampler,
                 std::vector<double> weights)
      : spec_(std::move(spec)),
        grid_(grid),
        sampler_(std::move(sampler)),
        weights_(std::move(weights)) {}

  kernels::KernelSpec spec_;
  NoiseGrid grid_;
  CirculantSampler sampler_;
  std::vector<double> weights_;
};

/// Nodal values of I_h dW over one step of length k:
///   out_j = sqrt(k) w(x_j) z_j,  z stationary with covariance q_s.
void sample_increment(const IncrementModel& model, double k, StationaryStream& stream,
                      RandomStream& rng, std::span<double> out);
std::vector<double> sample_increment(const IncrementModel& model, double k,
                                     StationaryStream& stream, RandomStream& rng);

/// Dense O(N^3) sampler with exact covariance; adds a 1e-12 * max diag ridge
/// when the plain factorization fails.
class CholeskySampler {
 public:
  static CholeskySampler build(const kernels::KernelSpec& spec, const NoiseGrid& grid);
  static CholeskySampler from_matrix(const Eigen::MatrixXd& covariance);

  /// Lower factor L with L L^T = covariance (+ ridge).
  const Eigen::MatrixXd& factor() const { return factor_; }
  double ridge() const { return ridge_; }

  void draw(double k, RandomStream& rng, std::span<double> out) const;

 private:
  CholeskySampler(Eigen::MatrixXd factor, double ridge)
      : factor_(std::move(factor)), ridge_(ridge) {}
  Eigen::MatrixXd factor_;
  double ridge_;
};

std::vector<double> cholesky_sample(const kernels::KernelSpec& spec, const NoiseGrid& grid,
                                    double k, RandomStream& rng);

/// Every ratio-th nodal value; requires (values.size() - 1) % ratio == 0.
std::vector<double> restrict_to_coarse(std::span<const double> values, std::size_t ratio);

/// Sums consecutive groups of `ratio` increments.
std::vector<std::vector<double>> aggregate_time(const std::vector<std::vector<double>>& increments,
                                                std::size_t ratio);

// Binary dumps: 32-byte header (4-byte magic, u32 version, u64 nodes per row,
// u64 rows, u64 reserved) followed by rows * nodes little-endian doubles.
inline constexpr std::string_view kNoiseMagic = "HDWN";
inline constexpr std::string_view kPathMagic = "HDYP";
inline constexpr std::uint32_t kDumpVersion = 1;

struct DumpData {
  std::string magic;
  std::uint32_t version = 0;
  std::size_t nodes = 0;
  std::size_t rows = 0;
  std::vector<double> values;  // row-major rows x nodes
};

void write_dump(const std::filesystem::path& path, std::string_view magic, std::size_t nodes,
                std::size_t rows, std::span<const double> values);
DumpData read_dump(const std::filesystem::path& path);

}  // namespace heidih::noise

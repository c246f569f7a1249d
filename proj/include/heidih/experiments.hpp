#pragma once

// Monte Carlo convergence studies.
//
// All resolutions of one sample are advanced in lockstep from a single draw of
// reference-grid noise: coarse grids take every ratio-th nodal value, coarse
// time steps sum consecutive increments. Per-point sums of squared
// differences are accumulated in fixed-size sample batches and reduced in
// batch order, so results do not depend on the number of workers.

#include "heidih/kernels.hpp"
#include "heidih/price_fd.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace heidih::experiments {

enum class StudyKind { SpatialY, TemporalY, PriceGrid, Holder, Localization, Timing };

std::string to_string(StudyKind kind);
std::optional<StudyKind> parse_study_kind(std::string_view name);

enum class GridRule { Equal, SquareRoot };  // h = k, h = sqrt(k)

std::string to_string(GridRule rule);
std::optional<GridRule> parse_grid_rule(std::string_view name);
/// Spatial level for time level l under the rule: l or ceil(l / 2).
int space_level(GridRule rule, int time_level);

struct Threshold {
  std::string study;
  std::string param;
  double min = -1e300;
  double max = 1e300;
};

enum class InitialKind { Zero, Sine };

struct StudyConfig {
  StudyKind kind = StudyKind::SpatialY;

  // Kernel family: one Matérn per smoothness index s_W = nu + 1/2.
  std::vector<double> smoothness = {0.55, 1.0};
  double mu = 1.0;
  double zeta = 1.0;
  kernels::WeightFn weight = kernels::WeightFn::constant_one();

  double a = 0.05;
  double T = 1.0;
  double D = 1.0;  // <= 0 selects choose_domain
  double domain_target = 1e-8;

  InitialKind initial = InitialKind::Zero;
  double initial_amplitude = 1.0;
  int initial_mode = 1;

  // Resolutions are dyadic exponents: step = 2^-level.
  int reference_level = 8;  // refined quantity
  int fixed_level = 10;     // the other step, held fixed
  std::vector<int> ladder = {3, 4, 5, 6};

  // price-grid and timing
  std::vector<GridRule> rules = {GridRule::Equal, GridRule::SquareRoot};
  double scaling = 1.0;

  // holder
  std::vector<double> probes = {0.25, 0.5, 0.75};
  std::vector<int> separation_levels = {3, 4, 5, 6, 7};
  double holder_start = 0.25;  // pairs start at t >= holder_start

  // localization
  std::vector<double> domains = {1.0, 1.25, 1.5, 1.75, 2.0, 2.5};
  double reference_domain = 3.0;
  double probe = 0.5;
  double noise_floor = 1e-13;

  // timing
  int repeats = 3;

  std::size_t samples = 100;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::size_t batch = 8;
  bool coupled = true;
  bool record_timings = false;

  std::vector<Threshold> thresholds;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct ErrorRow {
  std::string study;
  std::string param;
  double resolution = 0.0;
  double error = 0.0;
  double stderr_ = 0.0;
  double wall_s = 0.0;
};

struct RateFit {
  std::string study;
  std::string param;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::size_t points_used = 0;
  bool dropped_coarsest = false;
};

struct StudyResult {
  std::vector<ErrorRow> errors;
  std::vector<RateFit> rates;
  /// Extra per-configuration measurements (timing study only): rule, k, h, wall_s, fft_share.
  struct Timing {
    GridRule rule;
    double k;
    double h;
    double wall_s;
    double fft_share;
  };
  std::vector<Timing> timings;
};

/// Ordinary least squares of log2(error) on log2(resolution); positive slope
/// means convergence. With 4 or more points the coarsest one (largest
/// resolution) is dropped when it deviates from the fit of the others by more
/// than 3 * max(rms residual, 0.02) in log2 units.
RateFit fit_rate(std::span<const double> resolution, std::span<const double> error,
                 bool guard = true);

/// Plain least squares of y on x: slope, intercept, rms residual.
struct LineFit {
  double slope;
  double intercept;
  double residual;
};
LineFit least_squares(std::span<const double> x, std::span<const double> y);

/// Sums of a per-point quantity and its square over samples.
class PointAccumulator {
 public:
  explicit PointAccumulator(std::size_t points = 0) : sum_(points, 0.0), sum_sq_(points, 0.0) {}
  std::size_t size() const { return sum_.size(); }
  void add(std::size_t point, double value) {
    sum_[point] += value;
    sum_sq_[point] += value * value;
  }
  void merge(const PointAccumulator& other);
  double sum(std::size_t point) const { return sum_[point]; }
  double sum_sq(std::size_t point) const { return sum_sq_[point]; }

 private:
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

/// max over points of sqrt(mean), with the delta-method standard error at the
/// arg-max point. Values fed to the accumulator are squared differences.
struct PointwiseError {
  double error = 0.0;
  double stderr_ = 0.0;
  std::size_t argmax = 0;
};
PointwiseError max_rms(const PointAccumulator& acc, std::size_t samples);

/// Runs body(batch_index, first_sample, last_sample) for every batch of
/// `batch` consecutive samples on `workers` threads. Each batch writes only to
/// its own slot, so the caller can reduce in batch order.
void for_each_batch(std::size_t samples, std::size_t batch, std::size_t workers,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

/// Number of workers from HEIDIH_WORKERS, or `fallback` if unset or invalid.
std::size_t workers_from_env(std::size_t fallback);

/// One coarse level of a lockstep Y simulation, relative to the reference grid.
struct Level {
  std::size_t space_ratio = 1;  // h_level / h_ref
  std::size_t time_ratio = 1;   // k_level / k_ref
};

/// Mean pointwise RMS error of each level against level 0 (the reference),
/// over shared nodes and shared time points. Levels must satisfy the
/// divisibility conditions. Used by the spatial and temporal studies.
std::vector<PointwiseError> mc_pointwise_error(const StudyConfig& config,
                                               const kernels::KernelSpec& spec, double D,
                                               std::size_t ref_intervals, double ref_k,
                                               std::size_t ref_steps,
                                               const std::vector<Level>& levels);

/// As above for the price lattice: level l has time ratio and space ratio
/// relative to the reference; errors over shared lattice points.
std::vector<PointwiseError> mc_price_error(const StudyConfig& config,
                                           const kernels::KernelSpec& spec, double D,
                                           std::size_t ref_intervals, double ref_k,
                                           std::size_t ref_steps,
                                           const std::vector<Level>& levels);

StudyResult spatial_study(const StudyConfig& config);
StudyResult temporal_study(const StudyConfig& config);
StudyResult price_grid_study(const StudyConfig& config);
StudyResult holder_study(const StudyConfig& config);
StudyResult localization_study(const StudyConfig& config);
StudyResult timing_study(const StudyConfig& config);
StudyResult run_study(const StudyConfig& config);

/// Kernel for a given smoothness index under the config's mu, zeta, weight.
kernels::KernelSpec kernel_for(const StudyConfig& config, double smoothness);
/// "s_W=0.55" and, for grid rules, "s_W=0.55|h=sqrt(k)".
std::string param_label(double smoothness);
std::string param_label(double smoothness, GridRule rule);

/// Deterministic heat decay from an eigenmode against the sine-series
/// reference, in the max norm over nodes and time levels.
struct OrderSweep {
  std::vector<double> steps;
  std::vector<double> errors;
  double order = 0.0;  // least-squares slope of log error vs log step
};
OrderSweep fem_temporal_order(double a, double D, double T, int h_level,
                              const std::vector<int>& k_levels);
OrderSweep fem_spatial_order(double a, double D, double T, int k_level,
                             const std::vector<int>& h_levels);

/// Both sides of the error decomposition at one lattice point, estimated over
/// matched samples: E|X_fine - X_coarse|^2 directly and through the volatility
/// difference integral.
struct DecompositionCheck {
  double direct = 0.0;
  double direct_stderr = 0.0;
  double rhs = 0.0;
  double rhs_stderr = 0.0;
  double combined_stderr = 0.0;  // stderr of the paired difference
};
DecompositionCheck decomposition_check(const kernels::KernelSpec& spec, double a, double T,
                                       int coarse_level, int fine_level, double D,
                                       double scaling, std::size_t n, std::size_t j,
                                       std::size_t samples, std::uint64_t seed);

}  // namespace heidih::experiments

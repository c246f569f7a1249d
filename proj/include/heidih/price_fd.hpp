#pragma once

// Forward-price lattice with equal steps in time and maturity. The drift part
// (the initial curve transported along characteristics) is evaluated exactly;
// only the stochastic part S is propagated:
//
//   S[i+1][j] = S[i][j+1] + s * Y(t_i, x_j) * dbeta_i,   X = f(x + t) + b + S.

#include "heidih/heat_fem.hpp"
#include "heidih/noise.hpp"

#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace heidih::price {

/// X(0) = smooth_part + level.
class InitialCurve {
 public:
  InitialCurve() = default;
  InitialCurve(std::function<double(double)> smooth_part, double level,
               double range = std::numeric_limits<double>::infinity());
  static InitialCurve flat(double level) { return InitialCurve({}, level); }

  double smooth(double x) const { return smooth_ ? smooth_(x) : 0.0; }
  double level() const { return level_; }
  double range() const { return range_; }

 private:
  std::function<double(double)> smooth_;
  double level_ = 0.0;
  double range_ = std::numeric_limits<double>::infinity();
};

/// f(x + t) + b; throws DomainError when x + t leaves the curve's range.
double shift_eval(const InitialCurve& curve, double t, double x);

class PriceGrid {
 public:
  PriceGrid(double T, double k);

  double T() const { return T_; }
  double k() const { return k_; }
  std::size_t steps() const { return steps_; }
  double t(std::size_t i) const { return static_cast<double>(i) * k_; }
  double x(std::size_t j) const { return static_cast<double>(j) * k_; }
  /// Smallest volatility domain the lattice reaches: 2T - k.
  double required_domain() const { return 2.0 * T_ - k_; }

 private:
  double T_;
  double k_;
  std::size_t steps_;
};

/// X[i][j] for i, j = 0..N_k.
class XPath {
 public:
  XPath(const PriceGrid& grid, double scaling);

  const PriceGrid& grid() const { return grid_; }
  double scaling() const { return scaling_; }
  std::size_t size() const { return grid_.steps() + 1; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * size() + j]; }
  std::span<const double> values() const { return values_; }

  std::uint64_t seed = 0;          // master seed of the W and beta lanes
  std::uint64_t sample_index = 0;

 private:
  PriceGrid grid_;
  double scaling_;
  std::vector<double> values_;
};

/// N_k iid N(0, k) increments.
std::vector<double> beta_increments(noise::RandomStream& rng, std::size_t steps, double k);

/// Streaming form of the recursion: feed volatility rows t_0, t_1, ... and
/// read X at the current time level for maturities x_0..x_{N_k}.
class PriceStepper {
 public:
  PriceStepper(const PriceGrid& grid, const InitialCurve& curve, double scaling, double y_domain);

  /// Uses nodal volatility at t_i on a uniform grid of [0, y_domain].
  void advance(std::span<const double> y_nodal, double dbeta);
  std::size_t time_index() const { return i_; }
  double stochastic(std::size_t j) const { return s_[j]; }
  double value(std::size_t j) const;

 private:
  PriceGrid grid_;
  InitialCurve curve_;
  double scaling_;
  double y_domain_;
  std::size_t i_ = 0;
  std::vector<double> s_;
  std::vector<double> next_;
};

/// Recursion on the lattice; requires ypath domain >= 2T - k and a time step equal to k.
XPath solve_x(const PriceGrid& grid, const InitialCurve& curve, double scaling,
              const fem::YPath& ypath, std::span<const double> beta);

/// X[n][j] = shift_eval(t_n, x_j) + s sum_{i<n} Y(t_i, x_j + t_n - t_{i+1}) dbeta_i.
XPath closed_form_x(const PriceGrid& grid, const InitialCurve& curve, double scaling,
                    const fem::YPath& ypath, std::span<const double> beta);

/// One-sample integrand of the error decomposition at lattice point (n, j):
///
///   s^2 sum_l k_f |Y_f(r_l, T* - r_{l+1}) - Yc(t_i, T* - t_{i+1})|^2,  T* = t_n + x_j,
///
/// where r_l runs over the fine time grid of `fine` and t_i is the coarse
/// step containing r_l. Averaging over matched samples estimates E|X - Xc|^2.
double error_decomposition_rhs(const fem::YPath& fine, const fem::YPath& coarse,
                               const PriceGrid& grid, double scaling, std::size_t n,
                               std::size_t j);

/// Columns t,x,value; one row per lattice point.
void write_xpath_csv(const std::filesystem::path& path, const XPath& x);

}  // namespace heidih::price

#pragma once

// Linear finite elements on (0, D) with homogeneous Dirichlet conditions and
// backward Euler in time:
//
//   (M + k K) y_{n+1} = M y_n + b_n,   b_n = <I_h dW_n, phi_j>
//
// Only interior nodes 1..N-1 are unknowns; all matrices are tridiagonal with
// constant diagonals on the uniform grid.

#include "heidih/noise.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace heidih::fem {

/// LU factors of a constant-coefficient symmetric tridiagonal matrix.
class TridiagonalFactor {
 public:
  TridiagonalFactor() = default;
  TridiagonalFactor(std::size_t n, double diag, double off);

  std::size_t size() const { return inv_pivot_.size(); }
  /// Overwrites rhs with the solution.
  void solve_in_place(std::span<double> rhs) const;

 private:
  double off_ = 0.0;
  std::vector<double> inv_pivot_;
  std::vector<double> upper_;  // off / pivot
};

class FemSystem {
 public:
  static FemSystem assemble(const noise::NoiseGrid& grid, double a, double k);

  const noise::NoiseGrid& grid() const { return grid_; }
  double a() const { return a_; }
  double k() const { return k_; }
  double h() const { return grid_.h(); }
  std::size_t interior_count() const { return grid_.intervals() - 1; }

  double mass_diag() const { return 4.0 * h() / 6.0; }
  double mass_off() const { return h() / 6.0; }
  double stiffness_diag() const { return 2.0 * a_ / h(); }
  double stiffness_off() const { return -a_ / h(); }

  /// Dense interior matrices, for checks.
  Eigen::MatrixXd mass_matrix() const;
  Eigen::MatrixXd stiffness_matrix() const;

  /// Mass stencil (h/6)(w_{j-1} + 4 w_j + w_{j+1}) for interior j, using the
  /// full nodal vector including boundary values.
  void load_vector(std::span<const double> noise_nodal, std::span<double> out) const;
  std::vector<double> load_vector(std::span<const double> noise_nodal) const;

  /// Solves (M + kK) out = M y + load.
  void step(std::span<const double> y, std::span<const double> load, std::span<double> out) const;
  std::vector<double> step(std::span<const double> y, std::span<const double> load) const;

  /// Solves (M + kK) z = b in place.
  void solve_system(std::span<double> rhs) const { system_.solve_in_place(rhs); }

  /// L2 projection of y0 onto the interior hat functions; 4-point
  /// Gauss-Legendre per cell for the right-hand side.
  std::vector<double> project(const std::function<double(double)>& y0) const;

 private:
  FemSystem(noise::NoiseGrid grid, double a, double k);

  noise::NoiseGrid grid_;
  double a_;
  double k_;
  TridiagonalFactor system_;
  TridiagonalFactor mass_;
};

/// Nodal values Y[i][j], i = 0..steps, j = 0..N, with zero boundary columns.
class YPath {
 public:
  YPath(double length, std::size_t intervals, double k, std::size_t steps);

  double length() const { return length_; }
  std::size_t intervals() const { return intervals_; }
  std::size_t node_count() const { return intervals_ + 1; }
  double h() const { return length_ / static_cast<double>(intervals_); }
  double k() const { return k_; }
  std::size_t steps() const { return steps_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * node_count() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * node_count() + j]; }
  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);
  std::span<const double> values() const { return values_; }

 private:
  double length_;
  std::size_t intervals_;
  double k_;
  std::size_t steps_;
  std::vector<double> values_;
};

/// Piecewise linear interpolation of nodal values on a uniform grid of [0, D].
double interpolate(std::span<const double> nodal, double length, double x);

/// Y(t_i, x) from the piecewise linear interpolant; throws DomainError off [0, D].
double eval_pointwise(const YPath& path, std::size_t i, double x);

/// Writes the nodal increment for step i (length N+1) into the span.
using NoiseSource = std::function<void(std::size_t, std::span<double>)>;

/// Advances one sample path step by step without storing history.
class Integrator {
 public:
  Integrator(const FemSystem& system, std::vector<double> initial_interior);
  Integrator(const FemSystem& system, const std::function<double(double)>& y0);

  void advance(std::span<const double> noise_nodal);
  std::span<const double> interior() const { return state_; }
  /// Full nodal state with zero boundary values.
  void nodal(std::span<double> out) const;
  std::vector<double> nodal() const;
  std::size_t steps_taken() const { return steps_; }

 private:
  const FemSystem* system_;
  std::vector<double> state_;
  std::vector<double> load_;
  std::vector<double> next_;
  std::size_t steps_ = 0;
};

/// Y[0] = projection of y0 (empty function means zero), then `steps` backward
/// Euler steps with increments drawn from the source.
YPath solve_path(const FemSystem& system, const std::function<double(double)>& y0,
                 const NoiseSource& noise_source, std::size_t steps);

/// Source drawing pointwise increments from the model with the system's step.
NoiseSource increment_source(const noise::IncrementModel& model, double k,
                             noise::StationaryStream& stream, noise::RandomStream& rng);

void write_path_dump(const std::filesystem::path& path, const YPath& y);
YPath read_path_dump(const std::filesystem::path& path, double length, double k);

}  // namespace heidih::fem

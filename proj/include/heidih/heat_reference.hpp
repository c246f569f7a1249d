#pragma once

// Reference evaluators for the heat semigroup: sine series on (0, D) with
// Dirichlet conditions, the reflection formula on the half-line, and the
// Gaussian localization factor used to size D.

#include <functional>
#include <limits>
#include <vector>

namespace heidih::reference {

using Function = std::function<double(double)>;

/// lambda_j = a pi^2 j^2 / D^2
double dirichlet_eigenvalue(double D, double a, std::size_t j);
/// sqrt(2/D) sin(j pi x / D)
double dirichlet_eigenfunction(double D, std::size_t j, double x);

struct SpectralTruncation {
  std::size_t modes = 0;
  double tail_bound = 0.0;  // bound on the omitted part of the series at t_min
};

/// Smallest J whose omitted tail at t_min is <= tolerance, given ||v||_2.
SpectralTruncation choose_truncation(double D, double a, double t_min, double v_norm,
                                     double tolerance = 1e-12, std::size_t max_modes = 1 << 20);

/// Bound on sum_{j>J} e^{-lambda_j t} |<v,e_j>| |e_j(x)| from Cauchy-Schwarz.
double spectral_tail_bound(double D, double a, double t, double v_norm, std::size_t modes);

struct SpectralOptions {
  double tolerance = 1e-12;
  std::size_t cells = 0;  // quadrature cells on (0, D); 0 picks max(256, 4 J)
  std::size_t max_modes = 1 << 20;
};

/// Sine coefficients of v computed once, evaluated at any (t >= t_min, x).
class SpectralReference {
 public:
  /// modes = 0 selects J adaptively for t_min.
  SpectralReference(const Function& v, double D, double a, double t_min, std::size_t modes = 0,
                    SpectralOptions options = {});

  double operator()(double t, double x) const;

  std::size_t modes() const { return coeffs_.size(); }
  const std::vector<double>& coefficients() const { return coeffs_; }
  double l2_norm() const { return v_norm_; }
  SpectralTruncation truncation() const { return {coeffs_.size(), tail_at_t_min_}; }

 private:
  double D_;
  double a_;
  double t_min_;
  double tolerance_;
  double v_norm_ = 0.0;
  double tail_at_t_min_ = 0.0;
  std::vector<double> coeffs_;
};

/// (S_D(t) v)(x) with J sine modes (J = 0 picks adaptively). Throws
/// ToleranceError when the tail bound for the given J exceeds the tolerance.
double spectral_semigroup(const Function& v, double t, double x, double D, double a,
                          std::size_t modes = 0, SpectralOptions options = {});

enum class BoundarySign { Dirichlet = -1, Neumann = 1 };

struct QuadSpec {
  double window_sigmas = 12.0;  // half-width of the window in units of sqrt(2 a t)
  std::size_t cells = 512;      // 8-point Gauss-Legendre cells over the window
  double upper = std::numeric_limits<double>::infinity();  // optional cap on y
};

struct ReflectionValue {
  double value = 0.0;
  double outside_mass = 0.0;  // heat-kernel mass outside the quadrature window
  bool window_warning() const { return outside_mass > 1e-12; }
};

/// int_0^inf (Phi(x-y,t) +- Phi(x+y,t)) v(y) dy, Phi(z,t) = exp(-z^2/(4at))/sqrt(4 pi a t).
ReflectionValue reflection_semigroup(const Function& v, double t, double x, double a,
                                     BoundarySign sign, QuadSpec quad = {});

/// exp(-(D - x)^2 / (8 a T))
double localization_bound(double D, double x, double a, double T);

/// Smallest D >= max(2T - k, x_max) with localization_bound(D, x_max, a, T) <= target,
/// rounded up to a multiple of h when h > 0.
double choose_domain(double T, double k, double a, double x_max, double target, double h = 0.0);

}  // namespace heidih::reference

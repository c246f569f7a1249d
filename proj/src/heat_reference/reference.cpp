#include "heidih/errors.hpp"
#include "heidih/heat_reference.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace heidih::reference {
namespace {

constexpr std::array<double, 8> kNodes = {
    -0.96028985649753623168, -0.79666647741362673959, -0.52553240991632898582,
    -0.18343464249564980494, 0.18343464249564980494,  0.52553240991632898582,
    0.79666647741362673959,  0.96028985649753623168};
constexpr std::array<double, 8> kWeights = {
    0.10122853629037625915, 0.22238103445337447054, 0.31370664587788728734,
    0.36268378337836198297, 0.36268378337836198297, 0.31370664587788728734,
    0.22238103445337447054, 0.10122853629037625915};

template <typename F>
double gauss_composite(const F& f, double lo, double hi, std::size_t cells) {
  if (!(hi > lo)) {
    return 0.0;
  }
  const double width = (hi - lo) / static_cast<double>(cells);
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double mid = lo + (static_cast<double>(c) + 0.5) * width;
    double s = 0.0;
    for (std::size_t q = 0; q < kNodes.size(); ++q) {
      s += kWeights[q] * f(mid + 0.5 * width * kNodes[q]);
    }
    total += 0.5 * width * s;
  }
  return total;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(name) + " must be positive, got " + std::to_string(v));
  }
}

}  // namespace

double dirichlet_eigenvalue(double D, double a, std::size_t j) {
  const double jj = static_cast<double>(j);
  return a * std::numbers::pi * std::numbers::pi * jj * jj / (D * D);
}

double dirichlet_eigenfunction(double D, std::size_t j, double x) {
  return std::sqrt(2.0 / D) * std::sin(static_cast<double>(j) * std::numbers::pi * x / D);
}

double spectral_tail_bound(double D, double a, double t, double v_norm, std::size_t modes) {
  // |<v,e_j>| <= ||v||, |e_j(x)| <= sqrt(2/D); sum the decaying exponentials
  // until they stop contributing.
  double sum = 0.0;
  for (std::size_t j = modes + 1;; ++j) {
    const double term = std::exp(-dirichlet_eigenvalue(D, a, j) * t);
    sum += term;
    if (term <= 1e-17 * sum || term == 0.0) {
      break;
    }
  }
  return v_norm * std::sqrt(2.0 / D) * sum;
}

SpectralTruncation choose_truncation(double D, double a, double t_min, double v_norm,
                                     double tolerance, std::size_t max_modes) {
  require_positive(t_min, "choose_truncation: t_min");
  // Start from the first mode whose own factor is below tolerance, then walk.
  const double guess = D / std::numbers::pi * std::sqrt(std::log(std::max(v_norm, 1.0) / tolerance + 1.0) / (a * t_min));
  std::size_t modes = std::max<std::size_t>(1, static_cast<std::size_t>(guess * 0.5));
  while (modes > 1 && spectral_tail_bound(D, a, t_min, v_norm, modes - 1) <= tolerance) {
    --modes;
  }
  while (spectral_tail_bound(D, a, t_min, v_norm, modes) > tolerance) {
    if (modes >= max_modes) {
      throw ToleranceError("choose_truncation: more than " + std::to_string(max_modes) +
                           " modes needed for t=" + std::to_string(t_min));
    }
    modes = std::min(max_modes, modes + std::max<std::size_t>(1, modes / 8));
  }
  return {modes, spectral_tail_bound(D, a, t_min, v_norm, modes)};
}

SpectralReference::SpectralReference(const Function& v, double D, double a, double t_min,
                                     std::size_t modes, SpectralOptions options)
    : D_(D), a_(a), t_min_(t_min), tolerance_(options.tolerance) {
  require_positive(D, "SpectralReference: D");
  require_positive(a, "SpectralReference: a");
  require_positive(t_min, "SpectralReference: t_min");

  std::size_t cells = options.cells == 0 ? 256 : options.cells;
  v_norm_ = std::sqrt(gauss_composite([&](double y) { return v(y) * v(y); }, 0.0, D, cells));

  if (modes == 0) {
    modes = choose_truncation(D, a, t_min, v_norm_, options.tolerance, options.max_modes).modes;
  }
  tail_at_t_min_ = spectral_tail_bound(D, a, t_min, v_norm_, modes);
  if (tail_at_t_min_ > options.tolerance) {
    throw ToleranceError("spectral reference: tail bound " + std::to_string(tail_at_t_min_) +
                         " exceeds tolerance with " + std::to_string(modes) + " modes at t=" +
                         std::to_string(t_min));
  }

  if (options.cells == 0) {
    cells = std::max<std::size_t>(256, 4 * modes);
  }
  // Tabulate v at the quadrature nodes once; each coefficient is then a dot product.
  const double width = D / static_cast<double>(cells);
  std::vector<double> ys;
  std::vector<double> wv;
  ys.reserve(cells * kNodes.size());
  wv.reserve(cells * kNodes.size());
  for (std::size_t c = 0; c < cells; ++c) {
    const double mid = (static_cast<double>(c) + 0.5) * width;
    for (std::size_t q = 0; q < kNodes.size(); ++q) {
      const double y = mid + 0.5 * width * kNodes[q];
      ys.push_back(y);
      wv.push_back(0.5 * width * kWeights[q] * v(y));
    }
  }
  coeffs_.resize(modes);
  for (std::size_t j = 1; j <= modes; ++j) {
    double s = 0.0;
    for (std::size_t n = 0; n < ys.size(); ++n) {
      s += wv[n] * dirichlet_eigenfunction(D, j, ys[n]);
    }
    coeffs_[j - 1] = s;
  }
}

double SpectralReference::operator()(double t, double x) const {
  if (!(t >= t_min_ * (1.0 - 1e-12))) {
    throw ToleranceError("spectral reference: t=" + std::to_string(t) + " below t_min=" +
                         std::to_string(t_min_));
  }
  // Modes with exp(-lambda_j t) below e^-40 / ||v|| cannot reach the tolerance.
  const double cutoff = 40.0 + std::log(std::max(v_norm_, 1.0));
  const double jmax = D_ / std::numbers::pi * std::sqrt(cutoff / (a_ * t)) + 1.0;
  const std::size_t last = jmax < static_cast<double>(coeffs_.size()) ? static_cast<std::size_t>(jmax)
                                                                       : coeffs_.size();
  double sum = 0.0;
  for (std::size_t j = last; j >= 1; --j) {
    sum += std::exp(-dirichlet_eigenvalue(D_, a_, j) * t) * coeffs_[j - 1] *
           dirichlet_eigenfunction(D_, j, x);
  }
  return sum;
}

double spectral_semigroup(const Function& v, double t, double x, double D, double a,
                          std::size_t modes, SpectralOptions options) {
  require_positive(t, "spectral_semigroup: t");
  return SpectralReference(v, D, a, t, modes, options)(t, x);
}

ReflectionValue reflection_semigroup(const Function& v, double t, double x, double a,
                                     BoundarySign sign, QuadSpec quad) {
  require_positive(t, "reflection_semigroup: t");
  require_positive(a, "reflection_semigroup: a");
  if (!(x >= 0.0)) {
    throw DomainError("reflection_semigroup: x must be nonnegative");
  }
  const double var2 = 4.0 * a * t;
  const double norm = 1.0 / std::sqrt(std::numbers::pi * var2);
  const double sigma = std::sqrt(2.0 * a * t);
  const double half = quad.window_sigmas * sigma;
  const double lo = std::max(0.0, x - half);
  const double hi = std::min(quad.upper, x + half);
  const double s = static_cast<double>(static_cast<int>(sign));

  auto integrand = [&](double y) {
    const double d = x - y;
    const double p = x + y;
    return norm * (std::exp(-d * d / var2) + s * std::exp(-p * p / var2)) * v(y);
  };
  ReflectionValue out;
  out.value = gauss_composite(integrand, lo, hi, quad.cells);
  // Mass of Phi(x - .) outside [lo, hi] on the half-line; the reflected term is
  // smaller pointwise on y >= 0.
  const double root2 = std::sqrt(2.0) * sigma;
  double outside = 0.5 * std::erfc((hi - x) / root2);
  if (lo > 0.0) {
    outside += 0.5 * std::erfc((x - lo) / root2);
  }
  out.outside_mass = 2.0 * outside;
  return out;
}

double localization_bound(double D, double x, double a, double T) {
  require_positive(a, "localization_bound: a");
  require_positive(T, "localization_bound: T");
  if (!(x >= 0.0 && x <= D)) {
    throw DomainError("localization_bound: need 0 <= x <= D");
  }
  const double d = D - x;
  return std::exp(-d * d / (8.0 * a * T));
}

double choose_domain(double T, double k, double a, double x_max, double target, double h) {
  require_positive(T, "choose_domain: T");
  require_positive(a, "choose_domain: a");
  if (!(target > 0.0 && target <= 1.0)) {
    throw DomainError("choose_domain: target must lie in (0, 1]");
  }
  if (!(k >= 0.0) || !(x_max >= 0.0) || !(h >= 0.0)) {
    throw DomainError("choose_domain: k, x_max, h must be nonnegative");
  }
  double D = std::max(2.0 * T - k, x_max);
  if (target < 1.0) {
    D = std::max(D, x_max + std::sqrt(8.0 * a * T * std::log(1.0 / target)));
  }
  if (h > 0.0) {
    D = std::ceil(D / h - 1e-9) * h;
  }
  return D;
}

}  // namespace heidih::reference

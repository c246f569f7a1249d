#include "heidih/errors.hpp"
#include "heidih/kernels.hpp"

#include <cmath>
#include <string>

namespace heidih::kernels {
namespace {

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

// z^nu K_nu(z) normalized so that the value at z = 0 is 1.
double normalized_bessel_product(double nu, double z) {
  if (z == 0.0) {
    return 1.0;
  }
  const double k = bessel_k(nu, z);
  if (std::isinf(k)) {
    return 1.0;
  }
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(z, nu) * k;
}

}  // namespace

void MaternParams::validate() const {
  if (!positive_finite(nu) || !positive_finite(mu) || !positive_finite(zeta)) {
    throw DomainError("MaternParams: nu, mu, zeta must be positive (nu=" + std::to_string(nu) +
                      ", mu=" + std::to_string(mu) + ", zeta=" + std::to_string(zeta) + ")");
  }
}

MaternParams MaternParams::from_smoothness_index(double s_w, double mu, double zeta) {
  MaternParams p{s_w - 0.5, mu, zeta};
  p.validate();
  return p;
}

double matern(const MaternParams& params, double lag) {
  params.validate();
  const double z = std::sqrt(2.0 * params.nu) * std::abs(lag) / params.mu;
  return params.zeta * normalized_bessel_product(params.nu, z);
}

WeightFn WeightFn::constant_one() { return {}; }

WeightFn WeightFn::polynomial(double alpha, double scale) {
  if (!positive_finite(alpha) || !positive_finite(scale)) {
    throw DomainError("WeightFn::polynomial: alpha and scale must be positive");
  }
  return WeightFn(Kind::Polynomial, alpha, scale, 0.0);
}

WeightFn WeightFn::bump(double center, double half_width, double amplitude) {
  if (!std::isfinite(center) || !positive_finite(half_width) || !positive_finite(amplitude)) {
    throw DomainError("WeightFn::bump: half_width and amplitude must be positive");
  }
  return WeightFn(Kind::Bump, center, half_width, amplitude);
}

double WeightFn::operator()(double x) const {
  switch (kind_) {
    case Kind::ConstantOne:
      return 1.0;
    case Kind::Polynomial:
      return b_ * std::pow(1.0 + x * x, -a_);
    case Kind::Bump: {
      const double u = (x - a_) / b_;
      if (std::abs(u) >= 1.0) {
        return 0.0;
      }
      return c_ * std::exp(1.0 - 1.0 / (1.0 - u * u));
    }
  }
  return 0.0;
}

double KernelSpec::operator()(double x, double y) const {
  return weight(x) * weight(y) * matern(stationary, x - y);
}

double kernel_eval(const KernelSpec& spec, double x, double y) { return spec(x, y); }

double sobolev_kernel(const SobolevKernelParams& params, double lag) {
  const double r = params.r;
  if (!(r > 0.5) || !std::isfinite(r)) {
    throw DomainError("sobolev_kernel: smoothness r must exceed 1/2, got " + std::to_string(r));
  }
  const double nu = r - 0.5;
  const double x = std::abs(lag);
  if (x == 0.0) {
    return std::pow(2.0, -0.5) * std::tgamma(nu) / std::tgamma(r);
  }
  const double k = bessel_k(nu, x);
  if (std::isinf(k)) {
    return std::pow(2.0, -0.5) * std::tgamma(nu) / std::tgamma(r);
  }
  return std::pow(2.0, 1.0 - r) / std::tgamma(r) * std::pow(x, nu) * k;
}

double eta_scaling(std::span<const double> points, std::span<const double> coeffs, double r,
                   const KernelSpec& q_b) {
  if (points.empty() || points.size() != coeffs.size()) {
    throw ShapeError("eta_scaling: points and coeffs must be nonempty and of equal length");
  }
  const SobolevKernelParams sobolev{r};
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      const double aa = coeffs[i] * coeffs[j];
      numerator += aa * q_b(points[i], points[j]);
      denominator += aa * (1.0 + sobolev_kernel(sobolev, points[i] - points[j]));
    }
  }
  if (!(denominator > 1e-12)) {
    throw DegenerateFormError("eta_scaling: H^r quadratic form is not positive (" +
                              std::to_string(denominator) + ")");
  }
  return numerator / denominator;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = spec(points[i], points[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      m(i, j) = spec(points[i], points[j]);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

}  // namespace heidih::kernels

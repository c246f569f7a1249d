#pragma once

// Covariance kernels used by the model: Matérn stationary parts, weights,
// weight-stationary kernels q(x,y) = w(x) q_s(x-y) w(y), and the kernel m_r of
// the Sobolev space H^r on the real line.

#include <Eigen/Dense>

#include <span>

namespace heidih::kernels {

/// Modified Bessel function of the second kind K_nu(x) for nu > 0, x > 0.
///
/// Half-integer orders use the terminating closed form. Other orders use
/// Temme's series for x <= 2 and Steed's continued fraction above, followed
/// by forward recurrence in the order. Relative accuracy is close to machine
/// precision for nu <= 5 and 1e-6 <= x <= 700; larger x underflows to 0.
double bessel_k(double nu, double x);

struct MaternParams {
  double nu = 0.5;    // smoothness
  double mu = 1.0;    // correlation length
  double zeta = 1.0;  // variance

  /// Throws DomainError unless nu, mu, zeta are all positive and finite.
  void validate() const;

  /// Sobolev smoothness of the induced noise, s_W = nu + 1/2.
  double smoothness_index() const { return nu + 0.5; }

  static MaternParams from_smoothness_index(double s_w, double mu, double zeta);
};

/// zeta 2^(1-nu)/Gamma(nu) z^nu K_nu(z), z = sqrt(2 nu)|lag|/mu; zeta at lag 0.
double matern(const MaternParams& params, double lag);

class WeightFn {
 public:
  enum class Kind { ConstantOne, Polynomial, Bump };

  WeightFn() = default;

  static WeightFn constant_one();
  /// scale * (1 + x^2)^(-alpha)
  static WeightFn polynomial(double alpha, double scale);
  /// amplitude * exp(1 - 1/(1 - u^2)) for u = (x - center)/half_width in (-1, 1), else 0.
  static WeightFn bump(double center, double half_width, double amplitude);

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  double alpha() const { return a_; }
  double scale() const { return b_; }
  double center() const { return a_; }
  double half_width() const { return b_; }
  double amplitude() const { return c_; }

  friend bool operator==(const WeightFn&, const WeightFn&) = default;

 private:
  WeightFn(Kind kind, double a, double b, double c) : kind_(kind), a_(a), b_(b), c_(c) {}

  Kind kind_ = Kind::ConstantOne;
  double a_ = 0.0;
  double b_ = 1.0;
  double c_ = 1.0;
};

struct KernelSpec {
  MaternParams stationary;
  WeightFn weight;

  double operator()(double x, double y) const;
};

/// w(x) q_s(x - y) w(y)
double kernel_eval(const KernelSpec& spec, double x, double y);

struct SobolevKernelParams {
  double r = 1.0;  // smoothness, must exceed 1/2
};

/// m_r(x) = 2^(1-r)/Gamma(r) |x|^(r-1/2) K_(r-1/2)(|x|), with the analytic
/// limit 2^(-1/2) Gamma(r-1/2)/Gamma(r) at x = 0.
double sobolev_kernel(const SobolevKernelParams& params, double lag);

/// Squared scaling norm of the price noise for eta built from the state-space
/// kernel sections sum_i a_i (1 + m_r(x_i - .)), normalized in H^r + R:
///
///   sum_ij a_i q_B(x_i,x_j) a_j  /  sum_ij a_i (1 + m_r(x_i - x_j)) a_j
///
/// Throws DegenerateFormError if the denominator is <= 1e-12.
double eta_scaling(std::span<const double> points, std::span<const double> coeffs, double r,
                   const KernelSpec& q_b);

/// Dense matrix with entries q(x_i, x_j).
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> points);

}  // namespace heidih::kernels

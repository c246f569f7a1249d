#include "heidih/errors.hpp"
#include "heidih/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

namespace heidih::kernels {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;
constexpr double kSeriesCrossover = 2.0;

// K_(n+1/2)(x) = sqrt(pi/(2x)) e^-x sum_k (n+k)!/(k!(n-k)!) (2x)^-k
double half_integer_bessel_k(int n, double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 0; k < n; ++k) {
    term *= static_cast<double>((n + k + 1) * (n - k)) / (static_cast<double>(k + 1) * 2.0 * x);
    sum += term;
  }
  return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) * sum;
}

// gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu), gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
struct TemmeGammas {
  double gam1;
  double gam2;
  double gampl;  // 1/Gamma(1+mu)
  double gammi;  // 1/Gamma(1-mu)
};

TemmeGammas temme_gammas(double mu) {
  TemmeGammas g{};
  g.gampl = 1.0 / std::tgamma(1.0 + mu);
  g.gammi = 1.0 / std::tgamma(1.0 - mu);
  g.gam2 = 0.5 * (g.gammi + g.gampl);
  if (std::abs(mu) < 1e-3) {
    // Odd Taylor coefficients of 1/Gamma(1+z); avoids the 0/0 cancellation.
    constexpr double c1 = 0.57721566490153286061;
    constexpr double c3 = -0.04200263503409523553;
    constexpr double c5 = -0.04219773455554433675;
    const double mu2 = mu * mu;
    g.gam1 = -(c1 + mu2 * (c3 + mu2 * c5));
  } else {
    g.gam1 = (g.gammi - g.gampl) / (2.0 * mu);
  }
  return g;
}

// Returns K_mu(x) and K_(mu+1)(x) for |mu| <= 1/2.
std::pair<double, double> temme_pair(double mu, double x) {
  const double mu2 = mu * mu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;

  if (x <= kSeriesCrossover) {
    const TemmeGammas g = temme_gammas(mu);
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - mu2);
      c *= d / di;
      p /= di - mu;
      q /= di + mu;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - di * ff);
      if (std::abs(del) < std::abs(sum) * kEps) {
        return {sum, sum1 * xi2};
      }
    }
    throw ToleranceError("bessel_k: series did not converge");
  }

  // Steed's algorithm for the continued fraction CF2.
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= kMaxIter; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) {
      h *= a1;
      const double kmu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
      return {kmu, kmu * (mu + x + 0.5 - h) * xi};
    }
  }
  throw ToleranceError("bessel_k: continued fraction did not converge");
}

}  // namespace

double bessel_k(double nu, double x) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw DomainError("bessel_k: order must be positive, got " + std::to_string(nu));
  }
  if (!(x > 0.0)) {
    throw DomainError("bessel_k: argument must be positive, got " + std::to_string(x));
  }
  if (std::isinf(x) || x > 745.0) {
    return 0.0;
  }

  const double half = nu - 0.5;
  if (half >= 0.0 && half == std::floor(half) && half < 64.0) {
    return half_integer_bessel_k(static_cast<int>(half), x);
  }

  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  auto [kmu, k1] = temme_pair(mu, x);
  const double xi2 = 2.0 / x;
  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * xi2 * k1 + kmu;
    kmu = k1;
    k1 = next;
  }
  return kmu;
}

}  // namespace heidih::kernels

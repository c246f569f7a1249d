#include "heidih/errors.hpp"
#include "heidih/price_fd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace heidih::price {
namespace {

void require_domain(double y_domain, const PriceGrid& grid) {
  const double need = grid.required_domain();
  if (y_domain < need - 1e-12 * std::max(1.0, need)) {
    throw DomainError("price lattice needs a volatility domain D >= 2T - k = " +
                      std::to_string(need) + ", got " + std::to_string(y_domain));
  }
}

void require_path(const fem::YPath& ypath, const PriceGrid& grid) {
  require_domain(ypath.length(), grid);
  if (std::abs(ypath.k() - grid.k()) > 1e-12 * grid.k()) {
    throw ShapeError("price lattice step " + std::to_string(grid.k()) +
                     " differs from the volatility time step " + std::to_string(ypath.k()));
  }
  if (grid.steps() > 0 && ypath.steps() + 1 < grid.steps()) {
    throw ShapeError("volatility path is shorter than the price horizon");
  }
}

void require_beta(std::span<const double> beta, const PriceGrid& grid) {
  if (beta.size() < grid.steps()) {
    throw ShapeError("need " + std::to_string(grid.steps()) + " beta increments, got " +
                     std::to_string(beta.size()));
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

InitialCurve::InitialCurve(std::function<double(double)> smooth_part, double level, double range)
    : smooth_(std::move(smooth_part)), level_(level), range_(range) {
  if (!std::isfinite(level)) {
    throw DomainError("InitialCurve: level must be finite");
  }
}

double shift_eval(const InitialCurve& curve, double t, double x) {
  const double s = x + t;
  if (!(t >= 0.0) || !(x >= 0.0) || s > curve.range() * (1.0 + 1e-12)) {
    throw DomainError("shift_eval: x + t = " + std::to_string(s) + " outside the curve range");
  }
  return curve.smooth(s) + curve.level();
}

PriceGrid::PriceGrid(double T, double k) : T_(T), k_(k), steps_(0) {
  if (!(T > 0.0) || !(k > 0.0) || !std::isfinite(T) || !std::isfinite(k)) {
    throw DomainError("PriceGrid: T and k must be positive");
  }
  const double ratio = T / k;
  steps_ = static_cast<std::size_t>(std::llround(ratio));
  if (steps_ == 0 || std::abs(ratio - static_cast<double>(steps_)) > 1e-9 * ratio) {
    throw DomainError("PriceGrid: T / k must be a positive integer, got " + std::to_string(ratio));
  }
}

XPath::XPath(const PriceGrid& grid, double scaling)
    : grid_(grid), scaling_(scaling), values_(size() * size(), 0.0) {}

std::vector<double> beta_increments(noise::RandomStream& rng, std::size_t steps, double k) {
  if (!(k > 0.0)) {
    throw DomainError("beta_increments: step must be positive");
  }
  const double root = std::sqrt(k);
  std::vector<double> out(steps);
  for (double& v : out) {
    v = root * rng.normal();
  }
  return out;
}

PriceStepper::PriceStepper(const PriceGrid& grid, const InitialCurve& curve, double scaling,
                           double y_domain)
    : grid_(grid),
      curve_(curve),
      scaling_(scaling),
      y_domain_(y_domain),
      s_(2 * grid.steps() + 1, 0.0) {
  require_domain(y_domain, grid);
  next_.reserve(s_.size());
}

void PriceStepper::advance(std::span<const double> y_nodal, double dbeta) {
  if (i_ >= grid_.steps()) {
    throw ShapeError("PriceStepper: already at the horizon");
  }
  // Maturity columns beyond j = 2N - i - 1 are never needed again.
  const std::size_t width = s_.size() - 1;
  next_.resize(width);
  const double coef = scaling_ * dbeta;
  for (std::size_t j = 0; j < width; ++j) {
    const double y = fem::interpolate(y_nodal, y_domain_, grid_.x(j));
    next_[j] = s_[j + 1] + coef * y;
  }
  s_.swap(next_);
  ++i_;
}

double PriceStepper::value(std::size_t j) const {
  return shift_eval(curve_, grid_.t(i_), grid_.x(j)) + s_[j];
}

XPath solve_x(const PriceGrid& grid, const InitialCurve& curve, double scaling,
              const fem::YPath& ypath, std::span<const double> beta) {
  require_path(ypath, grid);
  require_beta(beta, grid);
  XPath out(grid, scaling);
  PriceStepper stepper(grid, curve, scaling, ypath.length());
  const std::size_t n = grid.steps();
  for (std::size_t i = 0;; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      out(i, j) = stepper.value(j);
    }
    if (i == n) {
      break;
    }
    stepper.advance(ypath.row(i), beta[i]);
  }
  return out;
}

XPath closed_form_x(const PriceGrid& grid, const InitialCurve& curve, double scaling,
                    const fem::YPath& ypath, std::span<const double> beta) {
  require_path(ypath, grid);
  require_beta(beta, grid);
  XPath out(grid, scaling);
  const std::size_t n_steps = grid.steps();
  for (std::size_t n = 0; n <= n_steps; ++n) {
    for (std::size_t j = 0; j <= n_steps; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = grid.x(j + n - i - 1);
        sum += fem::eval_pointwise(ypath, i, x) * beta[i];
      }
      out(n, j) = shift_eval(curve, grid.t(n), grid.x(j)) + scaling * sum;
    }
  }
  return out;
}

double error_decomposition_rhs(const fem::YPath& fine, const fem::YPath& coarse,
                               const PriceGrid& grid, double scaling, std::size_t n,
                               std::size_t j) {
  const double k = grid.k();
  const double ratio_f = k / fine.k();
  const auto ratio = static_cast<std::size_t>(std::llround(ratio_f));
  if (ratio < 1 || std::abs(ratio_f - static_cast<double>(ratio)) > 1e-9 * ratio_f) {
    throw ShapeError("error_decomposition_rhs: fine step must divide the lattice step");
  }
  if (std::abs(coarse.k() - k) > 1e-12 * k) {
    throw ShapeError("error_decomposition_rhs: coarse path step differs from the lattice step");
  }
  if (n > grid.steps() || j > grid.steps()) {
    throw ShapeError("error_decomposition_rhs: lattice index out of range");
  }
  const double kf = fine.k();
  const double maturity = grid.t(n) + grid.x(j);
  double sum = 0.0;
  for (std::size_t l = 0; l < n * ratio; ++l) {
    const std::size_t i = l / ratio;
    const double yf = fem::eval_pointwise(fine, l, maturity - static_cast<double>(l + 1) * kf);
    const double yc = fem::eval_pointwise(coarse, i, maturity - grid.t(i + 1));
    const double d = yf - yc;
    sum += kf * d * d;
  }
  return scaling * scaling * sum;
}

void write_xpath_csv(const std::filesystem::path& path, const XPath& x) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw std::runtime_error("write_xpath_csv: cannot open " + path.string());
  }
  os << "t,x,value\n";
  const auto& grid = x.grid();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      os << format_double(grid.t(i)) << ',' << format_double(grid.x(j)) << ','
         << format_double(x(i, j)) << '\n';
    }
  }
  if (!os) {
    throw std::runtime_error("write_xpath_csv: write failed for " + path.string());
  }
}

}  // namespace heidih::price

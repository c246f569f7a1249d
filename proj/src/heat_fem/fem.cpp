#include "heidih/errors.hpp"
#include "heidih/heat_fem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace heidih::fem {
namespace {

constexpr std::array<double, 4> kGaussNodes = {-0.86113631159405257522, -0.33998104358485626480,
                                               0.33998104358485626480, 0.86113631159405257522};
constexpr std::array<double, 4> kGaussWeights = {0.34785484513745385737, 0.65214515486254614263,
                                                 0.65214515486254614263, 0.34785484513745385737};

void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": length " + std::to_string(got) + " != " +
                     std::to_string(want));
  }
}

}  // namespace

TridiagonalFactor::TridiagonalFactor(std::size_t n, double diag, double off)
    : off_(off), inv_pivot_(n), upper_(n) {
  double pivot = diag;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      pivot = diag - off * upper_[i - 1];
    }
    if (!(pivot > 0.0)) {
      throw FactorizationError("tridiagonal elimination hit a nonpositive pivot");
    }
    inv_pivot_[i] = 1.0 / pivot;
    upper_[i] = off / pivot;
  }
}

void TridiagonalFactor::solve_in_place(std::span<double> rhs) const {
  const std::size_t n = size();
  check_length(rhs.size(), n, "tridiagonal solve");
  if (n == 0) {
    return;
  }
  rhs[0] *= inv_pivot_[0];
  for (std::size_t i = 1; i < n; ++i) {
    rhs[i] = (rhs[i] - off_ * rhs[i - 1]) * inv_pivot_[i];
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    rhs[i] -= upper_[i] * rhs[i + 1];
  }
}

FemSystem::FemSystem(noise::NoiseGrid grid, double a, double k) : grid_(grid), a_(a), k_(k) {
  const std::size_t n = interior_count();
  system_ = TridiagonalFactor(n, mass_diag() + k * stiffness_diag(), mass_off() + k * stiffness_off());
  mass_ = TridiagonalFactor(n, mass_diag(), mass_off());
}

FemSystem FemSystem::assemble(const noise::NoiseGrid& grid, double a, double k) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw DomainError("assemble: diffusivity must be positive, got " + std::to_string(a));
  }
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw DomainError("assemble: time step must be positive, got " + std::to_string(k));
  }
  return FemSystem(grid, a, k);
}

Eigen::MatrixXd FemSystem::mass_matrix() const {
  const auto n = static_cast<Eigen::Index>(interior_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = mass_diag();
    if (i + 1 < n) {
      m(i, i + 1) = m(i + 1, i) = mass_off();
    }
  }
  return m;
}

Eigen::MatrixXd FemSystem::stiffness_matrix() const {
  const auto n = static_cast<Eigen::Index>(interior_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = stiffness_diag();
    if (i + 1 < n) {
      m(i, i + 1) = m(i + 1, i) = stiffness_off();
    }
  }
  return m;
}

void FemSystem::load_vector(std::span<const double> noise_nodal, std::span<double> out) const {
  check_length(noise_nodal.size(), grid_.node_count(), "load_vector noise");
  check_length(out.size(), interior_count(), "load_vector output");
  const double c = h() / 6.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = c * (noise_nodal[i] + 4.0 * noise_nodal[i + 1] + noise_nodal[i + 2]);
  }
}

std::vector<double> FemSystem::load_vector(std::span<const double> noise_nodal) const {
  std::vector<double> out(interior_count());
  load_vector(noise_nodal, out);
  return out;
}

void FemSystem::step(std::span<const double> y, std::span<const double> load,
                     std::span<double> out) const {
  const std::size_t n = interior_count();
  check_length(y.size(), n, "step state");
  check_length(load.size(), n, "step load");
  check_length(out.size(), n, "step output");
  const double d = mass_diag();
  const double e = mass_off();
  for (std::size_t i = 0; i < n; ++i) {
    double my = d * y[i];
    if (i > 0) {
      my += e * y[i - 1];
    }
    if (i + 1 < n) {
      my += e * y[i + 1];
    }
    out[i] = my + load[i];
  }
  system_.solve_in_place(out);
}

std::vector<double> FemSystem::step(std::span<const double> y, std::span<const double> load) const {
  std::vector<double> out(interior_count());
  step(y, load, out);
  return out;
}

std::vector<double> FemSystem::project(const std::function<double(double)>& y0) const {
  const std::size_t n = interior_count();
  std::vector<double> rhs(n, 0.0);
  if (!y0 || n == 0) {
    return rhs;
  }
  const double hh = h();
  for (std::size_t cell = 0; cell < grid_.intervals(); ++cell) {
    const double left = grid_.node(cell);
    double to_left = 0.0;   // against the hat of node `cell`
    double to_right = 0.0;  // against the hat of node `cell + 1`
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      const double s = 0.5 * (kGaussNodes[q] + 1.0);
      const double v = kGaussWeights[q] * 0.5 * hh * y0(left + s * hh);
      to_left += v * (1.0 - s);
      to_right += v * s;
    }
    if (cell >= 1) {
      rhs[cell - 1] += to_left;
    }
    if (cell + 1 <= n) {
      rhs[cell] += to_right;
    }
  }
  mass_.solve_in_place(rhs);
  return rhs;
}

YPath::YPath(double length, std::size_t intervals, double k, std::size_t steps)
    : length_(length),
      intervals_(intervals),
      k_(k),
      steps_(steps),
      values_((steps + 1) * (intervals + 1), 0.0) {
  if (!(length > 0.0) || intervals < 1) {
    throw DomainError("YPath: need positive length and at least one interval");
  }
}

std::span<const double> YPath::row(std::size_t i) const {
  if (i > steps_) {
    throw ShapeError("YPath::row: time index out of range");
  }
  return std::span<const double>(values_).subspan(i * node_count(), node_count());
}

std::span<double> YPath::row(std::size_t i) {
  if (i > steps_) {
    throw ShapeError("YPath::row: time index out of range");
  }
  return std::span<double>(values_).subspan(i * node_count(), node_count());
}

double interpolate(std::span<const double> nodal, double length, double x) {
  const std::size_t intervals = nodal.size() - 1;
  const double slack = 1e-12 * length;
  if (!(x >= -slack && x <= length + slack)) {
    throw DomainError("eval_pointwise: x=" + std::to_string(x) + " outside [0, " +
                      std::to_string(length) + "]");
  }
  double u = std::clamp(x / length, 0.0, 1.0) * static_cast<double>(intervals);
  // Snap to a node when rounding put us a few ulps off it.
  if (const double r = std::round(u); std::abs(u - r) < 1e-9) {
    u = r;
  }
  const std::size_t j = std::min(static_cast<std::size_t>(u), intervals - 1);
  const double theta = u - static_cast<double>(j);
  if (theta == 0.0) {
    return nodal[j];
  }
  return (1.0 - theta) * nodal[j] + theta * nodal[j + 1];
}

double eval_pointwise(const YPath& path, std::size_t i, double x) {
  return interpolate(path.row(i), path.length(), x);
}

Integrator::Integrator(const FemSystem& system, std::vector<double> initial_interior)
    : system_(&system),
      state_(std::move(initial_interior)),
      load_(system.interior_count()),
      next_(system.interior_count()) {
  check_length(state_.size(), system.interior_count(), "Integrator initial state");
}

Integrator::Integrator(const FemSystem& system, const std::function<double(double)>& y0)
    : Integrator(system, system.project(y0)) {}

void Integrator::advance(std::span<const double> noise_nodal) {
  system_->load_vector(noise_nodal, load_);
  system_->step(state_, load_, next_);
  state_.swap(next_);
  ++steps_;
}

void Integrator::nodal(std::span<double> out) const {
  check_length(out.size(), state_.size() + 2, "Integrator::nodal");
  out.front() = 0.0;
  out.back() = 0.0;
  std::copy(state_.begin(), state_.end(), out.begin() + 1);
}

std::vector<double> Integrator::nodal() const {
  std::vector<double> out(state_.size() + 2);
  nodal(out);
  return out;
}

YPath solve_path(const FemSystem& system, const std::function<double(double)>& y0,
                 const NoiseSource& noise_source, std::size_t steps) {
  const auto& grid = system.grid();
  YPath path(grid.length(), grid.intervals(), system.k(), steps);
  Integrator integrator(system, y0);
  integrator.nodal(path.row(0));
  std::vector<double> increment(grid.node_count());
  for (std::size_t i = 0; i < steps; ++i) {
    if (noise_source) {
      noise_source(i, increment);
    } else {
      std::fill(increment.begin(), increment.end(), 0.0);
    }
    integrator.advance(increment);
    integrator.nodal(path.row(i + 1));
  }
  return path;
}

NoiseSource increment_source(const noise::IncrementModel& model, double k,
                             noise::StationaryStream& stream, noise::RandomStream& rng) {
  return [&model, k, &stream, &rng](std::size_t, std::span<double> out) {
    noise::sample_increment(model, k, stream, rng, out);
  };
}

void write_path_dump(const std::filesystem::path& path, const YPath& y) {
  noise::write_dump(path, noise::kPathMagic, y.node_count(), y.steps() + 1, y.values());
}

YPath read_path_dump(const std::filesystem::path& path, double length, double k) {
  const noise::DumpData d = noise::read_dump(path);
  if (d.magic != noise::kPathMagic) {
    throw ShapeError("read_path_dump: not a path dump (magic '" + d.magic + "')");
  }
  if (d.nodes < 2 || d.rows < 1) {
    throw ShapeError("read_path_dump: empty path");
  }
  YPath y(length, d.nodes - 1, k, d.rows - 1);
  for (std::size_t i = 0; i < d.rows; ++i) {
    std::copy_n(d.values.begin() + static_cast<std::ptrdiff_t>(i * d.nodes), d.nodes,
                y.row(i).begin());
  }
  return y;
}

}  // namespace heidih::fem

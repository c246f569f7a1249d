#include "heidih/errors.hpp"
#include "heidih/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace heidih::noise {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

NoiseGrid::NoiseGrid(double length, std::size_t intervals)
    : length_(length), intervals_(intervals) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw DomainError("NoiseGrid: length must be positive, got " + std::to_string(length));
  }
  if (intervals < 1) {
    throw DomainError("NoiseGrid: need at least one interval");
  }
}

double NoiseGrid::node(std::size_t j) const {
  if (j > intervals_) {
    throw ShapeError("NoiseGrid::node: index out of range");
  }
  if (j == intervals_) {
    return length_;
  }
  return static_cast<double>(j) * h();
}

std::vector<double> NoiseGrid::nodes() const {
  std::vector<double> x(node_count());
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = node(j);
  }
  return x;
}

std::uint64_t SeedPolicy::derive(std::uint64_t sample_index, Lane lane) const {
  std::uint64_t s = splitmix64(master_);
  s = splitmix64(s ^ splitmix64(sample_index));
  return splitmix64(s ^ (static_cast<std::uint64_t>(lane) + 1) * 0xD1B54A32D192ED03ULL);
}

IncrementModel IncrementModel::build(const kernels::KernelSpec& spec, const NoiseGrid& grid,
                                     CirculantOptions options) {
  auto sampler = CirculantSampler::build(spec.stationary, grid.h(), grid.intervals(), options);
  std::vector<double> weights(grid.node_count());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    weights[j] = spec.weight(grid.node(j));
  }
  return IncrementModel(spec, grid, std::move(sampler), std::move(weights));
}

Eigen::MatrixXd IncrementModel::induced_covariance_matrix(double k) const {
  const std::vector<double> row = sampler_.induced_covariance();
  const auto n = static_cast<Eigen::Index>(weights_.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      m(i, j) = k * weights_[i] * weights_[j] * row[static_cast<std::size_t>(std::abs(i - j))];
    }
  }
  return m;
}

void sample_increment(const IncrementModel& model, double k, StationaryStream& stream,
                      RandomStream& rng, std::span<double> out) {
  if (!(k > 0.0)) {
    throw DomainError("sample_increment: step must be positive");
  }
  stream.draw(rng, out);
  const double root = std::sqrt(k);
  const auto w = model.weights();
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] *= root * w[j];
  }
}

std::vector<double> sample_increment(const IncrementModel& model, double k,
                                     StationaryStream& stream, RandomStream& rng) {
  std::vector<double> out(model.grid().node_count());
  sample_increment(model, k, stream, rng, out);
  return out;
}

CholeskySampler CholeskySampler::build(const kernels::KernelSpec& spec, const NoiseGrid& grid) {
  const std::vector<double> x = grid.nodes();
  return from_matrix(kernels::kernel_matrix(spec, x));
}

CholeskySampler CholeskySampler::from_matrix(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols()) {
    throw ShapeError("CholeskySampler: covariance must be square");
  }
  const double max_diag = covariance.rows() > 0 ? covariance.diagonal().maxCoeff() : 0.0;
  if (max_diag == 0.0) {
    return CholeskySampler(Eigen::MatrixXd::Zero(covariance.rows(), covariance.cols()), 0.0);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() == Eigen::Success) {
    return CholeskySampler(llt.matrixL(), 0.0);
  }
  const double ridge = 1e-12 * max_diag;
  Eigen::MatrixXd shifted = covariance;
  shifted.diagonal().array() += ridge;
  llt.compute(shifted);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("CholeskySampler: covariance not positive semidefinite even with ridge " +
                             std::to_string(ridge));
  }
  return CholeskySampler(llt.matrixL(), ridge);
}

void CholeskySampler::draw(double k, RandomStream& rng, std::span<double> out) const {
  if (!(k > 0.0)) {
    throw DomainError("CholeskySampler::draw: step must be positive");
  }
  if (static_cast<Eigen::Index>(out.size()) != factor_.rows()) {
    throw ShapeError("CholeskySampler::draw: output length mismatch");
  }
  Eigen::VectorXd z(factor_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = rng.normal();
  }
  Eigen::VectorXd y = factor_.triangularView<Eigen::Lower>() * z;
  y *= std::sqrt(k);
  std::copy(y.data(), y.data() + y.size(), out.begin());
}

std::vector<double> cholesky_sample(const kernels::KernelSpec& spec, const NoiseGrid& grid,
                                    double k, RandomStream& rng) {
  const auto sampler = CholeskySampler::build(spec, grid);
  std::vector<double> out(grid.node_count());
  sampler.draw(k, rng, out);
  return out;
}

std::vector<double> restrict_to_coarse(std::span<const double> values, std::size_t ratio) {
  if (ratio < 1 || values.empty() || (values.size() - 1) % ratio != 0) {
    throw ShapeError("restrict_to_coarse: " + std::to_string(values.size() - 1) +
                     " intervals not divisible by " + std::to_string(ratio));
  }
  std::vector<double> out((values.size() - 1) / ratio + 1);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = values[j * ratio];
  }
  return out;
}

std::vector<std::vector<double>> aggregate_time(const std::vector<std::vector<double>>& increments,
                                                std::size_t ratio) {
  if (ratio < 1 || increments.size() % ratio != 0) {
    throw ShapeError("aggregate_time: " + std::to_string(increments.size()) +
                     " steps not divisible by " + std::to_string(ratio));
  }
  std::vector<std::vector<double>> out;
  out.reserve(increments.size() / ratio);
  for (std::size_t i = 0; i < increments.size(); i += ratio) {
    std::vector<double> sum = increments[i];
    for (std::size_t r = 1; r < ratio; ++r) {
      const auto& inc = increments[i + r];
      if (inc.size() != sum.size()) {
        throw ShapeError("aggregate_time: ragged increments");
      }
      for (std::size_t j = 0; j < sum.size(); ++j) {
        sum[j] += inc[j];
      }
    }
    out.push_back(std::move(sum));
  }
  return out;
}

}  // namespace heidih::noise

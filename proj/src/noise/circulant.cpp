#include "heidih/errors.hpp"
#include "heidih/noise.hpp"

#include <fftw3.h>

#include <chrono>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

namespace heidih::noise {
namespace {

// The FFTW planner is not thread safe; execution on new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {
    if (data == nullptr) {
      throw std::bad_alloc();
    }
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  fftw_complex* data;
};

std::size_t next_power_of_two(std::size_t n) {
  std::size_t m = 1;
  while (m < n) {
    m <<= 1;
  }
  return m;
}

}  // namespace

struct CirculantSampler::Impl {
  std::size_t intervals = 0;
  std::size_t size = 0;
  double h = 0.0;
  std::vector<double> spectrum;  // clipped eigenvalues
  std::vector<double> amplitude; // sqrt(lambda / M)
  double clip_mass = 0.0;
  double clip_fraction = 0.0;
  fftw_plan plan = nullptr;

  Impl() = default;
  Impl(const Impl&) = delete;
  Impl& operator=(const Impl&) = delete;
  ~Impl() {
    if (plan != nullptr) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }

  void forward(const fftw_complex* in, fftw_complex* out) const {
    fftw_execute_dft(plan, const_cast<fftw_complex*>(in), out);
  }
};

CirculantSampler CirculantSampler::build(const kernels::MaternParams& stationary, double h,
                                         std::size_t intervals, CirculantOptions options) {
  stationary.validate();
  return build([stationary](double lag) { return kernels::matern(stationary, lag); }, h,
               intervals, options);
}

CirculantSampler CirculantSampler::build(const std::function<double(double)>& stationary, double h,
                                         std::size_t intervals, CirculantOptions options) {
  if (intervals < 1 || !(h > 0.0)) {
    throw DomainError("build_circulant: need N >= 1 and h > 0");
  }
  if (options.max_doublings < 0 || !(options.tolerance >= 0.0)) {
    throw DomainError("build_circulant: invalid options");
  }

  std::size_t size = next_power_of_two(2 * intervals);
  double last_fraction = 0.0;
  for (int doubling = 0; doubling <= options.max_doublings; ++doubling, size *= 2) {
    auto impl = std::make_shared<Impl>();
    impl->intervals = intervals;
    impl->size = size;
    impl->h = h;

    FftwBuffer in(size);
    FftwBuffer out(size);
    {
      std::lock_guard lock(planner_mutex());
      impl->plan = fftw_plan_dft_1d(static_cast<int>(size), in.data, out.data, FFTW_FORWARD,
                                    FFTW_ESTIMATE);
    }
    for (std::size_t j = 0; j < size; ++j) {
      const std::size_t lag = std::min(j, size - j);
      in.data[j][0] = stationary(static_cast<double>(lag) * h);
      in.data[j][1] = 0.0;
    }
    impl->forward(in.data, out.data);

    double negative = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      const double lambda = out.data[k][0];
      total += std::abs(lambda);
      if (lambda < 0.0) {
        negative -= lambda;
      }
    }
    last_fraction = total > 0.0 ? negative / total : 0.0;
    if (last_fraction > options.tolerance) {
      continue;
    }

    impl->clip_mass = negative;
    impl->clip_fraction = last_fraction;
    impl->spectrum.resize(size);
    impl->amplitude.resize(size);
    const double inv_size = 1.0 / static_cast<double>(size);
    for (std::size_t k = 0; k < size; ++k) {
      const double lambda = std::max(out.data[k][0], 0.0);
      impl->spectrum[k] = lambda;
      impl->amplitude[k] = std::sqrt(lambda * inv_size);
    }
    return CirculantSampler(std::move(impl));
  }
  throw EmbeddingError("build_circulant: negative spectral mass fraction " +
                           std::to_string(last_fraction) + " exceeds tolerance after " +
                           std::to_string(options.max_doublings) + " doublings",
                       last_fraction);
}

std::size_t CirculantSampler::intervals() const { return impl_->intervals; }
std::size_t CirculantSampler::embedding_size() const { return impl_->size; }
std::span<const double> CirculantSampler::spectrum() const { return impl_->spectrum; }
double CirculantSampler::clip_mass() const { return impl_->clip_mass; }
double CirculantSampler::clip_fraction() const { return impl_->clip_fraction; }

std::vector<double> CirculantSampler::induced_covariance() const {
  const std::size_t size = impl_->size;
  FftwBuffer in(size);
  FftwBuffer out(size);
  for (std::size_t k = 0; k < size; ++k) {
    in.data[k][0] = impl_->spectrum[k];
    in.data[k][1] = 0.0;
  }
  // Symmetric spectrum: forward and inverse transforms coincide.
  impl_->forward(in.data, out.data);
  std::vector<double> row(impl_->intervals + 1);
  for (std::size_t m = 0; m < row.size(); ++m) {
    row[m] = out.data[m][0] / static_cast<double>(size);
  }
  return row;
}

struct StationaryStream::Scratch {
  explicit Scratch(std::size_t n) : in(n), out(n) {}
  FftwBuffer in;
  FftwBuffer out;
};

StationaryStream::StationaryStream(const CirculantSampler& sampler)
    : sampler_(sampler),
      scratch_(std::make_unique<Scratch>(sampler.embedding_size())),
      spare_(sampler.intervals() + 1) {}

StationaryStream::~StationaryStream() = default;
StationaryStream::StationaryStream(StationaryStream&&) noexcept = default;
StationaryStream& StationaryStream::operator=(StationaryStream&&) noexcept = default;

void StationaryStream::draw(RandomStream& rng, std::span<double> out) {
  const auto& impl = sampler_.impl();
  const std::size_t nodes = impl.intervals + 1;
  if (out.size() != nodes) {
    throw ShapeError("sample_stationary: output length " + std::to_string(out.size()) +
                     " != " + std::to_string(nodes));
  }
  if (have_spare_) {
    std::copy(spare_.begin(), spare_.end(), out.begin());
    have_spare_ = false;
    return;
  }

  fftw_complex* in = scratch_->in.data;
  fftw_complex* res = scratch_->out.data;
  for (std::size_t k = 0; k < impl.size; ++k) {
    const double re = rng.normal();
    const double im = rng.normal();
    in[k][0] = impl.amplitude[k] * re;
    in[k][1] = impl.amplitude[k] * im;
  }
  const auto start = std::chrono::steady_clock::now();
  impl.forward(in, res);
  fft_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++transforms_;

  for (std::size_t j = 0; j < nodes; ++j) {
    out[j] = res[j][0];
    spare_[j] = res[j][1];
  }
  have_spare_ = true;
}

std::vector<double> sample_stationary(StationaryStream& stream, RandomStream& rng) {
  std::vector<double> out(stream.node_count());
  stream.draw(rng, out);
  return out;
}

}  // namespace heidih::noise

#include "heidih/errors.hpp"
#include "heidih/experiments.hpp"
#include "heidih/heat_fem.hpp"
#include "heidih/noise.hpp"

#include <cmath>
#include <numbers>

namespace heidih::experiments {
namespace {

// Uncoupled runs give each level its own block of sample indices.
constexpr std::uint64_t kLevelStride = std::uint64_t{1} << 40;

std::function<double(double)> initial_function(const StudyConfig& config, double D) {
  if (config.initial == InitialKind::Zero) {
    return {};
  }
  const double amp = config.initial_amplitude;
  const double freq = config.initial_mode * std::numbers::pi / D;
  return [amp, freq](double x) { return amp * std::sin(freq * x); };
}

void check_levels(std::size_t ref_intervals, std::size_t ref_steps, const std::vector<Level>& levels) {
  for (const auto& l : levels) {
    if (l.space_ratio == 0 || l.time_ratio == 0 || ref_intervals % l.space_ratio != 0 ||
        ref_steps % l.time_ratio != 0 || ref_intervals / l.space_ratio < 1) {
      throw ShapeError("ladder level does not divide the reference resolution");
    }
  }
}

struct Setup {
  noise::NoiseGrid grid;
  noise::IncrementModel model;
  fem::FemSystem reference;
  std::vector<fem::FemSystem> systems;
  std::function<double(double)> y0;
};

Setup make_setup(const StudyConfig& config, const kernels::KernelSpec& spec, double D,
                 std::size_t ref_intervals, double ref_k, const std::vector<Level>& levels) {
  noise::NoiseGrid grid(D, ref_intervals);
  auto model = noise::IncrementModel::build(spec, grid);
  auto reference = fem::FemSystem::assemble(grid, config.a, ref_k);
  std::vector<fem::FemSystem> systems;
  for (const auto& l : levels) {
    systems.push_back(fem::FemSystem::assemble(noise::NoiseGrid(D, ref_intervals / l.space_ratio),
                                               config.a, ref_k * static_cast<double>(l.time_ratio)));
  }
  return Setup{grid, std::move(model), std::move(reference), std::move(systems),
               initial_function(config, D)};
}

// Runs `simulate(sample_id, active_levels, partial)` over all samples and
// returns per-level accumulators reduced in batch order.
template <typename Simulate>
std::vector<PointAccumulator> run_batches(const StudyConfig& config,
                                          const std::vector<std::size_t>& points,
                                          const Simulate& simulate) {
  const std::size_t batches = (config.samples + config.batch - 1) / config.batch;
  std::vector<std::vector<PointAccumulator>> partial(batches);
  for_each_batch(config.samples, config.batch, config.workers,
                 [&](std::size_t b, std::size_t first, std::size_t last) {
                   std::vector<PointAccumulator> acc;
                   for (std::size_t p : points) {
                     acc.emplace_back(p);
                   }
                   for (std::size_t s = first; s < last; ++s) {
                     if (config.coupled) {
                       std::vector<std::size_t> all(points.size());
                       for (std::size_t l = 0; l < all.size(); ++l) {
                         all[l] = l;
                       }
                       simulate(s, all, acc);
                     } else {
                       for (std::size_t l = 0; l < points.size(); ++l) {
                         simulate(s + (l + 1) * kLevelStride, std::vector<std::size_t>{l}, acc);
                       }
                     }
                   }
                   partial[b] = std::move(acc);
                 });
  std::vector<PointAccumulator> total;
  for (std::size_t p : points) {
    total.emplace_back(p);
  }
  for (const auto& part : partial) {
    for (std::size_t l = 0; l < total.size(); ++l) {
      total[l].merge(part[l]);
    }
  }
  return total;
}

}  // namespace

std::vector<PointwiseError> mc_pointwise_error(const StudyConfig& config,
                                               const kernels::KernelSpec& spec, double D,
                                               std::size_t ref_intervals, double ref_k,
                                               std::size_t ref_steps,
                                               const std::vector<Level>& levels) {
  check_levels(ref_intervals, ref_steps, levels);
  const Setup setup = make_setup(config, spec, D, ref_intervals, ref_k, levels);
  const noise::SeedPolicy policy(config.seed);

  std::vector<std::size_t> points;
  for (const auto& l : levels) {
    points.push_back((ref_steps / l.time_ratio) * (ref_intervals / l.space_ratio - 1));
  }

  auto simulate = [&](std::uint64_t sample, const std::vector<std::size_t>& active,
                      std::vector<PointAccumulator>& acc) {
    auto rng = policy.stream(sample, noise::Lane::Wiener);
    noise::StationaryStream stream(setup.model.sampler());
    fem::Integrator ref(setup.reference, setup.y0);
    std::vector<fem::Integrator> coarse;
    std::vector<std::vector<double>> sums;
    for (std::size_t l : active) {
      coarse.emplace_back(setup.systems[l], setup.y0);
      sums.emplace_back(setup.systems[l].grid().node_count(), 0.0);
    }
    std::vector<double> inc(setup.grid.node_count());
    for (std::size_t i = 0; i < ref_steps; ++i) {
      noise::sample_increment(setup.model, ref_k, stream, rng, inc);
      ref.advance(inc);
      for (std::size_t a = 0; a < active.size(); ++a) {
        const Level& lv = levels[active[a]];
        auto& sum = sums[a];
        for (std::size_t j = 0; j < sum.size(); ++j) {
          sum[j] += inc[j * lv.space_ratio];
        }
        if ((i + 1) % lv.time_ratio != 0) {
          continue;
        }
        coarse[a].advance(sum);
        std::fill(sum.begin(), sum.end(), 0.0);
        const std::size_t m = (i + 1) / lv.time_ratio - 1;
        const auto yc = coarse[a].interior();
        const auto yr = ref.interior();
        const std::size_t nc = yc.size();
        for (std::size_t j = 1; j <= nc; ++j) {
          const double d = yr[j * lv.space_ratio - 1] - yc[j - 1];
          acc[active[a]].add(m * nc + j - 1, d * d);
        }
      }
    }
  };

  const auto total = run_batches(config, points, simulate);
  std::vector<PointwiseError> out;
  for (const auto& acc : total) {
    out.push_back(max_rms(acc, config.samples));
  }
  return out;
}

std::vector<PointwiseError> mc_price_error(const StudyConfig& config,
                                           const kernels::KernelSpec& spec, double D,
                                           std::size_t ref_intervals, double ref_k,
                                           std::size_t ref_steps,
                                           const std::vector<Level>& levels) {
  check_levels(ref_intervals, ref_steps, levels);
  const Setup setup = make_setup(config, spec, D, ref_intervals, ref_k, levels);
  const noise::SeedPolicy policy(config.seed);
  const price::PriceGrid ref_grid(config.T, ref_k);
  if (ref_grid.steps() != ref_steps) {
    throw ShapeError("mc_price_error: reference steps must equal T / k");
  }
  const auto curve = price::InitialCurve::flat(0.0);

  std::vector<price::PriceGrid> grids;
  std::vector<std::size_t> points;
  for (const auto& l : levels) {
    grids.emplace_back(config.T, ref_k * static_cast<double>(l.time_ratio));
    const std::size_t n = grids.back().steps();
    points.push_back(n * (n + 1));
  }

  auto simulate = [&](std::uint64_t sample, const std::vector<std::size_t>& active,
                      std::vector<PointAccumulator>& acc) {
    auto rng = policy.stream(sample, noise::Lane::Wiener);
    auto beta_rng = policy.stream(sample, noise::Lane::Beta);
    const double beta_scale = std::sqrt(ref_k);
    noise::StationaryStream stream(setup.model.sampler());

    fem::Integrator ref(setup.reference, setup.y0);
    price::PriceStepper ref_price(ref_grid, curve, config.scaling, D);
    std::vector<double> ref_nodal(setup.grid.node_count());

    std::vector<fem::Integrator> coarse;
    std::vector<price::PriceStepper> prices;
    std::vector<std::vector<double>> sums;
    std::vector<std::vector<double>> nodal;
    std::vector<double> beta_sums(active.size(), 0.0);
    for (std::size_t l : active) {
      coarse.emplace_back(setup.systems[l], setup.y0);
      prices.emplace_back(grids[l], curve, config.scaling, D);
      sums.emplace_back(setup.systems[l].grid().node_count(), 0.0);
      nodal.emplace_back(setup.systems[l].grid().node_count(), 0.0);
    }

    std::vector<double> inc(setup.grid.node_count());
    for (std::size_t i = 0; i < ref_steps; ++i) {
      noise::sample_increment(setup.model, ref_k, stream, rng, inc);
      const double dbeta = beta_scale * beta_rng.normal();

      ref.nodal(ref_nodal);
      ref_price.advance(ref_nodal, dbeta);
      ref.advance(inc);

      for (std::size_t a = 0; a < active.size(); ++a) {
        const Level& lv = levels[active[a]];
        auto& sum = sums[a];
        for (std::size_t j = 0; j < sum.size(); ++j) {
          sum[j] += inc[j * lv.space_ratio];
        }
        beta_sums[a] += dbeta;
        if ((i + 1) % lv.time_ratio != 0) {
          continue;
        }
        coarse[a].nodal(nodal[a]);
        prices[a].advance(nodal[a], beta_sums[a]);
        coarse[a].advance(sum);
        std::fill(sum.begin(), sum.end(), 0.0);
        beta_sums[a] = 0.0;

        const std::size_t m = (i + 1) / lv.time_ratio - 1;
        const std::size_t n = grids[active[a]].steps();
        for (std::size_t j = 0; j <= n; ++j) {
          const double d = ref_price.stochastic(j * lv.time_ratio) - prices[a].stochastic(j);
          acc[active[a]].add(m * (n + 1) + j, d * d);
        }
      }
    }
  };

  const auto total = run_batches(config, points, simulate);
  std::vector<PointwiseError> out;
  for (const auto& acc : total) {
    out.push_back(max_rms(acc, config.samples));
  }
  return out;
}

}  // namespace heidih::experiments

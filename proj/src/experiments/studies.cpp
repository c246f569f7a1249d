#include "heidih/errors.hpp"
#include "heidih/experiments.hpp"
#include "heidih/heat_fem.hpp"
#include "heidih/heat_reference.hpp"
#include "heidih/noise.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

namespace heidih::experiments {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double dyadic(int level) { return std::ldexp(1.0, -level); }

std::size_t cells(double length, int level) {
  const double c = length * std::ldexp(1.0, level);
  const auto n = static_cast<std::size_t>(std::llround(c));
  if (n < 1 || std::abs(c - static_cast<double>(n)) > 1e-9 * c) {
    throw ShapeError("length " + std::to_string(length) + " is not a multiple of 2^-" +
                     std::to_string(level));
  }
  return n;
}

std::size_t pow2(int e) { return std::size_t{1} << e; }

void append_fit(StudyResult& out, const std::string& study, const std::string& param,
                const std::vector<double>& res, const std::vector<double>& err) {
  RateFit fit = fit_rate(res, err);
  fit.study = study;
  fit.param = param;
  out.rates.push_back(fit);
}

double price_domain(const StudyConfig& config, int coarsest_space_level, double ref_k) {
  if (config.D > 0.0) {
    return config.D;
  }
  return reference::choose_domain(config.T, ref_k, config.a, config.T, config.domain_target,
                                  dyadic(coarsest_space_level));
}

}  // namespace

kernels::KernelSpec kernel_for(const StudyConfig& config, double smoothness) {
  return kernels::KernelSpec{
      kernels::MaternParams::from_smoothness_index(smoothness, config.mu, config.zeta),
      config.weight};
}

StudyResult spatial_study(const StudyConfig& config) {
  config.validate();
  StudyResult out;
  const std::string study = to_string(StudyKind::SpatialY);
  const double k = dyadic(config.fixed_level);
  const std::size_t steps = cells(config.T, config.fixed_level);
  const std::size_t ref_intervals = cells(config.D, config.reference_level);
  std::vector<Level> levels;
  std::vector<double> res;
  for (int l : config.ladder) {
    levels.push_back({pow2(config.reference_level - l), 1});
    res.push_back(dyadic(l));
  }
  for (double s : config.smoothness) {
    const auto start = Clock::now();
    const auto errs = mc_pointwise_error(config, kernel_for(config, s), config.D, ref_intervals, k,
                                         steps, levels);
    const double wall = config.record_timings ? seconds_since(start) : 0.0;
    std::vector<double> err;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      out.errors.push_back({study, param_label(s), res[i], errs[i].error, errs[i].stderr_, wall});
      err.push_back(errs[i].error);
    }
    append_fit(out, study, param_label(s), res, err);
  }
  return out;
}

StudyResult temporal_study(const StudyConfig& config) {
  config.validate();
  StudyResult out;
  const std::string study = to_string(StudyKind::TemporalY);
  const double ref_k = dyadic(config.reference_level);
  const std::size_t steps = cells(config.T, config.reference_level);
  const std::size_t intervals = cells(config.D, config.fixed_level);
  std::vector<Level> levels;
  std::vector<double> res;
  for (int l : config.ladder) {
    levels.push_back({1, pow2(config.reference_level - l)});
    res.push_back(dyadic(l));
  }
  for (double s : config.smoothness) {
    const auto start = Clock::now();
    const auto errs =
        mc_pointwise_error(config, kernel_for(config, s), config.D, intervals, ref_k, steps, levels);
    const double wall = config.record_timings ? seconds_since(start) : 0.0;
    std::vector<double> err;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      out.errors.push_back({study, param_label(s), res[i], errs[i].error, errs[i].stderr_, wall});
      err.push_back(errs[i].error);
    }
    append_fit(out, study, param_label(s), res, err);
  }
  return out;
}

StudyResult price_grid_study(const StudyConfig& config) {
  config.validate();
  StudyResult out;
  const std::string study = to_string(StudyKind::PriceGrid);
  const int ref = config.reference_level;
  const double ref_k = dyadic(ref);
  const std::size_t steps = cells(config.T, ref);

  int coarsest_space = ref;
  for (GridRule rule : config.rules) {
    for (int l : config.ladder) {
      coarsest_space = std::min(coarsest_space, space_level(rule, l));
    }
  }
  const double D = price_domain(config, coarsest_space, ref_k);
  const std::size_t ref_intervals = cells(D, ref);

  std::vector<Level> levels;
  for (GridRule rule : config.rules) {
    for (int l : config.ladder) {
      levels.push_back({pow2(ref - space_level(rule, l)), pow2(ref - l)});
    }
  }
  for (double s : config.smoothness) {
    const auto start = Clock::now();
    const auto errs =
        mc_price_error(config, kernel_for(config, s), D, ref_intervals, ref_k, steps, levels);
    const double wall = config.record_timings ? seconds_since(start) : 0.0;
    std::size_t idx = 0;
    for (GridRule rule : config.rules) {
      std::vector<double> res;
      std::vector<double> err;
      for (int l : config.ladder) {
        const auto& e = errs[idx++];
        out.errors.push_back({study, param_label(s, rule), dyadic(l), e.error, e.stderr_, wall});
        res.push_back(dyadic(l));
        err.push_back(e.error);
      }
      append_fit(out, study, param_label(s, rule), res, err);
    }
  }
  return out;
}

StudyResult holder_study(const StudyConfig& config) {
  config.validate();
  StudyResult out;
  const std::string study = to_string(StudyKind::Holder);
  const double k = dyadic(config.fixed_level);
  const std::size_t steps = cells(config.T, config.fixed_level);
  const std::size_t intervals = cells(config.D, config.reference_level);
  const auto first = static_cast<std::size_t>(std::ceil(config.holder_start / k - 1e-9));
  const noise::SeedPolicy policy(config.seed);
  const std::size_t n_sep = config.separation_levels.size();
  const std::size_t n_probe = config.probes.size();

  std::vector<std::size_t> gaps;
  std::vector<double> res;
  for (int l : config.separation_levels) {
    gaps.push_back(pow2(config.fixed_level - l));
    res.push_back(dyadic(l));
    if (first + gaps.back() > steps) {
      throw ConfigError("holder.separations: separation longer than the sampled window", 0, 0,
                        "holder.separations");
    }
  }

  for (double s : config.smoothness) {
    const auto start = Clock::now();
    const noise::NoiseGrid grid(config.D, intervals);
    const auto model = noise::IncrementModel::build(kernel_for(config, s), grid);
    const auto system = fem::FemSystem::assemble(grid, config.a, k);

    const std::size_t batches = (config.samples + config.batch - 1) / config.batch;
    std::vector<PointAccumulator> partial(batches);
    for_each_batch(config.samples, config.batch, config.workers,
                   [&](std::size_t b, std::size_t lo, std::size_t hi) {
                     PointAccumulator acc(n_probe * n_sep);
                     std::vector<double> inc(grid.node_count());
                     std::vector<double> nodal(grid.node_count());
                     std::vector<std::vector<double>> series(n_probe, std::vector<double>(steps + 1));
                     for (std::size_t smp = lo; smp < hi; ++smp) {
                       auto rng = policy.stream(smp, noise::Lane::Wiener);
                       noise::StationaryStream stream(model.sampler());
                       fem::Integrator y(system, std::vector<double>(system.interior_count(), 0.0));
                       for (std::size_t p = 0; p < n_probe; ++p) {
                         series[p][0] = 0.0;
                       }
                       for (std::size_t i = 0; i < steps; ++i) {
                         noise::sample_increment(model, k, stream, rng, inc);
                         y.advance(inc);
                         y.nodal(nodal);
                         for (std::size_t p = 0; p < n_probe; ++p) {
                           series[p][i + 1] = fem::interpolate(nodal, config.D, config.probes[p]);
                         }
                       }
                       for (std::size_t p = 0; p < n_probe; ++p) {
                         for (std::size_t g = 0; g < n_sep; ++g) {
                           double sum = 0.0;
                           std::size_t count = 0;
                           for (std::size_t i = first; i + gaps[g] <= steps; ++i) {
                             const double d = series[p][i + gaps[g]] - series[p][i];
                             sum += d * d;
                             ++count;
                           }
                           acc.add(p * n_sep + g, sum / static_cast<double>(count));
                         }
                       }
                     }
                     partial[b] = std::move(acc);
                   });
    PointAccumulator total(n_probe * n_sep);
    for (const auto& part : partial) {
      total.merge(part);
    }
    const double wall = config.record_timings ? seconds_since(start) : 0.0;

    const auto n = static_cast<double>(config.samples);
    std::vector<double> pooled(n_sep, 0.0);
    for (std::size_t p = 0; p < n_probe; ++p) {
      char label[64];
      std::snprintf(label, sizeof label, "%s|x=%g", param_label(s).c_str(), config.probes[p]);
      std::vector<double> err;
      for (std::size_t g = 0; g < n_sep; ++g) {
        const std::size_t idx = p * n_sep + g;
        const double mean = total.sum(idx) / n;
        const double var = std::max(0.0, (total.sum_sq(idx) - n * mean * mean) / (n - 1.0));
        out.errors.push_back({study, label, res[g], mean, std::sqrt(var / n), wall});
        err.push_back(mean);
        pooled[g] += mean / static_cast<double>(n_probe);
      }
      append_fit(out, study, label, res, err);
    }
    RateFit fit = fit_rate(res, pooled, false);
    fit.study = study;
    fit.param = param_label(s);
    out.rates.push_back(fit);
  }
  return out;
}

StudyResult localization_study(const StudyConfig& config) {
  config.validate();
  StudyResult out;
  const std::string study = to_string(StudyKind::Localization);
  const double k = dyadic(config.fixed_level);
  const std::size_t steps = cells(config.T, config.fixed_level);
  const std::size_t ref_intervals = cells(config.reference_domain, config.reference_level);
  const noise::SeedPolicy policy(config.seed);
  const std::size_t n_dom = config.domains.size();

  for (double s : config.smoothness) {
    const auto start = Clock::now();
    const noise::NoiseGrid grid(config.reference_domain, ref_intervals);
    const auto model = noise::IncrementModel::build(kernel_for(config, s), grid);
    const auto ref_system = fem::FemSystem::assemble(grid, config.a, k);
    std::vector<fem::FemSystem> systems;
    for (double d : config.domains) {
      systems.push_back(fem::FemSystem::assemble(
          noise::NoiseGrid(d, cells(d, config.reference_level)), config.a, k));
    }

    // Points 0..n_dom-1: squared differences; point n_dom: squared reference value.
    const std::size_t batches = (config.samples + config.batch - 1) / config.batch;
    std::vector<PointAccumulator> partial(batches);
    for_each_batch(config.samples, config.batch, config.workers,
                   [&](std::size_t b, std::size_t lo, std::size_t hi) {
                     PointAccumulator acc(n_dom + 1);
                     std::vector<double> inc(grid.node_count());
                     for (std::size_t smp = lo; smp < hi; ++smp) {
                       auto rng = policy.stream(smp, noise::Lane::Wiener);
                       noise::StationaryStream stream(model.sampler());
                       fem::Integrator ref(ref_system, std::vector<double>(ref_system.interior_count(), 0.0));
                       std::vector<fem::Integrator> ys;
                       for (const auto& sys : systems) {
                         ys.emplace_back(sys, std::vector<double>(sys.interior_count(), 0.0));
                       }
                       for (std::size_t i = 0; i < steps; ++i) {
                         noise::sample_increment(model, k, stream, rng, inc);
                         ref.advance(inc);
                         for (std::size_t d = 0; d < n_dom; ++d) {
                           const std::size_t nodes = systems[d].grid().node_count();
                           ys[d].advance(std::span<const double>(inc).first(nodes));
                         }
                       }
                       const double yr = fem::interpolate(ref.nodal(), config.reference_domain, config.probe);
                       for (std::size_t d = 0; d < n_dom; ++d) {
                         const double yd = fem::interpolate(ys[d].nodal(), config.domains[d], config.probe);
                         acc.add(d, (yr - yd) * (yr - yd));
                       }
                       acc.add(n_dom, yr * yr);
                     }
                     partial[b] = std::move(acc);
                   });
    PointAccumulator total(n_dom + 1);
    for (const auto& part : partial) {
      total.merge(part);
    }
    const double wall = config.record_timings ? seconds_since(start) : 0.0;

    const auto n = static_cast<double>(config.samples);
    const double scale = std::sqrt(total.sum(n_dom) / n);
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t d = 0; d < n_dom; ++d) {
      const double mean = total.sum(d) / n;
      const double rms = std::sqrt(mean);
      double se = 0.0;
      if (rms > 0.0) {
        const double var = std::max(0.0, (total.sum_sq(d) - n * mean * mean) / (n - 1.0));
        se = std::sqrt(var / n) / (2.0 * rms);
      }
      out.errors.push_back({study, param_label(s), config.domains[d], rms, se, wall});
      if (rms > config.noise_floor * scale) {
        const double gap = config.domains[d] - config.probe;
        xs.push_back(gap * gap);
        ys.push_back(std::log(rms));
      }
    }
    RateFit fit;
    fit.study = study;
    fit.param = param_label(s);
    fit.points_used = xs.size();
    if (xs.size() >= 2) {
      const LineFit line = least_squares(xs, ys);
      fit.slope = line.slope;
      fit.intercept = line.intercept;
      fit.residual = line.residual;
    } else {
      fit.slope = std::nan("");
    }
    out.rates.push_back(fit);
  }
  return out;
}

StudyResult timing_study(const StudyConfig& config) {
  config.validate();
  StudyResult out;
  const std::string study = to_string(StudyKind::Timing);
  const auto spec = kernel_for(config, config.smoothness.front());
  const auto curve = price::InitialCurve::flat(0.0);
  int coarsest_space = 64;
  int finest = 0;
  for (GridRule rule : config.rules) {
    for (int l : config.ladder) {
      coarsest_space = std::min(coarsest_space, space_level(rule, l));
      finest = std::max(finest, l);
    }
  }
  const double D = price_domain(config, coarsest_space, dyadic(finest));
  const noise::SeedPolicy policy(config.seed);

  for (GridRule rule : config.rules) {
    for (int l : config.ladder) {
      const double k = dyadic(l);
      const int hl = space_level(rule, l);
      const noise::NoiseGrid grid(D, cells(D, hl));
      const auto model = noise::IncrementModel::build(spec, grid);
      const auto system = fem::FemSystem::assemble(grid, config.a, k);
      const price::PriceGrid pgrid(config.T, k);

      double total = 0.0;
      double fft = 0.0;
      std::vector<double> inc(grid.node_count());
      std::vector<double> nodal(grid.node_count());
      for (int r = 0; r < config.repeats; ++r) {
        auto rng = policy.stream(static_cast<std::uint64_t>(r), noise::Lane::Wiener);
        auto beta = policy.stream(static_cast<std::uint64_t>(r), noise::Lane::Beta);
        const auto start = Clock::now();
        noise::StationaryStream stream(model.sampler());
        fem::Integrator y(system, std::vector<double>(system.interior_count(), 0.0));
        price::PriceStepper x(pgrid, curve, config.scaling, D);
        for (std::size_t i = 0; i < pgrid.steps(); ++i) {
          noise::sample_increment(model, k, stream, rng, inc);
          y.nodal(nodal);
          x.advance(nodal, std::sqrt(k) * beta.normal());
          y.advance(inc);
        }
        total += seconds_since(start);
        fft += stream.fft_seconds();
      }
      const double per_sample = total / config.repeats;
      out.timings.push_back({rule, k, dyadic(hl), per_sample, total > 0.0 ? fft / total : 0.0});
      out.errors.push_back(
          {study, to_string(rule), k, 0.0, 0.0, config.record_timings ? per_sample : 0.0});
    }
  }
  return out;
}

StudyResult run_study(const StudyConfig& config) {
  switch (config.kind) {
    case StudyKind::SpatialY:
      return spatial_study(config);
    case StudyKind::TemporalY:
      return temporal_study(config);
    case StudyKind::PriceGrid:
      return price_grid_study(config);
    case StudyKind::Holder:
      return holder_study(config);
    case StudyKind::Localization:
      return localization_study(config);
    case StudyKind::Timing:
      return timing_study(config);
  }
  throw DomainError("run_study: unknown study");
}

namespace {

OrderSweep finish_sweep(OrderSweep sweep) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < sweep.steps.size(); ++i) {
    lx.push_back(std::log2(sweep.steps[i]));
    ly.push_back(std::log2(sweep.errors[i]));
  }
  sweep.order = least_squares(lx, ly).slope;
  return sweep;
}

double eigenmode_error(double a, double D, double T, int h_level, int k_level,
                       const reference::SpectralReference& exact) {
  const noise::NoiseGrid grid(D, cells(D, h_level));
  const double k = dyadic(k_level);
  const auto system = fem::FemSystem::assemble(grid, a, k);
  const std::size_t steps = cells(T, k_level);
  const auto v = [D](double x) { return std::sin(std::numbers::pi * x / D); };
  fem::Integrator y(system, v);
  const std::vector<double> zero(grid.node_count(), 0.0);
  double worst = 0.0;
  for (std::size_t n = 1; n <= steps; ++n) {
    y.advance(zero);
    const auto state = y.interior();
    const double t = static_cast<double>(n) * k;
    for (std::size_t j = 1; j < grid.intervals(); ++j) {
      worst = std::max(worst, std::abs(state[j - 1] - exact(t, grid.node(j))));
    }
  }
  return worst;
}

}  // namespace

OrderSweep fem_temporal_order(double a, double D, double T, int h_level,
                              const std::vector<int>& k_levels) {
  int finest = 0;
  for (int l : k_levels) {
    finest = std::max(finest, l);
  }
  const auto v = [D](double x) { return std::sin(std::numbers::pi * x / D); };
  const reference::SpectralReference exact(v, D, a, dyadic(finest));
  OrderSweep sweep;
  for (int l : k_levels) {
    sweep.steps.push_back(dyadic(l));
    sweep.errors.push_back(eigenmode_error(a, D, T, h_level, l, exact));
  }
  return finish_sweep(std::move(sweep));
}

OrderSweep fem_spatial_order(double a, double D, double T, int k_level,
                             const std::vector<int>& h_levels) {
  const auto v = [D](double x) { return std::sin(std::numbers::pi * x / D); };
  const reference::SpectralReference exact(v, D, a, dyadic(k_level));
  OrderSweep sweep;
  for (int l : h_levels) {
    sweep.steps.push_back(dyadic(l));
    sweep.errors.push_back(eigenmode_error(a, D, T, l, k_level, exact));
  }
  return finish_sweep(std::move(sweep));
}

DecompositionCheck decomposition_check(const kernels::KernelSpec& spec, double a, double T,
                                       int coarse_level, int fine_level, double D,
                                       double scaling, std::size_t n, std::size_t j,
                                       std::size_t samples, std::uint64_t seed) {
  if (fine_level <= coarse_level || samples < 2) {
    throw DomainError("decomposition_check: need a finer level and at least 2 samples");
  }
  const double kc = dyadic(coarse_level);
  const double kf = dyadic(fine_level);
  const std::size_t ratio = pow2(fine_level - coarse_level);
  const price::PriceGrid coarse_grid(T, kc);
  const price::PriceGrid fine_grid(T, kf);
  const noise::NoiseGrid fine_space(D, cells(D, fine_level));
  const noise::NoiseGrid coarse_space(D, cells(D, coarse_level));
  const auto model = noise::IncrementModel::build(spec, fine_space);
  const auto fine_sys = fem::FemSystem::assemble(fine_space, a, kf);
  const auto coarse_sys = fem::FemSystem::assemble(coarse_space, a, kc);
  const auto curve = price::InitialCurve::flat(0.0);
  const noise::SeedPolicy policy(seed);

  double sd = 0.0, sd2 = 0.0, sr = 0.0, sr2 = 0.0;
  for (std::size_t smp = 0; smp < samples; ++smp) {
    auto rng = policy.stream(smp, noise::Lane::Wiener);
    auto brng = policy.stream(smp, noise::Lane::Beta);
    noise::StationaryStream stream(model.sampler());

    std::vector<std::vector<double>> fine_inc(fine_grid.steps());
    for (auto& row : fine_inc) {
      row = noise::sample_increment(model, kf, stream, rng);
    }
    std::vector<std::vector<double>> coarse_inc;
    for (const auto& row : noise::aggregate_time(fine_inc, ratio)) {
      coarse_inc.push_back(noise::restrict_to_coarse(row, ratio));
    }
    const auto fine_beta = price::beta_increments(brng, fine_grid.steps(), kf);
    std::vector<double> coarse_beta(coarse_grid.steps(), 0.0);
    for (std::size_t l = 0; l < fine_beta.size(); ++l) {
      coarse_beta[l / ratio] += fine_beta[l];
    }

    const auto yf = fem::solve_path(
        fine_sys, {}, [&](std::size_t i, std::span<double> o) { std::copy(fine_inc[i].begin(), fine_inc[i].end(), o.begin()); },
        fine_grid.steps());
    const auto yc = fem::solve_path(
        coarse_sys, {}, [&](std::size_t i, std::span<double> o) { std::copy(coarse_inc[i].begin(), coarse_inc[i].end(), o.begin()); },
        coarse_grid.steps());
    const auto xf = price::solve_x(fine_grid, curve, scaling, yf, fine_beta);
    const auto xc = price::solve_x(coarse_grid, curve, scaling, yc, coarse_beta);

    const double diff = xf(n * ratio, j * ratio) - xc(n, j);
    const double direct = diff * diff;
    const double rhs = price::error_decomposition_rhs(yf, yc, coarse_grid, scaling, n, j);
    sd += direct;
    sd2 += direct * direct;
    sr += rhs;
    sr2 += rhs * rhs;
  }
  const auto m = static_cast<double>(samples);
  DecompositionCheck out;
  out.direct = sd / m;
  out.rhs = sr / m;
  out.direct_stderr = std::sqrt(std::max(0.0, (sd2 - m * out.direct * out.direct) / (m - 1.0)) / m);
  out.rhs_stderr = std::sqrt(std::max(0.0, (sr2 - m * out.rhs * out.rhs) / (m - 1.0)) / m);
  out.combined_stderr = std::hypot(out.direct_stderr, out.rhs_stderr);
  return out;
}

}  // namespace heidih::experiments

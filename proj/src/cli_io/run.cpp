#include "heidih/cli_io.hpp"
#include "heidih/errors.hpp"
#include "heidih/heat_reference.hpp"
#include "heidih/noise.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

namespace heidih::cli {
namespace {

namespace fs = std::filesystem;
using experiments::StudyKind;

struct Options {
  std::string config_path;
  std::string study;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> workers;
  std::string out;
  bool strict = false;
};

void add_common(CLI::App* cmd, Options& o, bool with_samples) {
  cmd->add_option("--config", o.config_path, "YAML configuration file");
  cmd->add_option("--seed", o.seed, "master seed");
  if (with_samples) {
    cmd->add_option("--samples", o.samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
    cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--strict", o.strict, "exit with status 2 when a rate misses its threshold");
  }
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Config load(const Options& o) {
  return o.config_path.empty() ? Config{} : load_config(o.config_path);
}

void apply_overrides(Config& cfg, const Options& o) {
  if (o.seed) cfg.study.seed = *o.seed;
  if (o.samples) cfg.study.samples = *o.samples;
  cfg.study.workers = experiments::workers_from_env(cfg.study.workers);
  if (o.workers) cfg.study.workers = *o.workers;
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) {
    fs::create_directories(file.parent_path());
  }
}

std::size_t intervals_for(double length, int level, const char* field) {
  const double c = length * std::ldexp(1.0, level);
  const auto n = static_cast<std::size_t>(std::llround(c));
  if (n < 1 || std::abs(c - static_cast<double>(n)) > 1e-9 * c) {
    throw ConfigError("config: " + std::string(field) + ": " + format_double(length) +
                          " is not a multiple of 2^-" + std::to_string(level),
                      0, 0, field);
  }
  return n;
}

// Domain for the sampling commands: the configured D, or the smallest
// localization-safe domain on the mesh.
double sample_domain(const Config& cfg, double k, double h) {
  if (cfg.study.D > 0.0) {
    return cfg.study.D;
  }
  return reference::choose_domain(cfg.study.T, k, cfg.study.a, cfg.study.T, cfg.study.domain_target, h);
}

struct SampledY {
  fem::YPath path;
  double D;
};

SampledY simulate_y(const Config& cfg, const noise::SeedPolicy& policy) {
  if (cfg.kernels.empty()) {
    throw ConfigError("config: kernel: no kernel given", 0, 0, "kernel");
  }
  const double k = std::ldexp(1.0, -cfg.sample.time_level);
  const double h = std::ldexp(1.0, -cfg.sample.space_level);
  const double D = sample_domain(cfg, k, h);
  const std::size_t steps = intervals_for(cfg.study.T, cfg.sample.time_level, "model.T");
  const noise::NoiseGrid grid(D, intervals_for(D, cfg.sample.space_level, "model.D"));
  const auto model = noise::IncrementModel::build(cfg.kernels.front(), grid);
  const auto system = fem::FemSystem::assemble(grid, cfg.study.a, k);
  auto rng = policy.stream(0, noise::Lane::Wiener);
  noise::StationaryStream stream(model.sampler());
  auto path = fem::solve_path(system, cfg.initial_y(D), fem::increment_source(model, k, stream, rng), steps);
  return {std::move(path), D};
}

int cmd_sample_y(const Options& o, std::ostream& out) {
  Config cfg = load(o);
  apply_overrides(cfg, o);
  const fs::path target = o.out.empty() ? fs::path("ypath.csv") : fs::path(o.out);
  const auto y = simulate_y(cfg, noise::SeedPolicy(cfg.study.seed));
  ensure_parent(target);
  if (target.extension() == ".bin") {
    fem::write_path_dump(target, y.path);
  } else {
    emit_ypath_csv(y.path, target);
  }
  out << "sample-y: D=" << format_double(y.D) << " nodes=" << y.path.node_count()
      << " steps=" << y.path.steps() << " -> " << target.string() << '\n';
  return 0;
}

int cmd_sample_x(const Options& o, std::ostream& out) {
  Config cfg = load(o);
  apply_overrides(cfg, o);
  const fs::path target = o.out.empty() ? fs::path("xpath.csv") : fs::path(o.out);
  const noise::SeedPolicy policy(cfg.study.seed);
  const auto y = simulate_y(cfg, policy);
  const price::PriceGrid grid(cfg.study.T, y.path.k());
  if (y.D < grid.required_domain() - 1e-12) {
    throw ConfigError("config: model.D: the price lattice needs D >= 2T - k = " +
                          format_double(grid.required_domain()),
                      0, 0, "model.D");
  }
  auto beta_rng = policy.stream(0, noise::Lane::Beta);
  const auto beta = price::beta_increments(beta_rng, grid.steps(), grid.k());
  auto x = price::solve_x(grid, cfg.curve.build(), cfg.price_scaling(), y.path, beta);
  x.seed = cfg.study.seed;
  ensure_parent(target);
  price::write_xpath_csv(target, x);
  out << "sample-x: scaling=" << format_double(x.scaling()) << " lattice=" << x.size() << "x" << x.size()
      << " -> " << target.string() << '\n';
  return 0;
}

int cmd_kernel_table(const Options& o, std::ostream& out) {
  Config cfg = load(o);
  const fs::path target = o.out.empty() ? fs::path("kernel_table.csv") : fs::path(o.out);
  const double h = std::ldexp(1.0, -cfg.sample.space_level);
  const double length = cfg.study.D > 0.0 ? cfg.study.D : 2.0 * cfg.study.T;
  const std::size_t n = intervals_for(length, cfg.sample.space_level, "model.D");
  ensure_parent(target);
  std::ofstream csv(target, std::ios::binary | std::ios::trunc);
  if (!csv) {
    throw std::runtime_error("cannot write " + target.string());
  }
  csv << "param,lag,stationary,weight,kernel\n";
  for (const auto& spec : cfg.kernels) {
    const std::string param = experiments::param_label(spec.stationary.smoothness_index());
    for (std::size_t j = 0; j <= n; ++j) {
      const double lag = j == n ? length : static_cast<double>(j) * h;
      csv << csv_field(param) << ',' << format_double(lag) << ','
          << format_double(kernels::matern(spec.stationary, lag)) << ',' << format_double(spec.weight(lag))
          << ',' << format_double(kernels::kernel_eval(spec, 0.0, lag)) << '\n';
    }
  }
  csv.flush();
  if (!csv) {
    throw std::runtime_error("write failed: " + target.string());
  }
  out << "kernel-table: " << cfg.kernels.size() << " kernels x " << (n + 1) << " lags -> " << target.string()
      << '\n';
  if (cfg.eta) {
    out << "eta scaling: " << format_double(cfg.price_scaling()) << '\n';
  }
  return 0;
}

int cmd_study(const Options& o, std::optional<StudyKind> forced, std::ostream& out, std::ostream& err) {
  Config cfg = load(o);
  if (forced) {
    cfg.study.kind = *forced;
  } else if (!o.study.empty()) {
    const auto kind = experiments::parse_study_kind(o.study);
    if (!kind) {
      err << "unknown study '" << o.study << "'\n";
      return kExitUsage;
    }
    cfg.study.kind = *kind;
  } else if (!cfg.study_given) {
    err << "convergence: give --study or a study key in the config\n";
    return kExitUsage;
  }
  apply_overrides(cfg, o);
  if (cfg.y0_bump) {
    throw ConfigError("config: model.initial: bump initial data is only used by the sample commands", 0, 0,
                      "model.initial");
  }
  cfg.study.validate();

  const auto result = experiments::run_study(cfg.study);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  emit_errors_csv(result.errors, dir / "errors.csv");
  emit_rates_csv(result.rates, dir / "rates.csv");
  if (cfg.study.kind == StudyKind::Timing) {
    emit_timings_csv(result.timings, dir / "timing.csv");
    for (const auto& t : result.timings) {
      out << "timing " << experiments::to_string(t.rule) << " k=" << format_double(t.k)
          << ": " << fmt("%.4g", t.wall_s) << " s/sample, fft " << fmt("%.1f", 100.0 * t.fft_share)
          << "%\n";
    }
  }
  for (const auto& r : result.rates) {
    out << r.study << ' ' << r.param << ": rate " << fmt("%.3f", r.slope) << " over " << r.points_used
        << " points" << (r.dropped_coarsest ? " (coarsest dropped)" : "") << '\n';
  }
  out << "wrote " << (dir / "errors.csv").string() << ", " << (dir / "rates.csv").string() << '\n';

  if (o.strict) {
    const auto bad = threshold_violations(result.rates, cfg.study.thresholds);
    for (const auto& b : bad) {
      err << "threshold violated: " << b << '\n';
    }
    if (!bad.empty()) {
      return kExitThreshold;
    }
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Volatility and forward-price simulation with Monte Carlo convergence studies", "heidih"};
  app.require_subcommand(1);
  Options o;

  auto* sy = app.add_subcommand("sample-y", "simulate one volatility path");
  add_common(sy, o, false);
  sy->add_option("--out", o.out, "output file (.csv or .bin)");

  auto* sx = app.add_subcommand("sample-x", "simulate one price surface");
  add_common(sx, o, false);
  sx->add_option("--out", o.out, "output CSV");

  auto* conv = app.add_subcommand("convergence", "run a convergence study");
  add_common(conv, o, true);
  conv->add_option("--study", o.study, "spatial-y, temporal-y, price-grid, holder, localization, timing");
  conv->add_option("--out", o.out, "output directory");

  auto* kt = app.add_subcommand("kernel-table", "tabulate the configured kernels");
  add_common(kt, o, false);
  kt->add_option("--out", o.out, "output CSV");

  auto* loc = app.add_subcommand("localization", "run the domain localization study");
  add_common(loc, o, true);
  loc->add_option("--out", o.out, "output directory");

  auto* tim = app.add_subcommand("timing", "time the h = k and h = sqrt(k) solvers");
  add_common(tim, o, true);
  tim->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sy->parsed()) return cmd_sample_y(o, out);
    if (sx->parsed()) return cmd_sample_x(o, out);
    if (kt->parsed()) return cmd_kernel_table(o, out);
    if (conv->parsed()) return cmd_study(o, std::nullopt, out, err);
    if (loc->parsed()) return cmd_study(o, StudyKind::Localization, out, err);
    if (tim->parsed()) return cmd_study(o, StudyKind::Timing, out, err);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace heidih::cli

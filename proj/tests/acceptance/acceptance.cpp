// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [scratch-dir]
#include "heidih/cli_io.hpp"
#include "heidih/experiments.hpp"
#include "heidih/kernels.hpp"
#include "heidih/noise.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace heidih;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct StudyRun {
  bool ok = false;
  double seconds = 0.0;
  std::vector<experiments::RateFit> rates;
  fs::path dir;
};

StudyRun run_cli(const std::string& config, std::size_t workers, const fs::path& out_dir) {
  const std::string path = (fs::path(HEIDIH_SOURCE_DIR) / "configs" / config).string();
  const std::string w = std::to_string(workers);
  const std::string out = out_dir.string();
  const char* argv[] = {"heidih", "convergence", "--config", path.c_str(), "--workers", w.c_str(),
                        "--out", out.c_str()};
  std::ostringstream sink;
  std::ostringstream err;
  const auto start = Clock::now();
  const int code = cli::run(8, argv, sink, err);
  StudyRun r;
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.dir = out_dir;
  r.ok = code == 0;
  if (!r.ok) {
    std::fprintf(stderr, "%s failed with status %d: %s\n", config.c_str(), code, err.str().c_str());
    return r;
  }
  r.rates = cli::read_rates_csv(out_dir / "rates.csv");
  return r;
}

const experiments::RateFit* find_rate(const StudyRun& r, const std::string& param) {
  for (const auto& f : r.rates) {
    if (f.param == param) {
      return &f;
    }
  }
  return nullptr;
}

// Checks lo <= slope <= hi for each (param, lo, hi) and the runtime limit.
void check_rates(const std::string& name, const StudyRun& r,
                 const std::vector<std::tuple<std::string, double, double>>& bounds,
                 double max_seconds) {
  if (!r.ok) {
    report(false, name, "study did not run");
    return;
  }
  bool pass = r.seconds <= max_seconds;
  std::string detail;
  for (const auto& [param, lo, hi] : bounds) {
    const auto* f = find_rate(r, param);
    if (f == nullptr) {
      pass = false;
      detail += param + " missing; ";
      continue;
    }
    const bool in = f->slope >= lo && f->slope <= hi;
    pass = pass && in;
    detail += param + " rate " + fmt("%.3f", f->slope) + (in ? "" : " (out of range)") + "; ";
  }
  detail += "runtime " + fmt("%.1f", r.seconds) + " s (limit " + fmt("%.0f", max_seconds) + " s)";
  report(pass, name, detail);
}

void check_fem_orders() {
  const auto start = Clock::now();
  const auto temporal = experiments::fem_temporal_order(0.05, 1.0, 1.0, 8, {3, 4, 5, 6});
  const auto spatial = experiments::fem_spatial_order(0.05, 1.0, 1.0, 14, {2, 3, 4, 5});
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  report(temporal.order >= 0.9 && spatial.order >= 1.9 && s <= 60.0, "deterministic FEM orders",
         "temporal " + fmt("%.3f", temporal.order) + ", spatial " + fmt("%.3f", spatial.order) +
             ", runtime " + fmt("%.2f", s) + " s");
}

void check_noise() {
  double worst = 0.0;
  double worst_clip = 0.0;
  for (double nu : {0.05, 0.1, 0.5, 1.0, 2.5}) {
    for (std::size_t n : {16u, 128u, 257u}) {
      const kernels::MaternParams p{nu, 0.5, 1.0};
      const double h = 1.0 / 128.0;
      const auto sampler = noise::CirculantSampler::build(p, h, n);
      worst_clip = std::max(worst_clip, sampler.clip_mass());
      if (sampler.clip_mass() != 0.0) {
        continue;
      }
      const auto row = sampler.induced_covariance();
      for (std::size_t m = 0; m <= n; ++m) {
        worst = std::max(worst, std::abs(row[m] - kernels::matern(p, static_cast<double>(m) * h)));
      }
    }
  }
  report(worst <= 1e-10 && worst_clip == 0.0, "circulant covariance exactness",
         "max deviation " + fmt("%.2e", worst) + ", clip mass " + fmt("%.1e", worst_clip));

  const kernels::KernelSpec spec{{0.6, 0.5, 1.0}, kernels::WeightFn::polynomial(0.75, 0.5)};
  const noise::NoiseGrid grid(1.0, 8);
  const auto model = noise::IncrementModel::build(spec, grid);
  const double k = 1.0 / 64.0;
  noise::StationaryStream stream(model.sampler());
  auto rng = noise::SeedPolicy(2024).stream(0, noise::Lane::Auxiliary);
  const int draws = 20000;
  const auto nodes = static_cast<Eigen::Index>(grid.node_count());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(nodes, nodes);
  std::vector<double> inc(grid.node_count());
  for (int d = 0; d < draws; ++d) {
    noise::sample_increment(model, k, stream, rng, inc);
    const Eigen::Map<Eigen::VectorXd> v(inc.data(), nodes);
    sum += v * v.transpose();
  }
  const Eigen::MatrixXd emp = sum / draws;
  double worst_z = 0.0;
  for (Eigen::Index i = 0; i < nodes; ++i) {
    for (Eigen::Index j = 0; j < nodes; ++j) {
      const double want = k * kernels::kernel_eval(spec, grid.node(i), grid.node(j));
      const double var_i = k * kernels::kernel_eval(spec, grid.node(i), grid.node(i));
      const double var_j = k * kernels::kernel_eval(spec, grid.node(j), grid.node(j));
      // Var of a product of jointly Gaussian zero-mean variables
      const double se = std::sqrt((var_i * var_j + want * want) / draws);
      if (se > 0.0) {
        worst_z = std::max(worst_z, std::abs(emp(i, j) - want) / se);
      } else if (emp(i, j) != 0.0) {
        worst_z = 1e300;
      }
    }
  }
  report(worst_z <= 5.0, "increment covariance on 9 nodes",
         "worst entry " + fmt("%.2f", worst_z) + " standard errors over " + std::to_string(draws) +
             " draws");
}

void check_decomposition() {
  const kernels::KernelSpec spec{{0.5, 0.5, 1.0}, kernels::WeightFn::constant_one()};
  bool pass = true;
  std::string detail;
  // coarse k = h = 1/4 on T = 1 gives a 4 x 4 lattice
  for (std::size_t j : {0u, 1u, 2u}) {
    const auto c = experiments::decomposition_check(spec, 0.05, 1.0, 2, 4, 2.0, 1.0, 3, j, 4000, 31 + j);
    const double z = std::abs(c.direct - c.rhs) / c.combined_stderr;
    pass = pass && z <= 3.0 && c.direct > 0.0;
    detail += "x_" + std::to_string(j) + ": direct " + fmt("%.4g", c.direct) + " rhs " + fmt("%.4g", c.rhs) +
              " (" + fmt("%.2f", z) + " se); ";
  }
  report(pass, "error decomposition identity", detail.substr(0, detail.size() - 2));
}

void check_timing(const StudyRun& r) {
  if (!r.ok) {
    report(false, "timing h=sqrt(k) vs h=k", "study did not run");
    return;
  }
  std::map<double, std::map<std::string, double>> wall;  // k -> rule -> seconds
  std::ifstream in(r.dir / "timing.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto f = cli::split_csv_line(line);
    if (f.size() == 5) {
      wall[std::stod(f[1])][f[0]] = std::stod(f[3]);
    }
  }
  bool pass = wall.size() >= 2;
  std::string detail;
  int seen = 0;
  for (const auto& [k, rules] : wall) {  // ascending k: finest first
    if (seen++ == 2) break;
    const auto eq = rules.find("h=k");
    const auto sq = rules.find("h=sqrt(k)");
    if (eq == rules.end() || sq == rules.end()) {
      pass = false;
      continue;
    }
    pass = pass && sq->second < eq->second;
    detail += "k=" + fmt("%g", k) + ": " + fmt("%.4f", sq->second) + " s vs " + fmt("%.4f", eq->second) + " s; ";
  }
  report(pass, "timing h=sqrt(k) vs h=k", detail.empty() ? "no timings" : detail.substr(0, detail.size() - 2));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "heidih_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  const std::vector<std::string> studies = {"spatial", "temporal", "price", "holder", "localization", "timing"};
  std::map<std::string, StudyRun> one;
  std::map<std::string, StudyRun> eight;
  for (const auto& s : studies) {
    one[s] = run_cli(s + ".yaml", 1, scratch / (s + "_w1"));
  }

  check_rates("spatial volatility rates", one["spatial"], {{"s_W=0.55", 0.40, 0.70}, {"s_W=1", 0.85, 1.15}},
              600.0);
  check_rates("temporal volatility rates", one["temporal"], {{"s_W=0.55", 0.40, 0.65}, {"s_W=1", 0.40, 0.65}},
              600.0);
  check_rates("price grid tradeoff", one["price"],
              {{"s_W=0.55|h=k", 0.40, 0.65},
               {"s_W=1|h=k", 0.40, 0.65},
               {"s_W=1|h=sqrt(k)", 0.40, 0.65},
               {"s_W=0.55|h=sqrt(k)", -1e300, 0.40}},
              900.0);
  check_timing(one["timing"]);
  check_fem_orders();
  check_noise();
  check_decomposition();
  check_rates("Hoelder exponent", one["holder"], {{"s_W=0.55", 0.80, 1.05}}, 600.0);
  check_rates("localization slope", one["localization"], {{"s_W=0.55", -1e300, -2.0}}, 600.0);

  bool same = true;
  std::string detail;
  for (const auto& s : studies) {
    eight[s] = run_cli(s + ".yaml", 8, scratch / (s + "_w8"));
    bool study_same = one[s].ok && eight[s].ok;
    for (const char* file : {"errors.csv", "rates.csv"}) {
      study_same = study_same && slurp(one[s].dir / file) == slurp(eight[s].dir / file);
    }
    same = same && study_same;
    if (!study_same) detail += s + " differs; ";
  }
  report(same, "determinism across 1 and 8 workers",
         same ? "errors.csv and rates.csv byte-identical for all six studies" : detail);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

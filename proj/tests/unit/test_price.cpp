#include "check.hpp"
#include "heidih/errors.hpp"
#include "heidih/experiments.hpp"
#include "heidih/price_fd.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace heidih;
using namespace heidih::price;

namespace {

InitialCurve bump_curve() {
  const auto w = kernels::WeightFn::bump(1.0, 0.5, 2.0);
  return InitialCurve([w](double x) { return w(x); }, 0.5);
}

fem::YPath random_path(double D, std::size_t intervals, double k, std::size_t steps, std::uint64_t seed) {
  fem::YPath y(D, intervals, k, steps);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i <= steps; ++i) {
    for (std::size_t j = 1; j < intervals; ++j) {
      y(i, j) = normal(gen);
    }
  }
  return y;
}

fem::YPath constant_path(double D, std::size_t intervals, double k, std::size_t steps, double value) {
  fem::YPath y(D, intervals, k, steps);
  for (std::size_t i = 0; i <= steps; ++i) {
    for (std::size_t j = 0; j <= intervals; ++j) {
      y(i, j) = value;
    }
  }
  return y;
}

}  // namespace

TEST_CASE("shifted initial curve") {
  const auto flat = InitialCurve::flat(0.7);
  CHECK(shift_eval(flat, 0.3, 1.1) == 0.7);
  const auto curve = bump_curve();
  CHECK(shift_eval(curve, 0.25, 0.75) == doctest::Approx(2.5));
  const PriceGrid grid(1.0, 0.125);
  for (std::size_t n = 0; n <= 8; ++n) {
    for (std::size_t j = 0; j <= 8; ++j) {
      CHECK(shift_eval(curve, grid.t(n), grid.x(j)) == shift_eval(curve, 0.0, grid.x(j + n)));
    }
  }
  const InitialCurve bounded({}, 1.0, 1.5);
  CHECK_THROWS_AS(shift_eval(bounded, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(PriceGrid(1.0, 0.3), DomainError);
}

TEST_CASE("beta increments have variance k and are reproducible") {
  const double k = 1.0 / 64.0;
  auto rng = noise::SeedPolicy(3).stream(0, noise::Lane::Beta);
  const std::size_t draws = 20000;
  const auto b = beta_increments(rng, draws, k);
  double sq = 0.0;
  double q4 = 0.0;
  for (double v : b) {
    sq += v * v;
    q4 += v * v * v * v;
  }
  const double var = sq / draws;
  const double se = std::sqrt((q4 / draws - var * var) / draws);
  CHECK(std::abs(var - k) <= 5.0 * se);
  auto again = noise::SeedPolicy(3).stream(0, noise::Lane::Beta);
  CHECK(beta_increments(again, draws, k) == b);
}

TEST_CASE("beta lane is uncorrelated with the Wiener lane") {
  const noise::SeedPolicy policy(12);
  const std::size_t samples = 20000;
  double sxy = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    auto w = policy.stream(s, noise::Lane::Wiener);
    auto b = policy.stream(s, noise::Lane::Beta);
    sxy += w.normal() * b.normal();
  }
  const double corr = sxy / samples;
  CHECK(std::abs(corr) <= 5.0 / std::sqrt(static_cast<double>(samples)));
}

TEST_CASE("zero volatility or zero scaling leaves only the drift") {
  const PriceGrid grid(1.0, 0.125);
  const auto curve = bump_curve();
  const fem::YPath zero(2.0, 16, 0.125, 8);
  const auto noisy = random_path(2.0, 16, 0.125, 8, 4);
  const std::vector<double> beta(8, 0.3);
  const auto x0 = solve_x(grid, curve, 1.0, zero, beta);
  const auto xs = solve_x(grid, curve, 0.0, noisy, beta);
  for (std::size_t i = 0; i <= 8; ++i) {
    for (std::size_t j = 0; j <= 8; ++j) {
      const double drift = shift_eval(curve, grid.t(i), grid.x(j));
      CHECK(x0(i, j) == drift);
      CHECK(xs(i, j) == drift);
    }
  }
}

TEST_CASE("one recursion step by hand") {
  const PriceGrid grid(0.5, 0.25);  // N = 2
  const auto curve = InitialCurve::flat(1.0);
  fem::YPath y(1.0, 4, 0.25, 2);    // nodes 0, .25, .5, .75, 1
  y(0, 2) = 3.0;                    // Y(t_0, 0.5) = 3
  const std::vector<double> beta = {0.1, -0.2};
  const auto x = solve_x(grid, curve, 2.0, y, beta);
  // X[1][j] = 1 + 2 * Y(t_0, x_j) * 0.1; only x_2 = 0.5 is hit
  CHECK(x(1, 0) == doctest::Approx(1.0));
  CHECK(x(1, 1) == doctest::Approx(1.0));
  CHECK(x(1, 2) == doctest::Approx(1.6));
  // X[2][1] carries X[1][2] forward with Y(t_1, .) = 0
  CHECK(x(2, 0) == doctest::Approx(1.0));
  CHECK(x(2, 1) == doctest::Approx(1.6));
}

TEST_CASE("recursion agrees with the closed form on random instances") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const double k = 1.0 / 16.0;
    const PriceGrid grid(1.0, k);
    // Spatial mesh coarser than k so off-node interpolation is exercised.
    const auto y = random_path(2.0, 24, k, 16, seed);
    std::mt19937_64 gen(seed + 100);
    std::normal_distribution<double> normal;
    std::vector<double> beta(16);
    for (double& b : beta) {
      b = std::sqrt(k) * normal(gen);
    }
    const auto a = solve_x(grid, bump_curve(), 0.7, y, beta);
    const auto c = closed_form_x(grid, bump_curve(), 0.7, y, beta);
    double worst = 0.0;
    for (std::size_t i = 0; i <= 16; ++i) {
      for (std::size_t j = 0; j <= 16; ++j) {
        worst = std::max(worst, std::abs(a(i, j) - c(i, j)));
      }
      CHECK(c(0, i) == shift_eval(bump_curve(), 0.0, grid.x(i)));
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("unit volatility telescopes to the Brownian path") {
  const PriceGrid grid(1.0, 0.125);
  const auto y = constant_path(2.0, 16, 0.125, 8, 1.0);
  const std::vector<double> beta = {0.1, -0.3, 0.2, 0.05, -0.1, 0.4, -0.2, 0.15};
  const auto x = closed_form_x(grid, InitialCurve::flat(0.0), 1.0, y, beta);
  double b = 0.0;
  for (std::size_t n = 0; n <= 8; ++n) {
    for (std::size_t j = 0; j <= 8; ++j) {
      CHECK(x(n, j) == doctest::Approx(b).epsilon(1e-14).scale(1.0));
    }
    if (n < 8) {
      b += beta[n];
    }
  }
}

TEST_CASE("price domain must cover 2T - k") {
  const PriceGrid grid(1.0, 0.125);
  const fem::YPath short_y(1.5, 12, 0.125, 8);
  const std::vector<double> beta(8, 0.0);
  CHECK_THROWS_AS(solve_x(grid, InitialCurve::flat(0.0), 1.0, short_y, beta), DomainError);
  CHECK_THROWS_AS(PriceStepper(grid, InitialCurve::flat(0.0), 1.0, 1.8), DomainError);
  const fem::YPath wrong_k(2.0, 16, 0.0625, 16);
  CHECK_THROWS_AS(solve_x(grid, InitialCurve::flat(0.0), 1.0, wrong_k, beta), ShapeError);
}

TEST_CASE("martingale along characteristics") {
  const kernels::KernelSpec spec{{0.5, 0.5, 1.0}, kernels::WeightFn::constant_one()};
  const double k = 0.125;
  const PriceGrid grid(1.0, k);
  const noise::NoiseGrid space(2.0, 16);
  const auto model = noise::IncrementModel::build(spec, space);
  const auto sys = fem::FemSystem::assemble(space, 0.05, k);
  const noise::SeedPolicy policy(31);
  const std::size_t samples = 3000;
  // increments of X along T* = 1 (i + j = 8)
  std::vector<double> sum(8, 0.0), sum_sq(8, 0.0);
  const auto y0 = [](double x) { return 1.0 + 0.0 * x; };
  for (std::size_t s = 0; s < samples; ++s) {
    auto rng = policy.stream(s, noise::Lane::Wiener);
    auto brng = policy.stream(s, noise::Lane::Beta);
    noise::StationaryStream stream(model.sampler());
    const auto y = fem::solve_path(sys, y0, fem::increment_source(model, k, stream, rng), 8);
    const auto beta = beta_increments(brng, 8, k);
    const auto x = solve_x(grid, bump_curve(), 1.0, y, beta);
    for (std::size_t i = 0; i < 8; ++i) {
      const double d = x(i + 1, 8 - i - 1) - x(i, 8 - i);
      sum[i] += d;
      sum_sq[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const double mean = sum[i] / samples;
    const double se = std::sqrt((sum_sq[i] / samples - mean * mean) / (samples - 1.0));
    CAPTURE(i);
    CHECK(std::abs(mean) <= 4.0 * se + 1e-15);
  }
}

TEST_CASE("doubling the scaling doubles the stochastic part") {
  const PriceGrid grid(1.0, 0.125);
  const auto y = random_path(2.0, 16, 0.125, 8, 9);
  const std::vector<double> beta = {0.1, -0.3, 0.2, 0.05, -0.1, 0.4, -0.2, 0.15};
  const auto curve = bump_curve();
  const auto x1 = solve_x(grid, curve, 0.4, y, beta);
  const auto x2 = solve_x(grid, curve, 0.8, y, beta);
  for (std::size_t i = 0; i <= 8; ++i) {
    for (std::size_t j = 0; j <= 8; ++j) {
      const double drift = shift_eval(curve, grid.t(i), grid.x(j));
      CHECK(x2(i, j) - drift == doctest::Approx(2.0 * (x1(i, j) - drift)).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("error decomposition integrand") {
  const double k = 0.125;
  const PriceGrid grid(1.0, k);
  const auto y = random_path(2.0, 16, k, 8, 1);
  CHECK(error_decomposition_rhs(y, y, grid, 1.0, 8, 0) == 0.0);

  // Y(r, x) = r against its coarse version t_i: n k_f^3 sum_{m<R} m^2 -> n k^3 / 3
  for (std::size_t ratio : {1u, 4u, 64u}) {
    const double kf = k / static_cast<double>(ratio);
    fem::YPath fine(2.0, 16, kf, 8 * ratio);
    for (std::size_t l = 0; l <= 8 * ratio; ++l) {
      for (std::size_t j = 0; j <= 16; ++j) {
        fine(l, j) = static_cast<double>(l) * kf;
      }
    }
    fem::YPath coarse(2.0, 16, k, 8);
    for (std::size_t i = 0; i <= 8; ++i) {
      for (std::size_t j = 0; j <= 16; ++j) {
        coarse(i, j) = static_cast<double>(i) * k;
      }
    }
    const auto r = static_cast<double>(ratio);
    for (std::size_t n : {1u, 5u, 8u}) {
      const double want = static_cast<double>(n) * kf * kf * kf * (r - 1.0) * r * (2.0 * r - 1.0) / 6.0;
      const double got = error_decomposition_rhs(fine, coarse, grid, 1.0, n, 8 - n);
      CHECK(got == doctest::Approx(want).epsilon(1e-12).scale(1.0));
      if (ratio == 64) {
        CHECK_REL(got, static_cast<double>(n) * k * k * k / 3.0, 2.0 / r);
      }
    }
  }
  CHECK_THROWS_AS(error_decomposition_rhs(y, y, grid, 1.0, 9, 0), ShapeError);
}

TEST_CASE("decomposition identity on a 4x4 lattice") {
  const kernels::KernelSpec spec{{0.5, 0.5, 1.0}, kernels::WeightFn::constant_one()};
  const auto check = experiments::decomposition_check(spec, 0.05, 1.0, 2, 4, 2.0, 1.0, 3, 1, 4000, 5);
  CHECK(check.direct > 0.0);
  CHECK(std::abs(check.direct - check.rhs) <= 3.0 * check.combined_stderr);
}

TEST_CASE("lattice CSV output") {
  const PriceGrid grid(0.5, 0.25);
  const auto y = constant_path(1.0, 4, 0.25, 2, 1.0);
  const std::vector<double> beta = {0.1, 0.2};
  const auto x = solve_x(grid, InitialCurve::flat(1.0), 1.0, y, beta);
  const auto file = std::filesystem::temp_directory_path() / "heidih_xpath.csv";
  write_xpath_csv(file, x);
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x,value");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
  }
  CHECK(rows == 9);
  std::filesystem::remove(file);
}

#pragma once

// Configuration files, CSV output and the command-line entry point.
//
// Configs are YAML documents with a mandatory `version: 1` key. Every section
// is optional and defaults are filled in; unknown keys are rejected with the
// line and column of the offending key.

#include "heidih/experiments.hpp"
#include "heidih/heat_fem.hpp"
#include "heidih/kernels.hpp"
#include "heidih/price_fd.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace heidih::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitConfig = 65;
inline constexpr int kExitThreshold = 2;

enum class CurveShape { None, Bump, Exponential };

struct CurveConfig {
  double level = 0.0;
  CurveShape shape = CurveShape::None;
  double center = 1.0;      // bump
  double half_width = 0.5;  // bump
  double amplitude = 0.0;   // bump, exponential
  double rate = 1.0;        // exponential: amplitude * exp(-rate x)

  price::InitialCurve build() const;
};

struct EtaConfig {
  std::vector<double> points;
  std::vector<double> coeffs;
  double r = 1.1;
  kernels::KernelSpec q_b;
};

struct SampleConfig {
  int space_level = 7;
  int time_level = 7;
};

// Smooth bump for Y(0), accepted by the sampling commands only.
struct BumpConfig {
  double center = 1.0;
  double half_width = 0.5;
  double amplitude = 1.0;
};

struct Config {
  experiments::StudyConfig study;
  bool study_given = false;
  /// Kernels exactly as written in the file, one per smoothness entry.
  std::vector<kernels::KernelSpec> kernels;
  CurveConfig curve;
  std::optional<EtaConfig> eta;
  SampleConfig sample;
  std::optional<BumpConfig> y0_bump;

  /// Y(0) on [0, D]: zero, sine mode, or bump. Empty function means zero.
  std::function<double(double)> initial_y(double D) const;

  /// Price-noise scale: sqrt of the eta scaling when an eta block is given,
  /// otherwise price.scaling.
  double price_scaling() const;
};

/// Throws ConfigError with 1-based line/column and the dotted field path.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

std::string format_double(double v);
/// Quotes a field when it contains a comma, quote, or line break.
std::string csv_field(std::string_view s);
std::vector<std::string> split_csv_line(std::string_view line);

void emit_errors_csv(const std::vector<experiments::ErrorRow>& rows,
                     const std::filesystem::path& path);
void emit_rates_csv(const std::vector<experiments::RateFit>& rates,
                    const std::filesystem::path& path);
void emit_timings_csv(const std::vector<experiments::StudyResult::Timing>& rows,
                      const std::filesystem::path& path);
void emit_ypath_csv(const fem::YPath& path, const std::filesystem::path& out);

std::vector<experiments::ErrorRow> read_errors_csv(const std::filesystem::path& path);
std::vector<experiments::RateFit> read_rates_csv(const std::filesystem::path& path);

/// Returns the names of thresholds whose rate falls outside [min, max] or
/// that match no fitted sweep.
std::vector<std::string> threshold_violations(const std::vector<experiments::RateFit>& rates,
                                              const std::vector<experiments::Threshold>& limits);

/// Full CLI. Returns 0, 2 (strict threshold violation), 64 (usage), 65
/// (config), or 1 (runtime failure).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace heidih::cli

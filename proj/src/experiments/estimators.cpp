#include "heidih/errors.hpp"
#include "heidih/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace heidih::experiments {

std::string to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::SpatialY:
      return "spatial-y";
    case StudyKind::TemporalY:
      return "temporal-y";
    case StudyKind::PriceGrid:
      return "price-grid";
    case StudyKind::Holder:
      return "holder";
    case StudyKind::Localization:
      return "localization";
    case StudyKind::Timing:
      return "timing";
  }
  return "unknown";
}

std::optional<StudyKind> parse_study_kind(std::string_view name) {
  for (auto kind : {StudyKind::SpatialY, StudyKind::TemporalY, StudyKind::PriceGrid,
                    StudyKind::Holder, StudyKind::Localization, StudyKind::Timing}) {
    if (to_string(kind) == name) {
      return kind;
    }
  }
  return std::nullopt;
}

std::string to_string(GridRule rule) { return rule == GridRule::Equal ? "h=k" : "h=sqrt(k)"; }

std::optional<GridRule> parse_grid_rule(std::string_view name) {
  if (name == "h=k") {
    return GridRule::Equal;
  }
  if (name == "h=sqrt(k)") {
    return GridRule::SquareRoot;
  }
  return std::nullopt;
}

int space_level(GridRule rule, int time_level) {
  return rule == GridRule::Equal ? time_level : (time_level + 1) / 2;
}

std::string param_label(double smoothness) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "s_W=%g", smoothness);
  return buf;
}

std::string param_label(double smoothness, GridRule rule) {
  return param_label(smoothness) + "|" + to_string(rule);
}

void StudyConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why, 0, 0, field);
  };
  if (smoothness.empty()) {
    fail("kernel.smoothness", "needs at least one value");
  }
  for (double s : smoothness) {
    if (!(s > 0.5) || !std::isfinite(s)) {
      fail("kernel.smoothness", "each s_W must exceed 1/2");
    }
  }
  if (!(mu > 0.0)) fail("kernel.mu", "must be positive");
  if (!(zeta > 0.0)) fail("kernel.zeta", "must be positive");
  if (!(a > 0.0)) fail("model.a", "must be positive");
  if (!(T > 0.0)) fail("model.T", "must be positive");
  if (!(domain_target > 0.0 && domain_target <= 1.0)) fail("model.domain_target", "must lie in (0, 1]");
  if (samples < 2) fail("run.samples", "need at least 2 samples");
  if (batch < 1) fail("run.batch", "must be at least 1");
  if (workers < 1) fail("run.workers", "must be at least 1");

  const bool ladder_study = kind == StudyKind::SpatialY || kind == StudyKind::TemporalY ||
                            kind == StudyKind::PriceGrid || kind == StudyKind::Timing;
  if (ladder_study) {
    if (ladder.size() < (kind == StudyKind::Timing ? 1u : 3u)) {
      fail("grid.ladder", "needs at least 3 levels");
    }
    for (int l : ladder) {
      if (l < 0 || l > 24) fail("grid.ladder", "levels must lie in 0..24");
      if (kind != StudyKind::Timing && l >= reference_level) {
        fail("grid.ladder", "level " + std::to_string(l) + " does not divide the reference level " +
                                std::to_string(reference_level));
      }
    }
    if (reference_level < 0 || reference_level > 24) fail("grid.reference", "must lie in 0..24");
    if (fixed_level < 0 || fixed_level > 24) fail("grid.fixed", "must lie in 0..24");
  }
  if (kind == StudyKind::SpatialY || kind == StudyKind::TemporalY || kind == StudyKind::Holder) {
    if (!(D > 0.0)) {
      fail("model.D", "volatility studies need an explicit domain");
    } else {
      const double cells = D * std::ldexp(1.0, kind == StudyKind::TemporalY ? fixed_level : reference_level);
      if (std::abs(cells - std::round(cells)) > 1e-9) fail("model.D", "must be a multiple of the mesh width");
    }
  }
  if (kind == StudyKind::PriceGrid || kind == StudyKind::Timing) {
    if (rules.empty()) fail("price.rules", "needs at least one grid rule");
  }
  if (kind == StudyKind::Holder) {
    if (probes.empty()) fail("holder.probes", "needs at least one probe");
    if (separation_levels.size() < 3) fail("holder.separations", "needs at least 3 separations");
    for (int l : separation_levels) {
      if (l > fixed_level) fail("holder.separations", "separation finer than the time step");
    }
    if (!(holder_start >= 0.0 && holder_start < T)) fail("holder.start", "must lie in [0, T)");
  }
  if (kind == StudyKind::Localization) {
    if (domains.size() < 3) fail("localization.domains", "needs at least 3 domains");
    for (double d : domains) {
      if (!(d > probe) || d > reference_domain) {
        fail("localization.domains", "each D must lie in (probe, reference_domain]");
      }
    }
  }
  if (kind == StudyKind::Timing && repeats < 1) fail("timing.repeats", "must be at least 1");
}

RateFit fit_rate(std::span<const double> resolution, std::span<const double> error, bool guard) {
  if (resolution.size() != error.size()) {
    throw ShapeError("fit_rate: resolution and error lengths differ");
  }
  if (resolution.size() < 3) {
    throw ShapeError("fit_rate: need at least 3 points, got " + std::to_string(resolution.size()));
  }
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < error.size(); ++i) {
    if (!(error[i] > 0.0) || !(resolution[i] > 0.0)) {
      throw DomainError("fit_rate: errors and resolutions must be positive");
    }
    x.push_back(std::log2(resolution[i]));
    y.push_back(std::log2(error[i]));
  }
  RateFit out;
  LineFit fit = least_squares(x, y);
  out.points_used = x.size();

  if (guard && x.size() >= 4) {
    const auto coarsest = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
    std::vector<double> xr;
    std::vector<double> yr;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i != coarsest) {
        xr.push_back(x[i]);
        yr.push_back(y[i]);
      }
    }
    const LineFit rest = least_squares(xr, yr);
    const double rms = rest.residual / std::sqrt(static_cast<double>(xr.size()));
    const double deviation = std::abs(y[coarsest] - (rest.slope * x[coarsest] + rest.intercept));
    if (deviation > 3.0 * std::max(rms, 0.02)) {
      fit = rest;
      out.points_used = xr.size();
      out.dropped_coarsest = true;
    }
  }
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.residual = fit.residual;
  return out;
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() != y.size() || x.size() < 2) {
    throw ShapeError("least_squares: need at least 2 paired points");
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) {
    throw DomainError("least_squares: abscissae are all equal");
  }
  LineFit f{};
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.residual = std::sqrt(ss);
  return f;
}

void PointAccumulator::merge(const PointAccumulator& other) {
  if (other.size() != size()) {
    throw ShapeError("PointAccumulator::merge: size mismatch");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    sum_[i] += other.sum_[i];
    sum_sq_[i] += other.sum_sq_[i];
  }
}

PointwiseError max_rms(const PointAccumulator& acc, std::size_t samples) {
  PointwiseError out;
  if (acc.size() == 0 || samples == 0) {
    return out;
  }
  const auto n = static_cast<double>(samples);
  double best = -1.0;
  for (std::size_t p = 0; p < acc.size(); ++p) {
    const double mean = acc.sum(p) / n;
    if (mean > best) {
      best = mean;
      out.argmax = p;
    }
  }
  const double mean = std::max(best, 0.0);
  out.error = std::sqrt(mean);
  if (samples > 1 && out.error > 0.0) {
    const double var = std::max(0.0, (acc.sum_sq(out.argmax) - n * mean * mean) / (n - 1.0));
    out.stderr_ = std::sqrt(var / n) / (2.0 * out.error);
  }
  return out;
}

}  // namespace heidih::experiments

#include "heidih/cli_io.hpp"
#include "heidih/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

namespace heidih::cli {
namespace {

using experiments::GridRule;
using experiments::StudyConfig;

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& why) {
  std::size_t line = 0;
  std::size_t column = 0;
  if (node.IsDefined() && node.Mark().line >= 0) {
    line = static_cast<std::size_t>(node.Mark().line) + 1;
    column = static_cast<std::size_t>(node.Mark().column) + 1;
  }
  std::string what = "config";
  if (line > 0) {
    what += ":" + std::to_string(line) + ":" + std::to_string(column);
  }
  throw ConfigError(what + ": " + field + ": " + why, line, column, field);
}

// A mapping node with a fixed set of allowed keys.
class Section {
 public:
  Section(YAML::Node node, std::string path, std::initializer_list<const char*> keys)
      : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) {
      fail(node_, path_.empty() ? "document" : path_, "expected a mapping");
    }
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      bool known = false;
      for (const char* k : keys) {
        known = known || key == k;
      }
      if (!known) {
        fail(kv.first, field(key), "unknown key");
      }
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const char* key) const { return static_cast<bool>(node_[key]); }
  YAML::Node get(const char* key) const { return node_[key]; }

  std::optional<Section> child(const char* key, std::initializer_list<const char*> keys) const {
    if (!has(key)) {
      return std::nullopt;
    }
    return Section(node_[key], field(key), keys);
  }

  template <typename T>
  void read(const char* key, T& target) const {
    if (has(key)) {
      target = scalar<T>(node_[key], field(key));
    }
  }

  template <typename T>
  void read_list(const char* key, std::vector<T>& target) const {
    if (!has(key)) {
      return;
    }
    const YAML::Node n = node_[key];
    target.clear();
    if (n.IsScalar()) {
      target.push_back(scalar<T>(n, field(key)));
      return;
    }
    if (!n.IsSequence()) {
      fail(n, field(key), "expected a value or a list");
    }
    for (std::size_t i = 0; i < n.size(); ++i) {
      target.push_back(scalar<T>(n[i], field(key) + "[" + std::to_string(i) + "]"));
    }
  }

  template <typename T>
  static T scalar(const YAML::Node& n, const std::string& name) {
    if (!n.IsScalar()) {
      fail(n, name, "expected a scalar");
    }
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      const auto text = n.as<std::string>();
      if (!text.empty() && text.front() == '-') {
        fail(n, name, "must not be negative");
      }
    }
    try {
      return n.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(n, name, "cannot read '" + n.as<std::string>() + "' as " + type_name<T>());
    }
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    if constexpr (std::is_floating_point_v<T>) return "a number";
    if constexpr (std::is_integral_v<T>) return "an integer";
    return "a string";
  }

  YAML::Node node_;
  std::string path_;
};

kernels::WeightFn read_weight(const Section& parent) {
  const auto w = parent.child("weight", {"type", "alpha", "scale", "center", "half_width", "amplitude"});
  if (!w) {
    return kernels::WeightFn::constant_one();
  }
  std::string type = "constant";
  w->read("type", type);
  if (type == "constant") {
    return kernels::WeightFn::constant_one();
  }
  if (type == "polynomial") {
    double alpha = 0.75;
    double scale = 1.0;
    w->read("alpha", alpha);
    w->read("scale", scale);
    return kernels::WeightFn::polynomial(alpha, scale);
  }
  if (type == "bump") {
    double center = 1.0;
    double half_width = 0.5;
    double amplitude = 1.0;
    w->read("center", center);
    w->read("half_width", half_width);
    w->read("amplitude", amplitude);
    if (!(half_width > 0.0)) {
      fail(w->get("half_width"), w->field("half_width"), "must be positive");
    }
    return kernels::WeightFn::bump(center, half_width, amplitude);
  }
  fail(w->get("type"), w->field("type"), "expected constant, polynomial or bump");
}

// Kernel block: either smoothness (s_W) or nu, plus mu, zeta, weight.
std::vector<kernels::KernelSpec> read_kernels(const Section& k, std::vector<double>& smoothness,
                                              double& mu, double& zeta, kernels::WeightFn& weight) {
  if (k.has("smoothness") && k.has("nu")) {
    fail(k.get("nu"), k.field("nu"), "give either smoothness or nu, not both");
  }
  std::vector<double> nus;
  if (k.has("nu")) {
    k.read_list("nu", nus);
    smoothness.clear();
    for (double nu : nus) {
      smoothness.push_back(nu + 0.5);
    }
  } else {
    k.read_list("smoothness", smoothness);
    for (double s : smoothness) {
      nus.push_back(s - 0.5);
    }
  }
  k.read("mu", mu);
  k.read("zeta", zeta);
  weight = read_weight(k);

  std::vector<kernels::KernelSpec> specs;
  for (double nu : nus) {
    kernels::KernelSpec spec{kernels::MaternParams{nu, mu, zeta}, weight};
    try {
      spec.stationary.validate();
    } catch (const DomainError& e) {
      fail(k.has("nu") ? k.get("nu") : k.get("smoothness"), k.field(k.has("nu") ? "nu" : "smoothness"),
           e.what());
    }
    specs.push_back(spec);
  }
  return specs;
}

void read_run(const Section& root, StudyConfig& study) {
  const auto run = root.child("run", {"seed", "samples", "workers", "batch", "coupled", "record_timings"});
  if (!run) {
    return;
  }
  run->read("seed", study.seed);
  run->read("samples", study.samples);
  run->read("workers", study.workers);
  run->read("batch", study.batch);
  run->read("coupled", study.coupled);
  run->read("record_timings", study.record_timings);
}

void read_model(const Section& root, Config& cfg) {
  const auto model = root.child("model", {"a", "T", "D", "domain_target", "initial"});
  if (!model) {
    return;
  }
  StudyConfig& study = cfg.study;
  model->read("a", study.a);
  model->read("T", study.T);
  if (model->has("D")) {
    const YAML::Node d = model->get("D");
    if (d.IsScalar() && d.as<std::string>() == "auto") {
      study.D = 0.0;
    } else {
      study.D = Section::scalar<double>(d, model->field("D"));
      if (!(study.D > 0.0)) {
        fail(d, model->field("D"), "must be positive or 'auto'");
      }
    }
  }
  model->read("domain_target", study.domain_target);

  const auto init = model->child("initial", {"type", "amplitude", "mode", "center", "half_width"});
  if (!init) {
    return;
  }
  std::string type = "zero";
  init->read("type", type);
  if (type == "zero") {
    study.initial = experiments::InitialKind::Zero;
  } else if (type == "sine") {
    study.initial = experiments::InitialKind::Sine;
    init->read("amplitude", study.initial_amplitude);
    init->read("mode", study.initial_mode);
    if (study.initial_mode < 1) {
      fail(init->get("mode"), init->field("mode"), "must be at least 1");
    }
  } else if (type == "bump") {
    BumpConfig bump;
    init->read("center", bump.center);
    init->read("half_width", bump.half_width);
    init->read("amplitude", bump.amplitude);
    if (!(bump.half_width > 0.0)) {
      fail(init->get("half_width"), init->field("half_width"), "must be positive");
    }
    cfg.y0_bump = bump;
  } else {
    fail(init->get("type"), init->field("type"), "expected zero, sine or bump");
  }
}

void read_grid(const Section& root, StudyConfig& study) {
  const auto grid = root.child("grid", {"reference", "fixed", "ladder"});
  if (!grid) {
    return;
  }
  grid->read("reference", study.reference_level);
  grid->read("fixed", study.fixed_level);
  grid->read_list("ladder", study.ladder);
}

void read_price(const Section& root, Config& cfg) {
  const auto price = root.child("price", {"scaling", "rules", "eta", "curve"});
  if (!price) {
    return;
  }
  price->read("scaling", cfg.study.scaling);
  if (price->has("rules")) {
    std::vector<std::string> names;
    price->read_list("rules", names);
    cfg.study.rules.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto rule = experiments::parse_grid_rule(names[i]);
      if (!rule) {
        const YAML::Node n = price->get("rules");
        fail(n.IsSequence() ? n[i] : n, price->field("rules"), "expected h=k or h=sqrt(k)");
      }
      cfg.study.rules.push_back(*rule);
    }
  }

  if (const auto eta = price->child("eta", {"points", "coeffs", "r", "q_b"})) {
    EtaConfig e;
    eta->read_list("points", e.points);
    eta->read_list("coeffs", e.coeffs);
    eta->read("r", e.r);
    if (e.points.empty() || e.points.size() != e.coeffs.size()) {
      fail(eta->get("coeffs"), eta->field("coeffs"), "needs one coefficient per point");
    }
    if (!(e.r > 0.5)) {
      fail(eta->get("r"), eta->field("r"), "must exceed 1/2");
    }
    const auto qb = eta->child("q_b", {"nu", "smoothness", "mu", "zeta", "weight"});
    if (!qb) {
      fail(eta->get("points"), eta->field("q_b"), "missing kernel block");
    }
    std::vector<double> s = {1.0};
    double mu = 1.0;
    double zeta = 1.0;
    kernels::WeightFn w;
    const auto specs = read_kernels(*qb, s, mu, zeta, w);
    if (specs.size() != 1) {
      fail(qb->get(qb->has("nu") ? "nu" : "smoothness"), qb->field("nu"), "needs exactly one value");
    }
    e.q_b = specs.front();
    cfg.eta = e;
  }

  if (const auto curve =
          price->child("curve", {"level", "type", "center", "half_width", "amplitude", "rate"})) {
    CurveConfig& c = cfg.curve;
    curve->read("level", c.level);
    std::string type = "none";
    curve->read("type", type);
    if (type == "none") {
      c.shape = CurveShape::None;
    } else if (type == "bump") {
      c.shape = CurveShape::Bump;
    } else if (type == "exponential") {
      c.shape = CurveShape::Exponential;
    } else {
      fail(curve->get("type"), curve->field("type"), "expected none, bump or exponential");
    }
    curve->read("center", c.center);
    curve->read("half_width", c.half_width);
    curve->read("amplitude", c.amplitude);
    curve->read("rate", c.rate);
    if (c.shape == CurveShape::Bump && !(c.half_width > 0.0)) {
      fail(curve->get("half_width"), curve->field("half_width"), "must be positive");
    }
  }
}

void read_studies(const Section& root, StudyConfig& study) {
  if (const auto h = root.child("holder", {"probes", "separations", "start"})) {
    h->read_list("probes", study.probes);
    h->read_list("separations", study.separation_levels);
    h->read("start", study.holder_start);
  }
  if (const auto l = root.child("localization", {"domains", "reference_domain", "probe", "noise_floor"})) {
    l->read_list("domains", study.domains);
    l->read("reference_domain", study.reference_domain);
    l->read("probe", study.probe);
    l->read("noise_floor", study.noise_floor);
  }
  if (const auto t = root.child("timing", {"repeats"})) {
    t->read("repeats", study.repeats);
  }
}

void read_thresholds(const Section& root, StudyConfig& study) {
  if (!root.has("thresholds")) {
    return;
  }
  const YAML::Node list = root.get("thresholds");
  if (!list.IsSequence()) {
    fail(list, "thresholds", "expected a list");
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Section t(list[i], "thresholds[" + std::to_string(i) + "]", {"study", "param", "min", "max"});
    experiments::Threshold th;
    t.read("study", th.study);
    t.read("param", th.param);
    t.read("min", th.min);
    t.read("max", th.max);
    if (th.study.empty() || th.param.empty()) {
      fail(list[i], t.field("study"), "study and param are required");
    }
    if (th.min > th.max) {
      fail(list[i], t.field("min"), "min exceeds max");
    }
    study.thresholds.push_back(th);
  }
}

}  // namespace

price::InitialCurve CurveConfig::build() const {
  switch (shape) {
    case CurveShape::Bump: {
      const auto bump = kernels::WeightFn::bump(center, half_width, amplitude);
      return price::InitialCurve([bump](double x) { return bump(x); }, level);
    }
    case CurveShape::Exponential: {
      const double amp = amplitude;
      const double r = rate;
      return price::InitialCurve([amp, r](double x) { return amp * std::exp(-r * x); }, level);
    }
    case CurveShape::None:
      break;
  }
  return price::InitialCurve::flat(level);
}

double Config::price_scaling() const {
  if (!eta) {
    return study.scaling;
  }
  return std::sqrt(kernels::eta_scaling(eta->points, eta->coeffs, eta->r, eta->q_b));
}

std::function<double(double)> Config::initial_y(double D) const {
  if (y0_bump) {
    const auto bump = kernels::WeightFn::bump(y0_bump->center, y0_bump->half_width, y0_bump->amplitude);
    return [bump](double x) { return bump(x); };
  }
  if (study.initial == experiments::InitialKind::Sine) {
    const double amp = study.initial_amplitude;
    const double freq = study.initial_mode * std::numbers::pi / D;
    return [amp, freq](double x) { return amp * std::sin(freq * x); };
  }
  return {};
}

Config parse_config(std::string_view text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    const auto line = static_cast<std::size_t>(e.mark.line + 1);
    const auto column = static_cast<std::size_t>(e.mark.column + 1);
    throw ConfigError("config:" + std::to_string(line) + ":" + std::to_string(column) + ": " + e.msg,
                      line, column);
  }
  if (!doc.IsMap()) {
    throw ConfigError("config: expected a mapping with a version key", 0, 0, "version");
  }
  const Section root(doc, "",
                     {"version", "study", "run", "model", "kernel", "grid", "price", "holder",
                      "localization", "timing", "sample", "thresholds"});
  if (!root.has("version")) {
    throw ConfigError("config: version: missing schema version (expected " +
                          std::to_string(kSchemaVersion) + ")",
                      0, 0, "version");
  }
  int version = 0;
  root.read("version", version);
  if (version != kSchemaVersion) {
    fail(root.get("version"), "version",
         "unsupported schema version " + std::to_string(version) + " (expected " +
             std::to_string(kSchemaVersion) + ")");
  }

  Config cfg;
  if (root.has("study")) {
    std::string name;
    root.read("study", name);
    const auto kind = experiments::parse_study_kind(name);
    if (!kind) {
      fail(root.get("study"), "study", "unknown study '" + name + "'");
    }
    cfg.study.kind = *kind;
    cfg.study_given = true;
  }

  read_run(root, cfg.study);
  read_model(root, cfg);
  if (const auto k = root.child("kernel", {"smoothness", "nu", "mu", "zeta", "weight"})) {
    cfg.kernels = read_kernels(*k, cfg.study.smoothness, cfg.study.mu, cfg.study.zeta, cfg.study.weight);
  } else {
    for (double s : cfg.study.smoothness) {
      cfg.kernels.push_back(experiments::kernel_for(cfg.study, s));
    }
  }
  read_grid(root, cfg.study);
  read_price(root, cfg);
  read_studies(root, cfg.study);
  if (const auto s = root.child("sample", {"space_level", "time_level"})) {
    s->read("space_level", cfg.sample.space_level);
    s->read("time_level", cfg.sample.time_level);
    if (cfg.sample.space_level < 0 || cfg.sample.space_level > 24) {
      fail(s->get("space_level"), s->field("space_level"), "must lie in 0..24");
    }
    if (cfg.sample.time_level < 0 || cfg.sample.time_level > 24) {
      fail(s->get("time_level"), s->field("time_level"), "must lie in 0..24");
    }
  }
  read_thresholds(root, cfg.study);

  if (cfg.eta) {
    try {
      cfg.study.scaling = cfg.price_scaling();
    } catch (const DegenerateFormError& e) {
      throw ConfigError(std::string("config: price.eta: ") + e.what(), 0, 0, "price.eta");
    }
  }
  if (cfg.study_given) {
    if (cfg.y0_bump) {
      throw ConfigError("config: model.initial: bump initial data is only used by the sample commands",
                        0, 0, "model.initial");
    }
    cfg.study.validate();
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace heidih::cli

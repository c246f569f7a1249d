#include "heidih/cli_io.hpp"
#include "heidih/errors.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace heidih::cli {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string() + ": " + std::strerror(errno));
  }
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::runtime_error(path.string() + ": bad number '" + s + "'");
  }
  return v;
}

// Records of a header-checked CSV file.
std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 const std::string& header, std::size_t columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw std::runtime_error(path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != columns) {
      throw std::runtime_error(path.string() + ": row has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(columns));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

constexpr const char* kErrorsHeader = "study,param,resolution,error,stderr,wall_s";
constexpr const char* kRatesHeader = "study,param,slope,intercept,residual,points_used";

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(s);
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

void emit_errors_csv(const std::vector<experiments::ErrorRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kErrorsHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.study) << ',' << csv_field(r.param) << ',' << format_double(r.resolution) << ','
        << format_double(r.error) << ',' << format_double(r.stderr_) << ',' << format_double(r.wall_s)
        << '\n';
  }
  finish(out, path);
}

void emit_rates_csv(const std::vector<experiments::RateFit>& rates, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kRatesHeader << '\n';
  for (const auto& r : rates) {
    out << csv_field(r.study) << ',' << csv_field(r.param) << ',' << format_double(r.slope) << ','
        << format_double(r.intercept) << ',' << format_double(r.residual) << ',' << r.points_used
        << '\n';
  }
  finish(out, path);
}

void emit_timings_csv(const std::vector<experiments::StudyResult::Timing>& rows,
                      const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "rule,k,h,wall_s,fft_share\n";
  for (const auto& t : rows) {
    out << csv_field(experiments::to_string(t.rule)) << ',' << format_double(t.k) << ','
        << format_double(t.h) << ',' << format_double(t.wall_s) << ',' << format_double(t.fft_share)
        << '\n';
  }
  finish(out, path);
}

void emit_ypath_csv(const fem::YPath& path, const std::filesystem::path& out_path) {
  auto out = open_out(out_path);
  out << "t,x,value\n";
  const double h = path.h();
  for (std::size_t i = 0; i <= path.steps(); ++i) {
    const double t = static_cast<double>(i) * path.k();
    for (std::size_t j = 0; j < path.node_count(); ++j) {
      const double x = j + 1 == path.node_count() ? path.length() : static_cast<double>(j) * h;
      out << format_double(t) << ',' << format_double(x) << ',' << format_double(path(i, j)) << '\n';
    }
  }
  finish(out, out_path);
}

std::vector<experiments::ErrorRow> read_errors_csv(const std::filesystem::path& path) {
  std::vector<experiments::ErrorRow> rows;
  for (const auto& f : read_table(path, kErrorsHeader, 6)) {
    rows.push_back({f[0], f[1], parse_double(f[2], path), parse_double(f[3], path),
                    parse_double(f[4], path), parse_double(f[5], path)});
  }
  return rows;
}

std::vector<experiments::RateFit> read_rates_csv(const std::filesystem::path& path) {
  std::vector<experiments::RateFit> rates;
  for (const auto& f : read_table(path, kRatesHeader, 6)) {
    experiments::RateFit r;
    r.study = f[0];
    r.param = f[1];
    r.slope = parse_double(f[2], path);
    r.intercept = parse_double(f[3], path);
    r.residual = parse_double(f[4], path);
    r.points_used = static_cast<std::size_t>(parse_double(f[5], path));
    rates.push_back(r);
  }
  return rates;
}

std::vector<std::string> threshold_violations(const std::vector<experiments::RateFit>& rates,
                                              const std::vector<experiments::Threshold>& limits) {
  std::vector<std::string> out;
  for (const auto& lim : limits) {
    const experiments::RateFit* match = nullptr;
    for (const auto& r : rates) {
      if (r.study == lim.study && r.param == lim.param) {
        match = &r;
      }
    }
    const std::string name = lim.study + " " + lim.param;
    if (match == nullptr) {
      out.push_back(name + ": no fitted rate");
    } else if (!(match->slope >= lim.min && match->slope <= lim.max)) {
      out.push_back(name + ": rate " + format_double(match->slope) + " outside [" +
                    format_double(lim.min) + ", " + format_double(lim.max) + "]");
    }
  }
  return out;
}

}  // namespace heidih::cli

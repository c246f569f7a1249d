#include "heidih/errors.hpp"
#include "heidih/noise.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace heidih::noise {
namespace {

static_assert(std::endian::native == std::endian::little, "dump format assumes little endian");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_dump(const std::filesystem::path& path, std::string_view magic, std::size_t nodes,
                std::size_t rows, std::span<const double> values) {
  if (magic.size() != 4) {
    throw ShapeError("write_dump: magic must be 4 bytes");
  }
  if (values.size() != nodes * rows) {
    throw ShapeError("write_dump: expected " + std::to_string(nodes * rows) + " values, got " +
                     std::to_string(values.size()));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw std::runtime_error("write_dump: cannot open " + path.string());
  }
  os.write(magic.data(), 4);
  put<std::uint32_t>(os, kDumpVersion);
  put<std::uint64_t>(os, nodes);
  put<std::uint64_t>(os, rows);
  put<std::uint64_t>(os, 0);
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!os) {
    throw std::runtime_error("write_dump: write failed for " + path.string());
  }
}

DumpData read_dump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("read_dump: cannot open " + path.string());
  }
  DumpData d;
  d.magic.resize(4);
  is.read(d.magic.data(), 4);
  d.version = get<std::uint32_t>(is);
  d.nodes = get<std::uint64_t>(is);
  d.rows = get<std::uint64_t>(is);
  (void)get<std::uint64_t>(is);
  if (!is) {
    throw ShapeError("read_dump: truncated header in " + path.string());
  }
  if (d.version != kDumpVersion) {
    throw ShapeError("read_dump: unsupported version " + std::to_string(d.version));
  }
  d.values.resize(d.nodes * d.rows);
  is.read(reinterpret_cast<char*>(d.values.data()),
          static_cast<std::streamsize>(d.values.size() * sizeof(double)));
  if (!is) {
    throw ShapeError("read_dump: truncated payload in " + path.string());
  }
  return d;
}

}  // namespace heidih::noise

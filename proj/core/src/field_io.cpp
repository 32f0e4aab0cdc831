#include "twofluid/field_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "twofluid/errors.hpp"

namespace twofluid {

namespace {
constexpr char kMagic[8] = {'T', 'F', 'F', 'L', 'D', '0', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw CorruptCheckpoint("field container truncated");
  return v;
}
}  // namespace

void save_field(const std::string& path, const GridField& field) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid().dim()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid().n()));
  put<double>(os, field.grid().lambda());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(field.comps()));
  put<std::uint32_t>(os, field.is_real() ? 1u : 0u);

  const std::size_t pts = field.points();
  for (int c = 0; c < field.comps(); ++c) {
    const cd* p = field.phys(c);
    if (field.is_real()) {
      std::vector<double> row(pts);
      for (std::size_t s = 0; s < pts; ++s) row[s] = p[s].real();
      os.write(reinterpret_cast<const char*>(row.data()),
               static_cast<std::streamsize>(pts * sizeof(double)));
    } else {
      os.write(reinterpret_cast<const char*>(p),
               static_cast<std::streamsize>(pts * sizeof(cd)));
    }
  }
  if (!os) throw Error("short write to " + path);
}

GridField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CorruptCheckpoint("bad field container magic in " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion)
    throw VersionMismatch("field container version " + std::to_string(version));
  const auto dim = get<std::uint32_t>(is);
  const auto n = get<std::uint32_t>(is);
  const auto lambda = get<double>(is);
  const auto comps = get<std::uint32_t>(is);
  const auto flags = get<std::uint32_t>(is);

  Grid grid(static_cast<int>(dim), static_cast<int>(n), lambda);
  GridField f(grid, static_cast<int>(comps), (flags & 1u) != 0);
  const std::size_t pts = grid.points();
  for (std::uint32_t c = 0; c < comps; ++c) {
    cd* p = f.phys(static_cast<int>(c));
    if (flags & 1u) {
      std::vector<double> row(pts);
      is.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(pts * sizeof(double)));
      if (!is) throw CorruptCheckpoint("field container payload truncated");
      for (std::size_t s = 0; s < pts; ++s) p[s] = cd{row[s], 0.0};
    } else {
      is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(pts * sizeof(cd)));
      if (!is) throw CorruptCheckpoint("field container payload truncated");
    }
  }
  f.mark_phys_valid();
  return f;
}

}  // namespace twofluid

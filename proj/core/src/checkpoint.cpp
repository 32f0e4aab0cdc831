#include "twofluid/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "twofluid/errors.hpp"
#include "twofluid/util.hpp"

namespace twofluid {

namespace {

constexpr char kMagic[8] = {'T', 'F', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}
void put_u32(std::string& buf, std::uint32_t v) { put_bytes(buf, &v, 4); }
void put_u64(std::string& buf, std::uint64_t v) { put_bytes(buf, &v, 8); }
void put_f64(std::string& buf, double v) { put_bytes(buf, &v, 8); }

void put_field(std::string& buf, const GridField& f) {
  f.ensure_spec();
  put_u32(buf, static_cast<std::uint32_t>(f.comps()));
  for (int c = 0; c < f.comps(); ++c)
    put_bytes(buf, f.spec(c), f.points() * sizeof(cd));
}

class Reader {
 public:
  Reader(const std::string& buf) : buf_(buf) {}
  std::size_t pos() const { return pos_; }

  void bytes(void* out, std::size_t n) {
    if (pos_ + n > buf_.size())
      throw CorruptCheckpoint("checkpoint is truncated");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  double f64() { double v; bytes(&v, 8); return v; }

  GridField field(const Grid& grid) {
    const std::uint32_t comps = u32();
    if (comps == 0 || comps > 3)
      throw CorruptCheckpoint("field component count out of range");
    GridField f(grid, static_cast<int>(comps));
    for (std::uint32_t c = 0; c < comps; ++c)
      bytes(f.spec(static_cast<int>(c)), grid.points() * sizeof(cd));
    f.mark_spec_valid();
    return f;
  }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void checkpoint_save(const std::string& path, const SimulationState& state,
                     const CheckpointMeta& meta) {
  const Grid& g = state.n_plus.grid();
  std::string buf;
  put_bytes(buf, kMagic, sizeof(kMagic));
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(g.dim()));
  put_u32(buf, static_cast<std::uint32_t>(g.n()));
  put_f64(buf, g.lambda());
  put_f64(buf, state.t);
  put_f64(buf, state.kappa);
  put_u32(buf, state.has_reference ? 1u : 0u);
  put_u64(buf, meta.seed);
  put_u64(buf, meta.step);
  put_f64(buf, state.mean_n_plus);
  put_f64(buf, state.mean_n_minus);
  for (int i = 0; i < 3; ++i) put_f64(buf, state.mean_u_plus[i]);
  for (int i = 0; i < 3; ++i) put_f64(buf, state.mean_u_minus[i]);
  put_field(buf, state.n_plus);
  put_field(buf, state.n_minus);
  put_field(buf, state.u_plus);
  put_field(buf, state.u_minus);
  if (state.has_reference) {
    put_field(buf, state.v_plus);
    put_field(buf, state.v_minus);
  }
  put_u64(buf, fnv1a(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw Error("failed while writing checkpoint '" + path + "'");
}

SimulationState checkpoint_load(const std::string& path, CheckpointMeta* meta,
                                const Grid* expect_grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  const std::string buf = os.str();

  if (buf.size() < sizeof(kMagic) + 8)
    throw CorruptCheckpoint("checkpoint is truncated");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw CorruptCheckpoint("bad checkpoint magic");
  std::uint64_t declared;
  std::memcpy(&declared, buf.data() + buf.size() - 8, 8);
  const std::uint64_t actual = fnv1a(buf.data(), buf.size() - 8);
  if (declared != actual)
    throw CorruptCheckpoint("checkpoint checksum mismatch");

  Reader rd(buf);
  char magic[8];
  rd.bytes(magic, 8);
  const std::uint32_t version = rd.u32();
  if (version != kVersion)
    throw VersionMismatch("unsupported checkpoint version " +
                          std::to_string(version));
  const int dim = static_cast<int>(rd.u32());
  const int n = static_cast<int>(rd.u32());
  const double lambda = rd.f64();
  Grid grid;
  try {
    grid = Grid(dim, n, lambda);
  } catch (const Error& e) {
    throw CorruptCheckpoint(std::string("invalid stored grid: ") + e.what());
  }
  if (expect_grid && grid != *expect_grid)
    throw ConfigError("checkpoint grid does not match the requested grid");

  const double t = rd.f64();
  const double kappa = rd.f64();
  const std::uint32_t flags = rd.u32();
  CheckpointMeta m;
  m.seed = rd.u64();
  m.step = rd.u64();

  SimulationState st = make_state(grid, kappa, (flags & 1u) != 0);
  st.t = t;
  st.mean_n_plus = rd.f64();
  st.mean_n_minus = rd.f64();
  for (int i = 0; i < 3; ++i) st.mean_u_plus[i] = rd.f64();
  for (int i = 0; i < 3; ++i) st.mean_u_minus[i] = rd.f64();
  st.n_plus = rd.field(grid);
  st.n_minus = rd.field(grid);
  st.u_plus = rd.field(grid);
  st.u_minus = rd.field(grid);
  if (st.has_reference) {
    st.v_plus = rd.field(grid);
    st.v_minus = rd.field(grid);
  }
  if (rd.pos() != buf.size() - 8)
    throw CorruptCheckpoint("checkpoint has trailing or missing bytes");
  if (meta) *meta = m;
  return st;
}

}  // namespace twofluid

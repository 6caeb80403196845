#pragma once

// Diagnostics CSV and binary checkpoints.
//
// Checkpoint layout, all little-endian:
//   "SCHNS1"  u32 version  u8[32] config hash  u32 nx  u32 ny  u64 step  f64 t
//   f64[nx*ny] u.x u.y phi mu        (row-major, j*nx + i)
//   f64[nx]    psi.b psi.t kpsi.b kpsi.t ell.b ell.t
//   u8 has_prev, then if set: u.x u.y phi, psi.b psi.t, ell.b ell.t
//   f64[9]  last step record
//   f64[11] u64  accumulators
//   u32 n  u8[n]  rng engine state (text)

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "schns/config.hpp"

namespace schns {

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* csv_header =
    "t,E,kinetic,gradient_bulk,boundary_l2,boundary_grad,bulk_potential,boundary_potential,D,mass,G";

struct CsvRow {
  EnergyReport energy;
  double G = 0.0;
  bool operator==(const CsvRow&) const = default;
};

inline CsvRow csv_row(const PathRow& r) { return {r.energy, r.G}; }

inline std::string format_csv_row(const CsvRow& r) {
  const EnergyReport& e = r.energy;
  const double v[] = {e.t,  e.E, e.kinetic, e.gradient_bulk, e.boundary_l2, e.boundary_grad, e.bulk_potential,
                      e.boundary_potential, e.D, e.mass, r.G};
  std::string out;
  char buf[32];
  for (std::size_t k = 0; k < std::size(v); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", v[k]);
    if (k) out += ',';
    out += buf;
  }
  return out;
}

inline CsvRow parse_csv_row(const std::string& line) {
  std::vector<double> v;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double x = 0.0;
    const char* end = cell.data() + cell.size();
    auto [p, ec] = std::from_chars(cell.data(), end, x);
    if (ec != std::errc() || p != end) throw FormatError("csv: bad number '" + cell + "'");
    v.push_back(x);
  }
  if (v.size() != 11) throw FormatError("csv: expected 11 columns, got " + std::to_string(v.size()));
  CsvRow r;
  EnergyReport& e = r.energy;
  e.t = v[0];
  e.E = v[1];
  e.kinetic = v[2];
  e.gradient_bulk = v[3];
  e.boundary_l2 = v[4];
  e.boundary_grad = v[5];
  e.bulk_potential = v[6];
  e.boundary_potential = v[7];
  e.D = v[8];
  e.mass = v[9];
  r.G = v[10];
  return r;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << csv_header << '\n';
  for (const auto& r : rows) os << format_csv_row(r) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

inline void write_csv(const std::filesystem::path& path, const PathDiagnostics& d) {
  std::vector<CsvRow> rows;
  for (std::size_t n = 0; n < d.size(); ++n) rows.push_back({d.energy_series[n], d.G_series[n]});
  write_csv(path, rows);
}

inline std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != csv_header) throw FormatError(path.string() + ": header mismatch");
  std::vector<CsvRow> rows;
  while (std::getline(is, line)) {
    if (!line.empty()) rows.push_back(parse_csv_row(line));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr char checkpoint_magic[6] = {'S', 'C', 'H', 'N', 'S', '1'};
inline constexpr std::uint32_t checkpoint_version = 1;

struct Checkpoint {
  State state;
  std::string rng_state;
  Accumulators acc;
  ConfigHash hash{};
  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }
  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}

  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64s(std::vector<double>& v) {
    need(8 * v.size());
    for (double& x : v) x = f64();
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

inline void put(ByteWriter& w, const VectorField& v) {
  w.f64s(v.x.data());
  w.f64s(v.y.data());
}
inline void put(ByteWriter& w, const BoundaryField& b) {
  w.f64s(b.bottom);
  w.f64s(b.top);
}
inline void get(ByteReader& r, VectorField& v) {
  r.f64s(v.x.data());
  r.f64s(v.y.data());
}
inline void get(ByteReader& r, BoundaryField& b) {
  r.f64s(b.bottom);
  r.f64s(b.top);
}

inline void put(ByteWriter& w, const StepRecord& s) {
  const Dissipation& d = s.dissipation;
  for (double v : {d.viscous, d.slip, d.chemical, d.boundary, d.regularization, s.hs_norm_sq, s.pairing_u,
                   s.pairing_gradphi, s.cutoff})
    w.f64(v);
}
inline void get(ByteReader& r, StepRecord& s) {
  Dissipation& d = s.dissipation;
  for (double* v : {&d.viscous, &d.slip, &d.chemical, &d.boundary, &d.regularization, &s.hs_norm_sq,
                    &s.pairing_u, &s.pairing_gradphi, &s.cutoff})
    *v = r.f64();
}

inline void put(ByteWriter& w, const Accumulators& a) {
  for (double v : {a.E0, a.E_last, a.int_ED, a.int_EH, a.int_Q, a.sup_u_sq, a.int_grad_u_sq, a.sup_v1_sq,
                   a.int_grad_mu_sq, a.int_K_sq, a.int_delta_rate_sq})
    w.f64(v);
  w.u64(a.steps);
}
inline void get(ByteReader& r, Accumulators& a) {
  for (double* v : {&a.E0, &a.E_last, &a.int_ED, &a.int_EH, &a.int_Q, &a.sup_u_sq, &a.int_grad_u_sq,
                    &a.sup_v1_sq, &a.int_grad_mu_sq, &a.int_K_sq, &a.int_delta_rate_sq})
    *v = r.f64();
  a.steps = r.u64();
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  const State& s = c.state;
  detail::ByteWriter w;
  w.bytes(checkpoint_magic, sizeof checkpoint_magic);
  w.u32(checkpoint_version);
  w.bytes(c.hash.data(), c.hash.size());
  w.u32(static_cast<std::uint32_t>(s.phi.nx()));
  w.u32(static_cast<std::uint32_t>(s.phi.ny()));
  w.u64(s.step);
  w.f64(s.t);
  detail::put(w, s.u);
  w.f64s(s.phi.data());
  w.f64s(s.mu.data());
  detail::put(w, s.psi);
  detail::put(w, s.kpsi);
  detail::put(w, s.ell);
  w.u8(s.prev ? 1 : 0);
  if (s.prev) {
    detail::put(w, s.prev->u);
    w.f64s(s.prev->phi.data());
    detail::put(w, s.prev->psi);
    detail::put(w, s.prev->ell);
  }
  detail::put(w, s.last);
  detail::put(w, c.acc);
  w.u32(static_cast<std::uint32_t>(c.rng_state.size()));
  w.bytes(c.rng_state.data(), c.rng_state.size());
  return w.buffer();
}

/// Decode and check magic, version, grid dimensions and, if given, the hash.
inline Checkpoint decode_checkpoint(std::vector<unsigned char> bytes, const Grid& g,
                                    const ConfigHash* expected = nullptr) {
  detail::ByteReader r(std::move(bytes));
  char magic[sizeof checkpoint_magic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, checkpoint_magic, sizeof magic) != 0) throw FormatError("not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != checkpoint_version) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  r.bytes(c.hash.data(), c.hash.size());
  if (expected && c.hash != *expected) throw ConfigError("checkpoint was written under a different configuration");
  const std::uint32_t nx = r.u32();
  const std::uint32_t ny = r.u32();
  if (nx != static_cast<std::uint32_t>(g.nx()) || ny != static_cast<std::uint32_t>(g.ny())) {
    throw FormatError("checkpoint grid " + std::to_string(nx) + "x" + std::to_string(ny) + " does not match " +
                      std::to_string(g.nx()) + "x" + std::to_string(g.ny()));
  }
  State& s = c.state;
  s.step = r.u64();
  s.t = r.f64();
  s.u = VectorField(g);
  s.phi = ScalarField(g);
  s.mu = ScalarField(g);
  s.psi = BoundaryField(g);
  s.kpsi = BoundaryField(g);
  s.ell = BoundaryField(g);
  detail::get(r, s.u);
  r.f64s(s.phi.data());
  r.f64s(s.mu.data());
  detail::get(r, s.psi);
  detail::get(r, s.kpsi);
  detail::get(r, s.ell);
  const std::uint8_t has_prev = r.u8();
  if (has_prev > 1) throw FormatError("checkpoint: bad history flag");
  if (has_prev) {
    History h{VectorField(g), ScalarField(g), BoundaryField(g), BoundaryField(g)};
    detail::get(r, h.u);
    r.f64s(h.phi.data());
    detail::get(r, h.psi);
    detail::get(r, h.ell);
    s.prev = std::move(h);
  }
  detail::get(r, s.last);
  detail::get(r, c.acc);
  const std::uint32_t n = r.u32();
  c.rng_state.resize(n);
  r.bytes(c.rng_state.data(), n);
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return c;
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const auto bytes = encode_checkpoint(c);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path, const Grid& g,
                                  const ConfigHash* expected = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::move(bytes), g, expected);
}

}  // namespace schns

#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/cgo.hpp"
#include "fcgo/errors.hpp"
#include "fcgo/fbg.hpp"
#include "fcgo/fiber.hpp"
#include "fcgo/geometry.hpp"
#include "fcgo/kelvin.hpp"
#include "fcgo/recovery.hpp"

namespace fcgo {

using json = nlohmann::json;

//----------------------------------------------------------------------------
// Formatting, hashing, and file helpers.
//----------------------------------------------------------------------------

/// Round-trip decimal rendering used in every CSV cell.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

/// FNV-1a 64-bit hash of a byte string, as fixed-width hex.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw format_error("short write: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open for reading: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw format_error("JSON parse failure in " + path + ": " + e.what());
  }
}

/// Canonical content hash of a config object (keys are emitted sorted).
inline std::string config_hash(const json& j) { return fnv1a_hex(j.dump()); }

//----------------------------------------------------------------------------
// Binary payloads (row-major interleaved re/im doubles).
//----------------------------------------------------------------------------

inline void write_complex_bin(const std::string& path,
                              const cplx* data, std::int64_t count) {
  std::vector<double> buf(2 * count);
  for (std::int64_t i = 0; i < count; ++i) {
    buf[2 * i] = data[i].real();
    buf[2 * i + 1] = data[i].imag();
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (!out) throw format_error("short write: " + path);
}

inline std::vector<cplx> read_complex_bin(const std::string& path,
                                          std::int64_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open for reading: " + path);
  std::vector<double> buf(2 * count);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (in.gcount() !=
      static_cast<std::streamsize>(buf.size() * sizeof(double)))
    throw format_error("truncated binary payload: " + path);
  std::vector<cplx> out(count);
  for (std::int64_t i = 0; i < count; ++i)
    out[i] = cplx(buf[2 * i], buf[2 * i + 1]);
  return out;
}

//----------------------------------------------------------------------------
// Geometry / grid / cell function JSON.
//----------------------------------------------------------------------------

inline json geometry_to_json(const CellGeometry& g) {
  json omega = json::array();
  for (const auto& iv : g.omega_box()) omega.push_back({iv.lo, iv.hi});
  return json{{"n", g.n()}, {"R", g.R()}, {"omega", omega}};
}

inline CellGeometry geometry_from_json(const json& j) {
  std::vector<Interval> omega;
  for (const auto& iv : j.at("omega"))
    omega.push_back(Interval{iv.at(0).get<double>(), iv.at(1).get<double>()});
  return CellGeometry(j.at("n").get<int>(), j.at("R").get<double>(), omega);
}

inline json grid_to_json(const GridSpec& grid) {
  return json{{"N0", grid.N0}, {"N", grid.N}};
}

inline GridSpec grid_from_json(const json& j) {
  return GridSpec(j.at("N0").get<int>(), j.at("N").get<int>());
}

/// Header (n, R, N0, N, omega box) + interleaved re/im samples in the
/// row-major index order of CellFunction.
inline json cell_to_json(const CellFunction& f) {
  json samples = json::array();
  for (const auto& v : f.values()) {
    samples.push_back(v.real());
    samples.push_back(v.imag());
  }
  return json{{"geometry", geometry_to_json(f.geometry())},
              {"grid", grid_to_json(f.grid())},
              {"samples", std::move(samples)}};
}

inline CellFunction cell_from_json(const json& j) {
  CellFunction f(geometry_from_json(j.at("geometry")),
                 grid_from_json(j.at("grid")));
  const json& samples = j.at("samples");
  if (static_cast<std::int64_t>(samples.size()) != 2 * f.size())
    throw format_error("cell_from_json: sample count does not match grid");
  for (std::int64_t i = 0; i < f.size(); ++i)
    f[i] = cplx(samples[2 * i].get<double>(), samples[2 * i + 1].get<double>());
  return f;
}

//----------------------------------------------------------------------------
// Phase JSON.
//----------------------------------------------------------------------------

inline json complex_vector_to_json(const std::vector<cplx>& z) {
  json out = json::array();
  for (const auto& c : z) out.push_back({c.real(), c.imag()});
  return out;
}

/// Phase record (theta, k, r, xi, eta) plus the derived fields for
/// inspection; loading rebuilds the phase from the parameters alone.
inline json phase_to_json(const CgoPhase& ph) {
  return json{{"theta", ph.params.theta},
              {"k", ph.params.k},
              {"r", ph.params.r},
              {"xi", ph.params.xi},
              {"eta", ph.params.eta},
              {"l", ph.l},
              {"tau", ph.tau},
              {"zeta1", complex_vector_to_json(ph.zeta1)},
              {"zeta2", complex_vector_to_json(ph.zeta2)}};
}

inline CgoPhase phase_from_json(const json& j) {
  CgoParams p;
  p.theta = j.at("theta").get<double>();
  p.k = j.at("k").get<double>();
  p.r = j.at("r").get<double>();
  p.xi = j.at("xi").get<std::vector<double>>();
  p.eta = j.at("eta").get<std::vector<double>>();
  p.n = static_cast<int>(p.xi.size());
  return build_phase(p);
}

//----------------------------------------------------------------------------
// Trace functions (JSON array with face labels).
//----------------------------------------------------------------------------

inline json trace_to_json(const TraceFunction& f) {
  const TraceGrid& tg = *f.grid;
  json nodes = json::array();
  std::vector<std::int64_t> mi;
  for (std::int64_t t = 0; t < tg.size(); ++t) {
    tg.cell_index(t, mi);
    json node{{"face", tg.face(t)},
              {"index", mi},
              {"value", {f.values[t].real(), f.values[t].imag()}},
              {"weight", tg.surface_weight(t)},
              {"on_gamma0", tg.on_xn_zero(t)}};
    nodes.push_back(std::move(node));
  }
  const CellGeometry& g = tg.box().geometry();
  return json{{"geometry", geometry_to_json(g)},
              {"grid", grid_to_json(tg.box().grid())},
              {"restricted_to_gamma1", f.restricted_to_gamma1},
              {"nodes", std::move(nodes)}};
}

//----------------------------------------------------------------------------
// DN maps: JSON header + binary matrix payload.
//----------------------------------------------------------------------------

/// Writes base.json (theta, geometry, grid, dimensions, layout) and
/// base.bin (row-major interleaved re/im doubles).
inline void save_dn_map(const DnMap& dn, const std::string& base) {
  const TraceGrid& tg = *dn.grid;
  json header{{"theta", dn.theta},
              {"geometry", geometry_to_json(tg.box().geometry())},
              {"grid", grid_to_json(tg.box().grid())},
              {"size", dn.matrix.rows()},
              {"layout", "row-major"}};
  write_json_file(base + ".json", header);

  const std::int64_t T = dn.matrix.rows();
  std::vector<cplx> rowmajor(T * T);
  for (std::int64_t r = 0; r < T; ++r)
    for (std::int64_t c = 0; c < T; ++c) rowmajor[r * T + c] = dn.matrix(r, c);
  write_complex_bin(base + ".bin", rowmajor.data(), T * T);
}

inline DnMap load_dn_map(const std::string& base) {
  const json header = read_json_file(base + ".json");
  DnMap dn;
  dn.theta = header.at("theta").get<double>();
  const CellGeometry g = geometry_from_json(header.at("geometry"));
  const GridSpec grid = grid_from_json(header.at("grid"));
  auto tg = std::make_shared<TraceGrid>(BoxLattice(g, grid));
  const std::int64_t T = header.at("size").get<std::int64_t>();
  if (T != tg->size())
    throw format_error("load_dn_map: header size does not match the grid");
  const std::vector<cplx> flat = read_complex_bin(base + ".bin", T * T);
  dn.grid = tg;
  dn.matrix.resize(T, T);
  for (std::int64_t r = 0; r < T; ++r)
    for (std::int64_t c = 0; c < T; ++c) dn.matrix(r, c) = flat[r * T + c];
  return dn;
}

//----------------------------------------------------------------------------
// Fiber bundles and cylinder functions: indexed JSON + binary payload.
//----------------------------------------------------------------------------

/// base.json lists the theta samples; base.bin concatenates the fiber
/// sample blocks in the listed order.
inline void save_fiber_bundle(const std::string& base,
                              const std::vector<double>& thetas,
                              const std::vector<CellFunction>& fibers) {
  if (thetas.size() != fibers.size() || fibers.empty())
    throw domain_error("save_fiber_bundle: need one theta per fiber");
  for (const auto& f : fibers)
    if (f.size() != fibers.front().size())
      throw domain_error("save_fiber_bundle: fibers use different grids");
  json header{{"geometry", geometry_to_json(fibers.front().geometry())},
              {"grid", grid_to_json(fibers.front().grid())},
              {"thetas", thetas},
              {"block", fibers.front().size()}};
  write_json_file(base + ".json", header);

  std::vector<cplx> payload;
  payload.reserve(fibers.size() * fibers.front().size());
  for (const auto& f : fibers)
    payload.insert(payload.end(), f.values().begin(), f.values().end());
  write_complex_bin(base + ".bin", payload.data(),
                    static_cast<std::int64_t>(payload.size()));
}

inline std::pair<std::vector<double>, std::vector<CellFunction>>
load_fiber_bundle(const std::string& base) {
  const json header = read_json_file(base + ".json");
  const CellGeometry g = geometry_from_json(header.at("geometry"));
  const GridSpec grid = grid_from_json(header.at("grid"));
  const std::vector<double> thetas =
      header.at("thetas").get<std::vector<double>>();
  const std::int64_t block = header.at("block").get<std::int64_t>();
  const std::vector<cplx> payload = read_complex_bin(
      base + ".bin", block * static_cast<std::int64_t>(thetas.size()));
  std::vector<CellFunction> fibers;
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    CellFunction f(g, grid);
    if (f.size() != block)
      throw format_error("load_fiber_bundle: block size mismatch");
    for (std::int64_t i = 0; i < block; ++i) f[i] = payload[j * block + i];
    fibers.push_back(std::move(f));
  }
  return {thetas, std::move(fibers)};
}

inline void save_cylinder_function(const std::string& base,
                                   const CylinderFunction& f) {
  std::vector<double> labels;
  std::vector<CellFunction> cells;
  for (int k = -f.K(); k <= f.K(); ++k) {
    labels.push_back(static_cast<double>(k));
    cells.push_back(f.cell(k));
  }
  save_fiber_bundle(base, labels, cells);
}

//----------------------------------------------------------------------------
// Kelvin chart JSON.
//----------------------------------------------------------------------------

inline json kelvin_to_json(const KelvinChart& ch) {
  return json{{"R", ch.R}, {"a", ch.center()}};
}

inline KelvinChart kelvin_from_json(const json& j) {
  const std::vector<double> a = j.at("a").get<std::vector<double>>();
  return KelvinChart(static_cast<int>(a.size()), j.at("R").get<double>());
}

//----------------------------------------------------------------------------
// Stability records: CSV schema + JSON metadata.
//----------------------------------------------------------------------------

inline std::vector<std::string> stability_csv_header() {
  return {"delta",          "rho",
          "r",              "epsilon",
          "h_minus1_bound", "h_minus1_actual",
          "linf_actual",    "theta_star",
          "n",              "N0",
          "N",              "R"};
}

inline std::vector<std::string> stability_csv_row(const StabilityRecord& s) {
  return {format_double(s.delta),
          format_double(s.schedule.rho),
          format_double(s.schedule.r),
          format_double(s.schedule.epsilon),
          format_double(s.h_minus1_bound),
          format_double(s.h_minus1_actual),
          format_double(s.linf_actual),
          format_double(s.theta_star),
          std::to_string(s.n),
          std::to_string(s.N0),
          std::to_string(s.N),
          format_double(s.R)};
}

inline json record_to_json(const StabilityRecord& s) {
  return json{{"delta", s.delta},
              {"h_minus1_bound", s.h_minus1_bound},
              {"h_minus1_actual", s.h_minus1_actual},
              {"linf_actual", s.linf_actual},
              {"theta_star", s.theta_star},
              {"n", s.n},
              {"N0", s.N0},
              {"N", s.N},
              {"R", s.R},
              {"schedule",
               {{"alpha", s.schedule.alpha},
                {"alpha_tilde", s.schedule.alpha_tilde},
                {"epsilon", s.schedule.epsilon},
                {"r", s.schedule.r},
                {"rho", s.schedule.rho},
                {"delta", s.schedule.delta},
                {"log_delta", s.schedule.log_delta}}}};
}

//----------------------------------------------------------------------------
// RFC-4180 CSV writer.
//----------------------------------------------------------------------------

inline std::string csv_escape(const std::string& field) {
  bool quote = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') quote = true;
  if (!quote) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_render(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(row[i]);
    }
    out += "\r\n";
  };
  emit(header);
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw format_error("csv_render: row width does not match header");
    emit(row);
  }
  return out;
}

inline void write_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  write_text_file(path, csv_render(header, rows));
}

}  // namespace fcgo

#pragma once

// Subcommand handlers for the floquet-cgo driver.  Every handler follows the
// same contract: read settings from a JSON config object (flags only
// override config values), run the experiment, write RFC-4180 CSV rows plus
// a JSON manifest (config echo, config hash, module versions, calibrated
// constants) into the output directory, and return a process exit code
// (0 = all checks passed).

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcgo/io.hpp"
#include "fcgo/kelvin.hpp"
#include "fcgo/pipeline.hpp"
#include "fcgo/version.hpp"

namespace fcgo::cli {

//----------------------------------------------------------------------------
// Config plumbing.
//----------------------------------------------------------------------------

/// Load a config file; an empty path yields an empty object.  A manifest
/// written by an earlier run is accepted too (its embedded config is used),
/// so re-running a manifest reproduces the original outputs.
inline json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  json j = read_json_file(path);
  if (j.is_object() && j.contains("tool") && j.value("tool", "") == "floquet-cgo" &&
      j.contains("config"))
    j = j.at("config");
  if (!j.is_object())
    throw format_error("config: top level must be a JSON object in " + path);
  return j;
}

inline void require_known_keys(const json& cfg,
                               const std::vector<std::string>& known,
                               const std::string& what) {
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      std::string msg = what + ": unknown key '" + it.key() + "' (known:";
      for (const auto& k : known) msg += " " + k;
      msg += ")";
      throw format_error(msg);
    }
  }
}

template <typename T>
inline T get_or(const json& cfg, const std::string& key, const T& fallback) {
  if (!cfg.contains(key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw format_error("config: bad value for key '" + key + "': " + e.what());
  }
}

/// Default experiment cell: omega = [-R/2, R/2]^{n-1} x [-3R/4, 0]; the
/// config may override the box with an explicit "omega" key.
inline CellGeometry geometry_from_config(const json& cfg, int n, double R) {
  if (cfg.contains("omega")) {
    std::vector<Interval> box;
    try {
      for (const auto& iv : cfg.at("omega"))
        box.push_back(Interval{iv.at(0).get<double>(), iv.at(1).get<double>()});
    } catch (const json::exception& e) {
      throw format_error(std::string("config: bad value for key 'omega': ") +
                         e.what());
    }
    return CellGeometry(n, R, box);
  }
  std::vector<Interval> box(n, Interval{-0.5 * R, 0.5 * R});
  box[n - 1] = Interval{-0.75 * R, 0.0};
  return CellGeometry(n, R, box);
}

/// Box endpoints aligned with N divisible by 4 (used by forward checks).
inline CellGeometry quarters_geometry(int n, double R) {
  std::vector<Interval> box(n, Interval{-0.5 * R, 0.5 * R});
  box[n - 1] = Interval{-0.5 * R, 0.0};
  return CellGeometry(n, R, box);
}

//----------------------------------------------------------------------------
// Output writing.
//----------------------------------------------------------------------------

struct Outputs {
  std::string out_dir;
  std::string name;        ///< file stem
  std::string subcommand;  ///< recorded in the manifest
  json resolved = json::object();
  json calibrated = json::object();
  json results = json::object();
  /// (suffix, header, rows) per CSV file; suffix "" gives <name>.csv.
  std::vector<std::tuple<std::string, std::vector<std::string>,
                         std::vector<std::vector<std::string>>>>
      tables;
};

inline void emit_outputs(const Outputs& o) {
  std::filesystem::create_directories(o.out_dir);
  for (const auto& [suffix, header, rows] : o.tables)
    write_csv(o.out_dir + "/" + o.name + suffix + ".csv", header, rows);
  const json modules{{"lattice_spectral", kVersion}, {"cgo", kVersion},
                     {"fiber_forward", kVersion},    {"fbg", kVersion},
                     {"recovery", kVersion},         {"kelvin", kVersion},
                     {"cli", kVersion}};
  const json manifest{{"tool", "floquet-cgo"},
                      {"version", kVersion},
                      {"subcommand", o.subcommand},
                      {"modules", modules},
                      {"config", o.resolved},
                      {"config_hash", config_hash(o.resolved)},
                      {"calibrated", o.calibrated},
                      {"results", o.results}};
  write_json_file(o.out_dir + "/" + o.name + ".manifest.json", manifest);
}

inline std::string pass_flag(bool ok) { return ok ? "1" : "0"; }

/// Uniform check-row schema: pass means lo <= value <= hi.
inline std::vector<std::string> check_row(const std::string& check, int index,
                                          int n, double value, double lo,
                                          double hi, bool& all_ok) {
  const bool ok = (value >= lo) && (value <= hi);
  all_ok = all_ok && ok;
  return {check,
          std::to_string(index),
          std::to_string(n),
          format_double(value),
          format_double(lo),
          format_double(hi),
          pass_flag(ok)};
}

inline const std::vector<std::string>& check_header() {
  static const std::vector<std::string> h{"check", "index", "n",
                                          "value", "lo",    "hi", "pass"};
  return h;
}

//----------------------------------------------------------------------------
// cgo-check: frequency identities, multiplier norm, remainder scaling.
//----------------------------------------------------------------------------

inline int cmd_cgo_check(const json& cfg, const std::string& out_dir,
                         std::uint64_t seed) {
  require_known_keys(cfg,
                     {"n", "trials", "gnorm_trials", "gnorm_N0", "gnorm_N",
                      "R", "remainder_r", "identity_tol", "phase_tol",
                      "gnorm_factor", "seed", "out"},
                     "cgo-check config");
  const int n_req = get_or(cfg, "n", 0);  // 0: alternate between 2 and 3
  const int trials = get_or(cfg, "trials", 20);
  const int gnorm_trials = get_or(cfg, "gnorm_trials", 5);
  const int gnorm_N0 = get_or(cfg, "gnorm_N0", 8);
  const int gnorm_N = get_or(cfg, "gnorm_N", 8);
  const double R = get_or(cfg, "R", 1.0);
  const std::vector<double> remainder_r =
      get_or(cfg, "remainder_r", std::vector<double>{0.5, 3.5, 15.5, 63.5});
  const double identity_tol = get_or(cfg, "identity_tol", 1e-9);
  const double phase_tol = get_or(cfg, "phase_tol", 1e-10);
  const double gnorm_factor = get_or(cfg, "gnorm_factor", 1.01);

  Rng rng(seed);
  bool ok = true;
  std::vector<std::vector<std::string>> rows;

  for (int i = 0; i < trials; ++i) {
    const int n = (n_req != 0) ? n_req : (2 + i % 2);
    const ZetaCheck zc = zeta_checks(random_cgo_params(rng, n));
    rows.push_back(
        check_row("zeta-identity", i, n, zc.identity_residual, 0.0,
                  identity_tol, ok));
    rows.push_back(check_row("quasi-periodicity", i, n, zc.phase_defect, 0.0,
                             phase_tol, ok));
  }

  const int gn = (n_req != 0) ? n_req : 3;
  const CellGeometry gq = quarters_geometry(gn, R);
  for (int i = 0; i < gnorm_trials; ++i) {
    const GNormCheck ck = g_norm_check(
        random_cgo_params(rng, gn, /*axis_aligned=*/true), gq,
        GridSpec(gnorm_N0, gnorm_N));
    rows.push_back(check_row("multiplier-ratio", i, gn,
                             ck.measured / ck.bound, 0.0, gnorm_factor, ok));
  }

  if (remainder_r.size() >= 2) {
    const double r_small = 0.1;
    const CellGeometry g = geometry_from_config(json::object(), 2, r_small);
    const GridSpec grid(16, 16);
    const CellFunction q_ext =
        extend_potential(profile_cell("bump:1.0:11:1", g, grid));
    CgoParams base;
    base.n = 2;
    base.theta = 1.0;
    base.k = 1.0;
    base.r = 1.0;
    base.xi = {1.0, 0.0};
    base.eta = {0.0, 40.0};
    const auto sweep = remainder_sweep(q_ext, base, remainder_r);
    std::vector<double> taus, norms;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      taus.push_back(sweep[i].tau);
      norms.push_back(sweep[i].remainder_l2);
      rows.push_back(check_row("remainder-l2", static_cast<int>(i), 2,
                               sweep[i].remainder_l2, 0.0, inf, ok));
    }
    rows.push_back(
        check_row("remainder-slope", 0, 2, loglog_slope(taus, norms), -1.15,
                  -0.85, ok));
  }

  Outputs o;
  o.out_dir = out_dir;
  o.name = "cgo-check";
  o.subcommand = "cgo-check";
  o.resolved = {{"n", n_req},
                {"trials", trials},
                {"gnorm_trials", gnorm_trials},
                {"gnorm_N0", gnorm_N0},
                {"gnorm_N", gnorm_N},
                {"R", R},
                {"remainder_r", remainder_r},
                {"identity_tol", identity_tol},
                {"phase_tol", phase_tol},
                {"gnorm_factor", gnorm_factor},
                {"seed", seed},
                {"out", out_dir}};
  o.calibrated = {{"identity_tol", identity_tol},
                  {"phase_tol", phase_tol},
                  {"gnorm_factor", gnorm_factor},
                  {"multiplier_bound", "pi * R / tau"},
                  {"remainder_slope_window", {-1.15, -0.85}}};
  o.results = {{"all_passed", ok},
               {"rows", static_cast<int>(rows.size())}};
  o.tables.emplace_back("", check_header(), rows);
  emit_outputs(o);
  std::cout << "cgo-check: " << rows.size() << " rows, "
            << (ok ? "all checks passed" : "FAILURES present") << "; outputs in "
            << out_dir << "\n";
  return ok ? 0 : 1;
}

//----------------------------------------------------------------------------
// forward: manufactured-solution convergence orders.
//----------------------------------------------------------------------------

inline int cmd_forward(const json& cfg, const std::string& out_dir,
                       std::uint64_t seed) {
  require_known_keys(
      cfg, {"n", "R", "N0", "N", "theta", "kinds", "min_order", "seed", "out"},
      "forward config");
  const int n = get_or(cfg, "n", 2);
  const double R = get_or(cfg, "R", 1.0);
  const int N0 = get_or(cfg, "N0", 8);
  const int N = get_or(cfg, "N", 8);
  const double theta = get_or(cfg, "theta", 2.0);
  const std::vector<std::string> kinds = get_or(
      cfg, "kinds", std::vector<std::string>{"harmonic", "separated"});
  const double min_order = get_or(cfg, "min_order", n == 2 ? 1.8 : 1.5);

  const CellGeometry g = quarters_geometry(n, R);
  bool ok = true;
  std::vector<std::vector<std::string>> rows;
  json orders = json::object();
  for (const auto& kind : kinds) {
    const double e1 = forward_error(kind, g, GridSpec(N0, N), theta);
    const double e2 = forward_error(kind, g, GridSpec(2 * N0, 2 * N), theta);
    const double order = std::log2(e1 / e2);
    const bool pass = order >= min_order;
    ok = ok && pass;
    rows.push_back({kind, std::to_string(n), std::to_string(N0),
                    std::to_string(N), format_double(e1), format_double(e2),
                    format_double(order), format_double(min_order),
                    pass_flag(pass)});
    orders[kind] = order;
  }

  Outputs o;
  o.out_dir = out_dir;
  o.name = "forward";
  o.subcommand = "forward";
  o.resolved = {{"n", n},       {"R", R},
                {"N0", N0},     {"N", N},
                {"theta", theta}, {"kinds", kinds},
                {"min_order", min_order}, {"seed", seed},
                {"out", out_dir}};
  o.calibrated = {{"min_order", min_order}};
  o.results = {{"orders", orders}, {"all_passed", ok}};
  o.tables.emplace_back(
      "",
      std::vector<std::string>{"kind", "n", "N0", "N", "error_coarse",
                               "error_fine", "order", "min_order", "pass"},
      rows);
  emit_outputs(o);
  std::cout << "forward: orders " << orders.dump() << "; outputs in "
            << out_dir << "\n";
  return ok ? 0 : 1;
}

//----------------------------------------------------------------------------
// dn-norm: DN assembly and the sup over fibers of the difference norm.
//----------------------------------------------------------------------------

inline int cmd_dn_norm(const json& cfg, const std::string& out_dir,
                       std::uint64_t seed, std::string q1_spec,
                       std::string q2_spec) {
  require_known_keys(cfg,
                     {"n", "R", "omega", "N0", "N", "M", "q1", "q2",
                      "restrict_gamma1", "seed", "out"},
                     "dn-norm config");
  const int n = get_or(cfg, "n", 2);
  const double R = get_or(cfg, "R", 0.1);
  const int N0 = get_or(cfg, "N0", 8);
  const int N = get_or(cfg, "N", 16);
  const int M = get_or(cfg, "M", 4);
  const bool restrict_gamma1 = get_or(cfg, "restrict_gamma1", true);
  if (q1_spec.empty()) q1_spec = get_or(cfg, "q1", std::string("zero"));
  if (q2_spec.empty()) q2_spec = get_or(cfg, "q2", std::string("bump:0.1"));

  const CellGeometry g = geometry_from_config(cfg, n, R);
  const GridSpec grid(N0, N);
  const Potential q1 = profile_potential(q1_spec, g, grid);
  const Potential q2 = profile_potential(q2_spec, g, grid);
  const DnSupResult res =
      dn_sup_over_theta(q1, q2, ThetaGrid(M), restrict_gamma1);

  std::vector<std::vector<std::string>> rows;
  const ThetaGrid thetas(M);
  for (int j = 0; j < M; ++j)
    rows.push_back({format_double(thetas.theta(j)),
                    format_double(res.per_theta[j]),
                    pass_flag(thetas.theta(j) == res.theta_star)});

  Outputs o;
  o.out_dir = out_dir;
  o.name = "dn-norm";
  o.subcommand = "dn-norm";
  o.resolved = {{"n", n},   {"R", R},   {"N0", N0},
                {"N", N},   {"M", M},   {"q1", q1_spec},
                {"q2", q2_spec}, {"restrict_gamma1", restrict_gamma1},
                {"seed", seed},  {"out", out_dir}};
  if (cfg.contains("omega")) o.resolved["omega"] = cfg.at("omega");
  o.results = {{"delta", res.value}, {"theta_star", res.theta_star}};
  o.tables.emplace_back(
      "", std::vector<std::string>{"theta", "diff_norm", "is_sup"}, rows);
  emit_outputs(o);
  std::cout << "dn-norm: delta = " << format_double(res.value)
            << " at theta* = " << format_double(res.theta_star)
            << "; outputs in " << out_dir << "\n";
  return 0;
}

//----------------------------------------------------------------------------
// pairing: boundary-pairing consistency across refinement levels.
//----------------------------------------------------------------------------

inline CgoParams pairing_params_from_config(const json& cfg, int n,
                                            double r_default = 0.5) {
  CgoParams p;
  p.n = n;
  p.theta = get_or(cfg, "theta", 4.3);
  p.k = get_or(cfg, "k", 1.0);
  p.r = get_or(cfg, "r", r_default);
  const double mag = get_or(cfg, "eta_mag", 40.0);
  p.xi.assign(n, 0.0);
  p.xi[0] = 1.0;
  p.eta.assign(n, 0.0);
  if (n == 2) {
    p.eta[1] = mag;
  } else {
    p.eta[1] = mag / std::sqrt(2.0);
    p.eta[2] = mag / std::sqrt(2.0);
  }
  return p;
}

inline int cmd_pairing(const json& cfg, const std::string& out_dir,
                       std::uint64_t seed) {
  require_known_keys(cfg,
                     {"n", "R", "omega", "N0", "levels", "q1", "q2", "theta",
                      "k", "r", "eta_mag", "rel_tol", "final_tol", "seed",
                      "out"},
                     "pairing config");
  const int n = get_or(cfg, "n", 2);
  const double R = get_or(cfg, "R", 0.075);
  const int N0 = get_or(cfg, "N0", 64);
  const std::vector<int> levels =
      get_or(cfg, "levels", std::vector<int>{8, 16, 32});
  const std::string q1_spec = get_or(cfg, "q1", std::string("bump:1.0:30"));
  const std::string q2_spec =
      get_or(cfg, "q2", std::string("bump:0.6:30:1:0.015:-0.0025"));
  const double rel_tol = get_or(cfg, "rel_tol", 1.0);
  const double final_tol = get_or(cfg, "final_tol", 0.10);
  const CgoParams p = pairing_params_from_config(cfg, n, /*r_default=*/5.5);

  const CellGeometry g = geometry_from_config(cfg, n, R);
  std::vector<std::vector<std::string>> rows;
  std::vector<double> defects;
  for (int N : levels) {
    const GridSpec grid(N0, N);
    const PairingRun run = pairing_chain(profile_cell(q1_spec, g, grid),
                                         profile_cell(q2_spec, g, grid), p);
    const bool pass = run.rel_defect <= rel_tol;
    defects.push_back(run.rel_defect);
    rows.push_back({std::to_string(N),
                    format_double(run.terms.I1.real()),
                    format_double(run.terms.I1.imag()),
                    format_double(run.terms.I2.real()),
                    format_double(run.terms.I2.imag()),
                    format_double(run.terms.I3.real()),
                    format_double(run.terms.I3.imag()),
                    format_double(run.terms.I4.real()),
                    format_double(run.terms.I4.imag()),
                    format_double(run.lhs.real()),
                    format_double(run.lhs.imag()),
                    format_double(run.rel_defect), pass_flag(pass)});
  }
  bool improving = true;
  for (std::size_t i = 1; i < defects.size(); ++i)
    improving = improving && (defects[i] < defects[i - 1]);
  const bool ok = improving && !defects.empty() &&
                  defects.back() <= final_tol;

  Outputs o;
  o.out_dir = out_dir;
  o.name = "pairing";
  o.subcommand = "pairing";
  o.resolved = {{"n", n},     {"R", R},
                {"N0", N0},   {"levels", levels},
                {"q1", q1_spec}, {"q2", q2_spec},
                {"theta", p.theta}, {"k", p.k},
                {"r", p.r},   {"eta_mag", get_or(cfg, "eta_mag", 40.0)},
                {"rel_tol", rel_tol}, {"final_tol", final_tol},
                {"seed", seed}, {"out", out_dir}};
  if (cfg.contains("omega")) o.resolved["omega"] = cfg.at("omega");
  o.calibrated = {{"rel_tol", rel_tol}, {"final_tol", final_tol}};
  o.results = {{"rel_defects", defects},
               {"improving", improving},
               {"all_passed", ok}};
  o.tables.emplace_back(
      "",
      std::vector<std::string>{"N", "I1_re", "I1_im", "I2_re", "I2_im",
                               "I3_re", "I3_im", "I4_re", "I4_im", "lhs_re",
                               "lhs_im", "rel_defect", "pass"},
      rows);
  emit_outputs(o);
  std::cout << "pairing: defects";
  for (double d : defects) std::cout << " " << format_double(d);
  std::cout << "; outputs in " << out_dir << "\n";
  return ok ? 0 : 1;
}

//----------------------------------------------------------------------------
// recover: Fourier slices, weighted-norm assembly, schedule evaluation.
//----------------------------------------------------------------------------

inline int cmd_recover(const json& cfg, const std::string& out_dir,
                       std::uint64_t seed) {
  require_known_keys(cfg,
                     {"n", "R", "omega", "N0", "N", "q", "ks", "eta_half",
                      "pad", "deltas", "alpha", "seed", "out"},
                     "recover config");
  const int n = get_or(cfg, "n", 2);
  const double R = get_or(cfg, "R", 0.1);
  const int N0 = get_or(cfg, "N0", 8);
  const int N = get_or(cfg, "N", 16);
  const std::string q_spec = get_or(cfg, "q", std::string("bump:1.0:11:2"));
  const std::vector<double> ks =
      get_or(cfg, "ks", std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
  const int eta_half = get_or(cfg, "eta_half", 2);
  const int pad = get_or(cfg, "pad", 1);
  const std::vector<double> deltas =
      get_or(cfg, "deltas", std::vector<double>{1e-2, 1e-4, 1e-8});
  const double alpha = get_or(cfg, "alpha", 1.0);

  const CellGeometry g = geometry_from_config(cfg, n, R);
  const GridSpec grid(N0, N);
  const CellFunction q_ext = extend_potential(profile_cell(q_spec, g, grid));

  std::vector<FourierSlice> slices;
  std::vector<std::vector<std::string>> slice_rows;
  for (double k : ks) {
    slices.push_back(fourier_slice(q_ext, k, eta_half, pad));
    const FourierSlice& sl = slices.back();
    std::vector<int> m;
    std::vector<double> eta;
    for (std::int64_t i = 0; i < sl.grid.count(); ++i) {
      sl.grid.unflatten(i, m);
      sl.grid.point(m, eta);
      std::string eta_text;
      for (std::size_t j = 0; j < eta.size(); ++j) {
        if (j) eta_text += ",";
        eta_text += format_double(eta[j]);
      }
      slice_rows.push_back({format_double(k), eta_text,
                            format_double(sl.values[i].real()),
                            format_double(sl.values[i].imag()),
                            format_double(std::abs(sl.values[i]))});
    }
  }
  const double h1 = h_minus1_norm(slices);

  std::vector<std::vector<std::string>> sched_rows;
  for (double delta : deltas) {
    const ScheduleParams s = run_schedule_log(std::log(delta), alpha, n);
    sched_rows.push_back({format_double(delta), format_double(s.rho),
                          format_double(s.r), format_double(s.epsilon),
                          format_double(s.h_minus1_bound())});
  }

  Outputs o;
  o.out_dir = out_dir;
  o.name = "recover";
  o.subcommand = "recover";
  o.resolved = {{"n", n},         {"R", R},
                {"N0", N0},       {"N", N},
                {"q", q_spec},    {"ks", ks},
                {"eta_half", eta_half}, {"pad", pad},
                {"deltas", deltas},     {"alpha", alpha},
                {"seed", seed},   {"out", out_dir}};
  if (cfg.contains("omega")) o.resolved["omega"] = cfg.at("omega");
  o.results = {{"h_minus1", h1}};
  o.tables.emplace_back(
      "", std::vector<std::string>{"k", "eta", "re", "im", "abs"},
      slice_rows);
  o.tables.emplace_back(
      "_schedule",
      std::vector<std::string>{"delta", "rho", "r", "epsilon",
                               "h_minus1_bound"},
      sched_rows);
  emit_outputs(o);
  std::cout << "recover: " << slice_rows.size()
            << " slice samples, weighted norm = " << format_double(h1)
            << "; outputs in " << out_dir << "\n";
  return 0;
}

//----------------------------------------------------------------------------
// kelvin: inversion-chart checks.
//----------------------------------------------------------------------------

inline int cmd_kelvin(const json& cfg, const std::string& out_dir,
                      std::uint64_t seed, std::string check) {
  require_known_keys(
      cfg, {"n", "R", "check", "samples", "cells", "trials", "seed", "out"},
      "kelvin config");
  const int n = get_or(cfg, "n", 3);
  const double R = get_or(cfg, "R", 1.0);
  if (check.empty()) check = get_or(cfg, "check", std::string("all"));
  const int samples = get_or(cfg, "samples", 20);
  const int cells = get_or(cfg, "cells", 16);
  const int trials = get_or(cfg, "trials", 20);
  if (check != "all" && check != "sphere-to-plane" && check != "conjugation" &&
      check != "equivalence")
    throw format_error("config: unknown check '" + check +
                       "' (known: all sphere-to-plane conjugation "
                       "equivalence)");

  const KelvinChart ch(n, R);
  Rng rng(seed);
  bool ok = true;
  std::vector<std::vector<std::string>> rows;
  const double inf = std::numeric_limits<double>::infinity();

  if (check == "all" || check == "sphere-to-plane") {
    for (int i = 0; i < samples; ++i)
      rows.push_back(check_row("sphere-to-plane", i, n,
                               sphere_to_plane_defect(ch, 1, rng), 0.0, 1e-12,
                               ok));
  }
  if (check == "all" || check == "conjugation") {
    const std::vector<int> ladder{cells, 2 * cells, 4 * cells};
    const std::vector<double> res = kelvin_conjugation_ladder(n, R, ladder);
    for (std::size_t i = 0; i < res.size(); ++i)
      rows.push_back(check_row("conjugation-residual", static_cast<int>(i), n,
                               res[i], 0.0, inf, ok));
    for (std::size_t i = 0; i + 1 < res.size(); ++i)
      rows.push_back(check_row("conjugation-ratio", static_cast<int>(i), n,
                               res[i] / res[i + 1], 3.5, 4.5, ok));
  }
  if (check == "all" || check == "equivalence") {
    const BoxGrid y = kelvin_patch_grid(n, R, 8);
    const EquivalenceFactors ef = equivalence_factors(ch, y);
    const auto quotients = kelvin_quotient_sweep(ch, y, trials, rng);
    for (std::size_t i = 0; i < quotients.size(); ++i) {
      rows.push_back(check_row("equivalence-weight-quotient",
                               static_cast<int>(i), n, quotients[i].plain,
                               ef.weight_low - 1e-12, ef.weight_high + 1e-12,
                               ok));
      rows.push_back(check_row("equivalence-l2-quotient",
                               static_cast<int>(i), n, quotients[i].jac,
                               ef.l2_low - 1e-12, ef.l2_high + 1e-12, ok));
    }
  }

  Outputs o;
  o.out_dir = out_dir;
  o.name = "kelvin";
  o.subcommand = "kelvin";
  o.resolved = {{"n", n},        {"R", R},
                {"check", check}, {"samples", samples},
                {"cells", cells}, {"trials", trials},
                {"seed", seed},   {"out", out_dir}};
  o.calibrated = {{"sphere_tol", 1e-12},
                  {"conjugation_ratio_window", {3.5, 4.5}},
                  {"bracket_slack", 1e-12}};
  o.results = {{"all_passed", ok}, {"rows", static_cast<int>(rows.size())}};
  o.tables.emplace_back("", check_header(), rows);
  emit_outputs(o);
  std::cout << "kelvin: " << rows.size() << " rows, "
            << (ok ? "all checks passed" : "FAILURES present")
            << "; outputs in " << out_dir << "\n";
  return ok ? 0 : 1;
}

//----------------------------------------------------------------------------
// stability-curve: end-to-end noise-vs-error table.
//----------------------------------------------------------------------------

inline StabilityCurveConfig stability_config_from_json(const json& cfg,
                                                       std::uint64_t seed) {
  (void)seed;
  const int n = get_or(cfg, "n", 2);
  const double R = get_or(cfg, "R", 0.1);
  StabilityCurveConfig sc{geometry_from_config(cfg, n, R),
                          GridSpec(get_or(cfg, "N0", 8), get_or(cfg, "N", 16))};
  sc.theta_samples = get_or(cfg, "M", 4);
  sc.base_profile = get_or(cfg, "base_profile", std::string("bump:1.0:30"));
  sc.bump_profile = get_or(cfg, "bump_profile", std::string("bump:1.0:60:2"));
  sc.scales = get_or(cfg, "scales",
                     std::vector<double>{0.3, 0.2, 0.1, 0.05, 0.025});
  sc.alpha = get_or(cfg, "alpha", 1.0);
  sc.k_half = get_or(cfg, "k_half", 2);
  sc.eta_half = get_or(cfg, "eta_half", 8);
  return sc;
}

inline json stability_resolved_json(const StabilityCurveConfig& sc,
                                    std::uint64_t seed,
                                    const std::string& out_dir) {
  json omega = json::array();
  for (const auto& iv : sc.geometry.omega_box())
    omega.push_back({iv.lo, iv.hi});
  return json{{"n", sc.geometry.n()},
              {"R", sc.geometry.R()},
              {"omega", omega},
              {"N0", sc.grid.N0},
              {"N", sc.grid.N},
              {"M", sc.theta_samples},
              {"base_profile", sc.base_profile},
              {"bump_profile", sc.bump_profile},
              {"scales", sc.scales},
              {"alpha", sc.alpha},
              {"k_half", sc.k_half},
              {"eta_half", sc.eta_half},
              {"seed", seed},
              {"out", out_dir}};
}

/// Shared by the stability-curve subcommand and scenario sweeps over the
/// noise level: runs the curve, writes the fixed-schema CSV, and reports
/// monotonicity plus the envelope fit.
inline int run_stability_and_emit(const StabilityCurveConfig& sc,
                                  const std::string& out_dir,
                                  const std::string& name,
                                  const std::string& subcommand,
                                  std::uint64_t seed) {
  const std::vector<StabilityRecord> records = run_stability_curve(sc);

  std::vector<std::vector<std::string>> rows;
  std::vector<double> deltas, errors;
  for (const auto& rec : records) {
    rows.push_back(stability_csv_row(rec));
    deltas.push_back(rec.delta);
    errors.push_back(rec.h_minus1_actual);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < records.size(); ++i)
    monotone = monotone && (deltas[i] < deltas[i - 1]) &&
               (errors[i] < errors[i - 1]);

  EnvelopeFit fit;
  bool fit_ok = false;
  std::string fit_note;
  try {
    fit = fit_log_envelope(deltas, errors);
    fit_ok = fit.sigma > 0.0;
    fit_note = "sigma = " + format_double(fit.sigma) +
               ", rel residual = " + format_double(fit.rel_residual);
  } catch (const error& e) {
    fit_note = e.what();
  }

  Outputs o;
  o.out_dir = out_dir;
  o.name = name;
  o.subcommand = subcommand;
  o.resolved = stability_resolved_json(sc, seed, out_dir);
  o.calibrated = {{"alpha", sc.alpha},
                  {"schedule_bound", "h_minus1_bound = rho^{-2}"}};
  o.results = {{"monotone", monotone},
               {"sigma_fit", fit.sigma},
               {"c_fit", fit.c},
               {"fit_rel_residual", fit.rel_residual},
               {"deltas", deltas},
               {"h_minus1_actual", errors}};
  o.tables.emplace_back("", stability_csv_header(), rows);
  emit_outputs(o);

  const bool ok = monotone && fit_ok;
  std::cout << name << ": " << records.size() << " levels, "
            << (monotone ? "monotone" : "NOT monotone") << ", fit "
            << fit_note << "; outputs in " << out_dir << "\n";
  return ok ? 0 : 1;
}

inline int cmd_stability_curve(const json& cfg, const std::string& out_dir,
                               std::uint64_t seed) {
  require_known_keys(cfg,
                     {"n", "R", "omega", "N0", "N", "M", "scales",
                      "base_profile", "bump_profile", "alpha", "k_half",
                      "eta_half", "seed", "out"},
                     "stability-curve config");
  const StabilityCurveConfig sc = stability_config_from_json(cfg, seed);
  return run_stability_and_emit(sc, out_dir, "stability-curve",
                                "stability-curve", seed);
}

//----------------------------------------------------------------------------
// run: scenario driver.
//----------------------------------------------------------------------------

inline void validate_scenario_profiles(const json& profiles,
                                       const CellGeometry& g) {
  // Resolvability check: parse and evaluate each profile on a scratch grid.
  const GridSpec scratch(2, 8);
  for (auto it = profiles.begin(); it != profiles.end(); ++it) {
    if (!it.value().is_string())
      throw format_error("config: profile '" + it.key() +
                         "' must be a string");
    try {
      profile_cell(it.value().get<std::string>(), g, scratch);
    } catch (const error& e) {
      throw format_error("config: profile '" + it.key() +
                         "' is not resolvable: " + e.what());
    }
  }
}

inline int cmd_run(const std::string& scenario_path,
                   const std::string& out_flag, bool seed_flag_given,
                   std::uint64_t seed_flag) {
  const json sc = load_config_file(scenario_path);
  require_known_keys(sc,
                     {"name", "seed", "out", "geometry", "grid",
                      "theta_samples", "profiles", "sweep", "alpha", "k",
                      "eta", "phase", "k_half", "eta_half"},
                     "scenario config");

  const std::string name = get_or(
      sc, "name", std::filesystem::path(scenario_path).stem().string());
  const std::uint64_t seed =
      seed_flag_given ? seed_flag
                      : static_cast<std::uint64_t>(get_or(sc, "seed", 1));
  std::string out_dir = out_flag;
  if (out_dir.empty()) out_dir = get_or(sc, "out", std::string());
  if (out_dir.empty()) {
    const char* env = std::getenv("FLOQUET_CGO_OUT");
    out_dir = env ? env : "fcgo-out";
  }

  // Geometry / grid default to the standard small experiment cell.
  json geo = sc.contains("geometry") ? sc.at("geometry") : json::object();
  require_known_keys(geo, {"n", "R", "omega"}, "scenario geometry");
  const int n = get_or(geo, "n", 2);
  const double R = get_or(geo, "R", 0.1);
  const CellGeometry g = geometry_from_config(geo, n, R);
  json gr = sc.contains("grid") ? sc.at("grid") : json::object();
  require_known_keys(gr, {"N0", "N"}, "scenario grid");
  const GridSpec grid(get_or(gr, "N0", 8), get_or(gr, "N", 16));

  const json profiles =
      sc.contains("profiles") ? sc.at("profiles") : json::object();
  validate_scenario_profiles(profiles, g);
  auto profile_of = [&](const std::string& key,
                        const std::string& fallback) -> std::string {
    if (!profiles.contains(key)) {
      if (fallback.empty())
        throw format_error("config: scenario needs profiles." + key);
      return fallback;
    }
    return profiles.at(key).get<std::string>();
  };

  // Sweep: the one scenario invariant with its own error wording.
  if (!sc.contains("sweep") || !sc.at("sweep").is_object())
    throw format_error("config: sweep nonempty required (missing 'sweep')");
  const json sweep = sc.at("sweep");
  require_known_keys(sweep, {"parameter", "values", "count"},
                     "scenario sweep");
  const std::string parameter =
      get_or(sweep, "parameter", std::string("trial"));
  std::vector<double> values =
      get_or(sweep, "values", std::vector<double>{});
  if (values.empty()) {
    const int count = get_or(sweep, "count", 0);
    for (int i = 1; i <= count; ++i)
      values.push_back(static_cast<double>(i));
  }
  if (values.empty())
    throw format_error("config: sweep nonempty required (no values)");

  json resolved = sc;
  resolved["name"] = name;
  resolved["seed"] = seed;
  resolved["out"] = out_dir;

  Outputs o;
  o.out_dir = out_dir;
  o.name = name;
  o.subcommand = "run";
  o.resolved = resolved;
  bool ok = true;

  if (parameter == "trial") {
    // Frequency-identity sweep; one row per trial.
    Rng rng(seed);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const int tn = 2 + static_cast<int>(i % 2);
      const CgoParams p = random_cgo_params(rng, tn);
      const ZetaCheck zc = zeta_checks(p);
      const bool pass =
          zc.identity_residual < 1e-9 && zc.phase_defect < 1e-10;
      ok = ok && pass;
      rows.push_back({std::to_string(i), std::to_string(tn),
                      format_double(p.k), format_double(p.r),
                      format_double(zc.tau),
                      format_double(zc.identity_residual),
                      format_double(zc.phase_defect), pass_flag(pass)});
    }
    o.results = {{"all_passed", ok}, {"rows", static_cast<int>(rows.size())}};
    o.calibrated = {{"identity_tol", 1e-9}, {"phase_tol", 1e-10}};
    o.tables.emplace_back(
        "",
        std::vector<std::string>{"trial", "n", "k", "r", "tau",
                                 "identity_residual", "phase_defect", "pass"},
        rows);
  } else if (parameter == "tau") {
    // Remainder scaling sweep; values are the magnitude parameters.
    const json phase = sc.contains("phase") ? sc.at("phase") : json::object();
    require_known_keys(phase, {"theta", "k", "r", "eta_mag"},
                       "scenario phase");
    const CgoParams base = pairing_params_from_config(phase, n);
    const CellFunction q_ext =
        extend_potential(profile_cell(profile_of("q", "bump:1.0:11:1"), g, grid));
    const auto sweep_rows = remainder_sweep(q_ext, base, values);
    std::vector<double> taus, norms;
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : sweep_rows) {
      taus.push_back(row.tau);
      norms.push_back(row.remainder_l2);
      rows.push_back({format_double(row.r_param), format_double(row.tau),
                      format_double(row.remainder_l2),
                      std::to_string(row.iterations)});
    }
    const double slope = loglog_slope(taus, norms);
    ok = (slope >= -1.15) && (slope <= -0.85);
    o.results = {{"slope", slope}, {"all_passed", ok}};
    o.calibrated = {{"slope_window", {-1.15, -0.85}}};
    o.tables.emplace_back(
        "",
        std::vector<std::string>{"r", "tau", "remainder_l2", "iterations"},
        rows);
  } else if (parameter == "k" || parameter == "eta") {
    // Fourier-slice sweep of a single profile.
    const CellFunction q_ext =
        extend_potential(profile_cell(profile_of("q1", ""), g, grid));
    std::vector<std::vector<std::string>> rows;
    for (double v : values) {
      double k;
      std::vector<double> eta;
      if (parameter == "k") {
        k = v;
        eta = get_or(sc, "eta", std::vector<double>(n, 0.0));
        if (static_cast<int>(eta.size()) != n)
          throw format_error("config: bad value for key 'eta': need n entries");
      } else {
        k = get_or(sc, "k", 1.0);
        eta.assign(n, 0.0);
        eta[n - 1] = v;
      }
      const cplx qhat = fourier_value(q_ext, k, eta);
      std::string eta_text;
      for (std::size_t j = 0; j < eta.size(); ++j) {
        if (j) eta_text += ",";
        eta_text += format_double(eta[j]);
      }
      rows.push_back({format_double(k), eta_text,
                      format_double(qhat.real()), format_double(qhat.imag()),
                      format_double(std::abs(qhat))});
    }
    o.results = {{"rows", static_cast<int>(rows.size())}};
    o.tables.emplace_back(
        "", std::vector<std::string>{"k", "eta", "re", "im", "abs"}, rows);
  } else if (parameter == "delta" || parameter == "s") {
    // Noise-level sweep: the end-to-end stability curve.
    StabilityCurveConfig curve{g, grid};
    curve.theta_samples = get_or(sc, "theta_samples", 4);
    curve.base_profile = profile_of("base", "bump:1.0:30");
    curve.bump_profile = profile_of("bump", "bump:1.0:60:2");
    curve.scales = values;
    curve.alpha = get_or(sc, "alpha", 1.0);
    curve.k_half = get_or(sc, "k_half", 2);
    curve.eta_half = get_or(sc, "eta_half", 8);
    return run_stability_and_emit(curve, out_dir, name, "run", seed);
  } else {
    throw format_error("config: unknown sweep parameter '" + parameter +
                       "' (known: trial tau k eta delta s)");
  }

  emit_outputs(o);
  std::cout << "run " << name << ": " << values.size() << " sweep points, "
            << (ok ? "all checks passed" : "FAILURES present")
            << "; outputs in " << out_dir << "\n";
  return ok ? 0 : 1;
}

}  // namespace fcgo::cli

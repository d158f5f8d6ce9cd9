#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fcgo/cgo.hpp"
#include "fcgo/fbg.hpp"
#include "fcgo/fiber.hpp"
#include "fcgo/kelvin.hpp"
#include "fcgo/profiles.hpp"
#include "fcgo/recovery.hpp"
#include "fcgo/rng.hpp"

// Reusable experiment drivers shared by the command-line tool and the
// acceptance suite: random parameter draws, identity checks, scaling sweeps,
// manufactured-solution errors, the boundary-pairing chain, and the
// end-to-end stability curve.

namespace fcgo {

//----------------------------------------------------------------------------
// Random admissible parameter tuples.
//----------------------------------------------------------------------------

/// Random admissible parameter tuple.  With axis_aligned the direction xi is
/// snapped to a coordinate axis, as the spectral multiplier frame requires;
/// without it (n = 3) xi is a free unit vector in the (e_1, e_2)-plane.
///
/// The magnitude windows keep the derived frequency vectors below ~1e3:
/// the projection scale grows like r k / |eta|, and the identity checks use
/// absolute tolerances near 1e-9, which double precision only supports for
/// bounded magnitudes.
inline CgoParams random_cgo_params(Rng& rng, int n,
                                   bool axis_aligned = false) {
  CgoParams p;
  p.n = n;
  p.theta = rng.uniform(0.0, 2.0 * M_PI - 1e-9);
  const double halves[] = {-2.5, -2.0, -1.5, -1.0, -0.5,
                           0.5,  1.0,  1.5,  2.0,  2.5};
  p.k = halves[rng.integer(0, 9)];
  p.r = rng.uniform(0.5, 12.0);
  p.xi.assign(n, 0.0);
  p.eta.assign(n, 0.0);
  if (n == 2) {
    p.xi[0] = (rng.unit() < 0.5) ? 1.0 : -1.0;
    p.eta[1] = rng.uniform(4.0, 40.0) * ((rng.unit() < 0.5) ? 1.0 : -1.0);
    return p;
  }
  if (axis_aligned) {
    // xi . e_n = 0 keeps the last axis off-limits for the direction.
    const int j = static_cast<int>(rng.integer(0, n - 2));
    p.xi[j] = (rng.unit() < 0.5) ? 1.0 : -1.0;
    for (int a = 0; a < n; ++a)
      if (a != j)
        p.eta[a] = rng.uniform(4.0, 40.0) * ((rng.unit() < 0.5) ? 1.0 : -1.0);
    return p;
  }
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  p.xi[0] = std::cos(phi);
  p.xi[1] = std::sin(phi);
  const double a = rng.normal(), b = rng.normal();
  p.eta[0] = -a * std::sin(phi);
  p.eta[1] = a * std::cos(phi);
  p.eta[2] = b + ((b >= 0.0) ? 0.3 : -0.3);
  const double len = std::sqrt(p.eta[0] * p.eta[0] + p.eta[1] * p.eta[1] +
                               p.eta[2] * p.eta[2]);
  const double want = rng.uniform(4.0, 40.0);
  for (double& e : p.eta) e *= want / len;
  return p;
}

//----------------------------------------------------------------------------
// Frequency identity checks.
//----------------------------------------------------------------------------

/// Worst absolute residual of the frequency identities for one tuple:
/// zeta . zeta = 0 for both vectors, zeta1 + conj(zeta2) = i (2 pi k, eta),
/// the cross-phase pair and its reflection, plus the quasi-periodicity
/// phase defects exp(zeta . e_0) vs e^{i theta} and e^{i(theta - 2 pi k)}.
struct ZetaCheck {
  double identity_residual = 0.0;
  double phase_defect = 0.0;
  double tau = 0.0;
};

inline ZetaCheck zeta_checks(const CgoParams& p) {
  const CgoPhase ph = build_phase(p);
  const int n = p.n;
  ZetaCheck out;
  out.tau = ph.tau;

  double res = std::abs(bilinear(ph.zeta1, ph.zeta1));
  res = std::max(res, std::abs(bilinear(ph.zeta2, ph.zeta2)));
  for (int a = 0; a <= n; ++a) {
    const cplx sum = ph.zeta1[a] + std::conj(ph.zeta2[a]);
    const double want = (a == 0) ? 2.0 * M_PI * p.k : p.eta[a - 1];
    res = std::max(res, std::abs(sum - cplx(0.0, want)));
  }
  const auto [first, second] = cross_phase_vectors(ph);
  const std::vector<double> kappa = kappa_vector(ph);
  res = std::max(res, std::abs(first[0] - cplx(0.0, 2.0 * M_PI * p.k)));
  for (int j = 0; j < n; ++j)
    res = std::max(res, std::abs(first[j + 1] - cplx(0.0, kappa[j])));
  const auto first_star = star(first);
  for (int a = 0; a <= n; ++a)
    res = std::max(res, std::abs(second[a] - first_star[a]));
  out.identity_residual = res;

  const cplx f1 = fiber_phase(ph, 1);
  const cplx f2 = fiber_phase(ph, 2);
  out.phase_defect =
      std::max(std::abs(f1 - std::exp(cplx(0.0, p.theta))),
               std::abs(f2 - std::exp(cplx(0.0, p.theta - 2.0 * M_PI * p.k))));
  return out;
}

//----------------------------------------------------------------------------
// Multiplier norm check.
//----------------------------------------------------------------------------

struct GNormCheck {
  double tau = 0.0;
  double measured = 0.0;  ///< worse of the two frequency vectors
  double bound = 0.0;     ///< pi R / tau
};

inline GNormCheck g_norm_check(const CgoParams& p, const CellGeometry& g,
                               const GridSpec& grid) {
  const CgoPhase ph = build_phase(p);
  GNormCheck out;
  out.tau = ph.tau;
  out.bound = multiplier_norm_bound(ph.tau, g.R());
  out.measured = std::max(measured_G_norm(ph.zeta1, g, grid),
                          measured_G_norm(ph.zeta2, g, grid));
  return out;
}

//----------------------------------------------------------------------------
// Scaling fits.
//----------------------------------------------------------------------------

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& xs,
                           const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw domain_error("loglog_slope: need two matched samples");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw domain_error("loglog_slope: samples must be positive");
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// Fit error ~ C |log delta|^{-sigma} by least squares on
/// log(error) vs log|log delta|; rel_residual is the RMS relative gap
/// between the fitted envelope and the data in linear space.
struct EnvelopeFit {
  double c = 0.0;
  double sigma = 0.0;
  double rel_residual = 0.0;
};

inline EnvelopeFit fit_log_envelope(const std::vector<double>& deltas,
                                    const std::vector<double>& errors) {
  if (deltas.size() != errors.size() || deltas.size() < 2)
    throw domain_error("fit_log_envelope: need two matched samples");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || deltas[i] >= 1.0)
      throw domain_error("fit_log_envelope: delta must lie in (0, 1)");
    if (!(errors[i] > 0.0))
      throw domain_error("fit_log_envelope: errors must be positive");
    xs.push_back(std::abs(std::log(deltas[i])));
    ys.push_back(errors[i]);
  }
  EnvelopeFit fit;
  fit.sigma = -loglog_slope(xs, ys);
  double sly = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    sly += std::log(ys[i]) + fit.sigma * std::log(xs[i]);
  fit.c = std::exp(sly / static_cast<double>(xs.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double model = fit.c * std::pow(xs[i], -fit.sigma);
    const double rel = (model - ys[i]) / ys[i];
    acc += rel * rel;
  }
  fit.rel_residual = std::sqrt(acc / static_cast<double>(xs.size()));
  return fit;
}

//----------------------------------------------------------------------------
// Remainder scaling sweep.
//----------------------------------------------------------------------------

struct RemainderRow {
  double r_param = 0.0;
  double tau = 0.0;
  double remainder_l2 = 0.0;
  int iterations = 0;
};

/// Solve the remainder equation across magnitude parameters; base.r is
/// replaced by each value in turn while everything else is held fixed.
inline std::vector<RemainderRow> remainder_sweep(
    const CellFunction& q_ext, CgoParams base,
    const std::vector<double>& r_values, int which = 1) {
  std::vector<RemainderRow> rows;
  rows.reserve(r_values.size());
  for (double r : r_values) {
    base.r = r;
    const CgoPhase ph = build_phase(base);
    const RemainderSolve sol = solve_remainder(ph, which, q_ext);
    rows.push_back({r, ph.tau, sol.remainder.l2(), sol.iterations});
  }
  return rows;
}

//----------------------------------------------------------------------------
// Manufactured forward errors.
//----------------------------------------------------------------------------

/// Max-norm error of the fiber solve against a continuum zero-potential
/// solution with exact quasi-periodic axial data.
///   harmonic:  u = exp(i theta x0 + theta s.x'), s = (1,..,1)/sqrt(n)
///   separated: u = exp(i theta x0) prod_{j<n} cos(x_j) exp(nu x_n),
///              nu^2 = theta^2 + (n-1)
inline double forward_error(const std::string& kind, const CellGeometry& g,
                            const GridSpec& grid, double theta,
                            SolverOptions opt = {}) {
  const int n = g.n();
  auto continuum = [&](const std::vector<double>& x) -> cplx {
    if (kind == "harmonic") {
      double s = 0.0;
      const double w = 1.0 / std::sqrt(static_cast<double>(n));
      for (int j = 1; j <= n; ++j) s += w * x[j];
      return std::exp(cplx(theta * s, theta * x[0]));
    }
    if (kind == "separated") {
      const double nu =
          std::sqrt(theta * theta + static_cast<double>(n - 1));
      cplx v = std::exp(cplx(nu * x[n], theta * x[0]));
      for (int j = 1; j < n; ++j) v *= std::cos(x[j]);
      return v;
    }
    throw domain_error("forward_error: unknown manufactured kind '" + kind +
                       "'");
  };

  CellFunction u(g, grid);
  u.fill(continuum);
  FiberSystem sys(zero_potential(g, grid), theta, opt);
  const Eigen::VectorXcd field = sys.solve_box(sys.trace_of(u).values);
  const BoxLattice& box = sys.box();
  std::vector<std::int64_t> b, mi;
  std::vector<double> x;
  double err = 0.0;
  for (std::int64_t s = 0; s < box.spatial_count(); ++s) {
    box.spatial_unflatten(s, b);
    for (std::int64_t i0 = 0; i0 < box.layer_count(); ++i0) {
      box.cell_index(i0, b, mi);
      u.point(mi, x);
      err = std::max(err, std::abs(field[i0 * box.spatial_count() + s] -
                                   continuum(x)));
    }
  }
  return err;
}

/// Observed convergence order between (N0, N) and the doubled grid.
inline double forward_order(const std::string& kind, const CellGeometry& g,
                            int N0, int N, double theta,
                            SolverOptions opt = {}) {
  const double e1 = forward_error(kind, g, GridSpec(N0, N), theta, opt);
  const double e2 = forward_error(kind, g, GridSpec(2 * N0, 2 * N), theta, opt);
  if (!(e2 > 0.0)) return std::numeric_limits<double>::infinity();
  return std::log2(e1 / e2);
}

//----------------------------------------------------------------------------
// Boundary-pairing chain.
//----------------------------------------------------------------------------

/// One full run of the boundary-to-volume consistency chain at the given
/// parameters: CGO remainders for both potentials, assembled solutions,
/// boundary pairing, and the four-term volume expansion.
struct PairingRun {
  PairingTerms terms;
  cplx lhs{0.0, 0.0};
  double rel_defect = 0.0;  ///< |lhs - combination| / |I1|
};

inline PairingRun pairing_chain(const CellFunction& q1_cell,
                                const CellFunction& q2_cell,
                                const CgoParams& p, SolverOptions opt = {}) {
  const Potential q1 = make_potential(restrict_to_omega(q1_cell));
  const Potential q2 = make_potential(restrict_to_omega(q2_cell));
  const CellFunction q1_ext = extend_potential(q1_cell);
  const CellFunction q2_ext = extend_potential(q2_cell);
  CellFunction qd = q1_ext;
  qd -= q2_ext;

  const CgoPhase ph = build_phase(p);
  const CellFunction r1 = solve_remainder(ph, 1, q1_ext).remainder;
  const CellFunction r2 = solve_remainder(ph, 2, q2_ext).remainder;
  const CellFunction v1 = assemble_v(ph, 1, r1);
  const CellFunction v2 = assemble_v(ph, 2, r2);

  PairingRun out;
  out.lhs = pairing_lhs(q1, q2, p.theta, v1, v2, opt);
  out.terms = pairing_terms(qd, ph, r1, r2);
  out.rel_defect =
      std::abs(out.lhs - out.terms.combination()) / std::abs(out.terms.I1);
  return out;
}

//----------------------------------------------------------------------------
// Kelvin-chart check drivers.
//----------------------------------------------------------------------------

/// y-side patch straddling the fixed sphere |y'| = 2R.
inline BoxGrid kelvin_patch_grid(int n, double R, int cells) {
  std::vector<Interval> box(n, Interval{-0.1 * R, 0.1 * R});
  box[n - 1] = Interval{1.7 * R, 2.3 * R};
  return BoxGrid(box, std::vector<int>(n, cells));
}

/// Max |y_n - 2R| over random points of the sphere through the origin
/// centered at the chart center (the sphere the chart flattens).
inline double sphere_to_plane_defect(const KelvinChart& ch, int samples,
                                     Rng& rng) {
  const int n = ch.n;
  const std::vector<double> a = ch.center();
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    std::vector<double> x(n);
    double r2 = 0.0;
    do {
      std::vector<double> d(n, 0.0);
      if (n == 2) {
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        d[0] = std::cos(phi);
        d[1] = std::sin(phi);
      } else {
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double c = rng.uniform(-1.0, 1.0);
        const double sphi = std::sqrt(std::max(0.0, 1.0 - c * c));
        d[0] = sphi * std::cos(phi);
        for (int j = 1; j + 1 < n; ++j) d[j] = sphi * std::sin(phi);
        d[n - 1] = c;
      }
      r2 = 0.0;
      for (int j = 0; j < n; ++j) {
        x[j] = a[j] + ch.R * d[j];
        r2 += x[j] * x[j];
      }
    } while (r2 < 1e-6 * ch.R * ch.R);  // stay away from the chart pole
    const std::vector<double> y = map_spatial(ch, x);
    worst = std::max(worst, std::abs(y[n - 1] - 2.0 * ch.R));
  }
  return worst;
}

/// Conjugation-identity residuals over a halving ladder of patch grids,
/// using a fixed analytic field with a closed-form Laplacian.
inline std::vector<double> kelvin_conjugation_ladder(
    int n, double R, const std::vector<int>& cells_ladder) {
  auto u = [](const std::vector<double>& x) {
    double v = x[0] * x[0] * x[0] + std::cos(x[1] + 0.3 * x[0]);
    if (x.size() == 3) v += x[2] * x[2] * x[0];
    return v;
  };
  auto lap_u = [](const std::vector<double>& x) {
    double v = 6.0 * x[0] - (1.0 + 0.09) * std::cos(x[1] + 0.3 * x[0]);
    if (x.size() == 3) v += 2.0 * x[0];
    return v;
  };
  const KelvinChart ch(n, R);
  std::vector<double> res;
  res.reserve(cells_ladder.size());
  for (int cells : cells_ladder)
    res.push_back(
        conjugation_residual(ch, u, lap_u, kelvin_patch_grid(n, R, cells)));
  return res;
}

/// Norm quotients of random smooth wave packets on a y-grid, computed with
/// one shared trapezoid quadrature so the certified brackets apply exactly:
/// `plain` compares the same measure with and without the conformal weight,
/// `jac` is the change-of-variables L2 quotient against the x-side norm.
struct KelvinQuotient {
  double plain = 0.0;
  double jac = 0.0;
};

inline std::vector<KelvinQuotient> kelvin_quotient_sweep(const KelvinChart& ch,
                                                         const BoxGrid& y,
                                                         int trials, Rng& rng) {
  const int n = ch.n;
  std::vector<KelvinQuotient> out;
  out.reserve(trials);
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> kvec(n), amp(2), phase(2);
    for (auto& a : amp) a = rng.uniform(0.2, 1.0);
    for (auto& p : phase) p = rng.uniform(0.0, 6.28);
    for (auto& c : kvec) c = rng.uniform(-3.0 / ch.R, 3.0 / ch.R);
    auto u = [&](const std::vector<double>& x) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += kvec[j] * x[j];
      return amp[0] * std::cos(dot + phase[0]) +
             amp[1] * std::cos(2.0 * dot + phase[1]) + 3.0;
    };

    std::vector<std::int64_t> mi;
    std::vector<double> p;
    double num = 0.0, den_plain = 0.0, den_jac = 0.0;
    for (std::int64_t i = 0; i < y.node_count(); ++i) {
      y.unflatten(i, mi);
      y.point(mi, p);
      const double w = kelvin_weight(ch, p);
      const double uv = u(map_spatial(ch, p));
      double pn = 0.0;
      for (double c : p) pn += c * c;
      const double f = 2.0 * ch.R / std::sqrt(pn);
      const double jac = std::pow(f, 2.0 * n);
      double qw = 1.0;
      for (int j = 0; j < n; ++j) {
        qw *= y.h(j);
        if (mi[j] == 0 || mi[j] == y.cells[j]) qw *= 0.5;
      }
      num += w * w * uv * uv * qw;
      den_plain += uv * uv * qw;
      den_jac += uv * uv * jac * qw;
    }
    out.push_back(
        {std::sqrt(num / den_plain), std::sqrt(num / den_jac)});
  }
  return out;
}

//----------------------------------------------------------------------------
// End-to-end stability curve.
//----------------------------------------------------------------------------

struct StabilityCurveConfig {
  CellGeometry geometry;
  GridSpec grid;
  int theta_samples = 8;
  std::string base_profile = "bump:1.0:30";
  std::string bump_profile = "bump:1.0:60:2";
  std::vector<double> scales;  ///< perturbation sizes, largest first
  double alpha = 1.0;          ///< smoothness exponent fed to the schedule
  int k_half = 2;              ///< axial range of the weighted-norm lattice
  int eta_half = 8;            ///< transverse half-width of that lattice
  SolverOptions solver;
};

/// For each size s: q2 = q1 + s * bump, data distance delta(s) =
/// sup_theta of the DN difference norm, schedule evaluation at delta(s),
/// and the measured weighted/sup norms of q1 - q2.  The unperturbed DN map
/// and boundary Gram are assembled once per fiber and reused for every s.
inline std::vector<StabilityRecord> run_stability_curve(
    const StabilityCurveConfig& cfg) {
  if (cfg.scales.empty())
    throw domain_error("stability curve: sweep nonempty");
  const CellGeometry& g = cfg.geometry;
  const int n = g.n();
  const CellFunction base = profile_cell(cfg.base_profile, g, cfg.grid);
  const CellFunction bump = profile_cell(cfg.bump_profile, g, cfg.grid);
  const Potential q1 = make_potential(restrict_to_omega(base));

  const std::size_t S = cfg.scales.size();
  std::vector<Potential> q2(S);
  for (std::size_t si = 0; si < S; ++si) {
    CellFunction c = bump;
    c *= cplx(cfg.scales[si]);
    c += base;
    q2[si] = make_potential(restrict_to_omega(c));
  }

  std::vector<double> delta(S, 0.0), theta_star(S, 0.0);
  const ThetaGrid thetas(cfg.theta_samples);
  for (int j = 0; j < thetas.M; ++j) {
    const double th = thetas.theta(j);
    const Eigen::MatrixXcd gram =
        build_hscript_gram(g, cfg.grid, th, cfg.solver);
    const DnMap a = assemble_dn(q1, th, cfg.solver);
    for (std::size_t si = 0; si < S; ++si) {
      const DnMap b = assemble_dn(q2[si], th, cfg.solver);
      const double v = dn_diff_norm(a, b, /*restrict_gamma1=*/true, gram);
      if (v > delta[si]) {
        delta[si] = v;
        theta_star[si] = th;
      }
    }
  }

  std::vector<StabilityRecord> records;
  records.reserve(S);
  for (std::size_t si = 0; si < S; ++si) {
    CellFunction diff_cell = bump;
    diff_cell *= cplx(cfg.scales[si]);

    std::vector<FourierSlice> slices;
    const CellFunction diff_ext = extend_potential(diff_cell);
    for (int k = -cfg.k_half; k <= cfg.k_half; ++k)
      slices.push_back(
          fourier_slice(diff_ext, static_cast<double>(k), cfg.eta_half));

    const CellFunction diff_omega = restrict_to_omega(diff_cell);
    double linf = 0.0;
    for (std::int64_t i = 0; i < diff_omega.size(); ++i)
      linf = std::max(linf, std::abs(diff_omega[i]));

    StabilityRecord rec;
    rec.delta = delta[si];
    rec.schedule = run_schedule_log(std::log(delta[si]), cfg.alpha, n);
    rec.h_minus1_bound = rec.schedule.h_minus1_bound();
    rec.h_minus1_actual = h_minus1_norm(slices);
    rec.linf_actual = linf;
    rec.theta_star = theta_star[si];
    rec.n = n;
    rec.N0 = cfg.grid.N0;
    rec.N = cfg.grid.N;
    rec.R = g.R();
    records.push_back(rec);
  }
  return records;
}

}  // namespace fcgo

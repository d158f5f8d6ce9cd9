#pragma once

//============================================================================
// Fourier-mode recovery of the potential difference from DN pairings, the
// decay and a-priori estimates, the H^{-1} assembly, the epsilon/r/rho
// parameter schedule, and the final L-infinity interpolation bound.
//
// Fourier convention (frozen here and used everywhere downstream):
//
//   q_hat_k(eta) = 1/2 * sum over the full cell box of
//                  q_ext(x) e^{i (2 pi k x0 + eta . x')} dV,
//
// where q_ext is the reflection-even extension of the difference potential
// to the full box (extend_potential).  With this normalization the
// principal pairing term satisfies I1 = 2 q_hat_k(eta) exactly at the
// discrete level.
//============================================================================

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/cgo.hpp"
#include "fcgo/errors.hpp"
#include "fcgo/fiber.hpp"
#include "fcgo/geometry.hpp"

namespace fcgo {

//----------------------------------------------------------------------------
// Fourier slices.
//----------------------------------------------------------------------------

/// Symmetric lattice of spatial frequencies: eta = spacing * m with
/// m in [-half, half]^n (componentwise).
struct EtaGrid {
  int n = 0;
  double spacing = 0.0;
  int half = 0;

  std::int64_t count() const {
    std::int64_t c = 1;
    for (int j = 0; j < n; ++j) c *= (2 * half + 1);
    return c;
  }
  std::int64_t side() const { return 2 * half + 1; }

  void unflatten(std::int64_t idx, std::vector<int>& m) const {
    m.resize(n);
    for (int j = n - 1; j >= 0; --j) {
      m[j] = int(idx % side()) - half;
      idx /= side();
    }
  }
  std::int64_t flat(const std::vector<int>& m) const {
    std::int64_t idx = 0;
    for (int j = 0; j < n; ++j) idx = idx * side() + (m[j] + half);
    return idx;
  }
  void point(const std::vector<int>& m, std::vector<double>& eta) const {
    eta.resize(n);
    for (int j = 0; j < n; ++j) eta[j] = spacing * m[j];
  }
  bool same_as(const EtaGrid& o) const {
    return n == o.n && half == o.half &&
           std::abs(spacing - o.spacing) <= 1e-12 * std::abs(spacing);
  }
};

/// Values of q_hat_k on an eta lattice for one axial frequency k.
struct FourierSlice {
  double k = 0.0;
  EtaGrid grid;
  int zero_padding = 1;
  std::vector<cplx> values;
};

/// q_hat_k at a single (possibly off-lattice) eta by direct quadrature of
/// the oscillatory sum; the axial reduction is hoisted out of the spatial
/// loop.
inline cplx fourier_value(const CellFunction& q_ext, double k,
                          const std::vector<double>& eta) {
  const int n = q_ext.n();
  if (static_cast<int>(eta.size()) != n)
    throw domain_error("fourier_value: eta dimension mismatch");
  const GridSpec& grid = q_ext.grid();
  const double R = q_ext.geometry().R();
  const double h = grid.h(R);
  const double h0 = grid.h0();

  // Axial reduction: Q(x') = sum_{i0} q e^{2 pi i k x0} h0.
  std::int64_t spatial = 1;
  for (int j = 0; j < n; ++j) spatial *= grid.N;
  std::vector<cplx> axial(spatial, cplx(0.0));
  for (std::int64_t i0 = 0; i0 < grid.N0; ++i0) {
    const cplx ph =
        std::exp(cplx(0.0, 2.0 * M_PI * k * double(i0) * h0)) * h0;
    const cplx* src = q_ext.values().data() + i0 * spatial;
    for (std::int64_t s = 0; s < spatial; ++s) axial[s] += ph * src[s];
  }

  // Per-axis phase tables e^{i eta_j x_j}.
  std::vector<std::vector<cplx>> table(n, std::vector<cplx>(grid.N));
  for (int j = 0; j < n; ++j)
    for (std::int64_t i = 0; i < grid.N; ++i)
      table[j][i] = std::exp(cplx(0.0, eta[j] * (-R + double(i) * h)));

  cplx sum(0.0);
  std::vector<std::int64_t> m(n);
  for (std::int64_t s = 0; s < spatial; ++s) {
    std::int64_t idx = s;
    cplx ph(1.0);
    for (int j = n - 1; j >= 0; --j) {
      ph *= table[j][idx % grid.N];
      idx /= grid.N;
    }
    sum += axial[s] * ph;
  }
  double dv = 1.0;
  for (int j = 0; j < n; ++j) dv *= h;
  return 0.5 * sum * dv;
}

/// Whole slice on the lattice eta = (pi / (R * pad)) * m, |m_j| <= half.
inline FourierSlice fourier_slice(const CellFunction& q_ext, double k,
                                  int half, int zero_padding = 1) {
  if (half < 0) throw domain_error("fourier_slice: half must be >= 0");
  if (zero_padding < 1)
    throw domain_error("fourier_slice: zero_padding must be >= 1");
  FourierSlice out;
  out.k = k;
  out.zero_padding = zero_padding;
  out.grid.n = q_ext.n();
  out.grid.half = half;
  out.grid.spacing = M_PI / (q_ext.geometry().R() * zero_padding);
  out.values.resize(out.grid.count());
  std::vector<int> m;
  std::vector<double> eta;
  for (std::int64_t i = 0; i < out.grid.count(); ++i) {
    out.grid.unflatten(i, m);
    out.grid.point(m, eta);
    out.values[i] = fourier_value(q_ext, k, eta);
  }
  return out;
}

/// Max over the shared lattice of |q_hat_k(-eta) - conj(q_hat_{-k}(eta))|;
/// zero (to roundoff) for real q_ext.
inline double conjugate_symmetry_defect(const FourierSlice& plus,
                                        const FourierSlice& minus) {
  if (!plus.grid.same_as(minus.grid))
    throw domain_error("conjugate_symmetry_defect: eta grids differ");
  if (std::abs(plus.k + minus.k) > 1e-12)
    throw domain_error("conjugate_symmetry_defect: k values are not opposite");
  double worst = 0.0;
  std::vector<int> m, neg;
  for (std::int64_t i = 0; i < plus.grid.count(); ++i) {
    plus.grid.unflatten(i, m);
    neg = m;
    for (auto& c : neg) c = -c;
    const cplx a = plus.values[plus.grid.flat(neg)];
    const cplx b = std::conj(minus.values[i]);
    worst = std::max(worst, std::abs(a - b));
  }
  return worst;
}

/// sqrt( sum_k sum_eta (1 + k^2 + |eta|^2)^{-1} |q_hat_k(eta)|^2 dmu ) with
/// dmu = spacing^n / (2 pi)^n; requires a symmetric k-range on one lattice.
inline double h_minus1_norm(const std::vector<FourierSlice>& slices) {
  if (slices.empty()) return 0.0;
  const EtaGrid& grid = slices.front().grid;
  for (const auto& s : slices) {
    if (!s.grid.same_as(grid))
      throw domain_error("h_minus1_norm: slices use different eta grids");
    bool mirrored = false;
    for (const auto& o : slices)
      if (std::abs(o.k + s.k) < 1e-12) mirrored = true;
    if (!mirrored)
      throw domain_error("h_minus1_norm: k-range is not symmetric");
  }
  double dmu = 1.0;
  for (int j = 0; j < grid.n; ++j) dmu *= grid.spacing / (2.0 * M_PI);
  double total = 0.0;
  std::vector<int> m;
  std::vector<double> eta;
  for (const auto& s : slices) {
    for (std::int64_t i = 0; i < grid.count(); ++i) {
      grid.unflatten(i, m);
      grid.point(m, eta);
      double e2 = 0.0;
      for (double c : eta) e2 += c * c;
      total += std::norm(s.values[i]) / (1.0 + s.k * s.k + e2) * dmu;
    }
  }
  return std::sqrt(total);
}

//----------------------------------------------------------------------------
// Pairing terms and boundary pairing.
//----------------------------------------------------------------------------

/// The four integrals in the pairing decomposition I1 - I2 + I3 - I4, all
/// reduced to single full-box quadratures of the even-extended potential:
///   I1 = int q_ext e^{(zeta1 + conj zeta2) . x},
///   I2 = int q_ext e^{(zeta1* + conj zeta2) . x},
///   I3 = int q_ext e^{(zeta1 + conj zeta2) . x} (r1 + conj r2 + r1 conj r2),
///   I4 = the same as I3 with the starred phase and r1 replaced by its
///        x_n-reflection.
/// The two phase vectors equal i(2 pi k, eta) and i(2 pi k, kappa).
struct PairingTerms {
  cplx I1, I2, I3, I4;
  cplx combination() const { return I1 - I2 + I3 - I4; }
};

inline PairingTerms pairing_terms(const CellFunction& q_ext,
                                  const CgoPhase& ph, const CellFunction& r1,
                                  const CellFunction& r2) {
  const int n = q_ext.n();
  std::vector<cplx> w12(n + 1), w12s(n + 1);
  const std::vector<cplx> z1s = star(ph.zeta1);
  for (int i = 0; i <= n; ++i) {
    w12[i] = ph.zeta1[i] + std::conj(ph.zeta2[i]);
    w12s[i] = z1s[i] + std::conj(ph.zeta2[i]);
  }
  const CellFunction e12 =
      exponential_field(q_ext.geometry(), q_ext.grid(), w12);
  const CellFunction e12s =
      exponential_field(q_ext.geometry(), q_ext.grid(), w12s);
  const CellFunction r1s = reflect(r1);

  const double dv = q_ext.cell_volume();
  PairingTerms out{cplx(0.0), cplx(0.0), cplx(0.0), cplx(0.0)};
  for (std::int64_t i = 0; i < q_ext.size(); ++i) {
    const cplx q = q_ext[i];
    if (q == cplx(0.0)) continue;
    const cplx c2 = std::conj(r2[i]);
    out.I1 += q * e12[i];
    out.I2 += q * e12s[i];
    out.I3 += q * e12[i] * (r1[i] + c2 + r1[i] * c2);
    out.I4 += q * e12s[i] * (r1s[i] + c2 + r1s[i] * c2);
  }
  out.I1 *= dv;
  out.I2 *= dv;
  out.I3 *= dv;
  out.I4 *= dv;
  return out;
}

/// Boundary pairing <(DN_{q1} - DN_{q2}) v1, v2> by surface quadrature of
/// the one-sided normal derivatives against the trace of v2.  Both traces
/// must be supported in the open boundary part (vanish on {x_n = 0}).
inline cplx pairing_lhs(const Potential& q1, const Potential& q2, double theta,
                        const CellFunction& v1, const CellFunction& v2,
                        SolverOptions opt = {}) {
  FiberSystem sys1(q1, theta, opt);
  const TraceFunction f1 = sys1.trace_of(v1);
  const TraceFunction f2 = sys1.trace_of(v2);
  if (!f1.restricted_to_gamma1)
    throw support_error("pairing_lhs: v1 trace leaks onto the closed "
                        "boundary part {x_n = 0}");
  if (!f2.restricted_to_gamma1)
    throw support_error("pairing_lhs: v2 trace leaks onto the closed "
                        "boundary part {x_n = 0}");
  const Eigen::VectorXcd dn1 = sys1.dn_from_box(sys1.solve_box(f1.values));
  FiberSystem sys2(q2, theta, opt);
  const Eigen::VectorXcd dn2 = sys2.dn_from_box(sys2.solve_box(f1.values));

  const TraceGrid& tg = sys1.traces();
  cplx sum(0.0);
  for (std::int64_t t = 0; t < tg.size(); ++t)
    sum += (dn1[t] - dn2[t]) * std::conj(f2.values[t]) * tg.surface_weight(t);
  return sum;
}

//----------------------------------------------------------------------------
// Shift modulus, Hoelder fit, decay bound.
//----------------------------------------------------------------------------

/// L1 norm of q~(. + y) - q~(.) where q~ is the zero extension of q from the
/// half-open cell [0,1) x prod_j [lo_j, hi_j) to all of R^{1+n}; y must be
/// grid-aligned.  With half-open cells the axial-shift bound
/// 2 ||q||_inf |omega| |y0| holds exactly.
inline double shift_modulus(const Potential& q, const std::vector<double>& y) {
  const CellFunction& f = q.values;
  const int n = f.n();
  if (static_cast<int>(y.size()) != n + 1)
    throw domain_error("shift_modulus: y dimension mismatch");
  const GridSpec& grid = f.grid();
  const CellGeometry& g = f.geometry();
  const double h = grid.h(g.R());
  const double h0 = grid.h0();
  const auto spans = omega_spans(g, grid);

  double diam2 = 1.0, y2 = y[0] * y[0];
  for (int j = 0; j < n; ++j) {
    const double L = g.omega_box()[j].hi - g.omega_box()[j].lo;
    diam2 += L * L;
    y2 += y[j + 1] * y[j + 1];
  }
  if (y2 > 0.25 * diam2)
    throw domain_error("shift_modulus: |y| exceeds half the cell diameter");

  std::vector<std::int64_t> s(n + 1);
  s[0] = std::llround(y[0] / h0);
  if (std::abs(y[0] - double(s[0]) * h0) > 1e-9 * h0)
    throw domain_error("shift_modulus: axial shift is not grid-aligned");
  for (int j = 0; j < n; ++j) {
    s[j + 1] = std::llround(y[j + 1] / h);
    if (std::abs(y[j + 1] - double(s[j + 1]) * h) > 1e-9 * h)
      throw domain_error("shift_modulus: spatial shift is not grid-aligned");
  }

  // sample(i0, m) without periodic wrap: the zero extension.
  std::vector<std::int64_t> mi(n + 1);
  auto sample = [&](const std::vector<std::int64_t>& p) -> double {
    if (p[0] < 0 || p[0] >= grid.N0) return 0.0;
    for (int j = 0; j < n; ++j)
      if (p[j + 1] < spans[j].lo || p[j + 1] >= spans[j].hi) return 0.0;
    mi = p;
    return f[f.flat(mi)].real();
  };

  // Iterate over the union of the two supports.
  std::vector<std::int64_t> lo(n + 1), hi(n + 1), p(n + 1), ps(n + 1);
  lo[0] = std::min<std::int64_t>(0, -s[0]);
  hi[0] = grid.N0 + std::max<std::int64_t>(0, -s[0]);
  for (int j = 0; j < n; ++j) {
    lo[j + 1] = spans[j].lo + std::min<std::int64_t>(0, -s[j + 1]);
    hi[j + 1] = spans[j].hi + std::max<std::int64_t>(0, -s[j + 1]);
  }
  double dv = h0;
  for (int j = 0; j < n; ++j) dv *= h;

  double sum = 0.0;
  p = lo;
  while (true) {
    for (int j = 0; j <= n; ++j) ps[j] = p[j] + s[j];
    sum += std::abs(sample(ps) - sample(p));
    int a = n;
    while (a >= 0) {
      if (++p[a] < hi[a]) break;
      p[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
  return sum * dv;
}

/// Least-squares log-log fit of the shift modulus against |y| over shifts
/// y = j h e_axis, j = 1..steps (axis is a 1-based spatial axis; 0 shifts
/// along x0 with step h0).  Returns modulus ~ c |y|^alpha.
struct HolderFit {
  double c = 0.0;
  double alpha = 1.0;
};

inline HolderFit fit_holder(const Potential& q, int axis = -1, int steps = 8) {
  const CellFunction& f = q.values;
  const int n = f.n();
  if (axis < 0) axis = n;
  if (axis > n) throw domain_error("fit_holder: axis out of range");
  if (steps < 2) throw domain_error("fit_holder: need at least two shifts");
  const double step =
      (axis == 0) ? f.grid().h0() : f.grid().h(f.geometry().R());

  std::vector<double> lx, ly;
  for (int j = 1; j <= steps; ++j) {
    std::vector<double> y(n + 1, 0.0);
    y[axis] = j * step;
    const double m = shift_modulus(q, y);
    if (m <= 0.0) continue;  // flat profile: no information from this shift
    lx.push_back(std::log(j * step));
    ly.push_back(std::log(m));
  }
  if (lx.size() < 2) return HolderFit{0.0, 1.0};

  const double N = double(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (N * sxy - sx * sy) / (N * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / N;
  return HolderFit{std::exp(intercept), slope};
}

/// Decay bound C (exp(-(eps^2 / 4 pi)(k^2 + |rho|^2)) + eps^alpha) on
/// |q_hat_k(rho)|.  Hoelder data is taken from the potential metadata when
/// present and otherwise fitted from the shift modulus.
inline double decay_bound(const Potential& q, double epsilon, double k,
                          const std::vector<double>& rho_vec) {
  if (!(epsilon > 0.0)) throw domain_error("decay_bound: epsilon must be > 0");
  double alpha, c;
  if (q.holder_alpha && q.holder_c) {
    alpha = *q.holder_alpha;
    c = *q.holder_c;
  } else {
    const HolderFit fit = fit_holder(q);
    alpha = q.holder_alpha.value_or(fit.alpha);
    c = q.holder_c.value_or(fit.c);
  }
  double r2 = k * k;
  for (double v : rho_vec) r2 += v * v;
  return c * (std::exp(-epsilon * epsilon * r2 / (4.0 * M_PI)) +
              std::pow(epsilon, alpha));
}

//----------------------------------------------------------------------------
// Parameter schedule, a-priori estimate, interpolation.
//----------------------------------------------------------------------------

/// Parameters tied by epsilon^{2 alpha} = 1/r and r = rho^{(4+n)/alpha~}.
struct ScheduleParams {
  double alpha = 1.0;
  double alpha_tilde = 0.5;
  double epsilon = 0.0;
  double r = 0.0;
  double rho = 0.0;
  double delta = 0.0;
  double log_delta = 0.0;  ///< exact even when delta underflows to 0

  /// H^{-1} bound implied by the balance equation (up to the calibrated
  /// constant): rho^{-2}.
  double h_minus1_bound() const { return 1.0 / (rho * rho); }
};

/// Solve (3+n) log rho + 400 rho^{(4+n)/alpha~} + log delta = 0 for rho by
/// bisection (the left side is strictly increasing), then derive r and
/// epsilon.  log_delta is the natural log of the DN-difference norm, which
/// may be far below the underflow threshold of delta itself.
inline ScheduleParams run_schedule_log(double log_delta, double alpha,
                                       int n) {
  if (!(log_delta < 0.0))
    throw schedule_error("run_schedule: need delta < 1 (log delta < 0)");
  if (!(alpha > 0.5) || !(alpha <= 1.0))
    throw schedule_error("run_schedule: alpha must lie in (1/2, 1]");
  const double at = 1.0 - 1.0 / (2.0 * alpha);
  const double p = (4.0 + double(n)) / at;

  auto G = [&](double rho) {
    return (3.0 + double(n)) * std::log(rho) + 400.0 * std::pow(rho, p) +
           log_delta;
  };

  double lo = 1e-3;
  while (G(lo) >= 0.0) lo *= 0.5;  // only for delta extremely close to 1
  double hi = 2.0 * std::max(1.0, std::pow(-log_delta, 1.0 / p));
  while (G(hi) <= 0.0) hi *= 2.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (G(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * hi) break;
  }

  ScheduleParams out;
  out.alpha = alpha;
  out.alpha_tilde = at;
  out.rho = 0.5 * (lo + hi);
  out.r = std::pow(out.rho, p);
  out.epsilon = std::pow(out.r, -1.0 / (2.0 * alpha));
  out.log_delta = log_delta;
  out.delta = std::exp(log_delta);
  return out;
}

inline ScheduleParams run_schedule(double delta, double alpha, int n) {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw schedule_error("run_schedule: delta must lie in (0, 1)");
  return run_schedule_log(std::log(delta), alpha, n);
}

/// Interpolation exponent tau placing H^{(1+n)/2 + eps} between H^{-1} and
/// H^s with eps = (s - (1+n)/2)/2:  tau = eps / (s + 1).
inline double interpolation_exponent(double s, int n) {
  const double crit = 0.5 * (1.0 + double(n));
  if (!(s > crit))
    throw domain_error("interpolate_linf: s must exceed (1+n)/2");
  const double eps = 0.5 * (s - crit);
  return eps / (s + 1.0);
}

/// L-infinity bound h_minus1^tau * h_s^{1-tau}.
inline double interpolate_linf(double h_minus1, double h_s, double s, int n) {
  if (h_minus1 < 0.0 || h_s < 0.0)
    throw domain_error("interpolate_linf: norms must be nonnegative");
  const double tau = interpolation_exponent(s, n);
  if (h_minus1 == 0.0) return 0.0;
  return std::pow(h_minus1, tau) * std::pow(h_s, 1.0 - tau);
}

/// Certified bound on |q_hat_k(eta)| with unit constant:
///   e^{2 tau} delta + exp(-(2 eps^2 r^2 k^2 / |eta|^4) |eta - eta*|^2)
///   + eps^alpha + 1/r,
/// where eta* is eta with the last component negated.  The first term is
/// computed in log space so large tau does not overflow.
inline double apriori_estimate(double delta, const ScheduleParams& sched,
                               const CgoPhase& ph) {
  const double k = ph.params.k;
  const std::vector<double>& eta = ph.params.eta;
  double eta2 = 0.0;
  for (double v : eta) eta2 += v * v;
  const double diff2 = 4.0 * eta.back() * eta.back();  // |eta - eta*|^2

  double term1 = 0.0;
  if (delta > 0.0) term1 = std::exp(2.0 * ph.tau + std::log(delta));
  const double e2r2 = sched.epsilon * sched.epsilon * sched.r * sched.r;
  const double term2 =
      std::exp(-2.0 * e2r2 * k * k * diff2 / (eta2 * eta2));
  const double term3 = std::pow(sched.epsilon, sched.alpha);
  const double term4 = 1.0 / sched.r;
  return term1 + term2 + term3 + term4;
}

//----------------------------------------------------------------------------
// Experiment record.
//----------------------------------------------------------------------------

/// One stability experiment row.
struct StabilityRecord {
  double delta = 0.0;
  double h_minus1_bound = 0.0;
  double h_minus1_actual = 0.0;
  double linf_actual = 0.0;
  ScheduleParams schedule;
  double theta_star = 0.0;
  int n = 0;
  int N0 = 0;
  int N = 0;
  double R = 0.0;
};

}  // namespace fcgo

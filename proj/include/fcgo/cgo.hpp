#pragma once

//============================================================================
// Complex geometric optics machinery on the cell.
//
// Given admissible parameters (theta, k, r, xi, eta) the phase construction
// produces two complex frequency vectors zeta_1, zeta_2 in C^{1+n} with
//
//   zeta_1 = ( i pi k, -tau xi + i eta / 2) + i l,
//   zeta_2 = (-i pi k,  tau xi - i eta / 2) + i l,
//   l      = (theta + 2 pi (floor(r) + sigma_k)) * (1, -(2 pi k/|eta|^2) eta),
//   tau    = sqrt(|eta|^2 / 4 + pi^2 k^2 + |l|^2),
//
// so that zeta_j . zeta_j = 0 and exp(zeta_1 . e0) = e^{i theta}.  The
// companion vector satisfies exp(zeta_2 . e0) = e^{i(theta - 2 pi k)}: for
// integer k both solutions live on the same fiber, for half-integer k the
// second solution lands on the fiber theta + pi.
//
// The solution operator G_zeta inverts (-Delta - 2 zeta . grad) on the
// shifted lattice by dividing coefficients by
//
//   pi^2 ( 4 a0^2 + |a'|^2/R^2 - 4 i zeta_0 a0 / pi - 2 i zeta'.a' /(pi R) ),
//
// whose modulus is bounded below by 2 pi tau |a_1| / R >= pi tau / R, giving
// the operator bound ||G_zeta|| <= pi R / tau.
//============================================================================

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/errors.hpp"
#include "fcgo/lattice.hpp"

namespace fcgo {

/// Admissible CGO parameter tuple.
struct CgoParams {
  int n = 3;                ///< spatial dimension (>= 2)
  double theta = 0.0;       ///< fiber parameter in [0, 2 pi)
  double k = 0.5;           ///< axial frequency index, 2k integer, k != 0
  double r = 1.0;           ///< magnitude parameter (> 0)
  std::vector<double> xi;   ///< unit vector, xi . e_n = 0
  std::vector<double> eta;  ///< nonzero vector orthogonal to xi
};

/// Assembled phase data.
struct CgoPhase {
  CgoParams params;
  double sigma_k = 0.0;
  double ell0 = 0.0;             ///< theta + 2 pi (floor(r) + sigma_k)
  std::vector<double> l;         ///< (1+n) real drift vector
  double tau = 0.0;
  std::vector<cplx> zeta1;       ///< (1+n) complex frequency
  std::vector<cplx> zeta2;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return dot(a, a); }

/// Smallest sigma >= 5/4 with exp(i pi k) exp(2 pi i sigma) = 1, i.e.
/// sigma = -k/2 (mod 1).  Reproduces 7/4 (k - 1/2 even), 5/4 (k - 1/2 odd),
/// 2 (k even integer), 3/2 (k odd integer).
inline double sigma_for(double k) {
  double frac = -0.5 * k;
  frac -= std::floor(frac);  // representative in [0, 1)
  double sigma = frac;
  while (sigma < 1.25 - 1e-12) sigma += 1.0;
  return sigma;
}

}  // namespace detail

/// Validate parameters and build the phase tuple.
inline CgoPhase build_phase(const CgoParams& p) {
  if (p.n < 2) throw admissibility_error("build_phase: need n >= 2");
  if (static_cast<int>(p.xi.size()) != p.n ||
      static_cast<int>(p.eta.size()) != p.n)
    throw admissibility_error("build_phase: xi, eta must have n entries");
  if (p.theta < 0.0 || p.theta >= 2.0 * M_PI)
    throw admissibility_error("build_phase: theta must lie in [0, 2 pi)");
  const double two_k = 2.0 * p.k;
  if (std::abs(two_k - std::llround(two_k)) > 1e-12 || p.k == 0.0)
    throw admissibility_error("build_phase: k must be a nonzero half-integer");
  if (!(p.r > 0.0)) throw admissibility_error("build_phase: need r > 0");
  if (std::abs(detail::norm2(p.xi) - 1.0) > 1e-12)
    throw admissibility_error("build_phase: |xi| != 1");
  const double eta2 = detail::norm2(p.eta);
  if (eta2 == 0.0) throw admissibility_error("build_phase: eta = 0");
  if (std::abs(detail::dot(p.xi, p.eta)) > 1e-12)
    throw admissibility_error("build_phase: xi . eta != 0");
  if (std::abs(p.xi[p.n - 1]) > 1e-12)
    throw admissibility_error("build_phase: xi . e_n != 0");

  CgoPhase ph;
  ph.params = p;
  ph.sigma_k = detail::sigma_for(p.k);
  ph.ell0 = p.theta + 2.0 * M_PI * (std::floor(p.r) + ph.sigma_k);

  ph.l.assign(p.n + 1, 0.0);
  ph.l[0] = ph.ell0;
  const double coef = -2.0 * M_PI * p.k / eta2;
  for (int j = 0; j < p.n; ++j) ph.l[j + 1] = ph.ell0 * coef * p.eta[j];

  double l2 = 0.0;
  for (double v : ph.l) l2 += v * v;
  ph.tau = std::sqrt(0.25 * eta2 + M_PI * M_PI * p.k * p.k + l2);

  ph.zeta1.assign(p.n + 1, cplx(0.0));
  ph.zeta2.assign(p.n + 1, cplx(0.0));
  ph.zeta1[0] = cplx(0.0, M_PI * p.k + ph.l[0]);
  ph.zeta2[0] = cplx(0.0, -M_PI * p.k + ph.l[0]);
  for (int j = 0; j < p.n; ++j) {
    ph.zeta1[j + 1] =
        cplx(-ph.tau * p.xi[j], 0.5 * p.eta[j] + ph.l[j + 1]);
    ph.zeta2[j + 1] =
        cplx(ph.tau * p.xi[j], -0.5 * p.eta[j] + ph.l[j + 1]);
  }
  return ph;
}

/// Reflection of a complex frequency vector: negate the last component.
inline std::vector<cplx> star(std::vector<cplx> z) {
  z.back() = -z.back();
  return z;
}

/// Bilinear (non-conjugated) product z.w of complex vectors.
inline cplx bilinear(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  cplx s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// The two cross-phase frequency vectors of the pairing expansion:
/// first  = zeta_1^* + conj(zeta_2) = i (2 pi k, kappa),
/// second = zeta_1 + conj(zeta_2^*) = i (2 pi k, kappa^*),
/// kappa  = (eta + eta^*)/2 + ell0 * (2 pi k / |eta|^2) (eta - eta^*).
inline std::pair<std::vector<cplx>, std::vector<cplx>> cross_phase_vectors(
    const CgoPhase& ph) {
  const int n = ph.params.n;
  std::vector<cplx> first(n + 1), second(n + 1);
  const auto z1s = star(ph.zeta1);
  const auto z2s = star(ph.zeta2);
  for (int a = 0; a <= n; ++a) {
    first[a] = z1s[a] + std::conj(ph.zeta2[a]);
    second[a] = ph.zeta1[a] + std::conj(z2s[a]);
  }
  return {first, second};
}

/// kappa from the closed-form expression (for cross-checks against
/// cross_phase_vectors).
inline std::vector<double> kappa_vector(const CgoPhase& ph) {
  const auto& eta = ph.params.eta;
  const int n = ph.params.n;
  const double eta2 = detail::norm2(eta);
  std::vector<double> eta_star = eta;
  eta_star[n - 1] = -eta_star[n - 1];
  std::vector<double> kappa(n);
  const double c = ph.ell0 * 2.0 * M_PI * ph.params.k / eta2;
  for (int j = 0; j < n; ++j)
    kappa[j] = 0.5 * (eta[j] + eta_star[j]) + c * (eta[j] - eta_star[j]);
  return kappa;
}

/// Upper bound pi R / tau for the multiplier operator norm.
inline double multiplier_norm_bound(double tau, double R) {
  return M_PI * R / tau;
}

namespace detail {

/// Locate the spatial axis carrying Re zeta' (= +-tau).  Throws unless the
/// real part is aligned with a single coordinate axis.
inline int aligned_axis(const std::vector<cplx>& zeta, double tau) {
  const int n = static_cast<int>(zeta.size()) - 1;
  if (std::abs(zeta[0].real()) > 1e-9 * tau)
    throw admissibility_error("apply_G: Re zeta_0 must vanish");
  int axis = 0;
  for (int j = 1; j <= n; ++j) {
    const double re = std::abs(zeta[j].real());
    if (re > 1e-9 * tau) {
      if (axis != 0)
        throw admissibility_error(
            "apply_G: Re zeta' not aligned with a coordinate axis");
      axis = j;
    }
  }
  if (axis == 0)
    throw admissibility_error("apply_G: Re zeta' vanishes (tau = 0?)");
  if (std::abs(std::abs(zeta[axis].real()) - tau) > 1e-9 * tau)
    throw admissibility_error("apply_G: |Re zeta'| does not match tau");
  return axis;
}

}  // namespace detail

namespace detail {

/// Shared frame for G_zeta and its inverse: permute the real direction of
/// zeta' onto the first spatial axis (the one carrying the half-integer
/// shift, whose frequencies are bounded away from zero), scale every lattice
/// coefficient by the symbol of (-Delta - 2 zeta . grad) or its reciprocal,
/// and permute back.
/// Symbol of the conjugated operator at lattice frequency a = (a_0, a'),
/// with z already permuted so Re z' points along axis 1.
inline cplx symbol_denominator(const std::vector<cplx>& z,
                               const std::vector<double>& a, double R) {
  const int n = static_cast<int>(a.size()) - 1;
  double aa = 0.0;
  cplx zdot(0.0);
  for (int j = 1; j <= n; ++j) {
    aa += a[j] * a[j];
    zdot += z[j] * a[j];
  }
  const double pi2 = M_PI * M_PI;
  return pi2 * (cplx(4.0 * a[0] * a[0] + aa / (R * R)) -
                cplx(0.0, 4.0 / M_PI) * z[0] * a[0] -
                cplx(0.0, 2.0 / (M_PI * R)) * zdot);
}

inline CellFunction multiplier_frame(const std::vector<cplx>& zeta,
                                     const CellFunction& phi, bool invert) {
  const int n = phi.n();
  if (static_cast<int>(zeta.size()) != n + 1)
    throw domain_error("multiplier: zeta size mismatch");
  double tau = 0.0;
  for (int j = 1; j <= n; ++j) tau = std::max(tau, std::abs(zeta[j].real()));
  const int axis = aligned_axis(zeta, tau);

  std::vector<cplx> z = zeta;
  std::swap(z[1], z[axis]);
  const CellFunction input =
      (axis == 1) ? phi : permute_spatial_axes(phi, 1, axis);

  const double R = phi.geometry().R();
  LatticeCoefficients c = to_coefficients(input);
  std::vector<std::int64_t> bins;
  std::vector<double> a(n + 1);
  for (std::int64_t i = 0; i < c.size(); ++i) {
    c.unflatten(i, bins);
    a[0] = c.alpha0(bins[0]);
    a[1] = c.alpha1(bins[1]);
    for (int j = 2; j <= n; ++j) a[j] = c.alpha_int(bins[j]);
    const cplx den = symbol_denominator(z, a, R);
    if (invert)
      c[i] /= den;
    else
      c[i] *= den;
  }
  CellFunction out = from_coefficients(c);
  return (axis == 1) ? out : permute_spatial_axes(out, 1, axis);
}

}  // namespace detail

/// Exact operator norm of G_zeta on the given grid: the multiplier is
/// diagonal in an orthonormal lattice basis, so the norm is the largest
/// reciprocal symbol magnitude over the resolved frequency bins.
inline double measured_G_norm(const std::vector<cplx>& zeta,
                              const CellGeometry& g, const GridSpec& grid) {
  const int n = g.n();
  if (static_cast<int>(zeta.size()) != n + 1)
    throw domain_error("measured_G_norm: zeta size mismatch");
  double tau = 0.0;
  for (int j = 1; j <= n; ++j) tau = std::max(tau, std::abs(zeta[j].real()));
  const int axis = detail::aligned_axis(zeta, tau);

  std::vector<cplx> z = zeta;
  std::swap(z[1], z[axis]);

  LatticeCoefficients c(g, grid);
  std::vector<std::int64_t> bins;
  std::vector<double> a(n + 1);
  double best = 0.0;
  for (std::int64_t i = 0; i < c.size(); ++i) {
    c.unflatten(i, bins);
    a[0] = c.alpha0(bins[0]);
    a[1] = c.alpha1(bins[1]);
    for (int j = 2; j <= n; ++j) a[j] = c.alpha_int(bins[j]);
    best = std::max(best, 1.0 / std::abs(detail::symbol_denominator(z, a, g.R())));
  }
  return best;
}

/// Solution operator G_zeta: inverts (-Delta - 2 zeta . grad) coefficient-
/// wise on the shifted lattice, in the function class that is antiperiodic
/// along the real direction of zeta'.
inline CellFunction apply_G(const std::vector<cplx>& zeta,
                            const CellFunction& phi) {
  return detail::multiplier_frame(zeta, phi, /*invert=*/true);
}

/// The conjugated operator (-Delta - 2 zeta . grad) itself, applied in the
/// same spectral frame as apply_G, so apply_conjugated_operator(apply_G(f))
/// reproduces f to roundoff.
inline CellFunction apply_conjugated_operator(const std::vector<cplx>& zeta,
                                              const CellFunction& phi) {
  return detail::multiplier_frame(zeta, phi, /*invert=*/false);
}

/// Result of the remainder fixed point.
struct RemainderSolve {
  CellFunction remainder;       ///< r with r + G(q r) = -G(q)
  int iterations = 0;           ///< fixed-point steps taken
  double contraction = 0.0;     ///< last ratio ||d_{m+1}|| / ||d_m||
  double c_constant = 0.0;      ///< measured ||r|| tau / (R ||q||_inf)
  double final_update = 0.0;    ///< last update norm
};

/// Fixed-point iteration r^{m+1} = -G_zeta(q r^m) - G_zeta q, starting from
/// r^0 = 0.  Contraction requires tau > 2 pi R ||q||_inf.
inline RemainderSolve solve_remainder(const CgoPhase& ph, int which,
                                      const CellFunction& q_ext,
                                      double tol = 1e-10, int cap = 200) {
  if (which != 1 && which != 2)
    throw domain_error("solve_remainder: which must be 1 or 2");
  const std::vector<cplx>& zeta = (which == 1) ? ph.zeta1 : ph.zeta2;
  const double R = q_ext.geometry().R();
  const double qmax = q_ext.linf();
  if (!(ph.tau > 2.0 * M_PI * R * qmax))
    throw nonconvergent_error(
        "solve_remainder: tau <= 2 pi R ||q||_inf, no contraction",
        ph.tau);

  RemainderSolve res;
  const CellFunction gq = apply_G(zeta, q_ext);
  CellFunction r(q_ext.geometry(), q_ext.grid());
  double prev_update = 0.0;
  for (int m = 0; m < cap; ++m) {
    CellFunction next = apply_G(zeta, hadamard(q_ext, r));
    next *= cplx(-1.0);
    next -= gq;
    CellFunction diff = next;
    diff -= r;
    const double upd = diff.l2();
    r = std::move(next);
    res.iterations = m + 1;
    if (prev_update > 0.0) res.contraction = upd / prev_update;
    prev_update = upd;
    res.final_update = upd;
    if (upd <= tol) {
      res.remainder = std::move(r);
      res.c_constant = res.remainder.l2() * ph.tau / (R * qmax);
      return res;
    }
  }
  throw nonconvergent_error("solve_remainder: iteration cap reached",
                            res.final_update);
}

/// Evaluate exp(zeta . x) on the grid.
inline CellFunction exponential_field(const CellGeometry& g,
                                      const GridSpec& grid,
                                      const std::vector<cplx>& zeta) {
  CellFunction out(g, grid);
  out.fill([&](const std::vector<double>& x) {
    cplx e(0.0);
    for (std::size_t a = 0; a < x.size(); ++a) e += zeta[a] * x[a];
    return std::exp(e);
  });
  return out;
}

/// CGO solution u = exp(zeta . x)(1 + r) on the grid.
inline CellFunction assemble_u(const CgoPhase& ph, int which,
                               const CellFunction& r) {
  const std::vector<cplx>& zeta = (which == 1) ? ph.zeta1 : ph.zeta2;
  CellFunction out = exponential_field(r.geometry(), r.grid(), zeta);
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] *= (cplx(1.0) + r[i]);
  return out;
}

/// Reflected difference v = u - u^* with u^*(x) = u(x^*); vanishes on the
/// hyperplane {x_n = 0} by construction.
inline CellFunction assemble_v(const CgoPhase& ph, int which,
                               const CellFunction& r) {
  const std::vector<cplx>& zeta = (which == 1) ? ph.zeta1 : ph.zeta2;
  const CellFunction u = assemble_u(ph, which, r);
  const CellFunction rs = reflect(r);
  CellFunction us = exponential_field(r.geometry(), r.grid(), star(zeta));
  for (std::int64_t i = 0; i < us.size(); ++i)
    us[i] *= (cplx(1.0) + rs[i]);
  CellFunction v = u;
  v -= us;
  return v;
}

/// Fiber phase of the assembled solution: u(x0 + 1, x') = phase * u(x0, x').
/// Equals e^{i theta} for which = 1 and e^{i (theta - 2 pi k)} for which = 2.
inline cplx fiber_phase(const CgoPhase& ph, int which) {
  const cplx z0 = (which == 1) ? ph.zeta1[0] : ph.zeta2[0];
  return std::exp(z0);
}

}  // namespace fcgo

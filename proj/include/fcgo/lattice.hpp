#pragma once

//============================================================================
// Shifted Fourier lattice on the cell Q = [0,1) x [-R,R)^n.
//
// Basis functions, indexed by alpha = (alpha_0, alpha_1, ..., alpha_n):
//
//   e_alpha(x) = (2R)^{-n/2} exp( 2 pi i alpha_0 x0 + (i pi / R) alpha' . x' )
//
// with alpha_0 and alpha_2..alpha_n integers while alpha_1 runs over the
// shifted set Z - 1/2 (so |alpha_1| >= 1/2; the first spatial axis carries
// the half-integer shift).  On the grid the shift is realized by modulating
// samples with exp(i pi i_1 / N) around a standard DFT and relabeling the
// output frequencies m -> m - 1/2.
//
// Discrete representatives:
//   axis 0:        alpha_0 in [-N0/2, N0/2)
//   axis 1:        alpha_1 in { m - 1/2 : m in (-N/2, N/2] }   (symmetric)
//   axes 2..n:     alpha_j in [-N/2, N/2)
//
// The grid transforms below are unitary up to the quadrature weight, so the
// Plancherel identity sum |coeff|^2 = ||f||_{L2(Q)}^2 holds exactly.
//============================================================================

#include <fftw3.h>

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "fcgo/cell_function.hpp"

namespace fcgo {

/// Coefficients on the shifted lattice; same flat layout as CellFunction
/// (axis 0 = alpha_0 bin, axes 1..n = spatial bins).
class LatticeCoefficients {
 public:
  LatticeCoefficients() = default;
  LatticeCoefficients(CellGeometry g, GridSpec grid)
      : geom_(std::move(g)),
        grid_(grid),
        values_(CellFunction::total_size(geom_, grid_)) {}

  const CellGeometry& geometry() const { return geom_; }
  const GridSpec& grid() const { return grid_; }
  int n() const { return geom_.n(); }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }

  std::vector<cplx>& values() { return values_; }
  const std::vector<cplx>& values() const { return values_; }
  cplx& operator[](std::int64_t i) { return values_[i]; }
  const cplx& operator[](std::int64_t i) const { return values_[i]; }

  std::int64_t flat(const std::vector<std::int64_t>& bins) const {
    std::int64_t idx = bins[0];
    for (int a = 1; a <= n(); ++a) idx = idx * grid_.N + bins[a];
    return idx;
  }

  void unflatten(std::int64_t idx, std::vector<std::int64_t>& bins) const {
    bins.resize(n() + 1);
    for (int a = n(); a >= 1; --a) {
      bins[a] = idx % grid_.N;
      idx /= grid_.N;
    }
    bins[0] = idx;
  }

  /// Signed axial frequency alpha_0 for bin b0.
  double alpha0(std::int64_t b0) const {
    return static_cast<double>(b0 < grid_.N0 / 2 ? b0 : b0 - grid_.N0);
  }

  /// Shifted frequency alpha_1 = m - 1/2 for bin b1 on the first spatial axis.
  double alpha1(std::int64_t b1) const {
    const std::int64_t m = (b1 <= grid_.N / 2) ? b1 : b1 - grid_.N;
    return static_cast<double>(m) - 0.5;
  }

  /// Integer frequency for spatial axes j >= 2.
  double alpha_int(std::int64_t bj) const {
    return static_cast<double>(bj < grid_.N / 2 ? bj : bj - grid_.N);
  }

  /// Full frequency tuple (alpha_0, alpha_1, ..., alpha_n) of a bin index.
  void alpha(const std::vector<std::int64_t>& bins,
             std::vector<double>& a) const {
    a.resize(n() + 1);
    a[0] = alpha0(bins[0]);
    a[1] = alpha1(bins[1]);
    for (int j = 2; j <= n(); ++j) a[j] = alpha_int(bins[j]);
  }

  /// Physical wave vector w with e_alpha = (2R)^{-n/2} exp(i w . x):
  /// w = (2 pi alpha_0, pi alpha_1 / R, ..., pi alpha_n / R).
  void wave_vector(const std::vector<std::int64_t>& bins,
                   std::vector<double>& w) const {
    alpha(bins, w);
    w[0] *= 2.0 * M_PI;
    for (int j = 1; j <= n(); ++j) w[j] *= M_PI / geom_.R();
  }

  /// True if the bin avoids every aliased (Nyquist) representative:
  /// |alpha_0| < N0/2 and |alpha_j| < N/2 on integer axes.
  bool in_band(const std::vector<std::int64_t>& bins) const {
    if (bins[0] == grid_.N0 / 2) return false;
    for (int j = 2; j <= n(); ++j)
      if (bins[j] == grid_.N / 2) return false;
    return true;
  }

  double sum_sq() const {
    double s = 0.0;
    for (const auto& v : values_) s += std::norm(v);
    return s;
  }

 private:
  CellGeometry geom_;
  GridSpec grid_;
  std::vector<cplx> values_;
};

namespace detail {

inline void run_fft(std::vector<cplx>& data, const CellGeometry& g,
                    const GridSpec& grid, int sign) {
  std::vector<int> dims(1 + g.n());
  dims[0] = grid.N0;
  for (int j = 1; j <= g.n(); ++j) dims[j] = grid.N;
  fftw_complex* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(),
                                 ptr, ptr, sign, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

/// Bin-dependent phase (-i) * (-1)^{m_1} * prod_{j>=2} (-1)^{m_j} entering
/// the analysis formula; well defined because N0, N are even.
inline cplx bin_phase(const LatticeCoefficients& c,
                      const std::vector<std::int64_t>& bins) {
  int sign = 0;
  // (-1)^{m_1} with alpha_1 = m_1 - 1/2.
  sign += static_cast<int>(std::llround(c.alpha1(bins[1]) + 0.5));
  for (int j = 2; j <= c.n(); ++j)
    sign += static_cast<int>(std::llround(c.alpha_int(bins[j])));
  const cplx minus_i(0.0, -1.0);
  return (sign % 2 == 0 ? minus_i : -minus_i);
}

}  // namespace detail

/// Analysis: coeff[alpha] = sum_x f(x) conj(e_alpha(x)) dV.
inline LatticeCoefficients to_coefficients(const CellFunction& f) {
  const CellGeometry& g = f.geometry();
  const GridSpec& grid = f.grid();
  LatticeCoefficients out(g, grid);

  std::vector<cplx> work = f.values();
  // Half-integer shift: modulate along the first spatial axis.
  std::vector<std::int64_t> mi;
  for (std::int64_t i = 0; i < f.size(); ++i) {
    f.unflatten(i, mi);
    const double ang = M_PI * static_cast<double>(mi[1]) / grid.N;
    work[i] *= cplx(std::cos(ang), std::sin(ang));
  }
  detail::run_fft(work, g, grid, FFTW_FORWARD);

  const double scale =
      f.cell_volume() * std::pow(2.0 * g.R(), -0.5 * g.n());
  std::vector<std::int64_t> bins;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out.unflatten(i, bins);
    out[i] = scale * detail::bin_phase(out, bins) * work[i];
  }
  return out;
}

/// Synthesis: f(x) = sum_alpha coeff[alpha] e_alpha(x); exact inverse of
/// to_coefficients on the grid.
inline CellFunction from_coefficients(const LatticeCoefficients& c) {
  const CellGeometry& g = c.geometry();
  const GridSpec& grid = c.grid();
  CellFunction out(g, grid);

  const double scale =
      out.cell_volume() * std::pow(2.0 * g.R(), -0.5 * g.n());
  std::vector<cplx> work(c.size());
  std::vector<std::int64_t> bins;
  for (std::int64_t i = 0; i < c.size(); ++i) {
    c.unflatten(i, bins);
    work[i] = c[i] / (scale * detail::bin_phase(c, bins));
  }
  detail::run_fft(work, g, grid, FFTW_BACKWARD);

  const double inv_total = 1.0 / static_cast<double>(c.size());
  std::vector<std::int64_t> mi;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out.unflatten(i, mi);
    const double ang = -M_PI * static_cast<double>(mi[1]) / grid.N;
    out[i] = work[i] * inv_total * cplx(std::cos(ang), std::sin(ang));
  }
  return out;
}

/// Pointwise evaluation of the basis function e_alpha (for oracles/tests).
inline cplx basis_value(const CellGeometry& g, const std::vector<double>& alpha,
                        const std::vector<double>& x) {
  double phase = 2.0 * M_PI * alpha[0] * x[0];
  for (int j = 1; j <= g.n(); ++j)
    phase += M_PI / g.R() * alpha[j] * x[j];
  return std::pow(2.0 * g.R(), -0.5 * g.n()) *
         cplx(std::cos(phase), std::sin(phase));
}

/// Apply a frequency-space multiplier m(w) (w = physical wave vector).
inline CellFunction apply_symbol(
    const CellFunction& f,
    const std::function<cplx(const std::vector<double>&)>& m) {
  LatticeCoefficients c = to_coefficients(f);
  std::vector<std::int64_t> bins;
  std::vector<double> w;
  for (std::int64_t i = 0; i < c.size(); ++i) {
    c.unflatten(i, bins);
    c.wave_vector(bins, w);
    c[i] *= m(w);
  }
  return from_coefficients(c);
}

}  // namespace fcgo

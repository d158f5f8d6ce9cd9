#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "fcgo/geometry.hpp"

namespace fcgo {

using cplx = std::complex<double>;

/// Complex samples on the uniform cell grid.  Storage is row-major with
/// axis order (i0, i1, ..., in): i0 = axial layer (N0 values), i1..in =
/// spatial indices (N values each).
class CellFunction {
 public:
  CellFunction() = default;

  CellFunction(CellGeometry g, GridSpec grid)
      : geom_(std::move(g)), grid_(grid), values_(total_size(geom_, grid_)) {}

  static std::int64_t total_size(const CellGeometry& g, const GridSpec& grid) {
    std::int64_t s = grid.N0;
    for (int j = 0; j < g.n(); ++j) s *= grid.N;
    return s;
  }

  const CellGeometry& geometry() const { return geom_; }
  const GridSpec& grid() const { return grid_; }
  int n() const { return geom_.n(); }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }

  std::vector<cplx>& values() { return values_; }
  const std::vector<cplx>& values() const { return values_; }
  cplx& operator[](std::int64_t i) { return values_[i]; }
  const cplx& operator[](std::int64_t i) const { return values_[i]; }

  /// Axis sizes: axis 0 has N0 entries, axes 1..n have N entries.
  std::int64_t axis_size(int axis) const {
    return axis == 0 ? grid_.N0 : grid_.N;
  }

  /// Row-major flat index from the multi-index (i0, i1, ..., in).
  std::int64_t flat(const std::vector<std::int64_t>& mi) const {
    std::int64_t idx = mi[0];
    for (int a = 1; a <= n(); ++a) idx = idx * grid_.N + mi[a];
    return idx;
  }

  /// Multi-index from the flat index.
  void unflatten(std::int64_t idx, std::vector<std::int64_t>& mi) const {
    mi.resize(n() + 1);
    for (int a = n(); a >= 1; --a) {
      mi[a] = idx % grid_.N;
      idx /= grid_.N;
    }
    mi[0] = idx;
  }

  /// Physical coordinates (x0, x') of a grid multi-index.
  void point(const std::vector<std::int64_t>& mi, std::vector<double>& x) const {
    x.resize(n() + 1);
    x[0] = static_cast<double>(mi[0]) * grid_.h0();
    const double h = grid_.h(geom_.R());
    for (int a = 1; a <= n(); ++a)
      x[a] = -geom_.R() + static_cast<double>(mi[a]) * h;
  }

  /// Quadrature cell volume h0 * h^n.
  double cell_volume() const {
    double v = grid_.h0();
    const double h = grid_.h(geom_.R());
    for (int j = 0; j < n(); ++j) v *= h;
    return v;
  }

  /// Fill from a callable taking the physical point (x0, x').
  void fill(const std::function<cplx(const std::vector<double>&)>& f) {
    std::vector<std::int64_t> mi;
    std::vector<double> x;
    for (std::int64_t i = 0; i < size(); ++i) {
      unflatten(i, mi);
      point(mi, x);
      values_[i] = f(x);
    }
  }

  void set_zero() { std::fill(values_.begin(), values_.end(), cplx(0.0)); }

  /// L2(Q) norm under the grid quadrature.
  double l2() const {
    double s = 0.0;
    for (const auto& v : values_) s += std::norm(v);
    return std::sqrt(s * cell_volume());
  }

  double linf() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// <f, g> = sum f * conj(g) * dV (linear in the first argument).
  cplx inner(const CellFunction& g) const {
    cplx s(0.0);
    for (std::int64_t i = 0; i < size(); ++i) s += values_[i] * std::conj(g[i]);
    return s * cell_volume();
  }

  double max_imag() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v.imag()));
    return m;
  }

  CellFunction& operator+=(const CellFunction& o) {
    for (std::int64_t i = 0; i < size(); ++i) values_[i] += o[i];
    return *this;
  }
  CellFunction& operator-=(const CellFunction& o) {
    for (std::int64_t i = 0; i < size(); ++i) values_[i] -= o[i];
    return *this;
  }
  CellFunction& operator*=(cplx c) {
    for (auto& v : values_) v *= c;
    return *this;
  }

  friend CellFunction operator+(CellFunction a, const CellFunction& b) {
    a += b;
    return a;
  }
  friend CellFunction operator-(CellFunction a, const CellFunction& b) {
    a -= b;
    return a;
  }

  /// Pointwise (Hadamard) product.
  friend CellFunction hadamard(CellFunction a, const CellFunction& b) {
    for (std::int64_t i = 0; i < a.size(); ++i) a[i] *= b[i];
    return a;
  }

  /// Complex conjugate of every sample.
  friend CellFunction conjugate(CellFunction a) {
    for (auto& v : a.values_) v = std::conj(v);
    return a;
  }

 private:
  CellGeometry geom_;
  GridSpec grid_;
  std::vector<cplx> values_;
};

/// Reflection across {x_n = 0}: (x0, x_1, ..., x_n) -> (x0, ..., -x_n).
/// On the periodic grid the spatial index i_n maps to (N - i_n) mod N, so
/// the operation is an exact involution on samples.
inline CellFunction reflect(const CellFunction& f) {
  CellFunction out(f.geometry(), f.grid());
  const int n = f.n();
  const std::int64_t N = f.grid().N;
  std::vector<std::int64_t> mi;
  for (std::int64_t i = 0; i < f.size(); ++i) {
    f.unflatten(i, mi);
    mi[n] = (N - mi[n]) % N;
    out[f.flat(mi)] = f[i];
  }
  return out;
}

/// Membership mask for the closure of omega on an aligned grid.
class OmegaMask {
 public:
  OmegaMask(const CellGeometry& g, const GridSpec& grid)
      : spans_(omega_spans(g, grid)) {}

  const std::vector<AxisSpan>& spans() const { return spans_; }

  /// Multi-index (i0, i') lies in the closure of omega (all spatial axes
  /// within [lo, hi]).
  bool in_closure(const std::vector<std::int64_t>& mi) const {
    for (std::size_t j = 0; j < spans_.size(); ++j) {
      const std::int64_t i = mi[j + 1];
      if (i < spans_[j].lo || i > spans_[j].hi) return false;
    }
    return true;
  }

  /// Strictly interior (all spatial axes within (lo, hi)).
  bool in_interior(const std::vector<std::int64_t>& mi) const {
    for (std::size_t j = 0; j < spans_.size(); ++j) {
      const std::int64_t i = mi[j + 1];
      if (i <= spans_[j].lo || i >= spans_[j].hi) return false;
    }
    return true;
  }

 private:
  std::vector<AxisSpan> spans_;
};

/// Zero the samples outside the closure of omega (lower half only); used to
/// normalize potential supports before extension.
inline CellFunction restrict_to_omega(const CellFunction& q) {
  OmegaMask mask(q.geometry(), q.grid());
  CellFunction out = q;
  std::vector<std::int64_t> mi;
  for (std::int64_t i = 0; i < q.size(); ++i) {
    q.unflatten(i, mi);
    if (!mask.in_closure(mi)) out[i] = cplx(0.0);
  }
  return out;
}

/// Extension of a potential supported in omega (lower half, x_n < 0) to the
/// full cell: zero elsewhere in {x_n < 0}, even reflection to {x_n > 0}.
/// The output is invariant under reflect().
inline CellFunction extend_potential(const CellFunction& q) {
  const CellFunction base = restrict_to_omega(q);
  const int n = q.n();
  const std::int64_t N = q.grid().N;
  const std::int64_t mid = N / 2;  // index of x_n = 0
  CellFunction out(q.geometry(), q.grid());
  std::vector<std::int64_t> mi;
  for (std::int64_t i = 0; i < q.size(); ++i) {
    out.unflatten(i, mi);
    if (mi[n] <= mid) {
      out[i] = base[i];
    } else {
      mi[n] = (N - mi[n]) % N;
      out[i] = base[base.flat(mi)];
    }
  }
  return out;
}

/// Swap two spatial axes (1-based spatial axis numbers a, b) in the sample
/// layout.  Intended for full-box spectral work: the omega metadata is kept
/// as-is (a swapped omega box would in general violate the omega_n
/// convention), so omega-aware operations must not be applied to the result.
inline CellFunction permute_spatial_axes(const CellFunction& f, int a, int b) {
  if (a == b) return f;
  CellFunction out(f.geometry(), f.grid());
  std::vector<std::int64_t> mi;
  for (std::int64_t i = 0; i < f.size(); ++i) {
    f.unflatten(i, mi);
    std::swap(mi[a], mi[b]);
    out[out.flat(mi)] = f[i];
  }
  return out;
}

}  // namespace fcgo

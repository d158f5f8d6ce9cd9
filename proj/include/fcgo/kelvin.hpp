#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fcgo/errors.hpp"
#include "fcgo/geometry.hpp"

namespace fcgo {

//----------------------------------------------------------------------------
// Chart and point map.
//----------------------------------------------------------------------------

/// Inversion chart mapping the spherical boundary patch (sphere of radius R
/// through the origin, centered at a = (0, ..., 0, R)) to the flat patch
/// {y_n = 2R}.  The map acts on the spatial variable only; the axial
/// variable x0 is untouched, so theta-fibers are preserved.
struct KelvinChart {
  int n = 3;       ///< spatial dimension
  double R = 1.0;  ///< sphere radius

  KelvinChart(int dim, double radius) : n(dim), R(radius) {
    if (dim < 2) throw domain_error("KelvinChart: need n >= 2");
    if (!(radius > 0.0)) throw domain_error("KelvinChart: need R > 0");
  }

  /// Sphere center (0, ..., 0, R).
  std::vector<double> center() const {
    std::vector<double> a(n, 0.0);
    a[n - 1] = R;
    return a;
  }
};

/// y' = (2R / |x'|)^2 x' on a spatial point (size n).  The same formula
/// inverts itself: |y'| = (2R)^2 / |x'|.
inline std::vector<double> map_spatial(const KelvinChart& ch,
                                       const std::vector<double>& xs) {
  if (static_cast<int>(xs.size()) != ch.n)
    throw domain_error("map_spatial: point dimension mismatch");
  double r2 = 0.0;
  for (double c : xs) r2 += c * c;
  const double r = std::sqrt(r2);
  if (r < 1e-12)
    throw singular_point("map_spatial: point too close to the origin");
  const double f = (2.0 * ch.R / r) * (2.0 * ch.R / r);
  std::vector<double> ys(ch.n);
  for (int j = 0; j < ch.n; ++j) ys[j] = f * xs[j];
  return ys;
}

/// Full cylinder point (x0, x'): identity on the axial coordinate.
inline std::vector<double> map_point(const KelvinChart& ch,
                                     const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != ch.n + 1)
    throw domain_error("map_point: point dimension mismatch");
  std::vector<double> xs(x.begin() + 1, x.end());
  std::vector<double> ys = map_spatial(ch, xs);
  std::vector<double> y(ch.n + 1);
  y[0] = x[0];
  for (int j = 0; j < ch.n; ++j) y[j + 1] = ys[j];
  return y;
}

/// Conformal weight (2R / |y'|)^{n-2} of the function transform.
inline double kelvin_weight(const KelvinChart& ch,
                            const std::vector<double>& ys) {
  double r2 = 0.0;
  for (double c : ys) r2 += c * c;
  const double r = std::sqrt(r2);
  if (r < 1e-12)
    throw singular_point("kelvin_weight: point too close to the origin");
  return std::pow(2.0 * ch.R / r, double(ch.n - 2));
}

//----------------------------------------------------------------------------
// Standalone spatial grids (boxes not tied to the cylinder cell).
//----------------------------------------------------------------------------

/// Closed axis-aligned box with an inclusive node lattice (cells_j + 1
/// nodes per axis).  Unlike the cylinder cell grid, these boxes sit at
/// arbitrary locations (the chart's patches are away from the origin).
struct BoxGrid {
  std::vector<Interval> box;
  std::vector<int> cells;

  BoxGrid() = default;
  BoxGrid(std::vector<Interval> b, std::vector<int> c)
      : box(std::move(b)), cells(std::move(c)) {
    if (box.size() != cells.size() || box.empty())
      throw domain_error("BoxGrid: box/cells size mismatch");
    for (std::size_t j = 0; j < box.size(); ++j) {
      if (!(box[j].hi > box[j].lo))
        throw domain_error("BoxGrid: empty interval on axis " +
                           std::to_string(j));
      if (cells[j] < 1)
        throw domain_error("BoxGrid: need at least one cell per axis");
    }
  }

  int dim() const { return static_cast<int>(box.size()); }
  double h(int j) const { return (box[j].hi - box[j].lo) / cells[j]; }

  std::int64_t node_count() const {
    std::int64_t c = 1;
    for (std::size_t j = 0; j < cells.size(); ++j) c *= (cells[j] + 1);
    return c;
  }

  std::int64_t flat(const std::vector<std::int64_t>& mi) const {
    std::int64_t idx = 0;
    for (int j = 0; j < dim(); ++j) idx = idx * (cells[j] + 1) + mi[j];
    return idx;
  }

  void unflatten(std::int64_t idx, std::vector<std::int64_t>& mi) const {
    mi.resize(dim());
    for (int j = dim() - 1; j >= 0; --j) {
      mi[j] = idx % (cells[j] + 1);
      idx /= (cells[j] + 1);
    }
  }

  void point(const std::vector<std::int64_t>& mi,
             std::vector<double>& x) const {
    x.resize(dim());
    for (int j = 0; j < dim(); ++j)
      x[j] = box[j].lo + static_cast<double>(mi[j]) * h(j);
  }

  bool interior(const std::vector<std::int64_t>& mi) const {
    for (int j = 0; j < dim(); ++j)
      if (mi[j] == 0 || mi[j] == cells[j]) return false;
    return true;
  }
};

/// Complex samples on a BoxGrid node lattice.
struct SpatialField {
  BoxGrid grid;
  std::vector<std::complex<double>> values;

  SpatialField() = default;
  explicit SpatialField(BoxGrid g)
      : grid(std::move(g)), values(grid.node_count()) {}

  void fill(const std::function<std::complex<double>(
                const std::vector<double>&)>& f) {
    std::vector<std::int64_t> mi;
    std::vector<double> x;
    for (std::int64_t i = 0; i < grid.node_count(); ++i) {
      grid.unflatten(i, mi);
      grid.point(mi, x);
      values[i] = f(x);
    }
  }

  /// Node-weighted l2 norm approximating the L2 integral (trapezoid
  /// weights: boundary nodes count half per axis).
  double l2() const {
    std::vector<std::int64_t> mi;
    double s = 0.0;
    for (std::int64_t i = 0; i < grid.node_count(); ++i) {
      grid.unflatten(i, mi);
      double w = 1.0;
      for (int j = 0; j < grid.dim(); ++j) {
        w *= grid.h(j);
        if (mi[j] == 0 || mi[j] == grid.cells[j]) w *= 0.5;
      }
      s += std::norm(values[i]) * w;
    }
    return std::sqrt(s);
  }
};

/// Second-order multilinear interpolation; the point must lie inside the
/// closed box (within 1e-9 h of it).
inline std::complex<double> interpolate(const SpatialField& u,
                                        const std::vector<double>& x) {
  const BoxGrid& g = u.grid;
  const int n = g.dim();
  if (static_cast<int>(x.size()) != n)
    throw domain_error("interpolate: point dimension mismatch");
  std::vector<std::int64_t> base(n);
  std::vector<double> frac(n);
  for (int j = 0; j < n; ++j) {
    const double t = (x[j] - g.box[j].lo) / g.h(j);
    if (t < -1e-9 || t > g.cells[j] + 1e-9)
      throw domain_error("interpolate: point outside the sampled box on axis " +
                         std::to_string(j));
    std::int64_t c = static_cast<std::int64_t>(std::floor(t));
    if (c < 0) c = 0;
    if (c > g.cells[j] - 1) c = g.cells[j] - 1;
    base[j] = c;
    frac[j] = t - static_cast<double>(c);
  }
  std::complex<double> acc(0.0);
  std::vector<std::int64_t> mi(n);
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    for (int j = 0; j < n; ++j) {
      const int bit = (corner >> j) & 1;
      mi[j] = base[j] + bit;
      w *= bit ? frac[j] : 1.0 - frac[j];
    }
    if (w != 0.0) acc += w * u.values[g.flat(mi)];
  }
  return acc;
}

//----------------------------------------------------------------------------
// Function and potential transforms.
//----------------------------------------------------------------------------

/// u~(y) = (2R/|y'|)^{n-2} u(x(y)) sampled on the target grid; u is given
/// analytically, so no interpolation error enters.
inline SpatialField transform_function(
    const KelvinChart& ch,
    const std::function<std::complex<double>(const std::vector<double>&)>& u,
    const BoxGrid& target) {
  if (target.dim() != ch.n)
    throw domain_error("transform_function: grid dimension mismatch");
  SpatialField out(target);
  std::vector<std::int64_t> mi;
  std::vector<double> y;
  for (std::int64_t i = 0; i < target.node_count(); ++i) {
    target.unflatten(i, mi);
    target.point(mi, y);
    out.values[i] = kelvin_weight(ch, y) * u(map_spatial(ch, y));
  }
  return out;
}

/// Sampled-source variant: pullback points are interpolated multilinearly
/// from u's grid (second order).
inline SpatialField transform_function(const KelvinChart& ch,
                                       const SpatialField& u,
                                       const BoxGrid& target) {
  return transform_function(
      ch, [&](const std::vector<double>& x) { return interpolate(u, x); },
      target);
}

/// q~(y) = (2R/|y'|)^4 q(x(y)): the potential weight of the conjugation
/// identity, independent of n.
inline SpatialField transform_potential(
    const KelvinChart& ch,
    const std::function<std::complex<double>(const std::vector<double>&)>& q,
    const BoxGrid& target) {
  if (target.dim() != ch.n)
    throw domain_error("transform_potential: grid dimension mismatch");
  SpatialField out(target);
  std::vector<std::int64_t> mi;
  std::vector<double> y;
  for (std::int64_t i = 0; i < target.node_count(); ++i) {
    target.unflatten(i, mi);
    target.point(mi, y);
    double r2 = 0.0;
    for (double c : y) r2 += c * c;
    const double r = std::sqrt(r2);
    if (r < 1e-12)
      throw singular_point("transform_potential: node at the origin");
    const double f = 2.0 * ch.R / r;
    out.values[i] = (f * f) * (f * f) * q(map_spatial(ch, y));
  }
  return out;
}

inline SpatialField transform_potential(const KelvinChart& ch,
                                        const SpatialField& q,
                                        const BoxGrid& target) {
  return transform_potential(
      ch, [&](const std::vector<double>& x) { return interpolate(q, x); },
      target);
}

//----------------------------------------------------------------------------
// Norm-equivalence constants.
//----------------------------------------------------------------------------

/// Extremes over the y-domain lattice of the three pointwise factors that
/// control the transfer of estimates between the two patches:
///  - weight_*:    (2R/|y'|)^{n-2}, the bare conformal weight;
///  - potential_*: (2R/|y'|)^4, the potential weight;
///  - l2_*:        (|y'|/2R)^2, the change-of-variables-corrected L2 ratio
///                 (weight^2 Jacobian = (|y'|/2R)^4 pointwise, so the norm
///                 quotient ||u~|| / ||u|| lies between these extremes).
struct EquivalenceFactors {
  double weight_low = 0.0, weight_high = 0.0;
  double potential_low = 0.0, potential_high = 0.0;
  double l2_low = 0.0, l2_high = 0.0;
};

inline EquivalenceFactors equivalence_factors(const KelvinChart& ch,
                                              const BoxGrid& ydomain) {
  if (ydomain.dim() != ch.n)
    throw domain_error("equivalence_factors: grid dimension mismatch");
  EquivalenceFactors out;
  bool first = true;
  std::vector<std::int64_t> mi;
  std::vector<double> y;
  for (std::int64_t i = 0; i < ydomain.node_count(); ++i) {
    ydomain.unflatten(i, mi);
    ydomain.point(mi, y);
    double r2 = 0.0;
    for (double c : y) r2 += c * c;
    const double r = std::sqrt(r2);
    if (r < 1e-12)
      throw singular_point("equivalence_factors: node at the origin");
    const double f = 2.0 * ch.R / r;
    const double w = std::pow(f, double(ch.n - 2));
    const double p = (f * f) * (f * f);
    const double l2 = 1.0 / (f * f);
    if (first) {
      out.weight_low = out.weight_high = w;
      out.potential_low = out.potential_high = p;
      out.l2_low = out.l2_high = l2;
      first = false;
    } else {
      out.weight_low = std::min(out.weight_low, w);
      out.weight_high = std::max(out.weight_high, w);
      out.potential_low = std::min(out.potential_low, p);
      out.potential_high = std::max(out.potential_high, p);
      out.l2_low = std::min(out.l2_low, l2);
      out.l2_high = std::max(out.l2_high, l2);
    }
  }
  return out;
}

//----------------------------------------------------------------------------
// Conjugation identity check.
//----------------------------------------------------------------------------

/// Max over interior lattice nodes of
///   | (|y'|/2R)^{n+2} Delta_y u~(y) - (Delta_x u)(x(y)) |,
/// where Delta_y is the centered second-order stencil on the y-grid and u,
/// lap_u are analytic callbacks on the x-patch.  Second-order: halving the
/// grid spacing divides the result by ~4.
inline double conjugation_residual(
    const KelvinChart& ch,
    const std::function<double(const std::vector<double>&)>& u,
    const std::function<double(const std::vector<double>&)>& lap_u,
    const BoxGrid& ygrid) {
  if (ygrid.dim() != ch.n)
    throw domain_error("conjugation_residual: grid dimension mismatch");
  SpatialField ut = transform_function(
      ch,
      [&](const std::vector<double>& x) {
        return std::complex<double>(u(x));
      },
      ygrid);

  double worst = 0.0;
  std::vector<std::int64_t> mi, nb;
  std::vector<double> y;
  for (std::int64_t i = 0; i < ygrid.node_count(); ++i) {
    ygrid.unflatten(i, mi);
    if (!ygrid.interior(mi)) continue;
    ygrid.point(mi, y);

    double lap = 0.0;
    const double uc = ut.values[i].real();
    for (int j = 0; j < ch.n; ++j) {
      nb = mi;
      nb[j] = mi[j] - 1;
      const double um = ut.values[ygrid.flat(nb)].real();
      nb[j] = mi[j] + 1;
      const double up = ut.values[ygrid.flat(nb)].real();
      lap += (up - 2.0 * uc + um) / (ygrid.h(j) * ygrid.h(j));
    }

    double r2 = 0.0;
    for (double c : y) r2 += c * c;
    const double scale =
        std::pow(std::sqrt(r2) / (2.0 * ch.R), double(ch.n + 2));
    const double residual = std::abs(scale * lap - lap_u(map_spatial(ch, y)));
    worst = std::max(worst, residual);
  }
  return worst;
}

}  // namespace fcgo

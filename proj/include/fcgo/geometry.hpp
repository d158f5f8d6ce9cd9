#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fcgo/errors.hpp"

namespace fcgo {

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

/// Geometry of the periodicity cell Q = [0,1) x [-R,R)^n together with the
/// spatial cross-section box omega contained in the lower half {x_n < 0}.
///
/// Conventions used throughout the library:
///  * x0 is the axial (1-periodic) coordinate; x' = (x_1,...,x_n) spatial.
///  * omega is an open axis-aligned box, its n-th interval is (-d, 0) for
///    some 0 < d < R, so the closure of omega touches the hyperplane
///    {x_n = 0} exactly in its top face.
class CellGeometry {
 public:
  CellGeometry() = default;

  CellGeometry(int n, double R, std::vector<Interval> omega_box)
      : n_(n), R_(R), omega_(std::move(omega_box)) {
    validate();
  }

  int n() const { return n_; }
  double R() const { return R_; }
  const std::vector<Interval>& omega_box() const { return omega_; }

  /// First Dirichlet eigenvalue sqrt for the box omega: the largest c with
  /// ||grad u|| >= c ||u|| for u vanishing on the lateral boundary.
  double poincare_constant() const {
    double s = 0.0;
    for (const auto& iv : omega_) {
      const double L = iv.length();
      s += 1.0 / (L * L);
    }
    return M_PI * std::sqrt(s);
  }

  bool operator==(const CellGeometry& o) const {
    if (n_ != o.n_ || R_ != o.R_) return false;
    for (int j = 0; j < n_; ++j)
      if (omega_[j].lo != o.omega_[j].lo || omega_[j].hi != o.omega_[j].hi)
        return false;
    return true;
  }

 private:
  void validate() const {
    if (n_ < 2) throw domain_error("CellGeometry: need n >= 2");
    if (!(R_ > 0.0)) throw domain_error("CellGeometry: need R > 0");
    if (static_cast<int>(omega_.size()) != n_)
      throw domain_error("CellGeometry: omega_box must have n intervals");
    for (int j = 0; j < n_; ++j) {
      const auto& iv = omega_[j];
      if (!(iv.lo < iv.hi))
        throw domain_error("CellGeometry: empty omega interval on axis " +
                           std::to_string(j + 1));
      if (iv.lo < -R_ - 1e-12 || iv.hi > R_ + 1e-12)
        throw domain_error("CellGeometry: omega leaves [-R,R] on axis " +
                           std::to_string(j + 1));
    }
    const auto& last = omega_[n_ - 1];
    if (std::abs(last.hi) > 1e-12)
      throw domain_error("CellGeometry: omega_n must end at x_n = 0");
    if (!(last.lo > -R_))
      throw domain_error("CellGeometry: omega_n must start above -R");
  }

  int n_ = 2;
  double R_ = 1.0;
  std::vector<Interval> omega_;
};

/// Uniform tensor grid on the cell: N0 axial layers at x0 = i0/N0
/// (i0 = 0..N0-1, the layer at x0 = 1 is identified with layer 0 through
/// the fiber phase) and N points per spatial axis at x_j = -R + i_j h,
/// h = 2R/N (i_j = 0..N-1, periodic wrap of the symmetric box).
struct GridSpec {
  int N0 = 8;
  int N = 16;

  GridSpec() = default;
  GridSpec(int n0, int nsp) : N0(n0), N(nsp) {
    if (N0 < 2 || N < 2) throw domain_error("GridSpec: need N0, N >= 2");
    if (N0 % 2 != 0 || N % 2 != 0)
      throw domain_error("GridSpec: N0 and N must be even");
  }

  double h0() const { return 1.0 / N0; }
  double h(double R) const { return 2.0 * R / N; }

  bool operator==(const GridSpec& o) const { return N0 == o.N0 && N == o.N; }
};

/// Index range [lo, hi] (inclusive, in grid units) that the closure of an
/// omega interval occupies on a spatial axis.
struct AxisSpan {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::int64_t cells() const { return hi - lo; }
};

/// Grid span of omega on each spatial axis; throws if an endpoint of
/// omega_box does not land on a grid point (within 1e-9 * h).
inline std::vector<AxisSpan> omega_spans(const CellGeometry& g,
                                         const GridSpec& grid) {
  const double h = grid.h(g.R());
  std::vector<AxisSpan> spans(g.n());
  for (int j = 0; j < g.n(); ++j) {
    const auto& iv = g.omega_box()[j];
    const double flo = (iv.lo + g.R()) / h;
    const double fhi = (iv.hi + g.R()) / h;
    const auto lo = static_cast<std::int64_t>(std::llround(flo));
    const auto hi = static_cast<std::int64_t>(std::llround(fhi));
    if (std::abs(flo - static_cast<double>(lo)) > 1e-9 ||
        std::abs(fhi - static_cast<double>(hi)) > 1e-9)
      throw domain_error("omega_spans: omega endpoint off-grid on axis " +
                         std::to_string(j + 1));
    if (hi - lo < 2)
      throw domain_error("omega_spans: omega thinner than 2 cells on axis " +
                         std::to_string(j + 1));
    if (lo < 1 || hi > grid.N - 1)
      throw domain_error(
          "omega_spans: omega closure must stay strictly inside the open box "
          "on axis " +
          std::to_string(j + 1));
    spans[j] = {lo, hi};
  }
  return spans;
}

}  // namespace fcgo

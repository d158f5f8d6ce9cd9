#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/errors.hpp"
#include "fcgo/fiber.hpp"
#include "fcgo/geometry.hpp"

namespace fcgo {

/// Parsed "name:par1:par2:..." profile request.
struct ProfileSpec {
  std::string name;
  std::vector<double> params;

  double param(std::size_t i, double fallback) const {
    return i < params.size() ? params[i] : fallback;
  }
};

/// Split "bump:0.1" style text; every segment after the name must parse as
/// a finite double.
inline ProfileSpec parse_profile(const std::string& text) {
  ProfileSpec spec;
  std::stringstream ss(text);
  std::string piece;
  if (!std::getline(ss, piece, ':') || piece.empty())
    throw format_error("parse_profile: empty profile name in '" + text + "'");
  if (text.back() == ':')
    throw format_error("parse_profile: trailing ':' in '" + text + "'");
  spec.name = piece;
  while (std::getline(ss, piece, ':')) {
    if (piece.empty())
      throw format_error("parse_profile: empty parameter in '" + text + "'");
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != piece.size() || !std::isfinite(value))
      throw format_error("parse_profile: bad parameter '" + piece + "' in '" +
                         text + "'");
    spec.params.push_back(value);
  }
  return spec;
}

namespace detail {

/// Midpoint and half-extent of omega on spatial axis j (0-based).
inline void omega_mid_half(const CellGeometry& g, int j, double& mid,
                           double& half) {
  const Interval& iv = g.omega_box()[j];
  mid = 0.5 * (iv.lo + iv.hi);
  half = 0.5 * (iv.hi - iv.lo);
}

/// Positive axial modulation 1 + sum_m (0.45/m) cos(2 pi m x0 + 0.7 m); the
/// k != 0 Fourier coefficients of the profile all vanish without it.
inline double axial_factor(double x0, int harmonics) {
  double f = 1.0;
  for (int m = 1; m <= harmonics; ++m)
    f += 0.45 / double(m) * std::cos(2.0 * M_PI * double(m) * x0 + 0.7 * m);
  return f;
}

}  // namespace detail

/// Evaluate a named profile on the full cell grid (real-valued samples).
///
///   zero                          identically zero
///   bump[:amp[:sharp[:harm[:off...]]]]
///                                 Gaussian centered in omega with width
///                                 R/sqrt(sharp), axially modulated; the
///                                 optional trailing params shift the center
///                                 by an absolute offset per spatial axis
///   trig[:amp[:k[:m]]]            amp (1 + cos(2 pi k x0)/2) prod_j
///                                 sin^2(m pi (x_j - lo_j)/L_j): smooth,
///                                 vanishing on the lateral boundary
///   kink[:alpha[:amp]]            amp (1 - |(x_n - mid)/half|^alpha):
///                                 Hoelder-alpha cusp at the omega center
inline CellFunction profile_cell(const ProfileSpec& spec,
                                 const CellGeometry& g, const GridSpec& grid) {
  CellFunction out(g, grid);
  const int n = g.n();

  if (spec.name == "zero") {
    return out;
  }

  if (spec.name == "bump") {
    const double amp = spec.param(0, 1.0);
    const double sharp = spec.param(1, 11.0);
    const int harmonics = static_cast<int>(spec.param(2, 1.0));
    if (!(sharp > 0.0))
      throw format_error("profile bump: sharpness must be positive");
    if (spec.params.size() > 3 && spec.params.size() != 3 + std::size_t(n))
      throw format_error("profile bump: center offsets need one value per "
                         "spatial axis");
    std::vector<double> mid(n), half(n);
    for (int j = 0; j < n; ++j) {
      detail::omega_mid_half(g, j, mid[j], half[j]);
      mid[j] += spec.param(3 + j, 0.0);
    }
    const double scale = sharp / (g.R() * g.R());
    out.fill([&](const std::vector<double>& x) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double d = x[j + 1] - mid[j];
        s += d * d;
      }
      return cplx(amp * detail::axial_factor(x[0], harmonics) *
                  std::exp(-scale * s));
    });
    return out;
  }

  if (spec.name == "trig") {
    const double amp = spec.param(0, 1.0);
    const double k = spec.param(1, 1.0);
    const double m = spec.param(2, 1.0);
    out.fill([&](const std::vector<double>& x) {
      double v = amp * (1.0 + 0.5 * std::cos(2.0 * M_PI * k * x[0]));
      for (int j = 0; j < n; ++j) {
        const Interval& iv = g.omega_box()[j];
        const double t = (x[j + 1] - iv.lo) / (iv.hi - iv.lo);
        const double s = std::sin(M_PI * m * t);
        v *= s * s;
      }
      return cplx(v);
    });
    return out;
  }

  if (spec.name == "kink") {
    const double alpha = spec.param(0, 1.0);
    const double amp = spec.param(1, 1.0);
    if (!(alpha > 0.0) || alpha > 1.0)
      throw format_error("profile kink: alpha must lie in (0, 1]");
    double mid = 0.0, half = 0.0;
    detail::omega_mid_half(g, n - 1, mid, half);
    out.fill([&](const std::vector<double>& x) {
      const double t = std::abs(x[n] - mid) / half;
      return cplx(t >= 1.0 ? 0.0 : amp * (1.0 - std::pow(t, alpha)));
    });
    return out;
  }

  throw format_error("profile_cell: unknown profile '" + spec.name + "'");
}

inline CellFunction profile_cell(const std::string& text,
                                 const CellGeometry& g, const GridSpec& grid) {
  return profile_cell(parse_profile(text), g, grid);
}

/// Profile restricted to omega and wrapped as an admissible potential.
inline Potential profile_potential(const std::string& text,
                                   const CellGeometry& g,
                                   const GridSpec& grid) {
  return make_potential(restrict_to_omega(profile_cell(text, g, grid)));
}

}  // namespace fcgo

#pragma once

//============================================================================
// Discrete Floquet transform on compactly supported cylinder functions and
// the sup-over-theta DN difference norm.
//
// A CylinderFunction stores per-cell samples of a function supported in
// x0 in [-K, K+1).  The transform maps it to theta-quasi-periodic fibers on
// the unit cell,
//
//    fiber_theta = sum_k e^{i k theta} cell_k,
//
// sampled on an equispaced theta grid; the inverse recovers cell m as
// (1/M) sum_j e^{-i m theta_j} fiber_j, which is exact when M > 2K+1.
//============================================================================

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/errors.hpp"
#include "fcgo/fiber.hpp"

namespace fcgo {

/// Equispaced sampling of the fiber parameter: theta_j = 2 pi j / M.
struct ThetaGrid {
  int M = 1;
  explicit ThetaGrid(int m) : M(m) {
    if (M < 1) throw domain_error("ThetaGrid: M must be >= 1");
  }
  double theta(int j) const { return 2.0 * M_PI * double(j) / double(M); }
};

/// Function on the cylinder supported in x0 in [-K, K+1), stored cell-wise:
/// cell(k) holds the samples of f(x0 + k, x') for x0 in the unit cell.
class CylinderFunction {
 public:
  CylinderFunction() = default;
  CylinderFunction(int K, const CellGeometry& g, const GridSpec& grid)
      : K_(K), cells_(2 * K + 1, CellFunction(g, grid)) {
    if (K < 0) throw domain_error("CylinderFunction: K must be >= 0");
  }

  int K() const { return K_; }
  CellFunction& cell(int k) { return cells_.at(k + K_); }
  const CellFunction& cell(int k) const { return cells_.at(k + K_); }
  const CellGeometry& geometry() const { return cells_.front().geometry(); }
  const GridSpec& grid() const { return cells_.front().grid(); }

  double total_l2_sq() const {
    double s = 0.0;
    for (const auto& c : cells_) {
      const double l = c.l2();
      s += l * l;
    }
    return s;
  }

 private:
  int K_ = 0;
  std::vector<CellFunction> cells_;
};

/// fiber_j = sum_k e^{i k theta_j} cell_k for every theta_j in the grid.
inline std::vector<CellFunction> fbg_forward(const CylinderFunction& f,
                                             const ThetaGrid& thetas) {
  std::vector<CellFunction> fibers;
  fibers.reserve(thetas.M);
  for (int j = 0; j < thetas.M; ++j) {
    CellFunction acc(f.geometry(), f.grid());
    for (int k = -f.K(); k <= f.K(); ++k) {
      const cplx ph = std::exp(cplx(0.0, double(k) * thetas.theta(j)));
      const CellFunction& c = f.cell(k);
      for (std::int64_t i = 0; i < acc.size(); ++i) acc[i] += ph * c[i];
    }
    fibers.push_back(std::move(acc));
  }
  return fibers;
}

/// cell_m = (1/M) sum_j e^{-i m theta_j} fiber_j.  Exact inversion needs the
/// theta grid to resolve all 2K+1 stored cells.
inline CylinderFunction fbg_inverse(const std::vector<CellFunction>& fibers,
                                    int K) {
  const int M = static_cast<int>(fibers.size());
  if (M < 1) throw domain_error("fbg_inverse: empty fiber list");
  if (M <= 2 * K + 1)
    throw alias_error("fbg_inverse: " + std::to_string(M) +
                      " theta samples cannot resolve " +
                      std::to_string(2 * K + 1) + " cells");
  const ThetaGrid thetas(M);
  CylinderFunction out(K, fibers.front().geometry(), fibers.front().grid());
  for (int m = -K; m <= K; ++m) {
    CellFunction& c = out.cell(m);
    for (int j = 0; j < M; ++j) {
      const cplx ph =
          std::exp(cplx(0.0, -double(m) * thetas.theta(j))) / double(M);
      const CellFunction& fb = fibers[j];
      for (std::int64_t i = 0; i < c.size(); ++i) c[i] += ph * fb[i];
    }
  }
  return out;
}

/// Maximum over the theta grid of the DN difference norm, with the argmax
/// and the whole per-theta profile.  The boundary-norm Gram matrix is built
/// once per theta and shared between the two potentials.
struct DnSupResult {
  double value = 0.0;
  double theta_star = 0.0;
  std::vector<double> per_theta;
};

inline DnSupResult dn_sup_over_theta(const Potential& q1, const Potential& q2,
                                     const ThetaGrid& thetas,
                                     bool restrict_gamma1 = true,
                                     SolverOptions opt = {}) {
  DnSupResult out;
  out.per_theta.reserve(thetas.M);
  const CellGeometry& g = q1.values.geometry();
  const GridSpec& grid = q1.values.grid();
  for (int j = 0; j < thetas.M; ++j) {
    const double th = thetas.theta(j);
    const Eigen::MatrixXcd gram = build_hscript_gram(g, grid, th, opt);
    const DnMap a = assemble_dn(q1, th, opt);
    const DnMap b = assemble_dn(q2, th, opt);
    const double s = dn_diff_norm(a, b, restrict_gamma1, gram);
    out.per_theta.push_back(s);
    if (j == 0 || s > out.value) {
      out.value = s;
      out.theta_star = th;
    }
  }
  return out;
}

}  // namespace fcgo

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/fbg.hpp"
#include "fcgo/fiber.hpp"
#include "fcgo/geometry.hpp"
#include "fcgo/rng.hpp"

using namespace fcgo;
using Catch::Approx;

namespace {

CellGeometry make_geom_quarters(int n, double R) {
  std::vector<Interval> box(n, Interval{-0.5 * R, 0.5 * R});
  box[n - 1] = Interval{-0.5 * R, 0.0};
  return CellGeometry(n, R, box);
}

CylinderFunction random_cylinder(int K, const CellGeometry& g,
                                 const GridSpec& grid, Rng& rng) {
  CylinderFunction f(K, g, grid);
  for (int k = -K; k <= K; ++k)
    for (auto& v : f.cell(k).values()) v = cplx(rng.normal(), rng.normal());
  return f;
}

Potential bump_potential(const CellGeometry& g, const GridSpec& grid,
                         double amp) {
  CellFunction q(g, grid);
  const auto& box = g.omega_box();
  std::vector<double> c(g.n());
  for (int j = 0; j < g.n(); ++j) c[j] = 0.5 * (box[j].lo + box[j].hi);
  q.fill([&](const std::vector<double>& x) {
    double s = 0.0;
    for (int j = 1; j <= (int)c.size(); ++j) {
      const double d = x[j] - c[j - 1];
      s += d * d;
    }
    return cplx(amp * std::exp(-20.0 * s));
  });
  return make_potential(std::move(q));
}

}  // namespace

TEST_CASE("transform round-trip and Plancherel") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(2, 4);
  Rng rng(11);
  const CylinderFunction f = random_cylinder(3, g, grid, rng);
  const ThetaGrid thetas(16);

  const auto fibers = fbg_forward(f, thetas);
  REQUIRE(fibers.size() == 16);
  const CylinderFunction back = fbg_inverse(fibers, 3);

  double err = 0.0;
  for (int k = -3; k <= 3; ++k)
    for (std::int64_t i = 0; i < f.cell(k).size(); ++i)
      err = std::max(err, std::abs(back.cell(k)[i] - f.cell(k)[i]));
  REQUIRE(err < 1e-12);

  double fiber_sq = 0.0;
  for (const auto& fb : fibers) {
    const double l = fb.l2();
    fiber_sq += l * l;
  }
  fiber_sq /= 16.0;
  REQUIRE(fiber_sq == Approx(f.total_l2_sq()).epsilon(1e-12));
}

TEST_CASE("single-cell inputs") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(2, 4);
  Rng rng(12);

  // Support in cell k = 0 only: fibers are theta-independent.
  CylinderFunction f0(2, g, grid);
  for (auto& v : f0.cell(0).values()) v = cplx(rng.normal(), rng.normal());
  const ThetaGrid thetas(8);
  const auto fib0 = fbg_forward(f0, thetas);
  for (int j = 0; j < 8; ++j)
    for (std::int64_t i = 0; i < fib0[j].size(); ++i)
      REQUIRE(std::abs(fib0[j][i] - f0.cell(0)[i]) < 1e-14);

  // Support in cell k = 2: fiber_j = e^{2 i theta_j} cell.
  CylinderFunction f2(2, g, grid);
  for (auto& v : f2.cell(2).values()) v = cplx(rng.normal(), rng.normal());
  const auto fib2 = fbg_forward(f2, thetas);
  for (int j = 0; j < 8; ++j) {
    const cplx ph = std::exp(cplx(0.0, 2.0 * thetas.theta(j)));
    for (std::int64_t i = 0; i < fib2[j].size(); ++i)
      REQUIRE(std::abs(fib2[j][i] - ph * f2.cell(2)[i]) < 1e-13);
  }

  // Zero input.
  const CylinderFunction z(1, g, grid);
  for (const auto& fb : fbg_forward(z, ThetaGrid(4))) REQUIRE(fb.linf() == 0.0);
}

TEST_CASE("shifting the cylinder function modulates the fibers") {
  // f'(x0, x') = f(x0 + 1, x'), i.e. cell'_k = cell_{k+1}; then the
  // transform picks up e^{-i theta}.  Keep the support away from the edge
  // cells so the shift stays representable.
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(2, 4);
  Rng rng(13);
  CylinderFunction f(3, g, grid);
  for (int k = -2; k <= 2; ++k)
    for (auto& v : f.cell(k).values()) v = cplx(rng.normal(), rng.normal());

  CylinderFunction shifted(3, g, grid);
  for (int k = -3; k <= 2; ++k) shifted.cell(k) = f.cell(k + 1);

  const ThetaGrid thetas(11);
  const auto fib = fbg_forward(f, thetas);
  const auto fibs = fbg_forward(shifted, thetas);
  for (int j = 0; j < thetas.M; ++j) {
    const cplx ph = std::exp(cplx(0.0, -thetas.theta(j)));
    for (std::int64_t i = 0; i < fib[j].size(); ++i)
      REQUIRE(std::abs(fibs[j][i] - ph * fib[j][i]) < 1e-12);
  }
}

TEST_CASE("insufficient theta resolution is rejected") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(2, 4);
  Rng rng(14);
  const CylinderFunction f = random_cylinder(3, g, grid, rng);

  const auto fibers7 = fbg_forward(f, ThetaGrid(7));  // 7 = 2K+1
  REQUIRE_THROWS_AS(fbg_inverse(fibers7, 3), alias_error);

  const auto fibers8 = fbg_forward(f, ThetaGrid(8));  // smallest valid M
  const CylinderFunction back = fbg_inverse(fibers8, 3);
  double err = 0.0;
  for (int k = -3; k <= 3; ++k)
    for (std::int64_t i = 0; i < f.cell(k).size(); ++i)
      err = std::max(err, std::abs(back.cell(k)[i] - f.cell(k)[i]));
  REQUIRE(err < 1e-12);
}

TEST_CASE("sup of the DN difference over theta") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(2, 8);
  const Potential q1 = bump_potential(g, grid, 0.8);
  const Potential q2 = bump_potential(g, grid, 1.0);

  // Identical potentials: exactly zero at every theta.
  const DnSupResult same = dn_sup_over_theta(q1, q1, ThetaGrid(3));
  REQUIRE(same.value == 0.0);
  for (double v : same.per_theta) REQUIRE(v == 0.0);

  // Distinct potentials: positive max attained on the grid, dominating
  // every sampled value; refinement by a superset never decreases it.
  const DnSupResult r2 = dn_sup_over_theta(q1, q2, ThetaGrid(2));
  const DnSupResult r4 = dn_sup_over_theta(q1, q2, ThetaGrid(4));
  REQUIRE(r4.value > 0.0);
  REQUIRE(r4.per_theta.size() == 4);
  for (double v : r4.per_theta) REQUIRE(r4.value >= v);
  bool attained = false;
  for (int j = 0; j < 4; ++j)
    if (r4.theta_star == ThetaGrid(4).theta(j) &&
        r4.per_theta[j] == r4.value)
      attained = true;
  REQUIRE(attained);
  REQUIRE(r4.value >= r2.value - 1e-12);
}

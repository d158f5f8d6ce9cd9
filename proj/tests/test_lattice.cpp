#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/geometry.hpp"
#include "fcgo/lattice.hpp"
#include "fcgo/rng.hpp"

using namespace fcgo;

namespace {

CellGeometry make_geom(int n, double R) {
  // Box omega on grid nodes of N = 6: [-2R/3, R/3] laterally, [-2R/3, 0]
  // on the last axis.
  std::vector<Interval> box(n, Interval{-2.0 * R / 3.0, R / 3.0});
  box[n - 1] = Interval{-2.0 * R / 3.0, 0.0};
  return CellGeometry(n, R, box);
}

CellFunction random_field(const CellGeometry& g, const GridSpec& grid,
                          std::uint64_t seed) {
  CellFunction f(g, grid);
  Rng rng(seed);
  for (std::int64_t i = 0; i < f.size(); ++i)
    f[i] = cplx(rng.normal(), rng.normal());
  return f;
}

CellFunction sampled_basis(const CellGeometry& g, const GridSpec& grid,
                           const std::vector<double>& alpha) {
  CellFunction f(g, grid);
  f.fill([&](const std::vector<double>& x) { return basis_value(g, alpha, x); });
  return f;
}

}  // namespace

TEST_CASE("shifted lattice basis is orthonormal on the grid") {
  const CellGeometry g = make_geom(2, 0.8);
  const GridSpec grid(4, 6);

  const std::vector<std::vector<double>> alphas = {
      {0.0, 0.5, 0.0},  {0.0, -0.5, 0.0}, {1.0, 0.5, 1.0},
      {-1.0, 1.5, -2.0}, {0.0, -1.5, 2.0},
  };
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    for (std::size_t b = 0; b < alphas.size(); ++b) {
      const CellFunction fa = sampled_basis(g, grid, alphas[a]);
      const CellFunction fb = sampled_basis(g, grid, alphas[b]);
      const cplx ip = fa.inner(fb);
      if (a == b) {
        REQUIRE(std::abs(ip - cplx(1.0)) < 1e-12);
      } else {
        REQUIRE(std::abs(ip) < 1e-12);
      }
    }
  }
}

TEST_CASE("analysis of a sampled basis function hits a single bin") {
  const CellGeometry g = make_geom(2, 0.8);
  const GridSpec grid(4, 6);

  const std::vector<std::vector<double>> alphas = {
      {0.0, 0.5, 0.0}, {1.0, -0.5, 1.0}, {-1.0, 1.5, -2.0}};
  for (const auto& alpha : alphas) {
    const CellFunction f = sampled_basis(g, grid, alpha);
    const LatticeCoefficients c = to_coefficients(f);
    std::vector<std::int64_t> bins;
    for (std::int64_t i = 0; i < c.size(); ++i) {
      c.unflatten(i, bins);
      const bool match = std::abs(c.alpha0(bins[0]) - alpha[0]) < 0.25 &&
                         std::abs(c.alpha1(bins[1]) - alpha[1]) < 0.25 &&
                         std::abs(c.alpha_int(bins[2]) - alpha[2]) < 0.25;
      if (match) {
        REQUIRE(std::abs(c[i] - cplx(1.0)) < 1e-12);
      } else {
        REQUIRE(std::abs(c[i]) < 1e-12);
      }
    }
  }
}

TEST_CASE("coefficient round trip and Plancherel") {
  for (int n : {2, 3}) {
    const CellGeometry g = make_geom(n, 1.3);
    const GridSpec grid(4, 6);
    const CellFunction f = random_field(g, grid, 17);

    const LatticeCoefficients c = to_coefficients(f);
    const CellFunction back = from_coefficients(c);
    CellFunction diff = back;
    diff -= f;
    REQUIRE(diff.linf() < 1e-12 * f.linf());

    const double plancherel_gap = std::abs(f.l2() * f.l2() - c.sum_sq());
    REQUIRE(plancherel_gap < 1e-10 * c.sum_sq());
  }
}

TEST_CASE("frequency multipliers act diagonally on sampled basis modes") {
  const CellGeometry g = make_geom(2, 0.8);
  const GridSpec grid(4, 6);
  const std::vector<double> a1 = {1.0, 0.5, -1.0};
  const std::vector<double> a2 = {-1.0, -1.5, 2.0};

  CellFunction f = sampled_basis(g, grid, a1);
  {
    CellFunction f2 = sampled_basis(g, grid, a2);
    f2 *= cplx(2.0, -1.0);
    f += f2;
  }

  auto laplace_symbol = [](const std::vector<double>& w) {
    double s = 0.0;
    for (double v : w) s += v * v;
    return cplx(s);
  };
  const CellFunction out = apply_symbol(f, laplace_symbol);

  auto eig = [&](const std::vector<double>& alpha) {
    double s = 4.0 * M_PI * M_PI * alpha[0] * alpha[0];
    for (int j = 1; j <= g.n(); ++j) {
      const double w = M_PI * alpha[j] / g.R();
      s += w * w;
    }
    return s;
  };
  CellFunction expected = sampled_basis(g, grid, a1);
  expected *= cplx(eig(a1));
  {
    CellFunction e2 = sampled_basis(g, grid, a2);
    e2 *= cplx(2.0, -1.0) * cplx(eig(a2));
    expected += e2;
  }
  CellFunction diff = out;
  diff -= expected;
  REQUIRE(diff.linf() < 1e-10 * expected.linf());
}

TEST_CASE("reflection is an involution and commutes with sampling") {
  const CellGeometry g = make_geom(2, 0.8);
  const GridSpec grid(4, 6);
  const CellFunction f = random_field(g, grid, 3);

  const CellFunction twice = reflect(reflect(f));
  CellFunction diff = twice;
  diff -= f;
  REQUIRE(diff.linf() == 0.0);

  // Pointwise meaning: reflect(f)(x0, x', x_n) = f(x0, x', -x_n).
  CellFunction smooth(g, grid);
  smooth.fill([&](const std::vector<double>& x) {
    return cplx(std::cos(M_PI * x.back() / g.R()), x[0]);
  });
  CellFunction refl = reflect(smooth);
  CellFunction expected(g, grid);
  expected.fill([&](const std::vector<double>& x) {
    return cplx(std::cos(M_PI * (-x.back()) / g.R()), x[0]);
  });
  CellFunction d2 = refl;
  d2 -= expected;
  REQUIRE(d2.linf() < 1e-12);
}

TEST_CASE("even extension of a lower-half potential is reflection invariant") {
  const CellGeometry g = make_geom(2, 0.8);
  const GridSpec grid(4, 6);

  CellFunction q(g, grid);
  q.fill([&](const std::vector<double>& x) {
    return cplx(std::sin(x[1]) + x[2] * x[2], 0.0);
  });
  const CellFunction ext = extend_potential(q);

  const CellFunction refl = reflect(ext);
  CellFunction diff = refl;
  diff -= ext;
  REQUIRE(diff.linf() == 0.0);

  // Inside the closure of omega the extension agrees with the restriction.
  const CellFunction inside = restrict_to_omega(q);
  OmegaMask mask(g, grid);
  std::vector<std::int64_t> mi;
  for (std::int64_t i = 0; i < q.size(); ++i) {
    q.unflatten(i, mi);
    if (mask.in_closure(mi)) {
      REQUIRE(std::abs(ext[i] - inside[i]) == 0.0);
    }
  }
}

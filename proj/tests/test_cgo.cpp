#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "fcgo/cell_function.hpp"
#include "fcgo/cgo.hpp"
#include "fcgo/geometry.hpp"
#include "fcgo/lattice.hpp"
#include "fcgo/pipeline.hpp"
#include "fcgo/rng.hpp"

using namespace fcgo;
using Catch::Approx;

namespace {

CellGeometry make_geom(int n, double R) {
  std::vector<Interval> box(n, Interval{-2.0 * R / 3.0, R / 3.0});
  box[n - 1] = Interval{-2.0 * R / 3.0, 0.0};
  return CellGeometry(n, R, box);
}

// Box endpoints aligned with N divisible by 4.
CellGeometry make_geom_quarters(int n, double R) {
  std::vector<Interval> box(n, Interval{-0.5 * R, 0.5 * R});
  box[n - 1] = Interval{-0.5 * R, 0.0};
  return CellGeometry(n, R, box);
}

// Shared recipe with the acceptance run.
CgoParams random_params(Rng& rng, int n) {
  return random_cgo_params(rng, n);
}

}  // namespace

TEST_CASE("sigma rule reproduces the closed table") {
  auto sigma_of = [](double k) {
    CgoParams p;
    p.n = 2;
    p.theta = 0.1;
    p.k = k;
    p.r = 1.0;
    p.xi = {1.0, 0.0};
    p.eta = {0.0, 2.0};
    return build_phase(p).sigma_k;
  };
  REQUIRE(sigma_of(0.5) == Approx(1.75).margin(1e-14));
  REQUIRE(sigma_of(1.5) == Approx(1.25).margin(1e-14));
  REQUIRE(sigma_of(2.5) == Approx(1.75).margin(1e-14));
  REQUIRE(sigma_of(-0.5) == Approx(1.25).margin(1e-14));
  REQUIRE(sigma_of(-1.5) == Approx(1.75).margin(1e-14));
  REQUIRE(sigma_of(1.0) == Approx(1.5).margin(1e-14));
  REQUIRE(sigma_of(2.0) == Approx(2.0).margin(1e-14));
  REQUIRE(sigma_of(-1.0) == Approx(1.5).margin(1e-14));
  REQUIRE(sigma_of(-2.0) == Approx(2.0).margin(1e-14));
}

TEST_CASE("worked phase example: theta=0, k=1/2, r=1, eta=(0,2,0)") {
  CgoParams p;
  p.n = 3;
  p.theta = 0.0;
  p.k = 0.5;
  p.r = 1.0;
  p.xi = {1.0, 0.0, 0.0};
  p.eta = {0.0, 2.0, 0.0};
  const CgoPhase ph = build_phase(p);

  const double ell = 11.0 * M_PI / 2.0;
  REQUIRE(ph.sigma_k == Approx(1.75).margin(1e-14));
  REQUIRE(ph.ell0 == Approx(ell).epsilon(1e-14));
  REQUIRE(ph.l[0] == Approx(ell).epsilon(1e-14));
  REQUIRE(ph.l[1] == Approx(0.0).margin(1e-14));
  REQUIRE(ph.l[2] == Approx(-ell * M_PI / 2.0).epsilon(1e-14));
  REQUIRE(ph.l[3] == Approx(0.0).margin(1e-14));

  const double tau_expected =
      std::sqrt((1.0 + M_PI * M_PI / 4.0) * (1.0 + ell * ell));
  REQUIRE(ph.tau == Approx(tau_expected).epsilon(1e-14));
  REQUIRE(ph.tau == Approx(32.228546).epsilon(1e-6));  // frozen literal

  // Cross phase: zeta1 + conj(zeta2) = i(2 pi k, eta) = i(pi, 0, 2, 0).
  for (int a = 0; a <= 3; ++a) {
    const cplx sum = ph.zeta1[a] + std::conj(ph.zeta2[a]);
    const double want_im = (a == 0) ? M_PI : p.eta[a - 1];
    REQUIRE(std::abs(sum - cplx(0.0, want_im)) < 1e-12 * ph.tau);
  }
}

TEST_CASE("zeta identity sweep over random admissible parameters") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(trial % 2);
    const CgoParams p = random_params(rng, n);
    const CgoPhase ph = build_phase(p);
    const double t2 = ph.tau * ph.tau;

    REQUIRE(std::abs(bilinear(ph.zeta1, ph.zeta1)) < 1e-9 * t2);
    REQUIRE(std::abs(bilinear(ph.zeta2, ph.zeta2)) < 1e-9 * t2);

    // Quasi-periodic phases of the two exponentials.
    const cplx f1 = fiber_phase(ph, 1);
    const cplx f2 = fiber_phase(ph, 2);
    const cplx want1 = std::exp(cplx(0.0, p.theta));
    const cplx want2 = std::exp(cplx(0.0, p.theta - 2.0 * M_PI * p.k));
    REQUIRE(std::abs(f1 - want1) < 1e-10);
    REQUIRE(std::abs(f2 - want2) < 1e-10);

    // zeta1 + conj(zeta2) = i(2 pi k, eta).
    for (int a = 0; a <= n; ++a) {
      const cplx sum = ph.zeta1[a] + std::conj(ph.zeta2[a]);
      const double want_im = (a == 0) ? 2.0 * M_PI * p.k : p.eta[a - 1];
      REQUIRE(std::abs(sum - cplx(0.0, want_im)) < 1e-9 * (1.0 + ph.tau));
    }

    // Cross-phase pair: first = i(2 pi k, kappa), second = star(first).
    const auto [first, second] = cross_phase_vectors(ph);
    const std::vector<double> kappa = kappa_vector(ph);
    REQUIRE(std::abs(first[0] - cplx(0.0, 2.0 * M_PI * p.k)) <
            1e-9 * (1.0 + ph.tau));
    for (int j = 0; j < n; ++j)
      REQUIRE(std::abs(first[j + 1] - cplx(0.0, kappa[j])) <
              1e-9 * (1.0 + ph.tau));
    const auto first_star = star(first);
    for (int a = 0; a <= n; ++a)
      REQUIRE(std::abs(second[a] - first_star[a]) < 1e-12 * (1.0 + ph.tau));

    // Half-integer k lands on the opposite fiber, integer k on the same.
    const bool integer_k = std::abs(p.k - std::llround(p.k)) < 1e-12;
    if (integer_k) {
      REQUIRE(std::abs(f2 - f1) < 1e-10);
    } else {
      REQUIRE(std::abs(f2 + f1) < 1e-10);
    }
  }
}

TEST_CASE("parameter validation rejects inadmissible tuples") {
  CgoParams p;
  p.n = 2;
  p.theta = 0.1;
  p.k = 0.5;
  p.r = 1.0;
  p.xi = {1.0, 0.0};
  p.eta = {0.0, 2.0};
  REQUIRE_NOTHROW(build_phase(p));

  auto bad = p;
  bad.theta = -0.1;
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.theta = 2.0 * M_PI;
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.k = 0.0;
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.k = 0.3;
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.r = 0.0;
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.xi = {0.5, 0.0};
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.xi = {0.0, 1.0};  // xi . e_n != 0
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.eta = {0.0, 0.0};
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
  bad = p;
  bad.eta = {1.0, 1.0};  // not orthogonal to xi
  REQUIRE_THROWS_AS(build_phase(bad), admissibility_error);
}

TEST_CASE("multiplier inverts the conjugated operator on a basis mode") {
  const CellGeometry g = make_geom(2, 0.8);
  const GridSpec grid(4, 6);

  CgoParams p;
  p.n = 2;
  p.theta = 0.7;
  p.k = 0.5;
  p.r = 2.0;
  p.xi = {1.0, 0.0};
  p.eta = {0.0, 3.0};
  const CgoPhase ph = build_phase(p);

  const std::vector<double> alpha = {1.0, 0.5, -1.0};
  CellFunction f(g, grid);
  f.fill([&](const std::vector<double>& x) { return basis_value(g, alpha, x); });

  const CellFunction out = apply_G(ph.zeta1, f);

  // Expected denominator for this mode.
  const double R = g.R();
  cplx zdot = ph.zeta1[1] * alpha[1] + ph.zeta1[2] * alpha[2];
  const cplx den =
      M_PI * M_PI *
      (cplx(4.0 * alpha[0] * alpha[0] +
            (alpha[1] * alpha[1] + alpha[2] * alpha[2]) / (R * R)) -
       cplx(0.0, 4.0 / M_PI) * ph.zeta1[0] * alpha[0] -
       cplx(0.0, 2.0 / (M_PI * R)) * zdot);
  CellFunction expected = f;
  expected *= cplx(1.0) / den;
  CellFunction diff = out;
  diff -= expected;
  REQUIRE(diff.linf() < 1e-12 * expected.linf());
}

TEST_CASE("multiplier is a right inverse, including the permuted-axis path") {
  Rng rng(5);
  struct Case {
    int n;
    std::vector<double> xi, eta;
  };
  const std::vector<Case> cases = {
      {2, {1.0, 0.0}, {0.0, 3.0}},
      {3, {0.0, 1.0, 0.0}, {1.3, 0.0, 0.7}},  // real direction on axis 2
  };
  for (const auto& c : cases) {
    const CellGeometry g = make_geom(c.n, 0.8);
    const GridSpec grid(4, 6);
    CgoParams p;
    p.n = c.n;
    p.theta = 1.1;
    p.k = -1.5;
    p.r = 3.3;
    p.xi = c.xi;
    p.eta = c.eta;
    const CgoPhase ph = build_phase(p);

    CellFunction f(g, grid);
    for (std::int64_t i = 0; i < f.size(); ++i)
      f[i] = cplx(rng.normal(), rng.normal());

    const CellFunction gf = apply_G(ph.zeta1, f);
    const CellFunction back = apply_conjugated_operator(ph.zeta1, gf);
    CellFunction diff = back;
    diff -= f;
    REQUIRE(diff.linf() < 1e-9 * f.linf());

    // Norm bound pi R / tau.
    REQUIRE(gf.l2() <= 1.01 * multiplier_norm_bound(ph.tau, g.R()) * f.l2());
  }
}

TEST_CASE("remainder fixed point converges and solves the integral equation") {
  const CellGeometry g = make_geom_quarters(2, 0.8);
  const GridSpec grid(4, 8);

  CellFunction q(g, grid);
  q.fill([&](const std::vector<double>& x) {
    const double t1 = x[1] / g.R(), t2 = x[2] / g.R();
    return cplx(0.5 * std::exp(-4.0 * (t1 * t1 + t2 * t2)), 0.0);
  });
  const CellFunction q_ext = extend_potential(q);

  CgoParams p;
  p.n = 2;
  p.theta = 0.3;
  p.k = 0.5;
  p.r = 2.0;
  p.xi = {1.0, 0.0};
  p.eta = {0.0, 3.0};
  const CgoPhase ph = build_phase(p);
  REQUIRE(ph.tau > 2.0 * M_PI * g.R() * q_ext.linf());

  const RemainderSolve sol = solve_remainder(ph, 1, q_ext, 1e-11, 100);
  REQUIRE(sol.iterations < 50);
  REQUIRE(sol.final_update <= 1e-11);
  REQUIRE(sol.contraction < 2.0 * M_PI * g.R() * q_ext.linf() / ph.tau * 2.0);

  // r + G(q r) + G(q) = 0.
  CellFunction lhs = sol.remainder;
  lhs += apply_G(ph.zeta1, hadamard(q_ext, sol.remainder));
  lhs += apply_G(ph.zeta1, q_ext);
  REQUIRE(lhs.l2() < 1e-9);

  // Remainder magnitude behaves like (pi R / tau) ||q||.
  REQUIRE(sol.remainder.l2() <=
          1.01 * multiplier_norm_bound(ph.tau, g.R()) * q_ext.l2() /
              (1.0 - sol.contraction));
  REQUIRE(sol.c_constant < 100.0);

  // Nonconvergence guard: tau below the contraction threshold throws.
  CellFunction big = q_ext;
  big *= cplx(1000.0);
  REQUIRE_THROWS_AS(solve_remainder(ph, 1, big), nonconvergent_error);
}

TEST_CASE("assembled solutions vanish on the reflection plane") {
  const CellGeometry g = make_geom_quarters(2, 0.8);
  const GridSpec grid(4, 8);

  CellFunction q(g, grid);
  q.fill([&](const std::vector<double>& x) {
    return cplx(0.3 * std::cos(M_PI * x[1] / g.R()), 0.0);
  });
  const CellFunction q_ext = extend_potential(q);

  CgoParams p;
  p.n = 2;
  p.theta = 1.9;
  p.k = 1.0;
  p.r = 1.2;
  p.xi = {-1.0, 0.0};
  p.eta = {0.0, 2.0};
  const CgoPhase ph = build_phase(p);

  const RemainderSolve sol = solve_remainder(ph, 1, q_ext);
  const CellFunction v = assemble_v(ph, 1, sol.remainder);

  // Slice x_n = 0 is the plane i_n = N/2.
  std::vector<std::int64_t> mi;
  double plane_max = 0.0, total_max = v.linf();
  for (std::int64_t i = 0; i < v.size(); ++i) {
    v.unflatten(i, mi);
    if (mi.back() == grid.N / 2) plane_max = std::max(plane_max, std::abs(v[i]));
  }
  REQUIRE(plane_max < 1e-12 * total_max);
}

TEST_CASE("reported multiplier norm dominates the action of G") {
  const double R = 1.0;
  Rng rng(97);

  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + (trial % 2);
    const CellGeometry g = make_geom_quarters(n, R);
    const GridSpec grid(8, 8);
    // The multiplier frame needs Re zeta' on a coordinate axis.
    const CgoParams p = random_cgo_params(rng, n, /*axis_aligned=*/true);
    const CgoPhase ph = build_phase(p);

    const double measured = measured_G_norm(ph.zeta1, g, grid);
    CHECK(measured > 0.0);
    CHECK(measured <= 1.01 * multiplier_norm_bound(ph.tau, R));

    // No field can beat the reported operator norm (Parseval-exact).
    CellFunction phi(g, grid);
    for (std::int64_t i = 0; i < phi.size(); ++i)
      phi[i] = cplx(rng.normal(), rng.normal());
    const CellFunction gphi = apply_G(ph.zeta1, phi);
    CHECK(gphi.l2() <= measured * phi.l2() * (1.0 + 1e-10));

    // The second frequency runs through the same admissibility gate.
    const double measured2 = measured_G_norm(ph.zeta2, g, grid);
    CHECK(measured2 <= 1.01 * multiplier_norm_bound(ph.tau, R));
  }

  // Size mismatch is rejected.
  const CellGeometry g = make_geom_quarters(2, R);
  std::vector<cplx> bad(2, cplx(0.0));
  CHECK_THROWS_AS(measured_G_norm(bad, g, GridSpec(8, 8)), domain_error);
}

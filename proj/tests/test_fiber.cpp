#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "fcgo/cell_function.hpp"
#include "fcgo/fiber.hpp"
#include "fcgo/geometry.hpp"
#include "fcgo/rng.hpp"

using namespace fcgo;
using Catch::Approx;

namespace {

CellGeometry make_geom(int n, double R) {
  std::vector<Interval> box(n, Interval{-2.0 * R / 3.0, R / 3.0});
  box[n - 1] = Interval{-2.0 * R / 3.0, 0.0};
  return CellGeometry(n, R, box);
}

CellGeometry make_geom_quarters(int n, double R) {
  std::vector<Interval> box(n, Interval{-0.5 * R, 0.5 * R});
  box[n - 1] = Interval{-0.5 * R, 0.0};
  return CellGeometry(n, R, box);
}

/// Nonnegative bump potential supported well inside omega.
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
    return cplx(amp * std::exp(-25.0 * s) * (1.2 + std::cos(2.0 * M_PI * x[0])));
  });
  return make_potential(std::move(q));
}

}  // namespace

TEST_CASE("trace grid bookkeeping matches the box geometry") {
  const CellGeometry g2 = make_geom_quarters(2, 1.0);
  const GridSpec grid2(4, 8);
  BoxLattice box2(g2, grid2);
  TraceGrid tg2(box2);

  // Box over [-1/2,1/2] x [-1/2,0]: 5 x 3 spatial nodes, 3 x 1 interior.
  REQUIRE(box2.spatial_count() == 15);
  REQUIRE(tg2.surface_count() == 12);
  REQUIRE(tg2.size() == 12 * 4);

  // Lateral surface measure: 1 (axial) * perimeter of a 1 x 0.5 rectangle.
  double wsum = 0.0;
  std::int64_t gamma0 = 0;
  std::vector<std::int64_t> mi;
  std::vector<double> x;
  CellFunction probe(g2, grid2);
  for (std::int64_t t = 0; t < tg2.size(); ++t) {
    wsum += tg2.surface_weight(t);
    if (tg2.on_xn_zero(t)) {
      ++gamma0;
      tg2.cell_index(t, mi);
      probe.point(mi, x);
      REQUIRE(x[2] == Approx(0.0).margin(1e-14));
    }
    const int face = tg2.face(t);
    REQUIRE(face >= 0);
    REQUIRE(face < 4);
    std::int64_t g0, g1b, g2b;
    tg2.stencil(t, g0, g1b, g2b);
    REQUIRE(g0 >= 0);
    REQUIRE(g2b >= 0);
    REQUIRE(g0 < box2.total());
    REQUIRE(g1b < box2.total());
    REQUIRE(g2b < box2.total());
    REQUIRE(g0 != g1b);
    REQUIRE(g1b != g2b);
  }
  // Weights are per layer, so the total already includes the factor 4 * h0.
  REQUIRE(wsum / 4.0 == Approx(3.0 / 4.0).epsilon(1e-12));
  REQUIRE(gamma0 == 5 * 4);

  // Volume weights sum to |omega| per layer.
  double vsum = 0.0;
  std::vector<std::int64_t> b;
  for (std::int64_t s = 0; s < box2.spatial_count(); ++s) {
    box2.spatial_unflatten(s, b);
    vsum += box2.volume_weight(b);
  }
  REQUIRE(vsum * 4 == Approx(0.5).epsilon(1e-12));

  // n = 3: lateral area of a (1, 1, 2/3) box is 2*(2/3) + 2*(2/3) + 2*1.
  const CellGeometry g3 = make_geom(3, 1.0);
  const GridSpec grid3(2, 6);
  TraceGrid tg3{BoxLattice(g3, grid3)};
  double wsum3 = 0.0;
  for (std::int64_t t = 0; t < tg3.size(); ++t) wsum3 += tg3.surface_weight(t);
  REQUIRE(wsum3 / 2.0 == Approx(14.0 / 3.0 / 2.0).epsilon(1e-12));
}

TEST_CASE("quadratic harmonic data is reproduced exactly") {
  // u = x1^2 - xn^2 is harmonic and quadratic, so both the centered interior
  // stencil and the one-sided boundary stencil are exact for it.
  for (int n : {2, 3}) {
    const CellGeometry g = (n == 2) ? make_geom_quarters(2, 1.0)
                                    : make_geom(3, 1.0);
    const GridSpec grid(4, n == 2 ? 8 : 6);
    CellFunction u(g, grid);
    u.fill([&](const std::vector<double>& x) {
      return cplx(x[1] * x[1] - x[n] * x[n]);
    });

    const Potential q0 = zero_potential(g, grid);
    FiberSystem sys(q0, 0.0);
    const TraceFunction f = sys.trace_of(u);
    const Eigen::VectorXcd field = sys.solve_box(f.values);

    const BoxLattice& box = sys.box();
    std::vector<std::int64_t> b, mi;
    std::vector<double> x;
    for (std::int64_t s = 0; s < box.spatial_count(); ++s) {
      box.spatial_unflatten(s, b);
      for (std::int64_t i0 = 0; i0 < box.layer_count(); ++i0) {
        box.cell_index(i0, b, mi);
        u.point(mi, x);
        const cplx expect(x[1] * x[1] - x[n] * x[n]);
        REQUIRE(std::abs(field[i0 * box.spatial_count() + s] - expect) <
                1e-10);
      }
    }

    // One-sided normal derivative is exact for quadratics.
    const Eigen::VectorXcd dn = sys.dn_from_box(field);
    const TraceGrid& tg = sys.traces();
    for (std::int64_t t = 0; t < tg.size(); ++t) {
      tg.cell_index(t, mi);
      u.point(mi, x);
      const int face = tg.face(t);
      const int axis = face / 2 + 1;  // 1-based spatial axis
      double grad = 0.0;
      if (axis == 1) grad = 2.0 * x[1];
      if (axis == n) grad = -2.0 * x[n];
      const double expect = (face % 2 == 1) ? grad : -grad;
      REQUIRE(std::abs(dn[t] - expect) < 1e-9);
    }
  }
}

TEST_CASE("discrete separated mode is solved to machine precision") {
  // u(i0, b) = e^{i beta i0 h0} rho^{b1} solves the *discrete* equation
  // exactly when rho + 1/rho = 2 + mu0 h^2 with mu0 the discrete axial
  // eigenvalue, and is theta-quasi-periodic for beta = theta + 2 pi m.
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(6, 8);
  const double theta = 0.7;
  const double beta = theta + 2.0 * M_PI;
  const double h0 = grid.h0();
  const double h = grid.h(g.R());
  const double mu0 = (2.0 - 2.0 * std::cos(beta * h0)) / (h0 * h0);
  const double c = 1.0 + 0.5 * mu0 * h * h;
  const double rho = c + std::sqrt(c * c - 1.0);

  const auto spans = omega_spans(g, grid);
  CellFunction u(g, grid);
  u.fill([&](const std::vector<double>& x) {
    const double b1 = (x[1] + g.R()) / h - double(spans[0].lo);
    return std::exp(cplx(0.0, beta * x[0])) * std::pow(rho, b1);
  });

  FiberSystem sys(zero_potential(g, grid), theta);
  const TraceFunction f = sys.trace_of(u);
  const Eigen::VectorXcd field = sys.solve_box(f.values);

  const BoxLattice& box = sys.box();
  std::vector<std::int64_t> b, mi;
  double err = 0.0, scale = 0.0;
  for (std::int64_t s = 0; s < box.spatial_count(); ++s) {
    box.spatial_unflatten(s, b);
    for (std::int64_t i0 = 0; i0 < box.layer_count(); ++i0) {
      box.cell_index(i0, b, mi);
      const cplx expect =
          std::exp(cplx(0.0, beta * i0 * h0)) * std::pow(rho, double(b[0]));
      const cplx got = field[i0 * box.spatial_count() + s];
      err = std::max(err, std::abs(got - expect));
      scale = std::max(scale, std::abs(expect));
    }
  }
  REQUIRE(err < 1e-9 * scale);
}

TEST_CASE("zero boundary data gives the zero field") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(4, 8);
  const Potential q = bump_potential(g, grid, 0.8);
  FiberSystem sys(q, 1.9);
  TraceFunction f;
  f.grid = sys.traces_ptr();
  f.values = Eigen::VectorXcd::Zero(sys.traces().size());
  const CellFunction sol = solve_fiber(q, 1.9, f);
  REQUIRE(sol.linf() == 0.0);
}

TEST_CASE("solution vanishes outside the box closure") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(4, 8);
  const Potential q = bump_potential(g, grid, 0.5);
  CellFunction data(g, grid);
  data.fill([](const std::vector<double>& x) {
    return cplx(1.0 + x[1], 0.25 * x[2]);
  });
  const TraceFunction f = make_trace(g, grid, data);
  const CellFunction sol = solve_fiber(q, 0.4, f);

  const auto spans = omega_spans(g, grid);
  std::vector<std::int64_t> mi{0, 0, 0};  // axis-1 index 0 < spans[0].lo
  REQUIRE(spans[0].lo >= 1);
  REQUIRE(std::abs(sol[sol.flat(mi)]) == 0.0);
  mi = {1, spans[0].lo, spans[1].lo};  // a boundary node carries the data
  REQUIRE(std::abs(sol[sol.flat(mi)]) > 0.0);
}

TEST_CASE("independent dense assembly reproduces the DN matrix") {
  // Oracle: assemble the full box-node system (boundary rows = identity)
  // with its own index layout, solve with a full-pivot LU, and apply the
  // one-sided stencil directly.
  const CellGeometry g = make_geom(2, 1.0);
  const GridSpec grid(4, 6);
  const double theta = 2.1;
  const Potential q = bump_potential(g, grid, 0.9);

  const DnMap dn = assemble_dn(q, theta);
  const TraceGrid& tg = *dn.grid;

  const auto spans = omega_spans(g, grid);
  const std::int64_t c1 = spans[0].cells(), c2 = spans[1].cells();
  const std::int64_t N0 = grid.N0;
  const std::int64_t nodes = (c1 + 1) * (c2 + 1) * N0;
  const double h = grid.h(g.R());
  const double h0 = grid.h0();
  // Deliberately different flattening order than the library.
  auto oid = [&](std::int64_t i0, std::int64_t b1, std::int64_t b2) {
    return (b2 * (c1 + 1) + b1) * N0 + i0;
  };

  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(nodes, nodes);
  std::vector<std::int64_t> mi(3);
  for (std::int64_t b2 = 0; b2 <= c2; ++b2)
    for (std::int64_t b1 = 0; b1 <= c1; ++b1)
      for (std::int64_t i0 = 0; i0 < N0; ++i0) {
        const std::int64_t row = oid(i0, b1, b2);
        const bool bdry = (b1 == 0 || b1 == c1 || b2 == 0 || b2 == c2);
        if (bdry) {
          A(row, row) = 1.0;
          continue;
        }
        mi = {i0, spans[0].lo + b1, spans[1].lo + b2};
        const double qv = q.values[q.values.flat(mi)].real();
        A(row, row) = 2.0 / (h0 * h0) + 4.0 / (h * h) + qv;
        const cplx wrap = std::exp(cplx(0.0, theta));
        A(row, oid((i0 + 1) % N0, b1, b2)) +=
            (i0 + 1 == N0 ? wrap : cplx(1.0)) * (-1.0 / (h0 * h0));
        A(row, oid((i0 + N0 - 1) % N0, b1, b2)) +=
            (i0 == 0 ? std::conj(wrap) : cplx(1.0)) * (-1.0 / (h0 * h0));
        A(row, oid(i0, b1 - 1, b2)) += -1.0 / (h * h);
        A(row, oid(i0, b1 + 1, b2)) += -1.0 / (h * h);
        A(row, oid(i0, b1, b2 - 1)) += -1.0 / (h * h);
        A(row, oid(i0, b1, b2 + 1)) += -1.0 / (h * h);
      }
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(A);

  // Oracle trace node -> (i0, b1, b2), keyed by the library enumeration.
  const std::int64_t T = tg.size();
  std::vector<std::int64_t> ti0(T), tb1(T), tb2(T);
  for (std::int64_t t = 0; t < T; ++t) {
    tg.cell_index(t, mi);
    ti0[t] = mi[0];
    tb1[t] = mi[1] - spans[0].lo;
    tb2[t] = mi[2] - spans[1].lo;
  }

  double maxdiff = 0.0, scale = 0.0;
  for (std::int64_t t = 0; t < T; ++t) {
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nodes);
    rhs[oid(ti0[t], tb1[t], tb2[t])] = 1.0;
    const Eigen::VectorXcd u = lu.solve(rhs);
    for (std::int64_t m = 0; m < T; ++m) {
      const std::int64_t i0 = ti0[m], b1 = tb1[m], b2 = tb2[m];
      cplx val;
      if (b1 == 0)
        val = (3.0 * u[oid(i0, 0, b2)] - 4.0 * u[oid(i0, 1, b2)] +
               u[oid(i0, 2, b2)]) /
              (2.0 * h);
      else if (b1 == c1)
        val = (3.0 * u[oid(i0, c1, b2)] - 4.0 * u[oid(i0, c1 - 1, b2)] +
               u[oid(i0, c1 - 2, b2)]) /
              (2.0 * h);
      else if (b2 == 0)
        val = (3.0 * u[oid(i0, b1, 0)] - 4.0 * u[oid(i0, b1, 1)] +
               u[oid(i0, b1, 2)]) /
              (2.0 * h);
      else
        val = (3.0 * u[oid(i0, b1, c2)] - 4.0 * u[oid(i0, b1, c2 - 1)] +
               u[oid(i0, b1, c2 - 2)]) /
              (2.0 * h);
      maxdiff = std::max(maxdiff, std::abs(dn.matrix(m, t) - val));
      scale = std::max(scale, std::abs(val));
    }
  }
  REQUIRE(maxdiff < 1e-9 * scale);
}

TEST_CASE("solver paths agree") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(4, 8);
  const Potential q = bump_potential(g, grid, 0.7);
  const double theta = 0.9;

  SolverOptions dense;
  dense.mode = SolverOptions::Mode::dense;
  SolverOptions sparse;
  sparse.mode = SolverOptions::Mode::sparse_direct;
  SolverOptions iter;
  iter.mode = SolverOptions::Mode::iterative;
  iter.tol = 1e-13;
  iter.residual_bound = 1e-8;

  const DnMap a = assemble_dn(q, theta, dense);
  const DnMap b = assemble_dn(q, theta, sparse);
  REQUIRE((a.matrix - b.matrix).cwiseAbs().maxCoeff() <
          1e-9 * a.matrix.cwiseAbs().maxCoeff());

  CellFunction data(g, grid);
  data.fill([](const std::vector<double>& x) {
    return cplx(std::cos(2.0 * M_PI * x[0]) + x[1], x[2]);
  });
  const TraceFunction f = make_trace(g, grid, data);
  const CellFunction u_dense = solve_fiber(q, theta, f, dense);
  const CellFunction u_iter = solve_fiber(q, theta, f, iter);
  double diff = 0.0;
  for (std::int64_t i = 0; i < u_dense.size(); ++i)
    diff = std::max(diff, std::abs(u_dense[i] - u_iter[i]));
  REQUIRE(diff < 1e-7 * u_dense.linf());
}

TEST_CASE("refinement converges at second order") {
  // Continuum solution u = e^{i beta x0 + beta x1}, beta = theta, harmonic
  // and theta-quasi-periodic; interior error should drop by ~4x per halving.
  const double theta = 2.0;
  auto run = [&](int N0, int N) {
    const CellGeometry g = make_geom_quarters(2, 1.0);
    const GridSpec grid(N0, N);
    CellFunction u(g, grid);
    u.fill([&](const std::vector<double>& x) {
      return std::exp(cplx(theta * x[1], theta * x[0]));
    });
    FiberSystem sys(zero_potential(g, grid), theta);
    const Eigen::VectorXcd field = sys.solve_box(sys.trace_of(u).values);
    const BoxLattice& box = sys.box();
    std::vector<std::int64_t> b, mi;
    std::vector<double> x;
    double err = 0.0;
    for (std::int64_t s = 0; s < box.spatial_count(); ++s) {
      box.spatial_unflatten(s, b);
      for (std::int64_t i0 = 0; i0 < box.layer_count(); ++i0) {
        box.cell_index(i0, b, mi);
        u.point(mi, x);
        const cplx expect = std::exp(cplx(theta * x[1], theta * x[0]));
        err = std::max(err,
                       std::abs(field[i0 * box.spatial_count() + s] - expect));
      }
    }
    return err;
  };
  const double e1 = run(8, 8);
  const double e2 = run(16, 16);
  REQUIRE(e1 / e2 > 3.0);
  REQUIRE(e1 / e2 < 5.0);
}

TEST_CASE("boundary norm matches the Gram quadratic form") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(4, 8);
  const double theta = 1.3;
  const Eigen::MatrixXcd G = build_hscript_gram(g, grid, theta);

  auto tg = std::make_shared<TraceGrid>(BoxLattice(g, grid));
  Rng rng(77);
  TraceFunction f;
  f.grid = tg;
  f.values.resize(tg->size());
  for (std::int64_t t = 0; t < tg->size(); ++t)
    f.values[t] = cplx(rng.normal(), rng.normal());

  const double direct = hscript_norm(f, theta);
  const double viagram =
      std::sqrt(std::abs((f.values.adjoint() * (G * f.values))(0, 0)));
  REQUIRE(direct == Approx(viagram).epsilon(1e-10));
  REQUIRE(direct > 0.0);

  TraceFunction f2 = f;
  f2.values *= cplx(2.0);
  REQUIRE(hscript_norm(f2, theta) == Approx(2.0 * direct).epsilon(1e-12));

  f2.values.setZero();
  REQUIRE(hscript_norm(f2, theta) == 0.0);
}

TEST_CASE("DN difference norm recovers a planted rank-one perturbation") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(4, 8);
  const double theta = 0.6;
  const Potential q = bump_potential(g, grid, 0.5);

  const DnMap A = assemble_dn(q, theta);
  const TraceGrid& tg = *A.grid;
  const std::int64_t T = tg.size();
  const Eigen::MatrixXcd G = build_hscript_gram(g, grid, theta);

  // E f = u (v, f)_G / ||v||_G with ||u||_{L2(surface)} = 1 has generalized
  // singular value exactly 1; then sup ||eps E f|| / ||f|| = eps.
  Rng rng(4242);
  Eigen::VectorXcd u(T), v(T);
  for (std::int64_t t = 0; t < T; ++t) {
    u[t] = cplx(rng.normal(), rng.normal());
    v[t] = cplx(rng.normal(), rng.normal());
  }
  double un = 0.0;
  for (std::int64_t t = 0; t < T; ++t)
    un += tg.surface_weight(t) * std::norm(u[t]);
  u /= std::sqrt(un);
  const Eigen::VectorXcd Gv = G * v;
  const double vn = std::sqrt(std::abs((v.adjoint() * Gv)(0, 0)));
  const double eps = 1e-3;
  DnMap B = A;
  B.matrix = A.matrix - eps * (u * (Gv / vn).adjoint());

  const double sigma = dn_diff_norm(A, B, /*restrict_gamma1=*/false, G);
  REQUIRE(sigma == Approx(eps).epsilon(1e-6));

  // Identical maps: exact zero, fast path.
  REQUIRE(dn_diff_norm(A, A, true, G) == 0.0);

  // Restricting both the data and the measurement cannot increase the norm.
  const double restricted = dn_diff_norm(A, B, true, G);
  REQUIRE(restricted <= sigma + 1e-12);
}

TEST_CASE("potential admissibility is enforced") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(4, 8);
  // First Dirichlet eigenvalue of the (1, 0.5) box: pi^2 (1 + 4).
  const double eig = std::pow(g.poincare_constant(), 2);
  REQUIRE(eig == Approx(M_PI * M_PI * 5.0).epsilon(1e-12));

  // Negative part at the coercivity limit.
  CellFunction qv(g, grid);
  qv.fill([](const std::vector<double>&) { return cplx(-50.0); });
  REQUIRE_THROWS_AS(FiberSystem(make_potential(qv), 0.0),
                    admissibility_error);

  // Understated bound metadata.
  Potential lying;
  lying.values = CellFunction(g, grid);
  lying.values.fill([](const std::vector<double>&) { return cplx(3.0); });
  lying.m_plus = 1.0;
  lying.m_minus = 0.0;
  REQUIRE_THROWS_AS(FiberSystem(lying, 0.0), admissibility_error);

  Potential lying2;
  lying2.values = CellFunction(g, grid);
  lying2.values.fill([](const std::vector<double>&) { return cplx(-2.0); });
  lying2.m_plus = 2.0;
  lying2.m_minus = 1.0;
  REQUIRE_THROWS_AS(FiberSystem(lying2, 0.0), admissibility_error);

  // Complex-valued samples are rejected.
  CellFunction qc(g, grid);
  qc.fill([](const std::vector<double>&) { return cplx(0.1, 0.5); });
  Potential pc;
  pc.values = qc;
  pc.m_plus = 1.0;
  pc.m_minus = 0.0;
  REQUIRE_THROWS_AS(FiberSystem(pc, 0.0), admissibility_error);
}

TEST_CASE("trace restriction flag tracks support in the open boundary part") {
  const CellGeometry g = make_geom_quarters(2, 1.0);
  const GridSpec grid(4, 8);

  CellFunction vanishing(g, grid);
  vanishing.fill([](const std::vector<double>& x) {
    return cplx(x[2] * (1.0 + x[1]));  // zero on the plane x2 = 0
  });
  REQUIRE(make_trace(g, grid, vanishing).restricted_to_gamma1);

  CellFunction generic(g, grid);
  generic.fill([](const std::vector<double>& x) {
    return cplx(1.0 + x[1] + x[2]);
  });
  REQUIRE_FALSE(make_trace(g, grid, generic).restricted_to_gamma1);
}

#pragma once

//============================================================================
// Discrete forward solver for the fiber boundary value problem
//
//   (-Delta + q) u = 0   on (0,1) x omega,
//   u = f                on the lateral boundary (0,1) x d(omega),
//   u(1,.) = e^{i theta} u(0,.)   (theta-quasi-periodic wrap in x0),
//
// together with the discrete Dirichlet-to-Neumann (DN) map, the harmonic-
// extension boundary norm, and the DN-difference operator norm.
//
// Second-order centered differences in the interior; the x0 stencil couples
// layer N0-1 to layer 0 with factor e^{i theta} and conversely with
// e^{-i theta}.  The normal derivative is the one-sided second-order
// three-point stencil, evaluated from the assembled (boundary + interior)
// field.  Small systems use a dense LU factorization; larger ones a sparse
// direct factorization (batch-friendly: factor once, solve per column), with
// a preconditioned BiCGSTAB path available through SolverOptions.
//============================================================================

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fcgo/cell_function.hpp"
#include "fcgo/errors.hpp"
#include "fcgo/geometry.hpp"
#include "fcgo/rng.hpp"

namespace fcgo {

/// Bounded potential on the fiber cell with its admissibility metadata:
/// ||q||_inf <= m_plus and ||max(0,-q)||_inf <= m_minus, where m_minus must
/// stay below the first Dirichlet eigenvalue of the box omega (the square of
/// CellGeometry::poincare_constant), so the forward problem is coercive.
struct Potential {
  CellFunction values;
  double m_plus = 0.0;
  double m_minus = 0.0;
  std::optional<double> holder_alpha;
  std::optional<double> holder_c;
};

/// Potential with bound metadata measured from the samples.
inline Potential make_potential(CellFunction values,
                                std::optional<double> alpha = {},
                                std::optional<double> holder_c = {}) {
  Potential q;
  q.values = std::move(values);
  double pos = 0.0, neg = 0.0;
  for (std::int64_t i = 0; i < q.values.size(); ++i) {
    pos = std::max(pos, std::abs(q.values[i]));
    neg = std::max(neg, std::max(0.0, -q.values[i].real()));
  }
  q.m_plus = pos;
  q.m_minus = neg;
  q.holder_alpha = alpha;
  q.holder_c = holder_c;
  return q;
}

inline Potential zero_potential(const CellGeometry& g, const GridSpec& grid) {
  return make_potential(CellFunction(g, grid));
}

//----------------------------------------------------------------------------
// Closed-box lattice over the omega spans.
//----------------------------------------------------------------------------

/// Node bookkeeping for the closure of (0,1) x omega on the cell grid:
/// spatial box nodes b_j in [0, cells_j] on each axis (grid index
/// span_j.lo + b_j), replicated over N0 axial layers.
class BoxLattice {
 public:
  BoxLattice(const CellGeometry& g, const GridSpec& grid)
      : geom_(g), grid_(grid), spans_(omega_spans(g, grid)) {
    const int n = g.n();
    cells_.resize(n);
    for (int j = 0; j < n; ++j) cells_[j] = spans_[j].cells();
    strides_.assign(n, 1);
    for (int j = n - 2; j >= 0; --j)
      strides_[j] = strides_[j + 1] * (cells_[j + 1] + 1);
    bs_ = strides_[0] * (cells_[0] + 1);
  }

  const CellGeometry& geometry() const { return geom_; }
  const GridSpec& grid() const { return grid_; }
  const std::vector<AxisSpan>& spans() const { return spans_; }
  int n() const { return geom_.n(); }
  std::int64_t spatial_count() const { return bs_; }
  std::int64_t layer_count() const { return grid_.N0; }
  std::int64_t total() const { return bs_ * grid_.N0; }
  std::int64_t cells(int j) const { return cells_[j]; }
  double h() const { return grid_.h(geom_.R()); }
  double h0() const { return grid_.h0(); }

  std::int64_t spatial_flat(const std::vector<std::int64_t>& b) const {
    std::int64_t idx = 0;
    for (int j = 0; j < n(); ++j) idx += b[j] * strides_[j];
    return idx;
  }
  void spatial_unflatten(std::int64_t idx, std::vector<std::int64_t>& b) const {
    b.resize(n());
    for (int j = 0; j < n(); ++j) {
      b[j] = idx / strides_[j];
      idx -= b[j] * strides_[j];
    }
  }
  std::int64_t stride(int j) const { return strides_[j]; }

  bool is_interior(const std::vector<std::int64_t>& b) const {
    for (int j = 0; j < n(); ++j)
      if (b[j] == 0 || b[j] == cells_[j]) return false;
    return true;
  }

  /// Multi-index on the full cell grid for box node (i0, b).
  void cell_index(std::int64_t i0, const std::vector<std::int64_t>& b,
                  std::vector<std::int64_t>& mi) const {
    mi.resize(n() + 1);
    mi[0] = i0;
    for (int j = 0; j < n(); ++j) mi[j + 1] = spans_[j].lo + b[j];
  }

  /// Trapezoid volume weight of spatial box node b (the axial direction is
  /// periodic, so its weight is uniformly h0).
  double volume_weight(const std::vector<std::int64_t>& b) const {
    double w = h0();
    const double hs = h();
    for (int j = 0; j < n(); ++j)
      w *= (b[j] == 0 || b[j] == cells_[j]) ? 0.5 * hs : hs;
    return w;
  }

 private:
  CellGeometry geom_;
  GridSpec grid_;
  std::vector<AxisSpan> spans_;
  std::vector<std::int64_t> cells_;
  std::vector<std::int64_t> strides_;
  std::int64_t bs_ = 0;
};

//----------------------------------------------------------------------------
// Trace grid on the lateral boundary.
//----------------------------------------------------------------------------

/// Grid restriction of (0,1) x d(omega).  Face ids: the face of spatial axis
/// j (1-based) at the low end is 2(j-1), at the high end 2(j-1)+1; the face
/// in the plane {x_n = 0} (id 2n-1) is the closed part of the boundary where
/// no data is measured.  Edge and corner nodes appear once and are owned by
/// the smallest containing face id; their quadrature weight sums the
/// per-face trapezoid weights of every containing face.
class TraceGrid {
 public:
  explicit TraceGrid(const BoxLattice& box) : box_(box) {
    const int n = box.n();
    const std::int64_t bs = box.spatial_count();
    surface_of_box_.assign(bs, -1);
    std::vector<std::int64_t> b;
    const double hs = box.h();
    for (std::int64_t s = 0; s < bs; ++s) {
      box.spatial_unflatten(s, b);
      int owner = -1;
      double weight = 0.0;
      for (int j = 0; j < n; ++j) {
        int side = -1;
        if (b[j] == 0) side = 0;
        else if (b[j] == box.cells(j)) side = 1;
        if (side < 0) continue;
        const int face = 2 * j + side;
        if (owner < 0) owner = face;
        double fw = box.h0();
        for (int l = 0; l < n; ++l) {
          if (l == j) continue;
          fw *= (b[l] == 0 || b[l] == box.cells(l)) ? 0.5 * hs : hs;
        }
        weight += fw;
      }
      if (owner < 0) continue;  // interior spatial node
      SurfaceNode node;
      node.box_spatial = s;
      node.face = owner;
      node.weight = weight;
      node.on_xn_zero = (b[n - 1] == box.cells(n - 1));
      const int axis = owner / 2;
      const int side = owner % 2;
      const std::int64_t step = (side == 0) ? box.stride(axis) : -box.stride(axis);
      node.inward1 = s + step;
      node.inward2 = s + 2 * step;
      surface_of_box_[s] = static_cast<std::int64_t>(nodes_.size());
      nodes_.push_back(node);
    }
  }

  const BoxLattice& box() const { return box_; }
  std::int64_t surface_count() const {
    return static_cast<std::int64_t>(nodes_.size());
  }
  std::int64_t size() const { return surface_count() * box_.layer_count(); }

  /// Trace index of (axial layer, surface node).
  std::int64_t index(std::int64_t i0, std::int64_t s) const {
    return i0 * surface_count() + s;
  }
  std::int64_t layer_of(std::int64_t t) const { return t / surface_count(); }
  std::int64_t surface_of(std::int64_t t) const { return t % surface_count(); }

  std::int64_t surface_index_of_box(std::int64_t box_spatial) const {
    return surface_of_box_[box_spatial];
  }

  int face(std::int64_t t) const { return nodes_[surface_of(t)].face; }
  double surface_weight(std::int64_t t) const {
    return nodes_[surface_of(t)].weight;
  }
  bool on_xn_zero(std::int64_t t) const {
    return nodes_[surface_of(t)].on_xn_zero;
  }
  std::int64_t box_spatial(std::int64_t t) const {
    return nodes_[surface_of(t)].box_spatial;
  }

  /// Box-field indices entering the one-sided normal stencil at trace node t.
  void stencil(std::int64_t t, std::int64_t& g0, std::int64_t& g1,
               std::int64_t& g2) const {
    const std::int64_t i0 = layer_of(t);
    const SurfaceNode& nd = nodes_[surface_of(t)];
    const std::int64_t base = i0 * box_.spatial_count();
    g0 = base + nd.box_spatial;
    g1 = base + nd.inward1;
    g2 = base + nd.inward2;
  }

  /// Cell-grid multi-index of trace node t.
  void cell_index(std::int64_t t, std::vector<std::int64_t>& mi) const {
    std::vector<std::int64_t> b;
    box_.spatial_unflatten(nodes_[surface_of(t)].box_spatial, b);
    box_.cell_index(layer_of(t), b, mi);
  }

 private:
  struct SurfaceNode {
    std::int64_t box_spatial = 0;
    std::int64_t inward1 = 0;
    std::int64_t inward2 = 0;
    int face = 0;
    double weight = 0.0;
    bool on_xn_zero = false;
  };
  BoxLattice box_;
  std::vector<SurfaceNode> nodes_;
  std::vector<std::int64_t> surface_of_box_;
};

/// Dirichlet data sampled on the trace grid.
struct TraceFunction {
  std::shared_ptr<const TraceGrid> grid;
  Eigen::VectorXcd values;
  bool restricted_to_gamma1 = false;
};

/// Sample a cell function on a trace grid.  The restriction flag is set
/// when the samples vanish (to 1e-8 relative) on the plane {x_n = 0}.
inline TraceFunction sample_trace(std::shared_ptr<const TraceGrid> tg,
                                  const CellFunction& f) {
  TraceFunction tf;
  tf.grid = tg;
  tf.values.resize(tg->size());
  std::vector<std::int64_t> mi;
  double gamma0_max = 0.0, total_max = 0.0;
  for (std::int64_t t = 0; t < tg->size(); ++t) {
    tg->cell_index(t, mi);
    const cplx v = f[f.flat(mi)];
    tf.values[t] = v;
    total_max = std::max(total_max, std::abs(v));
    if (tg->on_xn_zero(t)) gamma0_max = std::max(gamma0_max, std::abs(v));
  }
  tf.restricted_to_gamma1 =
      (total_max == 0.0) || (gamma0_max <= 1e-8 * total_max);
  return tf;
}

inline TraceFunction make_trace(const CellGeometry& g, const GridSpec& grid,
                                const CellFunction& f) {
  auto tg = std::make_shared<TraceGrid>(BoxLattice(g, grid));
  return sample_trace(std::move(tg), f);
}

//----------------------------------------------------------------------------
// Solver configuration.
//----------------------------------------------------------------------------

struct SolverOptions {
  enum class Mode { automatic, dense, sparse_direct, iterative };
  Mode mode = Mode::automatic;
  std::int64_t dense_threshold = 1200;  ///< unknown count for the dense path
  double tol = 1e-12;                   ///< iterative solver tolerance
  int max_iterations = 0;               ///< 0 = choose from system size
  double residual_bound = 1e-10;        ///< relative residual acceptance
};

//----------------------------------------------------------------------------
// Assembled fiber operator for one (q, theta).
//----------------------------------------------------------------------------

class FiberSystem {
 public:
  FiberSystem(const Potential& q, double theta, SolverOptions opt = {})
      : theta_(theta),
        opt_(opt),
        box_(q.values.geometry(), q.values.grid()),
        traces_(std::make_shared<TraceGrid>(box_)) {
    validate_potential(q);
    assemble(q);
    factor();
  }

  const TraceGrid& traces() const { return *traces_; }
  std::shared_ptr<const TraceGrid> traces_ptr() const { return traces_; }
  const BoxLattice& box() const { return box_; }
  double theta() const { return theta_; }
  std::int64_t unknowns() const { return n_unknowns_; }

  /// Solve for one Dirichlet trace; returns the assembled field on the
  /// closed box lattice (boundary nodes carry the data itself).
  Eigen::VectorXcd solve_box(const Eigen::VectorXcd& f) const {
    Eigen::MatrixXcd F(f.size(), 1);
    F.col(0) = f;
    return solve_box_batch(F).col(0);
  }

  /// Column-wise batch solve.
  Eigen::MatrixXcd solve_box_batch(const Eigen::MatrixXcd& F) const {
    const std::int64_t T = traces_->size();
    if (F.rows() != T) throw domain_error("solve_box: trace size mismatch");
    Eigen::MatrixXcd rhs = -(coupling_ * F);
    Eigen::MatrixXcd sol = backsolve(rhs);

    // Relative residual of the discrete system, column by column.
    for (Eigen::Index c = 0; c < sol.cols(); ++c) {
      const double bn = rhs.col(c).norm();
      if (bn == 0.0) continue;
      const double res = (interior_ * sol.col(c) - rhs.col(c)).norm() / bn;
      if (!(res < opt_.residual_bound))
        throw solver_failure(
            "fiber solve: relative residual " + std::to_string(res) +
            " at theta=" + std::to_string(theta_) + " (grid N0=" +
            std::to_string(box_.grid().N0) + ", N=" +
            std::to_string(box_.grid().N) + ")");
    }

    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(box_.total(), F.cols());
    for (Eigen::Index c = 0; c < F.cols(); ++c) {
      for (std::int64_t t = 0; t < T; ++t) {
        const std::int64_t i0 = traces_->layer_of(t);
        out(i0 * box_.spatial_count() + traces_->box_spatial(t), c) = F(t, c);
      }
      for (std::int64_t u = 0; u < n_unknowns_; ++u)
        out(box_index_of_unknown_[u], c) = sol(u, c);
    }
    return out;
  }

  /// One-sided second-order normal derivative at every trace node, taken
  /// from an assembled box field (outward normal of the owning face).
  Eigen::VectorXcd dn_from_box(const Eigen::VectorXcd& boxfield) const {
    const std::int64_t T = traces_->size();
    Eigen::VectorXcd out(T);
    const double inv2h = 1.0 / (2.0 * box_.h());
    std::int64_t g0, g1, g2;
    for (std::int64_t t = 0; t < T; ++t) {
      traces_->stencil(t, g0, g1, g2);
      out[t] =
          (3.0 * boxfield[g0] - 4.0 * boxfield[g1] + boxfield[g2]) * inv2h;
    }
    return out;
  }

  /// Embed a box field into a cell function (zero outside the box closure).
  CellFunction box_to_cell(const Eigen::VectorXcd& boxfield) const {
    CellFunction out(box_.geometry(), box_.grid());
    std::vector<std::int64_t> b, mi;
    for (std::int64_t i0 = 0; i0 < box_.layer_count(); ++i0) {
      for (std::int64_t s = 0; s < box_.spatial_count(); ++s) {
        box_.spatial_unflatten(s, b);
        box_.cell_index(i0, b, mi);
        out[out.flat(mi)] = boxfield[i0 * box_.spatial_count() + s];
      }
    }
    return out;
  }

  /// Trapezoid L2 norm over the box closure of an assembled field.
  double box_l2(const Eigen::VectorXcd& boxfield) const {
    double s2 = 0.0;
    std::vector<std::int64_t> b;
    for (std::int64_t s = 0; s < box_.spatial_count(); ++s) {
      box_.spatial_unflatten(s, b);
      const double w = box_.volume_weight(b);
      for (std::int64_t i0 = 0; i0 < box_.layer_count(); ++i0)
        s2 += w * std::norm(boxfield[i0 * box_.spatial_count() + s]);
    }
    return std::sqrt(s2);
  }

  /// Sample a cell function on this system's trace grid.
  TraceFunction trace_of(const CellFunction& f) const {
    return sample_trace(traces_, f);
  }

 private:
  void validate_potential(const Potential& q) {
    const CellGeometry& g = q.values.geometry();
    const double pc = g.poincare_constant();
    const double eig = pc * pc;
    if (!(q.m_minus < eig))
      throw admissibility_error(
          "potential: negative-part bound " + std::to_string(q.m_minus) +
          " must stay below the box eigenvalue " + std::to_string(eig));
    double pos = 0.0, neg = 0.0, imag = 0.0;
    std::vector<std::int64_t> b, mi;
    for (std::int64_t s = 0; s < box_.spatial_count(); ++s) {
      box_.spatial_unflatten(s, b);
      for (std::int64_t i0 = 0; i0 < box_.layer_count(); ++i0) {
        box_.cell_index(i0, b, mi);
        const cplx v = q.values[q.values.flat(mi)];
        pos = std::max(pos, std::abs(v));
        neg = std::max(neg, std::max(0.0, -v.real()));
        imag = std::max(imag, std::abs(v.imag()));
      }
    }
    if (imag > 1e-12)
      throw admissibility_error("potential: values must be real");
    if (pos > q.m_plus + 1e-12)
      throw admissibility_error("potential: ||q||_inf exceeds m_plus");
    if (neg > q.m_minus + 1e-12)
      throw admissibility_error(
          "potential: negative part exceeds m_minus");
  }

  void assemble(const Potential& q) {
    const int n = box_.n();
    const std::int64_t bs = box_.spatial_count();
    const std::int64_t N0 = box_.layer_count();

    // Interior spatial nodes.
    interior_of_box_.assign(bs, -1);
    std::vector<std::int64_t> b;
    std::int64_t is = 0;
    for (std::int64_t s = 0; s < bs; ++s) {
      box_.spatial_unflatten(s, b);
      if (box_.is_interior(b)) interior_of_box_[s] = is++;
    }
    const std::int64_t IS = is;
    n_unknowns_ = IS * N0;
    box_index_of_unknown_.resize(n_unknowns_);

    const double h = box_.h();
    const double h0 = box_.h0();
    const double ch = 1.0 / (h * h);
    const double c0 = 1.0 / (h0 * h0);
    const cplx up = cplx(std::cos(theta_), std::sin(theta_)) * (-c0);
    const cplx dn = std::conj(cplx(std::cos(theta_), std::sin(theta_))) * (-c0);

    std::vector<Eigen::Triplet<cplx>> ta, tc;
    ta.reserve(n_unknowns_ * (2 * n + 3));
    tc.reserve(n_unknowns_ * 2);
    std::vector<std::int64_t> mi;

    for (std::int64_t s = 0; s < bs; ++s) {
      const std::int64_t u_sp = interior_of_box_[s];
      if (u_sp < 0) continue;
      box_.spatial_unflatten(s, b);
      for (std::int64_t i0 = 0; i0 < N0; ++i0) {
        const std::int64_t row = i0 * IS + u_sp;
        box_index_of_unknown_[row] = i0 * bs + s;
        box_.cell_index(i0, b, mi);
        const double qv = q.values[q.values.flat(mi)].real();

        ta.emplace_back(row, row, cplx(2.0 * c0 + 2.0 * n * ch + qv));

        // Axial neighbors with the quasi-periodic wrap.
        const std::int64_t ip = (i0 + 1) % N0;
        const std::int64_t im = (i0 - 1 + N0) % N0;
        ta.emplace_back(row, ip * IS + u_sp, (i0 + 1 == N0) ? up : cplx(-c0));
        ta.emplace_back(row, im * IS + u_sp, (i0 == 0) ? dn : cplx(-c0));

        // Spatial neighbors: interior -> matrix, boundary -> coupling.
        for (int j = 0; j < n; ++j) {
          for (int dir = -1; dir <= 1; dir += 2) {
            const std::int64_t sn = s + dir * box_.stride(j);
            const std::int64_t un = interior_of_box_[sn];
            if (un >= 0) {
              ta.emplace_back(row, i0 * IS + un, cplx(-ch));
            } else {
              const std::int64_t ts = traces_->surface_index_of_box(sn);
              tc.emplace_back(row, traces_->index(i0, ts), cplx(-ch));
            }
          }
        }
      }
    }

    interior_.resize(n_unknowns_, n_unknowns_);
    interior_.setFromTriplets(ta.begin(), ta.end());
    coupling_.resize(n_unknowns_, traces_->size());
    coupling_.setFromTriplets(tc.begin(), tc.end());
  }

  void factor() {
    using Mode = SolverOptions::Mode;
    Mode m = opt_.mode;
    if (m == Mode::automatic)
      m = (n_unknowns_ <= opt_.dense_threshold) ? Mode::dense
                                                : Mode::sparse_direct;
    mode_ = m;
    if (m == Mode::dense) {
      dense_lu_ = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXcd>>(
          Eigen::MatrixXcd(interior_));
    } else if (m == Mode::sparse_direct) {
      sparse_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<cplx>>>();
      sparse_lu_->compute(interior_);
      if (sparse_lu_->info() != Eigen::Success)
        throw solver_failure("fiber solve: sparse factorization failed at "
                             "theta=" + std::to_string(theta_));
    }
    // The iterative path factors nothing up front.
  }

  Eigen::MatrixXcd backsolve(const Eigen::MatrixXcd& rhs) const {
    using Mode = SolverOptions::Mode;
    switch (mode_) {
      case Mode::dense:
        return dense_lu_->solve(rhs);
      case Mode::sparse_direct:
        return sparse_lu_->solve(rhs);
      default: {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<cplx>,
                        Eigen::IncompleteLUT<cplx>> it;
        it.setTolerance(opt_.tol);
        const int cap = opt_.max_iterations > 0
                            ? opt_.max_iterations
                            : static_cast<int>(
                                  200 + 10 * std::sqrt(double(n_unknowns_)));
        it.setMaxIterations(cap);
        it.compute(interior_);
        if (it.preconditioner().info() != Eigen::Success)
          throw solver_failure("fiber solve: ILUT preconditioner failed");
        Eigen::MatrixXcd out(rhs.rows(), rhs.cols());
        for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
          out.col(c) = it.solve(rhs.col(c));
          if (it.info() != Eigen::Success)
            throw solver_failure(
                "fiber solve: BiCGSTAB stalled at theta=" +
                std::to_string(theta_));
        }
        return out;
      }
    }
  }

  double theta_ = 0.0;
  SolverOptions opt_;
  BoxLattice box_;
  std::shared_ptr<TraceGrid> traces_;
  SolverOptions::Mode mode_ = SolverOptions::Mode::dense;
  std::int64_t n_unknowns_ = 0;
  std::vector<std::int64_t> interior_of_box_;
  std::vector<std::int64_t> box_index_of_unknown_;
  Eigen::SparseMatrix<cplx> interior_;
  Eigen::SparseMatrix<cplx> coupling_;
  std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXcd>> dense_lu_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<cplx>>> sparse_lu_;
};

//----------------------------------------------------------------------------
// Spec-level operations.
//----------------------------------------------------------------------------

/// Dirichlet solve on the fiber cell; the solution is returned on the cell
/// grid (zero outside the box closure).
inline CellFunction solve_fiber(const Potential& q, double theta,
                                const TraceFunction& f,
                                SolverOptions opt = {}) {
  FiberSystem sys(q, theta, opt);
  if (f.values.size() != sys.traces().size())
    throw domain_error("solve_fiber: trace size mismatch");
  return sys.box_to_cell(sys.solve_box(f.values));
}

/// Discrete DN map for (q, theta).
struct DnMap {
  double theta = 0.0;
  std::shared_ptr<const TraceGrid> grid;
  Eigen::MatrixXcd matrix;
};

inline DnMap assemble_dn(const Potential& q, double theta,
                         SolverOptions opt = {}) {
  FiberSystem sys(q, theta, opt);
  const std::int64_t T = sys.traces().size();
  DnMap dn;
  dn.theta = theta;
  dn.grid = sys.traces_ptr();
  dn.matrix.resize(T, T);
  const std::int64_t chunk = 256;
  for (std::int64_t c0 = 0; c0 < T; c0 += chunk) {
    const std::int64_t m = std::min(chunk, T - c0);
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(T, m);
    for (std::int64_t c = 0; c < m; ++c) F(c0 + c, c) = cplx(1.0);
    const Eigen::MatrixXcd fields = sys.solve_box_batch(F);
    for (std::int64_t c = 0; c < m; ++c)
      dn.matrix.col(c0 + c) = sys.dn_from_box(fields.col(c));
  }
  return dn;
}

inline Eigen::VectorXcd apply_dn(const DnMap& dn, const Eigen::VectorXcd& f) {
  if (f.size() != dn.matrix.cols())
    throw domain_error("apply_dn: trace size mismatch");
  return dn.matrix * f;
}

/// Boundary norm || f ||: the L2 norm over the fiber cell of the harmonic
/// theta-quasi-periodic extension of f.
inline double hscript_norm(const TraceFunction& f, double theta,
                           SolverOptions opt = {}) {
  const TraceGrid& tg = *f.grid;
  FiberSystem sys(zero_potential(tg.box().geometry(), tg.box().grid()), theta,
                  opt);
  return sys.box_l2(sys.solve_box(f.values));
}

/// Gram matrix of the boundary norm on the trace basis: G[s,t] = inner
/// product of the harmonic extensions of the basis traces (trapezoid volume
/// weights).  Hermitian positive definite.
inline Eigen::MatrixXcd build_hscript_gram(const CellGeometry& g,
                                           const GridSpec& grid, double theta,
                                           SolverOptions opt = {}) {
  FiberSystem sys(zero_potential(g, grid), theta, opt);
  const std::int64_t T = sys.traces().size();
  const std::int64_t M = sys.box().total();

  Eigen::MatrixXcd E(M, T);
  const std::int64_t chunk = 256;
  for (std::int64_t c0 = 0; c0 < T; c0 += chunk) {
    const std::int64_t m = std::min(chunk, T - c0);
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(T, m);
    for (std::int64_t c = 0; c < m; ++c) F(c0 + c, c) = cplx(1.0);
    E.middleCols(c0, m) = sys.solve_box_batch(F);
  }

  // Scale rows by sqrt(volume weight), then one Hermitian product.
  std::vector<std::int64_t> b;
  const BoxLattice& box = sys.box();
  for (std::int64_t s = 0; s < box.spatial_count(); ++s) {
    box.spatial_unflatten(s, b);
    const double w = std::sqrt(box.volume_weight(b));
    for (std::int64_t i0 = 0; i0 < box.layer_count(); ++i0)
      E.row(i0 * box.spatial_count() + s) *= w;
  }
  Eigen::MatrixXcd G = E.adjoint() * E;
  // Symmetrize against roundoff.
  G = cplx(0.5) * (G + G.adjoint().eval());
  return G;
}

/// Largest generalized singular value of (A - B): sup over admissible f of
/// ||(A-B) f||_{L2(gamma1)} / ||f||_{boundary norm}, by power iteration on
/// the Gram-preconditioned normal operator.  With restrict_gamma1 the data
/// and the measurement both exclude every trace node in the plane
/// {x_n = 0}.
inline double dn_diff_norm(const DnMap& A, const DnMap& B,
                           bool restrict_gamma1,
                           const Eigen::MatrixXcd& gram,
                           double rel_tol = 1e-8, int cap = 5000) {
  if (A.grid.get() != B.grid.get() &&
      !(A.grid->size() == B.grid->size()))
    throw domain_error("dn_diff_norm: trace grids differ");
  if (A.theta != B.theta)
    throw domain_error("dn_diff_norm: fiber parameters differ");
  const TraceGrid& tg = *A.grid;
  const std::int64_t T = tg.size();
  if (gram.rows() != T || gram.cols() != T)
    throw domain_error("dn_diff_norm: gram size mismatch");

  std::vector<std::int64_t> keep;
  keep.reserve(T);
  for (std::int64_t t = 0; t < T; ++t)
    if (!restrict_gamma1 || !tg.on_xn_zero(t)) keep.push_back(t);
  const std::int64_t K = static_cast<std::int64_t>(keep.size());

  Eigen::MatrixXcd D(K, K);
  Eigen::MatrixXcd G(K, K);
  Eigen::VectorXd w(K);
  for (std::int64_t r = 0; r < K; ++r) {
    w[r] = tg.surface_weight(keep[r]) ;
    for (std::int64_t c = 0; c < K; ++c) {
      D(r, c) = A.matrix(keep[r], keep[c]) - B.matrix(keep[r], keep[c]);
      G(r, c) = gram(keep[r], keep[c]);
    }
  }
  if (D.norm() == 0.0) return 0.0;

  Eigen::LLT<Eigen::MatrixXcd> llt(G);
  if (llt.info() != Eigen::Success)
    throw solver_failure("dn_diff_norm: boundary Gram not positive definite");

  Rng rng(12345);
  Eigen::VectorXcd f(K);
  for (std::int64_t i = 0; i < K; ++i) f[i] = cplx(rng.normal(), rng.normal());
  f /= std::sqrt(std::abs((f.adjoint() * (G * f))(0, 0)));

  double sigma_prev = -1.0;
  for (int it = 0; it < cap; ++it) {
    const Eigen::VectorXcd y = D * f;
    const double num = (w.array() * y.array().abs2()).sum();
    const double den = std::abs((f.adjoint() * (G * f))(0, 0));
    const double sigma = std::sqrt(num / den);
    if (sigma_prev >= 0.0 &&
        std::abs(sigma - sigma_prev) <= rel_tol * std::max(sigma, 1e-300))
      return sigma;
    sigma_prev = sigma;

    Eigen::VectorXcd z = D.adjoint() * (w.asDiagonal() * y);
    f = llt.solve(z);
    const double fn = std::sqrt(std::abs((f.adjoint() * (G * f))(0, 0)));
    if (fn == 0.0) return 0.0;
    f /= fn;
  }
  throw nonconvergent_error("dn_diff_norm: power iteration cap reached",
                            sigma_prev);
}

/// Convenience overload that builds the Gram itself.
inline double dn_diff_norm(const DnMap& A, const DnMap& B,
                           bool restrict_gamma1, SolverOptions opt = {}) {
  const TraceGrid& tg = *A.grid;
  const Eigen::MatrixXcd gram = build_hscript_gram(
      tg.box().geometry(), tg.box().grid(), A.theta, opt);
  return dn_diff_norm(A, B, restrict_gamma1, gram);
}

}  // namespace fcgo

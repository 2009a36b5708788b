#pragma once

// Discrete substrate: periodic scalar fields on a flat-backed torus carrying a
// conformal metric g = e^{2u} (dx^2 + dy^2) and a weight function phi. The
// weighted measure is dmu = e^{-phi} dnu with dnu the Riemannian area element.
//
// Layout: f and phi live at nodes, gradients and |grad f|^p densities live at
// cell centers (staggered), u and phi are 4-point averaged to cell centers.
// This makes summation by parts exact: the discrete operator in spectral.hpp
// is the exact variational adjoint of the gradient defined here.

#include <cstdint>
#include <vector>

namespace rbflow {

// Parameters of the evolution system shared across modules.
struct FlowParams {
  double rho = 0.0;  // trace coupling; must satisfy rho < 1/(2(n-1))
  double p = 2.0;    // eigenvalue exponent; solver scope is p >= 1.1
  int n = 2;         // dimension (2 for the torus testbed, 3 for closed forms)

  // Throws std::invalid_argument naming every violated condition.
  void validate() const;
};

// Dense row-major scalar field with periodic 2-D indexing. Used both for
// node-centered and cell-centered data (the grids have the same shape: cell
// (i,j) has node (i,j) as its lower-left corner).
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int nx, int ny, double fill = 0.0);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return static_cast<int>(v_.size()); }

  // Periodic accessors; i, j may be any integers.
  double& at(int i, int j) { return v_[index(i, j)]; }
  double at(int i, int j) const { return v_[index(i, j)]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](int k) { return v_[k]; }
  double operator[](int k) const { return v_[k]; }

  double min() const;
  double max() const;
  bool all_finite() const;

  bool same_shape(const ScalarField& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_;
  }

 private:
  int index(int i, int j) const {
    const int ii = wrap(i, nx_);
    const int jj = wrap(j, ny_);
    return jj * nx_ + ii;
  }
  static int wrap(int k, int n) {
    const int m = k % n;
    return m < 0 ? m + n : m;
  }

  int nx_ = 0, ny_ = 0;
  std::vector<double> v_;
};

// Conformal torus state: background [0,Lx) x [0,Ly) with nx x ny nodes.
struct TorusGeometry {
  int nx = 0, ny = 0;
  double Lx = 0.0, Ly = 0.0;
  ScalarField u;    // conformal factor exponent, node-centered
  ScalarField phi;  // weight function, node-centered

  double hx() const { return Lx / nx; }
  double hy() const { return Ly / ny; }
  double node_x(int i) const { return i * hx(); }
  double node_y(int j) const { return j * hy(); }

  // Throws std::invalid_argument on bad shape / non-finite u, phi.
  void validate() const;
};

// Cell-centered gradient data for a node field f: components in the
// g-orthonormal frame (gx, gy) and the squared norm sq = |grad f|^2_g
// = e^{-2 u_c} |grad_0 f|^2 with u_c the 4-point cell average of u.
struct CellGradient {
  ScalarField gx, gy, sq;
};

// Compensated (Kahan) accumulator. Integrals below sum in a fixed chunked
// order so results are bit-identical regardless of how chunk sums might be
// scheduled; see integrate_* for the contract.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

// Node measures dmu_i = e^{-phi_i} e^{2 u_i} hx hy.
ScalarField measure_weights(const TorusGeometry& geom);

// Cell measures with u, phi sampled by 4-point averages.
ScalarField cell_measures(const TorusGeometry& geom);

// Staggered gradient of a node field, per cell; sq >= 0 by construction.
CellGradient gradient_sq(const TorusGeometry& geom, const ScalarField& f);

// integral of a node(cell) field against node(cell) measures. Fixed-order
// chunked compensated summation: bit-identical across reruns.
double integrate_nodes(const TorusGeometry& geom, const ScalarField& node_values);
double integrate_cells(const TorusGeometry& geom, const ScalarField& cell_values);

// Same reduction applied to an arbitrary vector of addends (used by the
// solver's inner products and by tests probing the determinism contract).
double fixed_order_sum(const double* x, int n);

}  // namespace rbflow

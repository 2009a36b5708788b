#include "rbflow/fields.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rbflow {

void FlowParams::validate() const {
  std::ostringstream bad;
  if (!(n == 2 || n == 3)) bad << "n must be 2 or 3; ";
  if (n >= 2 && !(rho < 1.0 / (2.0 * (n - 1)))) {
    bad << "rho < 1/(2(n-1)) violated (rho=" << rho << ", n=" << n << "); ";
  }
  if (!std::isfinite(rho)) bad << "rho must be finite; ";
  if (!(p >= 1.1) || !std::isfinite(p)) bad << "p must be finite and >= 1.1; ";
  const std::string s = bad.str();
  if (!s.empty()) throw std::invalid_argument("FlowParams: " + s);
}

ScalarField::ScalarField(int nx, int ny, double fill)
    : nx_(nx), ny_(ny), v_(static_cast<size_t>(nx) * ny, fill) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("ScalarField: nx, ny must be >= 1");
}

double ScalarField::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (double x : v_) m = std::min(m, x);
  return m;
}

double ScalarField::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v_) m = std::max(m, x);
  return m;
}

bool ScalarField::all_finite() const {
  for (double x : v_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void TorusGeometry::validate() const {
  std::ostringstream bad;
  if (nx < 3 || ny < 3) bad << "grid must be at least 3x3 (staggered stencils degenerate below); ";
  if (!(Lx > 0.0) || !(Ly > 0.0)) bad << "Lx, Ly must be positive; ";
  if (u.nx() != nx || u.ny() != ny) bad << "u shape mismatch; ";
  if (phi.nx() != nx || phi.ny() != ny) bad << "phi shape mismatch; ";
  if (u.size() == static_cast<int>(nx) * ny && !u.all_finite()) bad << "u has non-finite entries; ";
  if (phi.size() == static_cast<int>(nx) * ny && !phi.all_finite()) bad << "phi has non-finite entries; ";
  const std::string s = bad.str();
  if (!s.empty()) throw std::invalid_argument("TorusGeometry: " + s);
}

ScalarField measure_weights(const TorusGeometry& geom) {
  geom.validate();
  ScalarField m(geom.nx, geom.ny);
  const double cellarea = geom.hx() * geom.hy();
  for (int j = 0; j < geom.ny; ++j) {
    for (int i = 0; i < geom.nx; ++i) {
      m.at(i, j) = std::exp(-geom.phi.at(i, j) + 2.0 * geom.u.at(i, j)) * cellarea;
    }
  }
  return m;
}

ScalarField cell_measures(const TorusGeometry& geom) {
  geom.validate();
  ScalarField m(geom.nx, geom.ny);
  const double cellarea = geom.hx() * geom.hy();
  for (int j = 0; j < geom.ny; ++j) {
    for (int i = 0; i < geom.nx; ++i) {
      const double uc = 0.25 * (geom.u.at(i, j) + geom.u.at(i + 1, j) +
                                geom.u.at(i, j + 1) + geom.u.at(i + 1, j + 1));
      const double pc = 0.25 * (geom.phi.at(i, j) + geom.phi.at(i + 1, j) +
                                geom.phi.at(i, j + 1) + geom.phi.at(i + 1, j + 1));
      m.at(i, j) = std::exp(-pc + 2.0 * uc) * cellarea;
    }
  }
  return m;
}

CellGradient gradient_sq(const TorusGeometry& geom, const ScalarField& f) {
  geom.validate();
  if (!f.same_shape(geom.u)) throw std::invalid_argument("gradient_sq: field shape mismatch");
  CellGradient g{ScalarField(geom.nx, geom.ny), ScalarField(geom.nx, geom.ny),
                 ScalarField(geom.nx, geom.ny)};
  const double ihx = 1.0 / (2.0 * geom.hx());
  const double ihy = 1.0 / (2.0 * geom.hy());
  for (int j = 0; j < geom.ny; ++j) {
    for (int i = 0; i < geom.nx; ++i) {
      const double f00 = f.at(i, j), f10 = f.at(i + 1, j);
      const double f01 = f.at(i, j + 1), f11 = f.at(i + 1, j + 1);
      const double fx = ((f10 - f00) + (f11 - f01)) * ihx;
      const double fy = ((f01 - f00) + (f11 - f10)) * ihy;
      const double uc = 0.25 * (geom.u.at(i, j) + geom.u.at(i + 1, j) +
                                geom.u.at(i, j + 1) + geom.u.at(i + 1, j + 1));
      const double s = std::exp(-uc);  // orthonormal-frame scale e^{-u_c}
      g.gx.at(i, j) = s * fx;
      g.gy.at(i, j) = s * fy;
      g.sq.at(i, j) = s * s * (fx * fx + fy * fy);
    }
  }
  return g;
}

namespace {
constexpr int kChunk = 1024;

// Chunked compensated reduction: chunk sums are combined in index order, so
// the result does not depend on any hypothetical schedule that produced the
// per-chunk sums.
double chunked_sum(const double* a, const double* b, int n) {
  KahanSum outer;
  for (int base = 0; base < n; base += kChunk) {
    const int end = std::min(n, base + kChunk);
    KahanSum inner;
    if (b != nullptr) {
      for (int k = base; k < end; ++k) inner.add(a[k] * b[k]);
    } else {
      for (int k = base; k < end; ++k) inner.add(a[k]);
    }
    outer.add(inner.value());
  }
  return outer.value();
}
}  // namespace

double integrate_nodes(const TorusGeometry& geom, const ScalarField& node_values) {
  if (!node_values.same_shape(geom.u)) {
    throw std::invalid_argument("integrate_nodes: field shape mismatch");
  }
  const ScalarField m = measure_weights(geom);
  return chunked_sum(node_values.data(), m.data(), node_values.size());
}

double integrate_cells(const TorusGeometry& geom, const ScalarField& cell_values) {
  if (!cell_values.same_shape(geom.u)) {
    throw std::invalid_argument("integrate_cells: field shape mismatch");
  }
  const ScalarField m = cell_measures(geom);
  return chunked_sum(cell_values.data(), m.data(), cell_values.size());
}

double fixed_order_sum(const double* x, int n) { return chunked_sum(x, nullptr, n); }

}  // namespace rbflow

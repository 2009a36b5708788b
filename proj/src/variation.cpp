#include "rbflow/variation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rbflow {

namespace {

// 4-point average of a node field onto cells, matching the cell sampling used
// by the measures and gradients (cell (i,j) spans nodes (i..i+1, j..j+1)).
ScalarField cell_average(const ScalarField& nodes) {
  const int nx = nodes.nx(), ny = nodes.ny();
  ScalarField out(nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      out.at(i, j) = 0.25 * (nodes.at(i, j) + nodes.at(i + 1, j) + nodes.at(i, j + 1) +
                             nodes.at(i + 1, j + 1));
    }
  }
  return out;
}

// Rejects eigenpairs that do not certify on this geometry: the assembly
// differentiates along the eigenvalue branch the pair represents, so a stale
// or unconverged pair would silently produce a meaningless prediction.
void require_certified(const TorusGeometry& geom, const Eigenpair& pair,
                       const FlowParams& params) {
  params.validate();
  geom.validate();
  std::ostringstream bad;
  if (pair.f.nx() != geom.nx || pair.f.ny() != geom.ny) {
    bad << "eigenfunction shape does not match the geometry; ";
  } else if (!pair.f.all_finite()) {
    bad << "eigenfunction has non-finite entries; ";
  } else {
    if (!(pair.lambda > 0.0) || !std::isfinite(pair.lambda)) {
      bad << "eigenvalue must be positive and finite; ";
    }
    if (!std::isfinite(pair.residual) || pair.residual < 0.0 || pair.residual > 1e-5) {
      bad << "stored defect " << pair.residual << " exceeds the certification threshold 1e-5; ";
    }
    const ScalarField mu = measure_weights(geom);
    ScalarField norm_term(geom.nx, geom.ny);
    for (int k = 0; k < norm_term.size(); ++k) {
      norm_term[k] = std::pow(std::abs(pair.f[k]), params.p) * mu[k];
    }
    const double norm = fixed_order_sum(norm_term.data(), norm_term.size());
    if (!(std::abs(norm - 1.0) <= 1e-8)) {
      bad << "p-norm constraint violated (got " << norm << "); ";
    }
    const double energy = p_energy(geom, pair.f, params);
    if (!(std::abs(energy - pair.lambda) <= 1e-8 * std::max(1.0, std::abs(pair.lambda)))) {
      bad << "Rayleigh identity violated (energy " << energy << " vs lambda " << pair.lambda
          << "); ";
    }
  }
  const std::string s = bad.str();
  if (!s.empty()) {
    throw std::invalid_argument("variation: eigenpair is not certified on this geometry: " + s);
  }
}

// The four geometric integrals shared by the surface assemblies, evaluated
// with the solver's quadrature: node measures against |f|^p, staggered cell
// gradients against cell measures for |grad f|^p.
struct SurfaceIntegrals {
  double r_norm = 0.0;         // Int R |f|^p dmu
  double r_energy = 0.0;       // Int R |grad f|^p dmu
  double lap_phi_norm = 0.0;   // Int (Lap_g phi) |f|^p dmu
  double lap_phi_energy = 0.0; // Int (Lap_g phi) |grad f|^p dmu
};

SurfaceIntegrals assemble_surface_integrals(const TorusGeometry& geom, const Eigenpair& pair,
                                            const FlowParams& params) {
  const ScalarField r_nodes = scalar_curvature(geom);
  const ScalarField lap_phi_nodes = metric_laplacian(geom, geom.phi);
  const ScalarField r_cells = cell_average(r_nodes);
  const ScalarField lap_phi_cells = cell_average(lap_phi_nodes);

  const int nx = geom.nx, ny = geom.ny;
  ScalarField node_r(nx, ny), node_l(nx, ny);
  for (int k = 0; k < node_r.size(); ++k) {
    const double fp = std::pow(std::abs(pair.f[k]), params.p);
    node_r[k] = r_nodes[k] * fp;
    node_l[k] = lap_phi_nodes[k] * fp;
  }

  const CellGradient grad = gradient_sq(geom, pair.f);
  ScalarField cell_r(nx, ny), cell_l(nx, ny);
  for (int k = 0; k < cell_r.size(); ++k) {
    const double gp = std::pow(grad.sq[k], 0.5 * params.p);
    cell_r[k] = r_cells[k] * gp;
    cell_l[k] = lap_phi_cells[k] * gp;
  }

  SurfaceIntegrals out;
  out.r_norm = integrate_nodes(geom, node_r);
  out.lap_phi_norm = integrate_nodes(geom, node_l);
  out.r_energy = integrate_cells(geom, cell_r);
  out.lap_phi_energy = integrate_cells(geom, cell_l);
  return out;
}

void require_surface(const FlowParams& params, const char* what) {
  if (params.n != 2) {
    std::ostringstream msg;
    msg << what << " requires a surface (n = 2); got n = " << params.n;
    throw std::invalid_argument(msg.str());
  }
}

double product_ricci_term(const ProductState& s, double lambda) {
  // Ricci quadratic form on the minimizing mode: (1/a) g on the sphere
  // factor, zero on the circle factor. Ties resolve toward the sphere mode.
  return (2.0 / s.a <= 1.0 / s.b) ? 2.0 * (1.0 / s.a) * lambda : 0.0;
}

void require_product_state(const ProductState& s) {
  if (!(s.a > 0.0) || !(s.b > 0.0) || !std::isfinite(s.a) || !std::isfinite(s.b)) {
    throw std::invalid_argument("product state must have finite a, b > 0");
  }
}

void require_fd_step(double fd_step) {
  if (!(fd_step > 0.0) || !std::isfinite(fd_step)) {
    throw std::invalid_argument("fd_step must be positive and finite");
  }
}

}  // namespace

double variation_rel_error(double fd, double rhs) {
  return std::abs(fd - rhs) / std::max({std::abs(fd), std::abs(rhs), 1e-12});
}

double variation_rhs_e2(const TorusGeometry& geom, const Eigenpair& pair,
                        const FlowParams& params) {
  require_surface(params, "variation_rhs_e2 on a grid geometry");
  require_certified(geom, pair, params);
  const SurfaceIntegrals I = assemble_surface_integrals(geom, pair, params);
  const double lam = pair.lambda;
  const double rho = params.rho, p = params.p;
  const double n = static_cast<double>(params.n);
  // General-dimension coefficients with the Ricci term reduced through
  // Ric = (R/2) g, kept as its own contribution.
  return lam * (1.0 - n * rho) * I.r_norm - (1.0 + rho * p - rho * n) * I.r_energy +
         0.5 * p * I.r_energy + lam * I.lap_phi_norm - I.lap_phi_energy;
}

double variation_rhs_surface(const TorusGeometry& geom, const Eigenpair& pair,
                             const FlowParams& params) {
  require_surface(params, "variation_rhs_surface");
  require_certified(geom, pair, params);
  const SurfaceIntegrals I = assemble_surface_integrals(geom, pair, params);
  const double lam = pair.lambda;
  const double rho = params.rho, p = params.p;
  return (1.0 - 2.0 * rho) * lam * I.r_norm -
         (1.0 + rho * p - 2.0 * rho - 0.5 * p) * I.r_energy + lam * I.lap_phi_norm -
         I.lap_phi_energy;
}

double variation_rhs_homogeneous(const EinsteinState& s, const FlowParams& params, double t) {
  params.validate();
  if (params.n != s.n) {
    throw std::invalid_argument("flow params and Einstein state disagree on the dimension");
  }
  const double u = einstein_u(s, params, t);
  const double lam = einstein_lambda(s, params, t);
  const double r = s.n * s.a / u;
  return -params.rho * params.p * r * lam + params.p * (s.a / u) * lam;
}

double variation_rhs_homogeneous(const ProductState& s, const FlowParams& params) {
  params.validate();
  require_product_state(s);
  if (params.p != 2.0) {
    throw std::invalid_argument(
        "the product family has a closed-form spectrum only at p = 2");
  }
  const double lam = product_lambda(s);
  const double r = product_scalar_curvature(s);
  return -2.0 * params.rho * r * lam + product_ricci_term(s, lam);
}

double variation_rhs_e2(const EinsteinState& s, const FlowParams& params, double t) {
  params.validate();
  if (params.n != s.n) {
    throw std::invalid_argument("flow params and Einstein state disagree on the dimension");
  }
  const double u = einstein_u(s, params, t);
  const double lam = einstein_lambda(s, params, t);
  const double r = s.n * s.a / u;
  const double rho = params.rho, p = params.p;
  const double n = static_cast<double>(params.n);
  // Norm = 1 and energy = lambda collapse the integrals; phi is constant on
  // this family so both drift terms vanish.
  return lam * (1.0 - n * rho) * r - (1.0 + rho * p - rho * n) * r * lam +
         p * (s.a / u) * lam;
}

double fd_dlambda(const EinsteinState& s, const FlowParams& params, double t0, double fd_step) {
  params.validate();
  require_fd_step(fd_step);
  const double lp = einstein_lambda(s, params, t0 + fd_step);
  const double lm = einstein_lambda(s, params, t0 - fd_step);
  return (lp - lm) / (2.0 * fd_step);
}

double fd_dlambda(const ProductState& s0, const FlowParams& params, double t0, double fd_step) {
  params.validate();
  require_product_state(s0);
  require_fd_step(fd_step);
  if (params.p != 2.0) {
    throw std::invalid_argument(
        "the product family has a closed-form spectrum only at p = 2");
  }
  const auto lambda_at = [&](double t) {
    const double a = product_a_exact(s0.a, params.rho, t);
    if (!(a > 0.0)) {
      const double t_ext = s0.a / (2.0 - 4.0 * params.rho);
      throw FlowDomainError("product sphere factor is extinct at the requested time", t_ext);
    }
    return product_lambda({a, product_b_exact(s0.a, s0.b, params.rho, t)});
  };
  return (lambda_at(t0 + fd_step) - lambda_at(t0 - fd_step)) / (2.0 * fd_step);
}

double fd_dlambda(const TorusGeometry& geom_t0, const FlowParams& params,
                  const SolverOptions& opts, const Eigenpair& pinned, double fd_step,
                  bool evolve_phi) {
  require_fd_step(fd_step);
  require_certified(geom_t0, pinned, params);
  const TorusGeometry geom_plus = advance_flow(geom_t0, params, fd_step, evolve_phi);
  const TorusGeometry geom_minus = advance_flow(geom_t0, params, -fd_step, evolve_phi);
  // Warm-only solves keep both endpoints on the branch of the t0 pair.
  const Eigenpair plus =
      first_eigenpair(geom_plus, params, opts, SolveMode::kWarmOnly, &pinned.f);
  const Eigenpair minus =
      first_eigenpair(geom_minus, params, opts, SolveMode::kWarmOnly, &pinned.f);
  return (plus.lambda - minus.lambda) / (2.0 * fd_step);
}

VariationReport verify_variation(const TorusGeometry& geom_t0, const FlowParams& params,
                                 const SolverOptions& opts, double t0, double fd_step,
                                 bool evolve_phi) {
  require_fd_step(fd_step);
  const Eigenpair pair = first_eigenpair(geom_t0, params, opts);
  VariationReport rep;
  rep.t0 = t0;
  rep.lambda = pair.lambda;
  rep.rhs_e2 = variation_rhs_e2(geom_t0, pair, params);
  rep.rhs_surface = variation_rhs_surface(geom_t0, pair, params);
  rep.fd_dlambda = fd_dlambda(geom_t0, params, opts, pair, fd_step, evolve_phi);
  rep.rel_error = variation_rel_error(rep.fd_dlambda, rep.rhs_e2);
  rep.h = std::min(geom_t0.hx(), geom_t0.hy());
  const double sub = advance_substep(geom_t0, params, evolve_phi);
  const int m = std::max(1, static_cast<int>(std::ceil(fd_step / sub)));
  rep.dt = fd_step / m;
  rep.fd_step = fd_step;
  return rep;
}

ScalarField transport_test_function(const ScalarField& f0, const TorusGeometry& geom_t0,
                                    const TorusGeometry& geom_t, const FlowParams& params) {
  params.validate();
  geom_t0.validate();
  geom_t.validate();
  if (f0.nx() != geom_t0.nx || f0.ny() != geom_t0.ny || geom_t.nx != geom_t0.nx ||
      geom_t.ny != geom_t0.ny) {
    throw std::invalid_argument("transport requires one grid shared by f0 and both geometries");
  }
  if (!f0.all_finite()) {
    throw std::invalid_argument("transport requires a finite field");
  }
  // Volume compensation: det g = e^{4u} on conformal surfaces, so the
  // [det g(t0)/det g(t)]^{1/(2(p-1))} factor is e^{2(u_{t0}-u_t)/(p-1)}.
  const double expo = 2.0 / (params.p - 1.0);
  ScalarField h(f0.nx(), f0.ny());
  for (int k = 0; k < h.size(); ++k) {
    h[k] = f0[k] * std::exp(expo * (geom_t0.u[k] - geom_t.u[k]));
  }
  ScalarField integrand(h.nx(), h.ny());
  for (int k = 0; k < integrand.size(); ++k) {
    integrand[k] = std::pow(std::abs(h[k]), params.p);
  }
  const double norm = integrate_nodes(geom_t, integrand);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("transport requires a field with positive p-norm");
  }
  const double inv = std::pow(norm, -1.0 / params.p);
  for (int k = 0; k < h.size(); ++k) h[k] *= inv;
  return h;
}

double lemma_el1_check(const TorusGeometry& geom_t0, const ScalarField& f_fixed,
                       const FlowParams& params, double fd_step) {
  params.validate();
  geom_t0.validate();
  require_surface(params, "lemma_el1_check");
  require_fd_step(fd_step);
  if (f_fixed.nx() != geom_t0.nx || f_fixed.ny() != geom_t0.ny || !f_fixed.all_finite()) {
    throw std::invalid_argument("lemma check requires a finite field on the geometry's grid");
  }
  // Metric-only path: phi frozen, the field frozen in time.
  const TorusGeometry gp = advance_flow(geom_t0, params, fd_step, /*evolve_phi=*/false);
  const TorusGeometry gm = advance_flow(geom_t0, params, -fd_step, /*evolve_phi=*/false);
  const ScalarField sq_plus = gradient_sq(gp, f_fixed).sq;
  const ScalarField sq_minus = gradient_sq(gm, f_fixed).sq;
  const ScalarField sq_now = gradient_sq(geom_t0, f_fixed).sq;
  const ScalarField r_cells = cell_average(scalar_curvature(geom_t0));
  const double coeff = 1.0 - 2.0 * params.rho;
  double scale = 0.0;
  for (int k = 0; k < sq_now.size(); ++k) {
    scale = std::max(scale, std::abs(coeff * r_cells[k] * sq_now[k]));
  }
  double worst = 0.0;
  for (int k = 0; k < sq_now.size(); ++k) {
    const double lhs = (sq_plus[k] - sq_minus[k]) / (2.0 * fd_step);
    const double rhs = coeff * r_cells[k] * sq_now[k];
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst / std::max(scale, 1e-14);
}

double lemma_el3_check(const TorusGeometry& geom_t0, const ScalarField& f_fixed,
                       const FlowParams& params, double fd_step) {
  params.validate();
  geom_t0.validate();
  require_surface(params, "lemma_el3_check");
  require_fd_step(fd_step);
  if (f_fixed.nx() != geom_t0.nx || f_fixed.ny() != geom_t0.ny || !f_fixed.all_finite()) {
    throw std::invalid_argument("lemma check requires a finite field on the geometry's grid");
  }
  const TorusGeometry gp = advance_flow(geom_t0, params, fd_step, /*evolve_phi=*/false);
  const TorusGeometry gm = advance_flow(geom_t0, params, -fd_step, /*evolve_phi=*/false);
  const ScalarField lap_plus = metric_laplacian(gp, f_fixed);
  const ScalarField lap_minus = metric_laplacian(gm, f_fixed);
  const ScalarField lap_now = metric_laplacian(geom_t0, f_fixed);
  const ScalarField r_nodes = scalar_curvature(geom_t0);
  const double coeff = 1.0 - 2.0 * params.rho;
  double scale = 0.0;
  for (int k = 0; k < lap_now.size(); ++k) {
    scale = std::max(scale, std::abs(coeff * r_nodes[k] * lap_now[k]));
  }
  double worst = 0.0;
  for (int k = 0; k < lap_now.size(); ++k) {
    const double lhs = (lap_plus[k] - lap_minus[k]) / (2.0 * fd_step);
    const double rhs = coeff * r_nodes[k] * lap_now[k];
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst / std::max(scale, 1e-14);
}

}  // namespace rbflow

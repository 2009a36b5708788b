#pragma once

// Time evolution. On the torus: conformal surface flow du/dt = -(1-2rho) R/2
// coupled (lockstep within each RK4 stage) with the heat flow of the weight,
// dphi/dt = Delta_g phi. Off the torus: exact Einstein homothety and S2 x S1
// product ODE flows, plus the scalar-curvature comparison bounds sigma(t)
// (lower, from dR/dt >= ... and |Ric|^2 >= R^2/n) and gamma(t) (upper, under
// a Ricci pinching).

#include <string>

#include "rbflow/errors.hpp"
#include "rbflow/fields.hpp"

namespace rbflow {

// Flat 5-point Laplacian on the periodic background grid.
ScalarField flat_laplacian(const ScalarField& f, double hx, double hy);

// Laplace-Beltrami of the current metric: e^{-2u} Delta_0 f, node-centered.
ScalarField metric_laplacian(const TorusGeometry& geom, const ScalarField& f);

// R = -2 e^{-2u} Delta_0 u (conformal surface curvature over a flat base).
ScalarField scalar_curvature(const TorusGeometry& geom);

// Fixed step used by surface runs: dt = 0.2 h^2 e^{2 min u} / (1 - 2 rho),
// h = min(hx, hy). Sits well inside the RK4 stability region for the
// u-equation; when phi also evolves the check below additionally bounds the
// (1-2rho)-free heat step, which is the tighter constraint for rho > 0.
double cfl_dt(const TorusGeometry& geom, const FlowParams& params);

// Throws CflError unless dt * kappa <= 2.75 for every evolving field, where
// kappa is the stiffest eigenvalue of the linearized right-hand side
// (RK4's real-axis stability limit is ~2.785).
void check_step_stability(const TorusGeometry& geom, const FlowParams& params, double dt,
                          bool evolve_u, bool evolve_phi);

// One RK4 step of u; phi untouched. Rejects unstable dt before stepping.
TorusGeometry surface_flow_step(const TorusGeometry& geom, const FlowParams& params, double dt);

// One RK4 step of phi under the current (frozen) metric.
TorusGeometry phi_heat_step(const TorusGeometry& geom, double dt);

// Joint RK4 step of (u, phi): each stage evaluates both right-hand sides at
// the same stage state, so the pair advances in lockstep.
TorusGeometry coupled_flow_step(const TorusGeometry& geom, const FlowParams& params, double dt,
                                bool evolve_phi);

// Substep magnitude advance_flow uses: 40% of the stability bound of the
// stiffest evolving field at the given state.
double advance_substep(const TorusGeometry& geom, const FlowParams& params, bool evolve_phi);

// Advance the coupled flow by a signed interval, substepping well inside the
// stability bound. A negative interval integrates the time-reversed system,
// which is only used for the short centred-in-time windows of the
// finite-difference verifiers (high modes grow like e^{kappa |time|}, so keep
// |time| small relative to 1/kappa of the stiffest mode of interest).
TorusGeometry advance_flow(TorusGeometry geom, const FlowParams& params, double time,
                           bool evolve_phi);

// --- Exact geometries -------------------------------------------------------

// Einstein input metric Ric(g0) = a g0 evolving by homothety g(t) = u(t) g0.
struct EinsteinState {
  double a = 1.0;        // Einstein constant
  int n = 2;             // dimension
  double lambda0 = 1.0;  // first nonzero p-eigenvalue of the unit-scale metric
};

// u(t) = (-2a + 2 rho a n) t + 1. Throws FlowDomainError (naming the blow-up
// time 1/(2a(1 - rho n))) when u(t) <= 0.
double einstein_u(const EinsteinState& s, const FlowParams& params, double t);

// lambda(t) = lambda0 * u(t)^{-p/2} (homothety scaling of the p-eigenvalue).
double einstein_lambda(const EinsteinState& s, const FlowParams& params, double t);

// S^2 x S^1 with metric a g_{S^2} + b g_{S^1}: Ric = g_{S^2} (+) 0, R = 2/a,
// so da/dt = -2 + 4 rho and db/dt = 4 rho b / a.
struct ProductState {
  double a = 1.0;
  double b = 1.0;
};

// One RK4 step. Throws FlowDomainError with the extinction time when the
// sphere factor would close up (a <= 0).
ProductState product_flow_step(const ProductState& s, double rho, double dt);

// Closed forms for oracles: a(t) = a0 + (4 rho - 2) t; b from the exact
// integral b0 (a/a0)^{4 rho/(4 rho - 2)}.
double product_a_exact(double a0, double rho, double t);
double product_b_exact(double a0, double b0, double rho, double t);

// First nonzero Laplace eigenvalue of the product (p = 2 only): the sphere
// factor contributes 2/a, the circle factor 1/b with the circle parameterized
// over [0, 2pi) (so the initial circumference is 2 pi sqrt(b)).
double product_lambda(const ProductState& s);

double product_scalar_curvature(const ProductState& s);

// --- Comparison bounds ------------------------------------------------------

struct CurvatureBoundState {
  double c = 0.0;  // R_min(0)
  double C = 0.0;  // R_max(0)
  int n = 2;
  double rho = 0.0;
  double p = 2.0;
};

// A = 2 ( n ((1 - (n-p) rho)/p)^2 - rho ), shared by gamma_bound and the
// monotone catalog's decreasing quantity.
double theorem_A(int n, double p, double rho);

// sigma(t) = n c / (n - 2 (1 - n rho) c t). Throws FlowDomainError with
// T' = n / (2 (1 - n rho) c) when the denominator is <= 0.
double sigma_bound(double t, const CurvatureBoundState& s);

// gamma(t) = C / (1 - C A t), requires C > 0; throws FlowDomainError with
// T' = 1/(C A) outside the validity window.
double gamma_bound(double t, const CurvatureBoundState& s);

}  // namespace rbflow

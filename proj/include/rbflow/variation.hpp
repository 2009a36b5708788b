#pragma once
// Verification of the eigenvalue variation formula along the coupled flow.
//
// The predicted derivative of the first eigenvalue is assembled from the
// current geometry and certified eigenfunction in three equivalent ways
// (general-dimension form, surface-reduced form, and closed-form homogeneous
// shortcuts) and checked against a centred finite difference of certified
// eigenvalues computed at geometry snapshots advanced forward/backward in
// time. Pointwise evolution identities for |grad f|^2 and the Laplacian of a
// time-frozen field, and the test-function transport that powers the
// monotonicity bounds, live here too.

#include <limits>

#include "rbflow/fields.hpp"
#include "rbflow/flow.hpp"
#include "rbflow/spectral.hpp"

namespace rbflow {

// One verification sample: predicted derivative(s) of lambda at t0 versus the
// centred finite difference of certified eigenvalues. rhs_homogeneous is NaN
// for grid geometries (it only applies to the closed-form families).
struct VariationReport {
  double t0 = 0.0;
  double lambda = 0.0;       // certified eigenvalue at t0
  double fd_dlambda = 0.0;   // (lambda(t0+s) - lambda(t0-s)) / (2s)
  double rhs_e2 = 0.0;       // general-dimension variation formula
  double rhs_surface = 0.0;  // surface-reduced form (2D only)
  double rhs_homogeneous = std::numeric_limits<double>::quiet_NaN();
  double rel_error = 0.0;    // |fd - e2| / max(|fd|, |e2|, 1e-12)
  double h = 0.0;            // grid spacing min(hx, hy)
  double dt = 0.0;           // flow substep used when advancing to t0 +- s
  double fd_step = 0.0;      // s
};

// Relative mismatch with the floor used throughout the verification reports.
double variation_rel_error(double fd, double rhs);

// Predicted d(lambda)/dt on a conformal surface (params.n == 2):
//   lambda (1-n rho) Int R |f|^p dmu  -  (1 + rho p - rho n) Int R |grad f|^p dmu
//   + p Int |grad f|^{p-2} (R/2) |grad f|^2 dmu
//   + lambda Int (Lap phi) |f|^p dmu  -  Int (Lap phi) |grad f|^p dmu,
// where the third term uses the surface identity Ric = (R/2) g. All integrals
// use the solver's own quadrature (node measures for |f|^p terms, staggered
// cell gradients and cell measures for |grad f|^p terms) so the Rayleigh
// identity Int |grad f|^p dmu = lambda holds exactly inside the assembly.
// Throws std::invalid_argument if the eigenpair does not certify on geom.
double variation_rhs_e2(const TorusGeometry& geom, const Eigenpair& pair,
                        const FlowParams& params);

// Surface-reduced form of the same derivative (n == 2 only):
//   (1-2rho) lambda Int R |f|^p dmu - (1 + rho p - 2 rho - p/2) Int R |grad f|^p dmu
//   + lambda Int (Lap phi) |f|^p dmu - Int (Lap phi) |grad f|^p dmu.
// Agrees with variation_rhs_e2 identically on every surface input; the two
// assemblies only differ in how the coefficients are associated.
double variation_rhs_surface(const TorusGeometry& geom, const Eigenpair& pair,
                             const FlowParams& params);

// Closed-form homogeneous shortcut -rho p R lambda + p Int Z Ric(grad f, grad f) dmu
// evaluated on the exact families, where the Ricci quadratic form collapses:
//  - Einstein input Ric(g0) = a g0 under homothety g = u(t) g0:
//      Ric = (a/u) g and R = n a / u, giving -rho p R lambda + p (a/u) lambda.
//  - Sphere-cross-circle product at p = 2: Ric vanishes on the circle factor
//    and equals (1/a) g on the sphere factor, so the second term is
//    2 lambda / a when the sphere mode attains the eigenvalue and 0 when the
//    circle mode does. R = 2/a throughout.
double variation_rhs_homogeneous(const EinsteinState& s, const FlowParams& params, double t);
double variation_rhs_homogeneous(const ProductState& s, const FlowParams& params);

// General-dimension assembly specialized to the Einstein family, where the
// constant curvature collapses every integral (norm = 1, energy = lambda):
//   lambda (1-n rho) R - (1 + rho p - rho n) R lambda + p (a/u) lambda.
// Algebraically equal to the homogeneous shortcut; evaluated along its own
// floating-point path so the consistency chain is a real check.
double variation_rhs_e2(const EinsteinState& s, const FlowParams& params, double t);

// Centred finite differences of the closed-form eigenvalue curves.
double fd_dlambda(const EinsteinState& s, const FlowParams& params, double t0, double fd_step);
double fd_dlambda(const ProductState& s0, const FlowParams& params, double t0, double fd_step);

// Centred finite difference of certified eigenvalues on a grid geometry:
// advances the coupled flow from geom_t0 by +-fd_step (substepped, see
// advance_flow) and certifies an eigenpair at each endpoint, warm-started
// from the t0 eigenfunction so both endpoints stay on the same eigenvalue
// branch. Solver failure at either endpoint propagates.
double fd_dlambda(const TorusGeometry& geom_t0, const FlowParams& params,
                  const SolverOptions& opts, const Eigenpair& pinned, double fd_step,
                  bool evolve_phi);

// Full verification sample at one instant of a surface run: certifies the
// eigenpair at geom_t0, assembles both predicted derivatives, differences the
// eigenvalue across t0 +- fd_step, and reports the relative mismatch.
VariationReport verify_variation(const TorusGeometry& geom_t0, const FlowParams& params,
                                 const SolverOptions& opts, double t0, double fd_step,
                                 bool evolve_phi);

// Transports a reference eigenfunction f0 from geom_t0 to geom_t following
// the volume-compensated rule h = f0 * [det g(t0) / det g(t)]^{1/(2(p-1))}
// (= f0 * e^{2(u_{t0}-u_t)/(p-1)} on conformal surfaces), then renormalizes
// so Int |f|^p dmu_t = 1 exactly. The Rayleigh quotient of the transported
// field bounds the eigenvalue at time t from above.
ScalarField transport_test_function(const ScalarField& f0, const TorusGeometry& geom_t0,
                                    const TorusGeometry& geom_t, const FlowParams& params);

// Pointwise evolution identity for the gradient square of a time-frozen field
// along the surface flow (u evolves, phi frozen):
//   d/dt |grad f|^2_g = (1 - 2 rho) R |grad f|^2_g.
// Left side by centred differences of the cell gradient square across
// t0 +- fd_step; right side assembled at t0. Returns the max-cell mismatch
// relative to the right side's sup norm.
double lemma_el1_check(const TorusGeometry& geom_t0, const ScalarField& f_fixed,
                       const FlowParams& params, double fd_step);

// Same check for the metric Laplacian of a time-frozen field (n = 2, where
// the dimension-dependent curvature-gradient term drops):
//   d/dt (Lap_g f) = (1 - 2 rho) R Lap_g f.
// Returns the max-node mismatch relative to the right side's sup norm.
double lemma_el3_check(const TorusGeometry& geom_t0, const ScalarField& f_fixed,
                       const FlowParams& params, double fd_step);

}  // namespace rbflow

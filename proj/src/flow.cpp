#include "rbflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rbflow {

ScalarField flat_laplacian(const ScalarField& f, double hx, double hy) {
  const int nx = f.nx(), ny = f.ny();
  ScalarField out(nx, ny);
  const double ax = 1.0 / (hx * hx), ay = 1.0 / (hy * hy);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double c = f.at(i, j);
      out.at(i, j) = ax * (f.at(i + 1, j) - 2.0 * c + f.at(i - 1, j)) +
                     ay * (f.at(i, j + 1) - 2.0 * c + f.at(i, j - 1));
    }
  }
  return out;
}

ScalarField metric_laplacian(const TorusGeometry& geom, const ScalarField& f) {
  ScalarField out = flat_laplacian(f, geom.hx(), geom.hy());
  for (int k = 0; k < out.size(); ++k) out[k] *= std::exp(-2.0 * geom.u[k]);
  return out;
}

ScalarField scalar_curvature(const TorusGeometry& geom) {
  geom.validate();
  ScalarField lap = flat_laplacian(geom.u, geom.hx(), geom.hy());
  for (int k = 0; k < lap.size(); ++k) lap[k] = -2.0 * std::exp(-2.0 * geom.u[k]) * lap[k];
  return lap;
}

double cfl_dt(const TorusGeometry& geom, const FlowParams& params) {
  const double h = std::min(geom.hx(), geom.hy());
  return 0.2 * h * h * std::exp(2.0 * geom.u.min()) / (1.0 - 2.0 * params.rho);
}

void check_step_stability(const TorusGeometry& geom, const FlowParams& params, double dt,
                          bool evolve_u, bool evolve_phi) {
  if (!(dt > 0.0)) throw CflError("step rejected: dt must be positive", 0.0);
  const double hx = geom.hx(), hy = geom.hy();
  const double lap_max = 4.0 / (hx * hx) + 4.0 / (hy * hy);
  const double scale = std::exp(-2.0 * geom.u.min());  // max of e^{-2u}
  constexpr double kStabilityLimit = 2.75;             // RK4 real axis ~2.785
  const double kappa_u = (1.0 - 2.0 * params.rho) * scale * lap_max;
  const double kappa_phi = scale * lap_max;
  double dt_max = std::numeric_limits<double>::infinity();
  if (evolve_u && kappa_u > 0.0) dt_max = std::min(dt_max, kStabilityLimit / kappa_u);
  if (evolve_phi) dt_max = std::min(dt_max, kStabilityLimit / kappa_phi);
  if (dt > dt_max * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "step rejected: dt=" << dt << " exceeds stability bound " << dt_max
        << (evolve_phi ? " (heat step of phi is the binding constraint for rho > 0)" : "");
    throw CflError(msg.str(), dt_max);
  }
}

namespace {

// Right-hand sides of the coupled system at a single state.
void flow_rhs(const TorusGeometry& geom, const FlowParams& params, bool evolve_u,
              bool evolve_phi, ScalarField* du, ScalarField* dphi) {
  if (evolve_u) {
    // du/dt = -(1-2rho) R / 2 = (1-2rho) e^{-2u} Delta_0 u
    *du = flat_laplacian(geom.u, geom.hx(), geom.hy());
    const double f = 1.0 - 2.0 * params.rho;
    for (int k = 0; k < du->size(); ++k) (*du)[k] *= f * std::exp(-2.0 * geom.u[k]);
  }
  if (evolve_phi) {
    *dphi = flat_laplacian(geom.phi, geom.hx(), geom.hy());
    for (int k = 0; k < dphi->size(); ++k) (*dphi)[k] *= std::exp(-2.0 * geom.u[k]);
  }
}

TorusGeometry rk4_step(const TorusGeometry& geom, const FlowParams& params, double dt,
                       bool evolve_u, bool evolve_phi, bool signed_ok = false) {
  geom.validate();
  check_step_stability(geom, params, signed_ok ? std::abs(dt) : dt, evolve_u, evolve_phi);

  ScalarField ku[4], kphi[4];
  TorusGeometry stage = geom;
  static constexpr double stage_frac[4] = {0.0, 0.5, 0.5, 1.0};
  for (int s = 0; s < 4; ++s) {
    if (s > 0) {
      stage = geom;
      if (evolve_u)
        for (int k = 0; k < stage.u.size(); ++k)
          stage.u[k] = geom.u[k] + dt * stage_frac[s] * ku[s - 1][k];
      if (evolve_phi)
        for (int k = 0; k < stage.phi.size(); ++k)
          stage.phi[k] = geom.phi[k] + dt * stage_frac[s] * kphi[s - 1][k];
    }
    flow_rhs(stage, params, evolve_u, evolve_phi, &ku[s], &kphi[s]);
  }

  TorusGeometry out = geom;
  if (evolve_u) {
    for (int k = 0; k < out.u.size(); ++k) {
      out.u[k] = geom.u[k] +
                 dt / 6.0 * (ku[0][k] + 2.0 * ku[1][k] + 2.0 * ku[2][k] + ku[3][k]);
    }
    if (!out.u.all_finite()) {
      throw std::runtime_error("flow step produced non-finite u; aborting run");
    }
  }
  if (evolve_phi) {
    for (int k = 0; k < out.phi.size(); ++k) {
      out.phi[k] = geom.phi[k] +
                   dt / 6.0 * (kphi[0][k] + 2.0 * kphi[1][k] + 2.0 * kphi[2][k] + kphi[3][k]);
    }
    if (!out.phi.all_finite()) {
      throw std::runtime_error("flow step produced non-finite phi; aborting run");
    }
  }
  return out;
}

}  // namespace

TorusGeometry surface_flow_step(const TorusGeometry& geom, const FlowParams& params, double dt) {
  return rk4_step(geom, params, dt, /*evolve_u=*/true, /*evolve_phi=*/false);
}

TorusGeometry phi_heat_step(const TorusGeometry& geom, double dt) {
  FlowParams dummy;  // rho is irrelevant when u is frozen
  return rk4_step(geom, dummy, dt, /*evolve_u=*/false, /*evolve_phi=*/true);
}

TorusGeometry coupled_flow_step(const TorusGeometry& geom, const FlowParams& params, double dt,
                                bool evolve_phi) {
  return rk4_step(geom, params, dt, /*evolve_u=*/true, evolve_phi);
}

double advance_substep(const TorusGeometry& geom, const FlowParams& params, bool evolve_phi) {
  const double hx = geom.hx(), hy = geom.hy();
  const double lap_max = 4.0 / (hx * hx) + 4.0 / (hy * hy);
  const double scale = std::exp(-2.0 * geom.u.min());
  double kappa = (1.0 - 2.0 * params.rho) * scale * lap_max;
  if (evolve_phi) kappa = std::max(kappa, scale * lap_max);
  return 0.4 * 2.75 / kappa;
}

TorusGeometry advance_flow(TorusGeometry geom, const FlowParams& params, double time,
                           bool evolve_phi) {
  if (time == 0.0) return geom;
  if (!std::isfinite(time)) throw CflError("advance rejected: interval must be finite", 0.0);
  // Substeps sit well inside the stability bound so the per-step guard never
  // trips in either time direction.
  const double sub = advance_substep(geom, params, evolve_phi);
  const int m = std::max(1, static_cast<int>(std::ceil(std::abs(time) / sub)));
  const double dt = time / m;
  for (int k = 0; k < m; ++k) {
    geom = rk4_step(geom, params, dt, /*evolve_u=*/true, evolve_phi, /*signed_ok=*/true);
  }
  return geom;
}

double einstein_u(const EinsteinState& s, const FlowParams& params, double t) {
  const double slope = -2.0 * s.a + 2.0 * params.rho * s.a * params.n;
  const double u = slope * t + 1.0;
  if (u <= 0.0) {
    const double t_blow = -1.0 / slope;  // slope < 0 whenever u can vanish
    std::ostringstream msg;
    msg << "einstein homothety factor vanishes at t = " << t_blow << " (asked for t = " << t
        << ")";
    throw FlowDomainError(msg.str(), t_blow);
  }
  return u;
}

double einstein_lambda(const EinsteinState& s, const FlowParams& params, double t) {
  return s.lambda0 * std::pow(einstein_u(s, params, t), -params.p / 2.0);
}

namespace {
struct ProductRhs {
  double da, db;
};
ProductRhs product_rhs(const ProductState& s, double rho) {
  return {-2.0 + 4.0 * rho, 4.0 * rho * s.b / s.a};
}
}  // namespace

ProductState product_flow_step(const ProductState& s, double rho, double dt) {
  if (!(s.a > 0.0) || !(s.b > 0.0)) {
    throw FlowDomainError("product state must have a, b > 0", 0.0);
  }
  const ProductRhs k1 = product_rhs(s, rho);
  const ProductState s2{s.a + 0.5 * dt * k1.da, s.b + 0.5 * dt * k1.db};
  if (s2.a <= 0.0) goto extinct;
  {
    const ProductRhs k2 = product_rhs(s2, rho);
    const ProductState s3{s.a + 0.5 * dt * k2.da, s.b + 0.5 * dt * k2.db};
    if (s3.a <= 0.0) goto extinct;
    const ProductRhs k3 = product_rhs(s3, rho);
    const ProductState s4{s.a + dt * k3.da, s.b + dt * k3.db};
    if (s4.a <= 0.0) goto extinct;
    const ProductRhs k4 = product_rhs(s4, rho);
    ProductState out{s.a + dt / 6.0 * (k1.da + 2 * k2.da + 2 * k3.da + k4.da),
                     s.b + dt / 6.0 * (k1.db + 2 * k2.db + 2 * k3.db + k4.db)};
    if (out.a > 0.0 && out.b > 0.0) return out;
  }
extinct: {
  const double t_ext = s.a / (2.0 - 4.0 * rho);  // da/dt is the constant 4rho-2 < 0
  std::ostringstream msg;
  msg << "sphere factor closes up " << t_ext << " from the current state (extinction)";
  throw FlowDomainError(msg.str(), t_ext);
}
}

double product_a_exact(double a0, double rho, double t) { return a0 + (4.0 * rho - 2.0) * t; }

double product_b_exact(double a0, double b0, double rho, double t) {
  // db/b = 4 rho / a dt with a affine: b = b0 (a/a0)^{4rho/(4rho-2)}.
  const double a = product_a_exact(a0, rho, t);
  return b0 * std::pow(a / a0, 4.0 * rho / (4.0 * rho - 2.0));
}

double product_lambda(const ProductState& s) { return std::min(2.0 / s.a, 1.0 / s.b); }

double product_scalar_curvature(const ProductState& s) { return 2.0 / s.a; }

double theorem_A(int n, double p, double rho) {
  const double k = (1.0 - (n - p) * rho) / p;
  return 2.0 * (n * k * k - rho);
}

double sigma_bound(double t, const CurvatureBoundState& s) {
  const double denom = s.n - 2.0 * (1.0 - s.n * s.rho) * s.c * t;
  if (denom <= 0.0) {
    const double t_lim = s.n / (2.0 * (1.0 - s.n * s.rho) * s.c);
    std::ostringstream msg;
    msg << "sigma bound undefined at t = " << t << "; window ends at T' = " << t_lim;
    throw FlowDomainError(msg.str(), t_lim);
  }
  return s.n * s.c / denom;
}

double gamma_bound(double t, const CurvatureBoundState& s) {
  if (!(s.C > 0.0)) throw FlowDomainError("gamma bound requires C = R_max(0) > 0", 0.0);
  const double A = theorem_A(s.n, s.p, s.rho);
  const double denom = 1.0 - s.C * A * t;
  if (denom <= 0.0) {
    const double t_lim = 1.0 / (s.C * A);
    std::ostringstream msg;
    msg << "gamma bound undefined at t = " << t << "; window ends at T' = " << t_lim;
    throw FlowDomainError(msg.str(), t_lim);
  }
  return s.C / denom;
}

}  // namespace rbflow

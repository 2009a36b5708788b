#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rbflow/fields.hpp"
#include "rbflow/flow.hpp"

namespace rbflow {

// Catalog of tracked quantities. Each combines the running eigenvalue with a
// closed-form factor built from curvature constants of the initial data, and
// carries an expected trend that holds while the matching pointwise curvature
// hypotheses stay satisfied. Identifiers double as config/CSV tokens.
enum class QuantityId {
  kT33Proof,      // lambda * (n - 2(1-n rho) c t)^{nA/(2(1-n rho))}, A = p(beta+gamma) - rho(p+2n)
  kT33Statement,  // lambda * (n - 2 c t)^{1/n}; companion variant of kT33Proof
  kT37,           // lambda * (1 - C A t)^{(n rho - 1)/A}, A = theorem_A(n, p, rho)
  kT38Raw,        // lambda itself; growth asserted under an almost-pinched lower bound
  kSurfLower,     // lambda0 / (1 - c(1-2 rho) t)^{p/2}; running lower bound on surfaces
  kCor35,         // lambda * (3 - 2(1-3 rho) c t)^{3/2}; three-dimensional pinched case
  kProp312A,      // lambda * exp(-int_0^t A(tau) dtau) with A from two logarithmic kernels
  kEinsteinQ,     // lambda * (1 - 2 a (1-n rho) t)^{p/2}; constant along homogeneous paths
};

inline constexpr int kQuantityCount = 8;

// Stable token for config files and CSV column names ("T33_proof", ...).
const char* quantity_name(QuantityId id);
std::optional<QuantityId> quantity_id_from_name(std::string_view name);

enum class Trend {
  kNondecreasing,
  kNonincreasing,
  kConstantOrIncreasing,
};

// Constants a quantity is built from. c and C are the minimum and maximum of
// the scalar curvature of the initial data; n, p, rho mirror the flow
// parameters; beta/gamma weight the mixed curvature pinching of kT33Proof and
// kT33Statement; a_pinch relaxes the lower pinching of kT38Raw; epsilon sets
// the Ricci fraction of kProp312A; a_einstein is the proportionality constant
// of a homogeneous path for kEinsteinQ. Unused fields are ignored per id.
struct QuantityConstants {
  double c = 0.0;
  double C = 0.0;
  int n = 2;
  double p = 2.0;
  double rho = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double a_pinch = 0.0;
  double epsilon = 0.0;
  double a_einstein = 0.0;
};

struct QuantitySpec {
  QuantityId id = QuantityId::kT38Raw;
  QuantityConstants k;
  Trend expected_trend = Trend::kNondecreasing;
};

// Builds a spec with the catalog's expected trend for the id.
QuantitySpec make_quantity_spec(QuantityId id, const QuantityConstants& k);

// Structural side conditions the constants must satisfy before the quantity
// may be armed (tracked and judged). Returns every violation, empty if armed.
// Pointwise curvature hypotheses are checked separately per sample.
std::vector<std::string> arming_violations(const QuantitySpec& spec);
bool is_armed(const QuantitySpec& spec);

// Growth exponent base used by the pinched families: for kT33Proof and
// kT33Statement this is p(beta+gamma) - rho(p+2n); for kT37 it is
// theorem_A(n, p, rho). Throws std::invalid_argument for other ids.
double quantity_exponent_A(const QuantitySpec& spec);

// End of the evaluation window (smallest positive root of the closed-form
// base factors), +infinity when every base stays positive for all t >= 0.
double quantity_window_end(const QuantitySpec& spec);

// Value of the quantity at time t given the eigenvalue lambda at that time.
// For kSurfLower the lambda argument is the eigenvalue of the INITIAL data;
// the result is the running lower bound the eigenvalue is compared against.
// Throws FlowDomainError naming the window end when t falls on or past it,
// std::invalid_argument on non-finite input.
double quantity_value(const QuantitySpec& spec, double t, double lambda);

// Outcome of scanning the pointwise curvature hypotheses of one quantity.
// margin is the smallest slack over all nodes and inequality branches
// (negative means violated by that amount); location is the flattened node
// index attaining it, -1 when the quantity has no pointwise hypothesis.
// holds requires nonnegative slack on every weak branch and strictly positive
// slack on every strict branch, so a zero margin on a strict branch reports
// holds = false with margin = 0.
struct HypothesisVerdict {
  QuantityId id = QuantityId::kT38Raw;
  bool holds = true;
  double margin = 0.0;
  int location = -1;
};

// Scans the hypotheses over a surface geometry, reducing curvature-tensor
// inequalities to scalar ones through the proportionality of the Ricci tensor
// to (scalar curvature / n) times the metric. Requires spec.k.n == 2 and the
// flow parameters to agree with the spec's n, p, rho.
HypothesisVerdict hypothesis_check(const QuantitySpec& spec, const TorusGeometry& geom,
                                   const FlowParams& params);

// Same scan for a homogeneous state described by constant scalar curvature
// and constant weight Laplacian (valid whenever the Ricci tensor is
// proportional to the metric, any n).
HypothesisVerdict hypothesis_check_constant(const QuantitySpec& spec, double scalar_curv,
                                            double lap_phi);

enum class TrendOutcome {
  kNondecreasing,
  kNonincreasing,
  kViolated,
};

// When outcome == kViolated, first_t is the time of the first offending
// sample and magnitude the size of the offending drop (or rise, when a
// nonincreasing trend was expected).
struct TrendVerdict {
  TrendOutcome outcome = TrendOutcome::kNondecreasing;
  double first_t = 0.0;
  double magnitude = 0.0;
};

// Judges a sampled series (time, value) against an expected trend with a
// relative tolerance: a step from v to w violates a nondecreasing trend when
// w < v - tol_rel * |v|, and a nonincreasing trend when w > v + tol_rel * |v|.
// kConstantOrIncreasing is judged as nondecreasing. Requires at least two
// samples, strictly increasing times, finite values.
TrendVerdict trend_verdict(const std::vector<std::pair<double, double>>& series, Trend expected,
                           double tol_rel);

// Default trend tolerances: discretized runs carry quadrature and solver
// noise; closed-form paths are exact up to rounding.
inline constexpr double kTrendTolRun = 1e-4;
inline constexpr double kTrendTolClosedForm = 1e-9;

}  // namespace rbflow

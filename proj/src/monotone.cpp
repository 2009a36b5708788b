#include "rbflow/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rbflow/errors.hpp"

namespace rbflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct NameEntry {
  QuantityId id;
  const char* name;
};

constexpr NameEntry kNames[kQuantityCount] = {
    {QuantityId::kT33Proof, "T33_proof"},   {QuantityId::kT33Statement, "T33_statement"},
    {QuantityId::kT37, "T37"},              {QuantityId::kT38Raw, "T38_raw"},
    {QuantityId::kSurfLower, "Surf_lower"}, {QuantityId::kCor35, "Cor35"},
    {QuantityId::kProp312A, "Prop312_A"},   {QuantityId::kEinsteinQ, "Einstein_Q"},
};

// One affine base factor value0 + slope * t entering a quantity. The window
// ends at the smallest positive root over all bases of the quantity.
struct BaseFactor {
  double value0;
  double slope;

  double at(double t) const { return value0 + slope * t; }
  double positive_root() const {
    if (slope >= 0.0) return kInf;
    return -value0 / slope;  // value0 > 0 for every catalog entry
  }
};

// The affine bases of each quantity, in evaluation order.
std::vector<BaseFactor> base_factors(const QuantitySpec& spec) {
  const QuantityConstants& k = spec.k;
  const double n = k.n;
  switch (spec.id) {
    case QuantityId::kT33Proof:
      return {{n, -2.0 * (1.0 - n * k.rho) * k.c}};
    case QuantityId::kT33Statement:
      return {{n, -2.0 * k.c}};
    case QuantityId::kT37:
      return {{1.0, -k.C * theorem_A(k.n, k.p, k.rho)}};
    case QuantityId::kT38Raw:
      return {};
    case QuantityId::kSurfLower:
      return {{1.0, -k.c * (1.0 - 2.0 * k.rho)}};
    case QuantityId::kCor35:
      return {{3.0, -2.0 * (1.0 - 3.0 * k.rho) * k.c}};
    case QuantityId::kProp312A:
      return {{3.0, -2.0 * (1.0 - 3.0 * k.rho) * k.c}, {1.0, -2.0 * (1.0 - k.rho) * k.C}};
    case QuantityId::kEinsteinQ:
      return {{1.0, -2.0 * k.a_einstein * (1.0 - n * k.rho)}};
  }
  throw std::invalid_argument("unknown quantity id");
}

[[noreturn]] void throw_window(const QuantitySpec& spec, double t, double t_end) {
  std::ostringstream os;
  os << quantity_name(spec.id) << ": t = " << t << " is outside the evaluation window [0, "
     << t_end << ")";
  throw FlowDomainError(os.str(), t_end);
}

// Evaluates every base at t. The window is [0, t_end): t == t_end throws, so
// the cutoff is decided by the comparison, not by the rounding of a base that
// sits on its root. Base positivity is kept as a defensive check.
std::vector<double> bases_at(const QuantitySpec& spec, double t) {
  const double t_end = quantity_window_end(spec);
  if (t >= t_end) throw_window(spec, t, t_end);
  const auto factors = base_factors(spec);
  std::vector<double> out;
  out.reserve(factors.size());
  for (const BaseFactor& b : factors) {
    const double v = b.at(t);
    if (!(v > 0.0)) throw_window(spec, t, t_end);
    out.push_back(v);
  }
  return out;
}

// One scalar inequality branch of a hypothesis: slack >= 0 must hold, with
// slack > 0 required when strict.
struct SlackBranch {
  double slack;
  bool strict;
};

// Scalar reduction of the pointwise hypotheses at one point with scalar
// curvature R and weight Laplacian dphi, using Ric = (R/n) g (exact on
// surfaces and on any state whose Ricci tensor is proportional to the
// metric).
void collect_slacks(const QuantitySpec& spec, double R, double dphi,
                    std::vector<SlackBranch>& out) {
  out.clear();
  const QuantityConstants& k = spec.k;
  const double n = k.n;
  const double p = k.p;
  const double rho = k.rho;
  const double ric = R / n;
  switch (spec.id) {
    case QuantityId::kT33Proof:
    case QuantityId::kT33Statement:
      // Ric - (beta R + gamma dphi) g >= 0 and R < dphi.
      out.push_back({ric - k.beta * R - k.gamma * dphi, false});
      out.push_back({dphi - R, true});
      return;
    case QuantityId::kT37:
      // 0 < Ric < ((1 + p rho - n rho)/p) R g, both sides strict.
      out.push_back({ric, true});
      out.push_back({(1.0 + p * rho - n * rho) / p * R - ric, true});
      return;
    case QuantityId::kT38Raw:
      // Ric - ((1 - (n-p) rho)/p) R g >= -a g and R >= p a / (1 - n rho).
      out.push_back({ric - (1.0 - (n - p) * rho) / p * R + k.a_pinch, false});
      out.push_back({R - p * k.a_pinch / (1.0 - n * rho), false});
      return;
    case QuantityId::kSurfLower:
      // Nonnegative scalar curvature.
      out.push_back({R, false});
      return;
    case QuantityId::kCor35:
      // Ric > ((1 + rho p - 3 rho)/p) R g, strict lower pinching.
      out.push_back({ric - (1.0 + rho * p - 3.0 * rho) / p * R, true});
      return;
    case QuantityId::kProp312A:
      // Ric >= epsilon R g and strictly positive Ricci curvature.
      out.push_back({ric - k.epsilon * R, false});
      out.push_back({ric, true});
      return;
    case QuantityId::kEinsteinQ:
      // No pointwise hypothesis: constancy is a property of the path.
      return;
  }
  throw std::invalid_argument("unknown quantity id");
}

// Folds the slack branches of one point into a running verdict.
void fold_point(const std::vector<SlackBranch>& branches, int point, HypothesisVerdict& v,
                bool& any_branch) {
  for (const SlackBranch& b : branches) {
    if (!any_branch || b.slack < v.margin) {
      v.margin = b.slack;
      v.location = point;
    }
    any_branch = true;
    if (b.strict ? !(b.slack > 0.0) : !(b.slack >= 0.0)) v.holds = false;
  }
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

}  // namespace

const char* quantity_name(QuantityId id) {
  for (const NameEntry& e : kNames) {
    if (e.id == id) return e.name;
  }
  throw std::invalid_argument("unknown quantity id");
}

std::optional<QuantityId> quantity_id_from_name(std::string_view name) {
  for (const NameEntry& e : kNames) {
    if (name == e.name) return e.id;
  }
  return std::nullopt;
}

QuantitySpec make_quantity_spec(QuantityId id, const QuantityConstants& k) {
  QuantitySpec spec;
  spec.id = id;
  spec.k = k;
  switch (id) {
    case QuantityId::kT37:
      spec.expected_trend = Trend::kNonincreasing;
      break;
    case QuantityId::kEinsteinQ:
      spec.expected_trend = Trend::kConstantOrIncreasing;
      break;
    default:
      spec.expected_trend = Trend::kNondecreasing;
      break;
  }
  return spec;
}

std::vector<std::string> arming_violations(const QuantitySpec& spec) {
  std::vector<std::string> out;
  const QuantityConstants& k = spec.k;
  const auto add = [&out](const std::string& s) { out.push_back(s); };

  // Shared structural conditions, mirrored from the flow parameter contract.
  if (k.n != 2 && k.n != 3) add("n must be 2 or 3");
  if (!std::isfinite(k.p) || k.p < 1.1) add("p must be finite and >= 1.1");
  if (!(std::isfinite(k.rho) && k.rho < 1.0 / (2.0 * (k.n - 1)))) {
    add("rho must be finite and satisfy rho < 1/(2(n-1))");
  }
  for (double v : {k.c, k.C, k.beta, k.gamma, k.a_pinch, k.epsilon, k.a_einstein}) {
    if (!std::isfinite(v)) {
      add("constants must be finite");
      break;
    }
  }
  if (!out.empty()) return out;  // per-id bounds assume the shared ones

  const double n = k.n;
  switch (spec.id) {
    case QuantityId::kT33Proof:
    case QuantityId::kT33Statement:
      if (k.beta < (1.0 + k.rho * (k.p - n)) / k.p) {
        add("beta must be at least (1 + rho (p - n)) / p");
      }
      if (k.gamma < 1.0 / k.p) add("gamma must be at least 1/p");
      break;
    case QuantityId::kT37:
      if (!(k.C > 0.0)) add("C (initial max scalar curvature) must be positive");
      if (std::abs(theorem_A(k.n, k.p, k.rho)) < 1e-12) {
        add("growth exponent base A is degenerate (too close to zero)");
      }
      break;
    case QuantityId::kT38Raw:
      if (k.a_pinch < 0.0) add("a_pinch must be nonnegative");
      else if (k.c < k.p * k.a_pinch / (1.0 - n * k.rho)) {
        add("initial min scalar curvature must be at least p a_pinch / (1 - n rho)");
      }
      break;
    case QuantityId::kSurfLower:
      if (k.n != 2) add("surface bound requires n = 2");
      if (k.c < 0.0) add("initial min scalar curvature must be nonnegative");
      if (k.p < 2.0) add("surface bound requires p >= 2");
      break;
    case QuantityId::kCor35:
      if (k.n != 3) add("three-dimensional case requires n = 3");
      if (!(k.rho > 1.0 / 6.0 && k.rho < 0.25)) add("rho must lie in (1/6, 1/4)");
      if (k.c < 0.0) add("initial min scalar curvature must be nonnegative");
      if (k.p < 3.0) add("requires p >= 3");
      break;
    case QuantityId::kProp312A:
      if (k.n != 3) add("three-dimensional case requires n = 3");
      if (!(k.rho < 0.25)) add("requires rho < 1/4");
      if (!(k.epsilon >= 0.0 && k.epsilon <= 1.0 / 3.0)) add("epsilon must lie in [0, 1/3]");
      if (k.p > 3.0) add("requires p <= 3");
      if (!(k.c > 0.0)) add("initial min scalar curvature must be positive");
      if (k.C < k.c) add("C must be at least c");
      break;
    case QuantityId::kEinsteinQ:
      break;
  }
  return out;
}

bool is_armed(const QuantitySpec& spec) { return arming_violations(spec).empty(); }

double quantity_exponent_A(const QuantitySpec& spec) {
  const QuantityConstants& k = spec.k;
  switch (spec.id) {
    case QuantityId::kT33Proof:
    case QuantityId::kT33Statement:
      return k.p * (k.beta + k.gamma) - k.rho * (k.p + 2.0 * k.n);
    case QuantityId::kT37:
      return theorem_A(k.n, k.p, k.rho);
    default:
      throw std::invalid_argument(std::string(quantity_name(spec.id)) +
                                  " has no growth exponent base A");
  }
}

double quantity_window_end(const QuantitySpec& spec) {
  double end = kInf;
  for (const BaseFactor& b : base_factors(spec)) {
    end = std::min(end, b.positive_root());
  }
  return end;
}

double quantity_value(const QuantitySpec& spec, double t, double lambda) {
  require_finite(t, "t");
  require_finite(lambda, "lambda");
  const QuantityConstants& k = spec.k;
  const double n = k.n;
  const std::vector<double> base = bases_at(spec, t);
  switch (spec.id) {
    case QuantityId::kT33Proof: {
      const double A = quantity_exponent_A(spec);
      return lambda * std::pow(base[0], n * A / (2.0 * (1.0 - n * k.rho)));
    }
    case QuantityId::kT33Statement:
      return lambda * std::pow(base[0], 1.0 / n);
    case QuantityId::kT37: {
      const double A = theorem_A(k.n, k.p, k.rho);
      return lambda * std::pow(base[0], (n * k.rho - 1.0) / A);
    }
    case QuantityId::kT38Raw:
      return lambda;
    case QuantityId::kSurfLower:
      return lambda / std::pow(base[0], k.p / 2.0);
    case QuantityId::kCor35:
      return lambda * std::pow(base[0], 1.5);
    case QuantityId::kProp312A: {
      // exp(-int_0^t A) with A(tau) = 3 c (1-3rho) / (3 - 2(1-3rho) c tau)
      //   + (3rho + p eps - 1 - rho p) / (1/C - 2(1-rho) tau):
      // both kernels integrate to logarithms of the affine bases.
      const double k2 = (3.0 * k.rho + k.p * k.epsilon - 1.0 - k.rho * k.p) / (2.0 * (1.0 - k.rho));
      return lambda * std::pow(base[0] / 3.0, 1.5) * std::pow(base[1], k2);
    }
    case QuantityId::kEinsteinQ:
      return lambda * std::pow(base[0], k.p / 2.0);
  }
  throw std::invalid_argument("unknown quantity id");
}

HypothesisVerdict hypothesis_check(const QuantitySpec& spec, const TorusGeometry& geom,
                                   const FlowParams& params) {
  geom.validate();
  params.validate();
  if (spec.k.n != 2 || params.n != 2) {
    throw std::invalid_argument("pointwise hypothesis scan runs on surfaces (n = 2)");
  }
  if (params.rho != spec.k.rho || params.p != spec.k.p) {
    throw std::invalid_argument("flow parameters disagree with the quantity's constants");
  }

  const ScalarField R = scalar_curvature(geom);
  const ScalarField dphi = metric_laplacian(geom, geom.phi);

  HypothesisVerdict v;
  v.id = spec.id;
  bool any_branch = false;
  std::vector<SlackBranch> branches;
  for (int kk = 0; kk < R.size(); ++kk) {
    collect_slacks(spec, R[kk], dphi[kk], branches);
    fold_point(branches, kk, v, any_branch);
  }
  return v;
}

HypothesisVerdict hypothesis_check_constant(const QuantitySpec& spec, double scalar_curv,
                                            double lap_phi) {
  require_finite(scalar_curv, "scalar curvature");
  require_finite(lap_phi, "weight Laplacian");
  HypothesisVerdict v;
  v.id = spec.id;
  bool any_branch = false;
  std::vector<SlackBranch> branches;
  collect_slacks(spec, scalar_curv, lap_phi, branches);
  fold_point(branches, 0, v, any_branch);
  return v;
}

TrendVerdict trend_verdict(const std::vector<std::pair<double, double>>& series, Trend expected,
                           double tol_rel) {
  if (series.size() < 2) {
    throw std::invalid_argument("trend verdict needs at least two samples");
  }
  if (!(std::isfinite(tol_rel) && tol_rel >= 0.0)) {
    throw std::invalid_argument("tol_rel must be finite and nonnegative");
  }
  for (size_t i = 0; i < series.size(); ++i) {
    if (!std::isfinite(series[i].first) || !std::isfinite(series[i].second)) {
      throw std::invalid_argument("series entries must be finite");
    }
    if (i > 0 && !(series[i].first > series[i - 1].first)) {
      throw std::invalid_argument("sample times must be strictly increasing");
    }
  }

  const bool down = (expected == Trend::kNonincreasing);
  TrendVerdict verdict;
  verdict.outcome = down ? TrendOutcome::kNonincreasing : TrendOutcome::kNondecreasing;
  for (size_t i = 0; i + 1 < series.size(); ++i) {
    const double v = series[i].second;
    const double w = series[i + 1].second;
    const double slack = tol_rel * std::abs(v);
    const bool bad = down ? (w > v + slack) : (w < v - slack);
    if (bad) {
      verdict.outcome = TrendOutcome::kViolated;
      verdict.first_t = series[i + 1].first;
      verdict.magnitude = std::abs(w - v);
      return verdict;
    }
  }
  return verdict;
}

}  // namespace rbflow

#include "rbflow/monotone.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "rbflow/errors.hpp"
#include "rbflow/fields.hpp"
#include "rbflow/flow.hpp"

namespace rbflow {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

TorusGeometry make_torus(int n, double u_amp, double phi_amp) {
  TorusGeometry g;
  g.nx = n;
  g.ny = n;
  g.Lx = 2.0 * kPi;
  g.Ly = 2.0 * kPi;
  g.u = ScalarField(n, n, 0.0);
  g.phi = ScalarField(n, n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      g.u.at(i, j) = u_amp * std::cos(g.node_x(i));
      g.phi.at(i, j) = phi_amp * std::cos(g.node_y(j));
    }
  }
  return g;
}

QuantityConstants constants(int n, double p, double rho) {
  QuantityConstants k;
  k.n = n;
  k.p = p;
  k.rho = rho;
  return k;
}

std::vector<QuantityId> all_ids() {
  return {QuantityId::kT33Proof, QuantityId::kT33Statement, QuantityId::kT37,
          QuantityId::kT38Raw,   QuantityId::kSurfLower,    QuantityId::kCor35,
          QuantityId::kProp312A, QuantityId::kEinsteinQ};
}

// --- Catalog bookkeeping -----------------------------------------------------

TEST(Catalog, NamesRoundTripAndUnknownNamesAreRejected) {
  for (QuantityId id : all_ids()) {
    const char* name = quantity_name(id);
    ASSERT_NE(name, nullptr);
    const auto back = quantity_id_from_name(name);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, id);
  }
  EXPECT_FALSE(quantity_id_from_name("").has_value());
  EXPECT_FALSE(quantity_id_from_name("T99_unknown").has_value());
  EXPECT_FALSE(quantity_id_from_name("t33_proof").has_value());  // case-sensitive
}

TEST(Catalog, ExpectedTrendsFollowTheQuantityKind) {
  const auto k = constants(2, 2.0, 0.0);
  EXPECT_EQ(make_quantity_spec(QuantityId::kT37, k).expected_trend, Trend::kNonincreasing);
  EXPECT_EQ(make_quantity_spec(QuantityId::kEinsteinQ, k).expected_trend,
            Trend::kConstantOrIncreasing);
  for (QuantityId id : {QuantityId::kT33Proof, QuantityId::kT33Statement, QuantityId::kT38Raw,
                        QuantityId::kSurfLower, QuantityId::kCor35, QuantityId::kProp312A}) {
    EXPECT_EQ(make_quantity_spec(id, k).expected_trend, Trend::kNondecreasing);
  }
}

// --- Value formulas against frozen hand-computed pins ------------------------

TEST(QuantityValue, PinnedThreeHalvesPowerCase) {
  auto k = constants(3, 3.0, 1.0 / 6.0);
  k.c = 1.0;
  const auto spec = make_quantity_spec(QuantityId::kCor35, k);
  // base = 3 - 2 (1 - 3/6) * 1 * 1 = 2, value = 2^{3/2}.
  EXPECT_NEAR(quantity_value(spec, 1.0, 1.0), 2.8284271247461903, 1e-12);
}

TEST(QuantityValue, PinnedDecreasingQuantityCase) {
  auto k = constants(3, 2.0, 0.0);
  k.C = 1.5;
  const auto spec = make_quantity_spec(QuantityId::kT37, k);
  EXPECT_DOUBLE_EQ(quantity_exponent_A(spec), 1.5);
  EXPECT_NEAR(quantity_value(spec, 0.2, 2.0), 2.9793500749114393, 1e-12);
  EXPECT_NEAR(quantity_window_end(spec), 1.0 / 2.25, 1e-15);
}

TEST(QuantityValue, PinnedMixedPinchingCases) {
  auto k = constants(2, 2.0, 0.1);
  k.c = -2.0;
  k.beta = 0.6;
  k.gamma = 0.6;
  const auto proof = make_quantity_spec(QuantityId::kT33Proof, k);
  EXPECT_NEAR(quantity_exponent_A(proof), 1.8, 1e-14);
  EXPECT_NEAR(quantity_value(proof, 0.4, 0.5), 7.2391262819829582, 1e-11);
  const auto stmt = make_quantity_spec(QuantityId::kT33Statement, k);
  EXPECT_NEAR(quantity_value(stmt, 0.4, 0.5), 0.9486832980505138, 1e-13);
  // Negative c keeps both bases growing: no finite window.
  EXPECT_EQ(quantity_window_end(proof), kInf);
  EXPECT_EQ(quantity_window_end(stmt), kInf);
}

TEST(QuantityValue, PinnedSurfaceLowerBoundCase) {
  auto k = constants(2, 3.0, 0.1);
  k.c = 0.5;
  const auto spec = make_quantity_spec(QuantityId::kSurfLower, k);
  EXPECT_NEAR(quantity_value(spec, 1.0, 0.8), 1.7213259316477408, 1e-12);
  EXPECT_NEAR(quantity_window_end(spec), 2.5, 1e-14);
}

TEST(QuantityValue, RawEigenvalueQuantityIsTheIdentity) {
  auto k = constants(2, 2.0, 0.0);
  k.a_pinch = 0.0;
  const auto spec = make_quantity_spec(QuantityId::kT38Raw, k);
  EXPECT_EQ(quantity_window_end(spec), kInf);
  EXPECT_DOUBLE_EQ(quantity_value(spec, 0.0, 0.7), 0.7);
  EXPECT_DOUBLE_EQ(quantity_value(spec, 123.0, 0.7), 0.7);
}

TEST(QuantityValue, HomogeneousCompensatorPinAndWindow) {
  auto k = constants(2, 2.0, 0.0);
  k.a_einstein = 1.0;
  const auto spec = make_quantity_spec(QuantityId::kEinsteinQ, k);
  EXPECT_DOUBLE_EQ(quantity_value(spec, 0.25, 4.0), 2.0);  // 4 * (1 - 0.5)
  EXPECT_DOUBLE_EQ(quantity_window_end(spec), 0.5);
  auto k2 = constants(2, 2.0, 0.0);
  k2.a_einstein = -1.0;  // expanding path: no finite window
  EXPECT_EQ(quantity_window_end(make_quantity_spec(QuantityId::kEinsteinQ, k2)), kInf);
}

TEST(QuantityValue, AtTimeZeroEveryQuantityIsLambdaTimesAPositiveConstant) {
  auto k = constants(3, 3.0, 0.2);
  k.c = 1.0;
  k.C = 2.0;
  k.beta = 0.5;
  k.gamma = 0.5;
  k.epsilon = 0.2;
  k.a_einstein = 1.0;
  for (QuantityId id : all_ids()) {
    auto kk = k;
    if (id == QuantityId::kSurfLower) {
      kk.n = 2;  // surface-only quantity
      kk.rho = 0.1;
    }
    const auto spec = make_quantity_spec(id, kk);
    const double v1 = quantity_value(spec, 0.0, 1.3);
    const double v2 = quantity_value(spec, 0.0, 2.6);
    EXPECT_GT(v1, 0.0) << quantity_name(id);
    EXPECT_NEAR(v2, 2.0 * v1, 1e-12 * v2) << quantity_name(id);  // linear in lambda
  }
  // The homogeneous compensator and the raw eigenvalue reduce to lambda itself.
  EXPECT_DOUBLE_EQ(quantity_value(make_quantity_spec(QuantityId::kEinsteinQ, k), 0.0, 1.3), 1.3);
  EXPECT_DOUBLE_EQ(quantity_value(make_quantity_spec(QuantityId::kT38Raw, k), 0.0, 1.3), 1.3);
}

TEST(QuantityValue, GrowthExponentIsOnlyDefinedForThePinchedFamilies) {
  const auto k = constants(2, 2.0, 0.0);
  EXPECT_THROW(quantity_exponent_A(make_quantity_spec(QuantityId::kT38Raw, k)),
               std::invalid_argument);
  EXPECT_THROW(quantity_exponent_A(make_quantity_spec(QuantityId::kEinsteinQ, k)),
               std::invalid_argument);
}

// --- Two-kernel compensator: closed form vs numerical quadrature -------------

TEST(TwoKernelCompensator, ClosedFormMatchesSimpsonQuadratureOfItsRate) {
  auto k = constants(3, 3.0, 0.1);
  k.c = 1.0;
  k.C = 2.0;
  k.epsilon = 0.2;
  const auto spec = make_quantity_spec(QuantityId::kProp312A, k);
  const double lam = 1.3;
  const double t = 0.2;

  // Independent route: Simpson quadrature of the integrand
  //   A(tau) = 3 c (1-3rho)/(3 - 2(1-3rho) c tau)
  //          + (3rho + p eps - 1 - rho p)/(1/C - 2(1-rho) tau).
  const auto rate = [&](double tau) {
    const double first = 3.0 * k.c * (1.0 - 3.0 * k.rho) / (3.0 - 2.0 * (1.0 - 3.0 * k.rho) * k.c * tau);
    const double second = (3.0 * k.rho + k.p * k.epsilon - 1.0 - k.rho * k.p) /
                          (1.0 / k.C - 2.0 * (1.0 - k.rho) * tau);
    return first + second;
  };
  const int m = 20000;  // even
  const double h = t / m;
  double integral = rate(0.0) + rate(t);
  for (int i = 1; i < m; ++i) integral += (i % 2 == 1 ? 4.0 : 2.0) * rate(i * h);
  integral *= h / 3.0;

  const double expected = lam * std::exp(-integral);
  const double got = quantity_value(spec, t, lam);
  EXPECT_NEAR(got, expected, 1e-10 * expected);
  EXPECT_NEAR(got, 1.4892533890785819, 1e-12);  // frozen pin
}

TEST(TwoKernelCompensator, WindowIsTheEarlierOfTheTwoBases) {
  auto k = constants(3, 3.0, 0.1);
  k.c = 1.0;
  k.C = 2.0;
  k.epsilon = 0.2;
  const auto spec = make_quantity_spec(QuantityId::kProp312A, k);
  // Base roots: 3/(2*0.7*1) = 2.142857... and 1/(2*0.9*2) = 0.2777...
  EXPECT_NEAR(quantity_window_end(spec), 1.0 / 3.6, 1e-15);
  EXPECT_NO_THROW(quantity_value(spec, 0.27, 1.0));
  EXPECT_THROW(quantity_value(spec, 0.28, 1.0), FlowDomainError);
}

// --- Window discipline --------------------------------------------------------

TEST(WindowDiscipline, EveryWindowedQuantityThrowsOnAndPastItsEnd) {
  std::vector<QuantitySpec> specs;
  {
    auto k = constants(2, 2.0, 0.1);
    k.c = 1.0;
    k.beta = 0.5;
    k.gamma = 0.5;
    specs.push_back(make_quantity_spec(QuantityId::kT33Proof, k));
    specs.push_back(make_quantity_spec(QuantityId::kT33Statement, k));
    specs.push_back(make_quantity_spec(QuantityId::kSurfLower, k));
  }
  {
    auto k = constants(3, 2.0, 0.0);
    k.C = 1.5;
    specs.push_back(make_quantity_spec(QuantityId::kT37, k));
  }
  {
    auto k = constants(3, 3.0, 0.2);
    k.c = 1.0;
    k.C = 1.0;
    k.epsilon = 0.1;
    specs.push_back(make_quantity_spec(QuantityId::kCor35, k));
    specs.push_back(make_quantity_spec(QuantityId::kProp312A, k));
  }
  {
    auto k = constants(2, 3.0, 0.1);
    k.a_einstein = 2.0;
    specs.push_back(make_quantity_spec(QuantityId::kEinsteinQ, k));
  }
  for (const auto& spec : specs) {
    const double end = quantity_window_end(spec);
    ASSERT_TRUE(std::isfinite(end)) << quantity_name(spec.id);
    ASSERT_GT(end, 0.0) << quantity_name(spec.id);
    EXPECT_NO_THROW(quantity_value(spec, end * (1.0 - 1e-9), 1.0)) << quantity_name(spec.id);
    try {
      quantity_value(spec, end, 1.0);
      FAIL() << quantity_name(spec.id) << ": expected a domain error at the window end";
    } catch (const FlowDomainError& e) {
      EXPECT_DOUBLE_EQ(e.t_limit, end) << quantity_name(spec.id);
      EXPECT_NE(std::string(e.what()).find(quantity_name(spec.id)), std::string::npos);
    }
    EXPECT_THROW(quantity_value(spec, 2.0 * end, 1.0), FlowDomainError) << quantity_name(spec.id);
  }
}

TEST(WindowDiscipline, RejectsNonFiniteInputs) {
  auto k = constants(2, 2.0, 0.0);
  const auto spec = make_quantity_spec(QuantityId::kT38Raw, k);
  EXPECT_THROW(quantity_value(spec, std::nan(""), 1.0), std::invalid_argument);
  EXPECT_THROW(quantity_value(spec, 0.0, kInf), std::invalid_argument);
}

// --- Arming side conditions ---------------------------------------------------

TEST(Arming, SharedStructuralConditionsAreCollectedTogether) {
  auto k = constants(4, 1.05, 0.5);  // bad n, bad p; rho checked against n
  const auto spec = make_quantity_spec(QuantityId::kT38Raw, k);
  const auto v = arming_violations(spec);
  ASSERT_GE(v.size(), 2u);
  EXPECT_FALSE(is_armed(spec));
  bool saw_n = false, saw_p = false;
  for (const auto& msg : v) {
    if (msg.find("n must be") != std::string::npos) saw_n = true;
    if (msg.find("p must be") != std::string::npos) saw_p = true;
  }
  EXPECT_TRUE(saw_n);
  EXPECT_TRUE(saw_p);

  auto k2 = constants(2, 2.0, 0.5);  // rho at the open boundary 1/(2(n-1))
  const auto v2 = arming_violations(make_quantity_spec(QuantityId::kT38Raw, k2));
  ASSERT_EQ(v2.size(), 1u);
  EXPECT_NE(v2[0].find("rho"), std::string::npos);
}

TEST(Arming, MixedPinchingWeightsMustClearTheirLowerBounds) {
  auto k = constants(2, 2.0, 0.0);
  k.beta = 0.49;
  k.gamma = 0.5;
  auto spec = make_quantity_spec(QuantityId::kT33Proof, k);
  auto v = arming_violations(spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("beta"), std::string::npos);

  spec.k.beta = 0.5;
  spec.k.gamma = 0.49;
  v = arming_violations(spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("gamma"), std::string::npos);

  spec.k.gamma = 0.5;
  EXPECT_TRUE(is_armed(spec));

  // The beta bound moves with rho and p: (1 + 0.1 (3 - 2)) / 3.
  auto k3 = constants(2, 3.0, 0.1);
  k3.beta = 0.36;
  k3.gamma = 1.0 / 3.0;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kT33Statement, k3)));
  k3.beta = 0.37;
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kT33Statement, k3)));
}

TEST(Arming, DecreasingQuantityNeedsPositiveInitialCurvatureMaximum) {
  auto k = constants(3, 2.0, 0.0);
  k.C = 0.0;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kT37, k)));
  k.C = 2.0;
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kT37, k)));
}

TEST(Arming, AlmostPinchedQuantityTiesTheSlackToTheInitialMinimum) {
  auto k = constants(2, 2.0, 0.0);
  k.a_pinch = -0.1;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kT38Raw, k)));
  k.a_pinch = 0.1;
  k.c = 0.1;  // needs c >= p a / (1 - n rho) = 0.2
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kT38Raw, k)));
  k.c = 0.2;
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kT38Raw, k)));
  k.a_pinch = 0.0;
  k.c = 0.0;  // flat case arms with zero slack
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kT38Raw, k)));
}

TEST(Arming, SurfaceAndThreeDimensionalCasesPinTheirRanges) {
  auto ks = constants(3, 2.0, 0.1);
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kSurfLower, ks)));  // n != 2
  ks = constants(2, 1.5, 0.1);
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kSurfLower, ks)));  // p < 2
  ks = constants(2, 2.0, 0.1);
  ks.c = -0.5;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kSurfLower, ks)));  // c < 0
  ks.c = 0.0;
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kSurfLower, ks)));

  auto kc = constants(3, 3.0, 1.0 / 6.0);  // boundary rho excluded
  kc.c = 1.0;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kCor35, kc)));
  kc.rho = 0.2;
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kCor35, kc)));
  kc.p = 2.5;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kCor35, kc)));

  auto kp = constants(3, 3.0, 0.1);
  kp.c = 1.0;
  kp.C = 2.0;
  kp.epsilon = 0.2;
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kProp312A, kp)));
  kp.epsilon = 0.4;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kProp312A, kp)));
  kp.epsilon = 0.2;
  kp.p = 3.5;
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kProp312A, kp)));
  kp.p = 3.0;
  kp.C = 0.5;  // below c
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kProp312A, kp)));
  kp.C = 1.0;
  kp.c = 0.0;  // needs strictly positive initial curvature
  EXPECT_FALSE(is_armed(make_quantity_spec(QuantityId::kProp312A, kp)));

  auto ke = constants(2, 2.0, 0.3);
  ke.a_einstein = -3.0;
  EXPECT_TRUE(is_armed(make_quantity_spec(QuantityId::kEinsteinQ, ke)));
}

// --- Pointwise hypothesis scans ------------------------------------------------

TEST(HypothesisScan, SaturatedStrictPinchingReportsZeroMarginNotHolding) {
  // Round shrinking sphere at unit scale: Ric = (R/2) g with R = 2 saturates
  // the strict upper pinching exactly.
  auto k = constants(2, 2.0, 0.0);
  k.C = 2.0;
  const auto spec = make_quantity_spec(QuantityId::kT37, k);
  const auto v = hypothesis_check_constant(spec, 2.0, 0.0);
  EXPECT_EQ(v.id, QuantityId::kT37);
  EXPECT_FALSE(v.holds);
  EXPECT_NEAR(v.margin, 0.0, 1e-15);
  EXPECT_EQ(v.location, 0);
}

TEST(HypothesisScan, FlatAlmostPinchedCaseHoldsWithZeroMargin) {
  const auto geom = make_torus(16, 0.0, 0.0);
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  auto k = constants(2, 2.0, 0.0);
  k.a_pinch = 0.0;
  const auto spec = make_quantity_spec(QuantityId::kT38Raw, k);
  const auto v = hypothesis_check(spec, geom, params);
  EXPECT_TRUE(v.holds);
  EXPECT_DOUBLE_EQ(v.margin, 0.0);
  EXPECT_GE(v.location, 0);
}

TEST(HypothesisScan, MixedSignCurvatureReportsTheWorstNode) {
  // u = 0.2 cos x makes R take both signs; with a static weight the strict
  // branch requires the weight Laplacian to dominate R, so the margin is the
  // negated curvature maximum and the location attains it.
  const auto geom = make_torus(32, 0.2, 0.0);
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  auto k = constants(2, 2.0, 0.0);
  k.beta = 0.5;
  k.gamma = 0.5;
  const auto spec = make_quantity_spec(QuantityId::kT33Proof, k);
  const auto v = hypothesis_check(spec, geom, params);
  const ScalarField R = scalar_curvature(geom);
  EXPECT_FALSE(v.holds);
  EXPECT_NEAR(v.margin, -R.max(), 1e-15);
  ASSERT_GE(v.location, 0);
  ASSERT_LT(v.location, R.size());
  EXPECT_DOUBLE_EQ(R[v.location], R.max());
}

TEST(HypothesisScan, WeightLaplacianEntersBothBranches) {
  const auto geom = make_torus(32, 0.0, 0.3);
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  auto k = constants(2, 2.0, 0.0);
  k.beta = 0.5;
  k.gamma = 0.5;
  const auto spec = make_quantity_spec(QuantityId::kT33Statement, k);
  const auto v = hypothesis_check(spec, geom, params);
  const ScalarField dphi = metric_laplacian(geom, geom.phi);
  double expected = kInf;
  for (int kk = 0; kk < dphi.size(); ++kk) {
    expected = std::min(expected, std::min(-0.5 * dphi[kk], dphi[kk]));
  }
  EXPECT_FALSE(v.holds);  // the mixed branch goes negative where dphi peaks
  EXPECT_DOUBLE_EQ(v.margin, expected);
}

TEST(HypothesisScan, SurfaceBoundScansTheCurvatureSign) {
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  const auto k = constants(2, 2.0, 0.0);
  const auto spec = make_quantity_spec(QuantityId::kSurfLower, k);

  const auto flat = make_torus(16, 0.0, 0.0);
  const auto v_flat = hypothesis_check(spec, flat, params);
  EXPECT_TRUE(v_flat.holds);
  EXPECT_DOUBLE_EQ(v_flat.margin, 0.0);

  const auto warped = make_torus(32, 0.2, 0.0);
  const auto v_warp = hypothesis_check(spec, warped, params);
  const ScalarField R = scalar_curvature(warped);
  EXPECT_FALSE(v_warp.holds);
  EXPECT_DOUBLE_EQ(v_warp.margin, R.min());
}

TEST(HypothesisScan, RicciFractionBranchesOfTheThreeDimensionalCase) {
  auto k = constants(3, 3.0, 0.1);
  k.epsilon = 1.0 / 3.0;
  const auto spec = make_quantity_spec(QuantityId::kProp312A, k);
  // On a homogeneous state Ric = (R/3) g: epsilon = 1/3 saturates the weak
  // branch (margin 0, still holds); nonpositive curvature breaks the strict one.
  const auto v_sat = hypothesis_check_constant(spec, 3.0, 0.0);
  EXPECT_TRUE(v_sat.holds);
  EXPECT_NEAR(v_sat.margin, 0.0, 1e-15);
  const auto v_flat = hypothesis_check_constant(spec, 0.0, 0.0);
  EXPECT_FALSE(v_flat.holds);
  EXPECT_DOUBLE_EQ(v_flat.margin, 0.0);
}

TEST(HypothesisScan, HomogeneousCompensatorHasNoPointwiseHypothesis) {
  const auto k = constants(2, 2.0, 0.0);
  const auto spec = make_quantity_spec(QuantityId::kEinsteinQ, k);
  const auto v = hypothesis_check_constant(spec, -5.0, 3.0);
  EXPECT_TRUE(v.holds);
  EXPECT_DOUBLE_EQ(v.margin, 0.0);
  EXPECT_EQ(v.location, -1);

  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  const auto grid = hypothesis_check(spec, make_torus(16, 0.1, 0.0), params);
  EXPECT_TRUE(grid.holds);
  EXPECT_EQ(grid.location, -1);
}

TEST(HypothesisScan, GridAndConstantRoutesAgreeOnFlatData) {
  const auto geom = make_torus(16, 0.0, 0.0);
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.1;
  for (QuantityId id : all_ids()) {
    auto k = constants(2, 2.0, 0.1);
    k.beta = 0.5;
    k.gamma = 0.5;
    k.epsilon = 0.2;
    const auto spec = make_quantity_spec(id, k);
    const auto grid = hypothesis_check(spec, geom, params);
    const auto onept = hypothesis_check_constant(spec, 0.0, 0.0);
    EXPECT_EQ(grid.holds, onept.holds) << quantity_name(id);
    EXPECT_DOUBLE_EQ(grid.margin, onept.margin) << quantity_name(id);
  }
}

TEST(HypothesisScan, GuardsRejectMismatchedParametersAndDimensions) {
  const auto geom = make_torus(16, 0.0, 0.0);
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;

  auto k3 = constants(3, 3.0, 0.2);
  k3.c = 1.0;
  EXPECT_THROW(hypothesis_check(make_quantity_spec(QuantityId::kCor35, k3), geom, params),
               std::invalid_argument);

  auto k2 = constants(2, 2.0, 0.1);  // rho disagrees with params
  EXPECT_THROW(hypothesis_check(make_quantity_spec(QuantityId::kT38Raw, k2), geom, params),
               std::invalid_argument);

  auto kp = constants(2, 3.0, 0.0);  // p disagrees with params
  EXPECT_THROW(hypothesis_check(make_quantity_spec(QuantityId::kT38Raw, kp), geom, params),
               std::invalid_argument);

  const auto spec = make_quantity_spec(QuantityId::kT38Raw, constants(2, 2.0, 0.0));
  EXPECT_THROW(hypothesis_check_constant(spec, std::nan(""), 0.0), std::invalid_argument);
  EXPECT_THROW(hypothesis_check_constant(spec, 0.0, kInf), std::invalid_argument);
}

// --- Trend judgement ------------------------------------------------------------

TEST(TrendJudgement, RisingSeriesMatchesANondecreasingExpectation) {
  const std::vector<std::pair<double, double>> s = {{0.0, 1.0}, {1.0, 2.0}, {2.0, 3.0}};
  const auto v = trend_verdict(s, Trend::kNondecreasing, 1e-6);
  EXPECT_EQ(v.outcome, TrendOutcome::kNondecreasing);
}

TEST(TrendJudgement, DropIsViolatedAtItsOwnSampleTime) {
  const std::vector<std::pair<double, double>> s = {{0.0, 1.0}, {1.0, 0.9}};
  const auto v = trend_verdict(s, Trend::kNondecreasing, 1e-6);
  EXPECT_EQ(v.outcome, TrendOutcome::kViolated);
  EXPECT_DOUBLE_EQ(v.first_t, 1.0);
  EXPECT_NEAR(v.magnitude, 0.1, 1e-12);
}

TEST(TrendJudgement, JitterWithinTheRelativeToleranceIsAccepted) {
  std::vector<std::pair<double, double>> s;
  for (int i = 0; i < 9; ++i) {
    s.emplace_back(0.1 * i, 5.0 + (i % 2 == 0 ? 4e-9 : -4e-9));
  }
  EXPECT_EQ(trend_verdict(s, Trend::kNondecreasing, 1e-6).outcome, TrendOutcome::kNondecreasing);
  EXPECT_EQ(trend_verdict(s, Trend::kConstantOrIncreasing, 1e-6).outcome,
            TrendOutcome::kNondecreasing);
  EXPECT_EQ(trend_verdict(s, Trend::kNonincreasing, 1e-6).outcome, TrendOutcome::kNonincreasing);
  // The same jitter fails a closed-form tolerance.
  EXPECT_EQ(trend_verdict(s, Trend::kNondecreasing, kTrendTolClosedForm).outcome,
            TrendOutcome::kViolated);
}

TEST(TrendJudgement, NonincreasingExpectationFlagsRises) {
  const std::vector<std::pair<double, double>> fall = {{0.0, 3.0}, {0.5, 2.0}, {1.0, 1.0}};
  EXPECT_EQ(trend_verdict(fall, Trend::kNonincreasing, 1e-6).outcome,
            TrendOutcome::kNonincreasing);
  const std::vector<std::pair<double, double>> rise = {{0.0, 1.0}, {1.0, 1.1}};
  const auto v = trend_verdict(rise, Trend::kNonincreasing, 1e-6);
  EXPECT_EQ(v.outcome, TrendOutcome::kViolated);
  EXPECT_DOUBLE_EQ(v.first_t, 1.0);
  EXPECT_NEAR(v.magnitude, 0.1, 1e-12);
}

TEST(TrendJudgement, ToleranceScalesWithTheMagnitudeOfNegativeValues) {
  const std::vector<std::pair<double, double>> ok = {{0.0, -1.0}, {1.0, -1.0 - 5e-7}};
  EXPECT_EQ(trend_verdict(ok, Trend::kNondecreasing, 1e-6).outcome, TrendOutcome::kNondecreasing);
  const std::vector<std::pair<double, double>> bad = {{0.0, -1.0}, {1.0, -1.1}};
  const auto v = trend_verdict(bad, Trend::kNondecreasing, 1e-6);
  EXPECT_EQ(v.outcome, TrendOutcome::kViolated);
  EXPECT_NEAR(v.magnitude, 0.1, 1e-12);
}

TEST(TrendJudgement, GuardsRejectDegenerateSeries) {
  EXPECT_THROW(trend_verdict({}, Trend::kNondecreasing, 1e-6), std::invalid_argument);
  EXPECT_THROW(trend_verdict({{0.0, 1.0}}, Trend::kNondecreasing, 1e-6), std::invalid_argument);
  EXPECT_THROW(trend_verdict({{0.0, 1.0}, {0.0, 2.0}}, Trend::kNondecreasing, 1e-6),
               std::invalid_argument);
  EXPECT_THROW(trend_verdict({{1.0, 1.0}, {0.5, 2.0}}, Trend::kNondecreasing, 1e-6),
               std::invalid_argument);
  EXPECT_THROW(trend_verdict({{0.0, 1.0}, {1.0, std::nan("")}}, Trend::kNondecreasing, 1e-6),
               std::invalid_argument);
  EXPECT_THROW(trend_verdict({{0.0, 1.0}, {1.0, 2.0}}, Trend::kNondecreasing, -1.0),
               std::invalid_argument);
}

// --- Homogeneous closed-form paths ------------------------------------------------

TEST(HomogeneousPaths, CompensatedEigenvalueIsConstantAlongTheExactPath) {
  EinsteinState s;
  s.a = 1.0;
  s.n = 2;
  s.lambda0 = 0.996791364045;
  FlowParams params;
  params.n = 2;
  params.p = 3.0;
  params.rho = 0.1;
  auto k = constants(2, 3.0, 0.1);
  k.a_einstein = 1.0;
  const auto spec = make_quantity_spec(QuantityId::kEinsteinQ, k);

  std::vector<std::pair<double, double>> series;
  for (int i = 0; i <= 8; ++i) {
    const double t = 0.05 * i;
    const double q = quantity_value(spec, t, einstein_lambda(s, params, t));
    EXPECT_NEAR(q, s.lambda0, 1e-12 * s.lambda0);
    series.emplace_back(t, q);
  }
  EXPECT_EQ(trend_verdict(series, spec.expected_trend, kTrendTolClosedForm).outcome,
            TrendOutcome::kNondecreasing);
}

TEST(HomogeneousPaths, ExpandingHyperbolicPathFlagsOnlyTheStatementVariant) {
  // Constant negative curvature with a static weight: both mixed-pinching
  // variants arm, their hypotheses hold at every sample, the exponent-carrying
  // variant grows, and the companion variant shrinks. The shrink is the
  // documented red flag: a hypothesis-passing trend violation that must be
  // reported, not swallowed.
  EinsteinState s;
  s.a = -1.0;
  s.n = 2;
  s.lambda0 = 1.0;
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  auto k = constants(2, 2.0, 0.0);
  k.c = -2.0;  // R(0) = n a = -2
  k.beta = 0.5;
  k.gamma = 0.5;
  const auto proof = make_quantity_spec(QuantityId::kT33Proof, k);
  const auto stmt = make_quantity_spec(QuantityId::kT33Statement, k);
  ASSERT_TRUE(is_armed(proof));
  ASSERT_TRUE(is_armed(stmt));

  std::vector<std::pair<double, double>> qp, qs;
  for (int i = 0; i <= 10; ++i) {
    const double t = 0.05 * i;
    const double u = einstein_u(s, params, t);
    const double lam = einstein_lambda(s, params, t);
    const double R = s.n * s.a / u;
    for (const auto& spec : {proof, stmt}) {
      const auto v = hypothesis_check_constant(spec, R, 0.0);
      ASSERT_TRUE(v.holds) << quantity_name(spec.id) << " at t = " << t;
      EXPECT_NEAR(v.margin, 0.0, 1e-15);  // beta = 1/2 saturates the weak branch
    }
    qp.emplace_back(t, quantity_value(proof, t, lam));
    qs.emplace_back(t, quantity_value(stmt, t, lam));
    // Exponent route in closed form: 4 lambda0 (1 + 2t).
    EXPECT_NEAR(qp.back().second, 4.0 * (1.0 + 2.0 * t), 1e-12);
    EXPECT_NEAR(qs.back().second, std::sqrt(2.0) / std::sqrt(1.0 + 2.0 * t), 1e-12);
  }
  EXPECT_EQ(trend_verdict(qp, proof.expected_trend, kTrendTolClosedForm).outcome,
            TrendOutcome::kNondecreasing);
  const auto bad = trend_verdict(qs, stmt.expected_trend, kTrendTolClosedForm);
  EXPECT_EQ(bad.outcome, TrendOutcome::kViolated);
  EXPECT_DOUBLE_EQ(bad.first_t, 0.05);
}

TEST(HomogeneousPaths, ShrinkingSphereBreaksTheDecreasingTrendOnlyWithFailedHypotheses) {
  // The round sphere saturates the strict upper pinching, so the decreasing
  // quantity makes no claim there; its trend breach is not a red flag.
  EinsteinState s;
  s.a = 1.0;
  s.n = 2;
  s.lambda0 = 1.0;
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  auto k = constants(2, 2.0, 0.0);
  k.C = 2.0;
  const auto spec = make_quantity_spec(QuantityId::kT37, k);
  ASSERT_TRUE(is_armed(spec));

  std::vector<std::pair<double, double>> q;
  bool hypotheses_ever_held = false;
  for (int i = 0; i <= 6; ++i) {
    const double t = 0.02 * i;
    const double u = einstein_u(s, params, t);
    const auto v = hypothesis_check_constant(spec, s.n * s.a / u, 0.0);
    hypotheses_ever_held = hypotheses_ever_held || v.holds;
    q.emplace_back(t, quantity_value(spec, t, einstein_lambda(s, params, t)));
  }
  EXPECT_FALSE(hypotheses_ever_held);
  EXPECT_EQ(trend_verdict(q, spec.expected_trend, kTrendTolClosedForm).outcome,
            TrendOutcome::kViolated);
}

TEST(HomogeneousPaths, PinchedThreeSphereGrowsWithStrictlyPositiveMargins) {
  EinsteinState s;
  s.a = 1.0;
  s.n = 3;
  s.lambda0 = 1.0;
  FlowParams params;
  params.n = 3;
  params.p = 3.5;
  params.rho = 0.2;
  auto k = constants(3, 3.5, 0.2);
  k.c = 3.0;  // R(0) = n a
  const auto spec = make_quantity_spec(QuantityId::kCor35, k);
  ASSERT_TRUE(is_armed(spec));

  std::vector<std::pair<double, double>> q;
  for (int i = 0; i <= 10; ++i) {
    const double t = 0.1 * i;
    const double u = einstein_u(s, params, t);
    const double R = s.n * s.a / u;
    const auto v = hypothesis_check_constant(spec, R, 0.0);
    ASSERT_TRUE(v.holds) << "t = " << t;
    EXPECT_GT(v.margin, 0.0);
    q.emplace_back(t, quantity_value(spec, t, einstein_lambda(s, params, t)));
  }
  EXPECT_EQ(trend_verdict(q, spec.expected_trend, kTrendTolClosedForm).outcome,
            TrendOutcome::kNondecreasing);
}

TEST(HomogeneousPaths, SurfaceLowerBoundIsSaturatedByTheShrinkingSphere) {
  // Constant-curvature surfaces attain the running lower bound exactly:
  // lambda(t) and the bound evolve by the same homothety power.
  EinsteinState s;
  s.a = 1.0;
  s.n = 2;
  s.lambda0 = 2.0;
  FlowParams params;
  params.n = 2;
  params.p = 2.0;
  params.rho = 0.0;
  auto k = constants(2, 2.0, 0.0);
  k.c = 2.0;
  const auto spec = make_quantity_spec(QuantityId::kSurfLower, k);
  ASSERT_TRUE(is_armed(spec));

  for (int i = 0; i <= 8; ++i) {
    const double t = 0.05 * i;
    const double lam = einstein_lambda(s, params, t);
    const double bound = quantity_value(spec, t, s.lambda0);  // anchored at t = 0
    EXPECT_GE(lam, bound - 1e-12);
    EXPECT_NEAR(lam, bound, 1e-12 * lam);
  }
}

}  // namespace
}  // namespace rbflow

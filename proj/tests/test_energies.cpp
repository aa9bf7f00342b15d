#include <gtest/gtest.h>

#include "spinlab/energies.hpp"
#include "test_util.hpp"

using namespace spinlab;
using spinlab::testing::constant_field;
using spinlab::testing::random_field;

namespace {

LatticePtr unit_box(int n) { return build_lattice(DomainSpec::unit_box(), 1.0, n); }
const Vec3 kQ{2 * M_PI, 0, 0};
const double kHelixExchange = 2.0 * 4.0 * M_PI * M_PI;

}  // namespace

TEST(ExchangeDiscrete, ConstantFieldIsZero) {
  EXPECT_EQ(exchange_discrete(constant_field(unit_box(5), {0, 0, 1}), {1.0, 1.0}), 0.0);
}

TEST(ExchangeDiscrete, TwoNodesBothOrderings) {
  const auto lat = build_lattice(DomainSpec::box({-0.1, -0.1, -0.1}, {0.6, 0.1, 0.1}), 1.0, 2);
  ASSERT_EQ(lat->size(), 2u);
  std::vector<Vec3> v{{0, 0, 1}, {1, 0, 0}};
  EXPECT_DOUBLE_EQ(exchange_discrete(SpinField(lat, v), {1.0, 1.0}), 2.0);
  EXPECT_DOUBLE_EQ(exchange_discrete(SpinField(lat, v), {2.5, 1.0}), 5.0);
}

TEST(ExchangeDiscrete, ParameterChecks) {
  const SpinField f = constant_field(unit_box(2), {1, 0, 0});
  EXPECT_THROW(exchange_discrete(f, {0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(exchange_discrete(f, {1.0, 2.0}), InvalidArgument);
}

TEST(ExchangeDiscrete, RotationInvariant) {
  const SpinField f = random_field(unit_box(4), 21);
  const Mat3 r = spinlab::testing::rotation({0.3, -1, 2}, 1.1);
  EXPECT_NEAR(exchange_discrete(f, {1, 1}), exchange_discrete(spinlab::testing::rotated(f, r), {1, 1}), 1e-10);
}

TEST(ExchangeDiscrete, HelixSweepApproachesContinuum) {
  std::vector<double> err;
  for (int n : {8, 16, 32, 64}) err.push_back(std::abs(exchange_discrete(sample(fields::helix(kQ), unit_box(n)), {1, 1}) - kHelixExchange));
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_LT(err[i], err[i - 1]);
  // pairwise slope between the last two rows
  EXPECT_GE(std::log2(err[2] / err[3]), 0.9);
}

TEST(ExchangeContinuum, ConstantIsZeroAndHelixIsClosedForm) {
  const DomainSpec box = DomainSpec::unit_box();
  const auto c = exchange_continuum(fields::constant({0, 0, 1}), box, 1.0);
  EXPECT_EQ(c.value, 0.0);
  const auto h = exchange_continuum(fields::helix(kQ), box, 1.0);
  EXPECT_NEAR(h.value, kHelixExchange, std::max(h.error_estimate, 1e-9 * kHelixExchange));
}

TEST(ExchangeContinuum, FiniteDifferenceFallback) {
  SmoothField u = fields::helix(kQ);
  u.gradient = nullptr;
  const DomainSpec box = DomainSpec::unit_box();
  EXPECT_THROW(exchange_continuum(u, box, 1.0), InvalidArgument);
  QuadratureOptions opt;
  opt.fd_step = 1e-5;
  const auto r = exchange_continuum(u, box, 1.0, opt);
  EXPECT_NEAR(r.value, kHelixExchange, 1e-5 * kHelixExchange);
}

TEST(ExchangeContinuum, AnalyticAndNumericGradientsAgree) {
  const SmoothField u = fields::conical({1, 2, 0}, {0, 0, 1}, 0.4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  SmoothField numeric = u;
  numeric.gradient = nullptr;
  for (int t = 0; t < 20; ++t) {
    const Vec3 x{d(rng), d(rng), d(rng)};
    const Mat3 a = field_gradient(u, x, std::nullopt);
    const Mat3 n = field_gradient(numeric, x, 1e-6);
    for (int r = 0; r < 3; ++r) EXPECT_LT(norm(a[r] - n[r]), 1e-7);
  }
}

TEST(Quadrature, BallVolumeWithinEstimate) {
  const DomainSpec ball = DomainSpec::ball({0, 0, 0}, 0.5);
  QuadratureOptions opt;
  opt.cells = 64;
  const auto r = integrate(ball, [](const Vec3&) { return 1.0; }, opt);
  EXPECT_NEAR(r.value, M_PI / 6.0, 3.0 * r.error_estimate + 1e-4);
  EXPECT_THROW(integrate(ball, [](const Vec3&) { return 1.0; }, QuadratureOptions{1, 4, std::nullopt}), InvalidArgument);
}

TEST(ZeemanDiscrete, TwentySevenNodeHandSum) {
  const auto lat = unit_box(2);
  EXPECT_DOUBLE_EQ(zeeman_discrete(constant_field(lat, {0, 0, 1}), ZeemanField::uniform({0, 0, 1})), -3.375);
  EXPECT_EQ(zeeman_discrete(constant_field(lat, {0, 0, 1}), ZeemanField::zero()), 0.0);
}

TEST(ZeemanDiscrete, SweepApproachesMinusVolumeAtFirstOrder) {
  std::vector<double> err;
  for (int n : {8, 16, 32}) {
    const double e = zeeman_discrete(constant_field(unit_box(n), {0, 0, 1}), ZeemanField::uniform({0, 0, 1}));
    err.push_back(std::abs(e + 1.0));
  }
  EXPECT_NEAR(std::log2(err[1] / err[2]), 1.0, 0.1);
  EXPECT_LT(err[2], err[1]);
}

TEST(ZeemanDiscrete, EquivariantUnderJointRotation) {
  const auto lat = unit_box(3);
  const SpinField f = random_field(lat, 13);
  const Mat3 r = spinlab::testing::rotation({1, 1, 0}, 0.9);
  const Vec3 h{0.2, -0.5, 1.0};
  EXPECT_NEAR(zeeman_discrete(f, ZeemanField::uniform(h)),
              zeeman_discrete(spinlab::testing::rotated(f, r), ZeemanField::uniform(r * h)), 1e-12);
}

TEST(ZeemanContinuum, ClosedForms) {
  const DomainSpec box = DomainSpec::unit_box();
  const auto hz = ZeemanField::uniform({0, 0, 1});
  EXPECT_NEAR(zeeman_continuum(fields::constant({0, 0, 1}), hz, box).value, -1.0, 1e-10);
  EXPECT_EQ(zeeman_continuum(fields::constant({1, 0, 0}), hz, box).value, 0.0);
  const auto r = zeeman_continuum(fields::helix(kQ), hz, box);
  EXPECT_NEAR(r.value, 0.0, r.error_estimate + 1e-15);
}

TEST(Total, ConstantSpinsWithoutFieldsVanish) {
  const auto lat = unit_box(4);
  const auto r =
      total_discrete(constant_field(lat, {0, 0, 1}), make_decomposition(lat), {1, 1}, ZeemanField::zero(), DemagConfig{});
  EXPECT_EQ(r.exchange, 0.0);
  EXPECT_EQ(r.zeeman, 0.0);
  EXPECT_EQ(r.demag, 0.0);
  EXPECT_EQ(r.total, 0.0);
}

TEST(Total, SumIsExactlyTheComponentSum) {
  const auto lat = unit_box(16);
  DemagConfig dc;
  dc.enabled = true;
  dc.cells = 16;
  const auto r = total_discrete(sample(fields::helix(kQ), lat), make_decomposition(lat), {1, 1},
                                ZeemanField::uniform({0.3, 0.1, 1}), dc);
  EXPECT_EQ(r.total, r.exchange + r.demag + r.zeeman);
  EXPECT_GT(r.demag, 0.0);
  const auto c = total_continuum(fields::helix(kQ), DomainSpec::unit_box(), 1.0, ZeemanField::uniform({0, 0, 1}), dc);
  EXPECT_EQ(c.total, c.exchange.value + c.demag + c.zeeman.value);
}

TEST(Total, ConstantSpinsAreDemagOnly) {
  const auto lat = unit_box(32);
  DemagConfig dc;
  dc.enabled = true;
  dc.cells = 32;
  const auto r =
      total_discrete(constant_field(lat, {0, 0, 1}), make_decomposition(lat), {1, 1}, ZeemanField::zero(), dc);
  EXPECT_EQ(r.total, r.demag);
  // cube demag factor is 1/3: energy about mu0 V / 6
  EXPECT_NEAR(r.demag, 1.0 / 6.0, 0.1 / 6.0);
}

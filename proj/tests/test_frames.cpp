#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "relkal/frames.hpp"

namespace relkal {
namespace {

constexpr double kPi = std::numbers::pi;

/// Ego on the unit circle at the origin heading along +x, target 1 rad ahead on the
/// same circle with the same speed and yaw rate.
CtraState follow_ego() { return {0, 0, 0, 1, 1, 0}; }
CtraState follow_target() { return {std::sin(1.0), 1 - std::cos(1.0), 1, 1, 1, 0}; }

CtraState random_ego(oracle::Sampler& rng) { return rng.ctra(0.0); }

TEST(Rotation, Identity) { EXPECT_TRUE(rotation(0.0).m.isIdentity(0.0)); }

TEST(Rotation, QuarterTurn) {
  const Mat2 r = rotation(kPi / 2).m;
  EXPECT_TRUE(r.isApprox((Mat2() << 0, 1, -1, 0).finished(), 1e-15));
}

TEST(Rotation, OrthogonalWithUnitDeterminant) {
  oracle::Sampler rng(31);
  for (int i = 0; i < 100; ++i) {
    const double psi = rng.uniform(-10, 10);
    EXPECT_TRUE((rotation(psi).m * rotation(-psi).m).isIdentity(1e-12));
    EXPECT_NEAR(rotation(psi).m.determinant(), 1.0, 1e-12);
  }
}

TEST(RotationRates, UnitRateAtZeroHeading) {
  const RotationRates rr = rotation_rates(0.0, 1.0, 0.0);
  EXPECT_TRUE(rr.rdot.isApprox((Mat2() << 0, 1, -1, 0).finished(), 1e-15));
  EXPECT_TRUE(rr.rddot.isApprox(-Mat2::Identity(), 1e-15));
}

TEST(RotationRates, NoRateNoDerivatives) {
  const RotationRates rr = rotation_rates(1.234, 0.0, 0.0);
  EXPECT_TRUE(rr.rdot.isZero(0.0));
  EXPECT_TRUE(rr.rddot.isZero(0.0));
}

TEST(RotationRates, MatchFiniteDifferences) {
  oracle::Sampler rng(32);
  const double h = 1e-4;
  for (int i = 0; i < 100; ++i) {
    const double psi = rng.uniform(-3, 3), w = rng.uniform(-2, 2), wd = rng.uniform(-2, 2);
    const auto r_at = [&](double t) { return rotation(psi + w * t + 0.5 * wd * t * t).m; };
    const Mat2 d1 = (r_at(h) - r_at(-h)) / (2 * h);
    const Mat2 d2 = (r_at(h) - 2 * r_at(0) + r_at(-h)) / (h * h);
    const RotationRates rr = rotation_rates(psi, w, wd);
    EXPECT_LT((rr.rdot - d1).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((rr.rddot - d2).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(MixingMatrix, ModelAAtRestIsIdentity) {
  const Transform6 t = mixing_matrix(Model::A, {3, 4, 0, 0, 10, 1});
  EXPECT_TRUE(t.m.isIdentity(0.0));
  EXPECT_EQ(t.kind, TransformKind::NonInertial);
}

TEST(MixingMatrix, ModelAPseudoForceBlocks) {
  const Mat6 m = mixing_matrix(Model::A, {0, 0, 0, 1, 5, 0}).m;
  const Mat2 j = (Mat2() << 0, 1, -1, 0).finished();
  EXPECT_TRUE((m.block<2, 2>(2, 0).isApprox(j, 1e-15)));
  EXPECT_TRUE((m.block<2, 2>(4, 0).isApprox(-Mat2::Identity(), 1e-15)));
  EXPECT_TRUE((m.block<2, 2>(4, 2).isApprox(2 * j, 1e-15)));
  for (int b = 0; b < 3; ++b) EXPECT_TRUE((m.block<2, 2>(2 * b, 2 * b).isIdentity(1e-15)));
}

TEST(MixingMatrix, ModelBIsBlockDiagonal) {
  oracle::Sampler rng(33);
  for (int i = 0; i < 20; ++i) {
    const CtraState ego = random_ego(rng);
    const Mat6 m = mixing_matrix(Model::B, ego).m;
    const Mat2 r = rotation(ego.psi).m;
    Mat6 expected = Mat6::Zero();
    for (int b = 0; b < 3; ++b) expected.block<2, 2>(2 * b, 2 * b) = r;
    EXPECT_TRUE(m.isApprox(expected, 1e-15));
  }
}

TEST(MixingMatrix, ModelCRotatesPositionOnly) {
  const CtraState ego{1, 2, 0.7, 0.3, 9, 1};
  const Mat6 m = mixing_matrix(Model::C, ego).m;
  EXPECT_TRUE((m.block<2, 2>(0, 0).isApprox(rotation(0.7).m, 1e-15)));
  EXPECT_TRUE((m.block<4, 4>(2, 2).isIdentity(0.0)));
  EXPECT_EQ(mixing_matrix(Model::C, ego).kind, TransformKind::MixedCtra);
}

TEST(MixingMatrix, ModelAInvertibleWithRotationDiagonal) {
  oracle::Sampler rng(34);
  for (int i = 0; i < 100; ++i) {
    const CtraState ego = random_ego(rng);
    const Mat6 m = mixing_matrix(Model::A, ego).m;
    EXPECT_NEAR(std::abs(m.determinant()), 1.0, 1e-12);
    for (int b = 0; b < 3; ++b) EXPECT_TRUE((m.block<2, 2>(2 * b, 2 * b).isApprox(rotation(ego.psi).m, 1e-15)));
  }
}

TEST(EgoProjector, PerModel) {
  EXPECT_EQ(ego_projector(Model::A), Mat6::Identity());
  EXPECT_EQ(ego_projector(Model::B).diagonal(), (Vec6() << 1, 1, 0, 0, 0, 0).finished());
  EXPECT_EQ(ego_projector(Model::C).diagonal(), (Vec6() << 1, 1, 1, 0, 0, 0).finished());
}

TEST(ToRelative, CoincidentStates) {
  const CtraState s{4, -3, 0.5, 0.2, 12, 1.5};
  EXPECT_TRUE(to_relative(Model::A, s, s).data.isZero(1e-12));
  EXPECT_TRUE(to_relative(Model::C, s, s).data.isApprox((Vec6() << 0, 0, 0, 0.2, 12, 1.5).finished(), 1e-15));
}

TEST(ToRelative, FollowModeModelAVelocityVanishes) {
  const RelState rel = to_relative(Model::A, follow_target(), follow_ego());
  EXPECT_NEAR(rel.data[2], 0.0, 1e-12);
  EXPECT_NEAR(rel.data[3], 0.0, 1e-12);
}

TEST(ToRelative, FollowModeVanishesOnConcentricCircles) {
  oracle::Sampler rng(35);
  for (int i = 0; i < 100; ++i) {
    // Both vehicles circle the same centre with the same angular rate.
    const double w = rng.uniform(0.05, 1.0) * (rng.uniform(0, 1) < 0.5 ? -1 : 1);
    const double radius_e = rng.uniform(5, 50), radius_t = rng.uniform(5, 50);
    const double phase_e = rng.uniform(-kPi, kPi), phase_t = rng.uniform(-kPi, kPi);
    const Vec2 centre(rng.uniform(-100, 100), rng.uniform(-100, 100));
    const auto on_circle = [&](double radius, double phase) {
      // Position at angle `phase` around the centre; heading tangent in the turn direction.
      const double psi = phase + (w > 0 ? kPi / 2 : -kPi / 2);
      return CtraState{centre[0] + radius * std::cos(phase), centre[1] + radius * std::sin(phase), psi, w,
                       radius * std::abs(w), 0.0};
    };
    const RelState rel = to_relative(Model::A, on_circle(radius_t, phase_t), on_circle(radius_e, phase_e));
    EXPECT_NEAR(rel.data[2], 0.0, 1e-9);
    EXPECT_NEAR(rel.data[3], 0.0, 1e-9);
  }
}

TEST(ToRelative, FollowModeModelBKeepsGroundVelocity) {
  const RelState rel = to_relative(Model::B, follow_target(), follow_ego());
  const Vec2 v_target(std::cos(1.0), std::sin(1.0));
  EXPECT_TRUE((rel.data.segment<2>(2).isApprox(rotation(0.0).m * v_target, 1e-12)));
  EXPECT_GT(rel.data.segment<2>(2).norm(), 0.5);
}

TEST(ToRelative, ModelsAgreeWithoutEgoRotation) {
  oracle::Sampler rng(36);
  for (int i = 0; i < 100; ++i) {
    CtraState ego = random_ego(rng);
    ego.psidot = 0.0;
    const CtraState target = rng.ctra();
    const RelState a = to_relative(Model::A, target, ego);
    const RelState b = to_relative(Model::B, target, ego);
    const Mat2 r = rotation(ego.psi).m;
    // A differences velocity and acceleration; B keeps them over ground.
    const CartesianState6 e = ctra_to_cartesian(ego);
    Vec6 a_from_b = b.data;
    a_from_b.segment<2>(2) -= r * Vec2(e.vx, e.vy);
    a_from_b.segment<2>(4) -= r * Vec2(e.ax, e.ay);
    EXPECT_LT((a.data - a_from_b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ToRelative, ModelCRelativeHeadingIsWrapped) {
  const RelState rel = to_relative(Model::C, CtraState{0, 0, 3.0, 0, 5, 0}, CtraState{0, 0, -3.0, 0, 5, 0});
  EXPECT_NEAR(rel.data[2], wrap_angle(6.0), 1e-15);
}

TEST(FromRelative, ZeroModelAGivesEgo) {
  const CtraState ego{3, 4, 0.6, 0.2, 11, 0.5};
  const CtraState t = from_relative(RelState{Model::A, Vec6::Zero()}, ego);
  EXPECT_LT((t.vec() - ego.vec()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FromRelative, ModelCUnpacksDefinition) {
  const CtraState ego{3, 4, kPi / 4, 0.1, 8, 0};
  const CtraState t = from_relative(RelState{Model::C, (Vec6() << 10, 0, 0, 0.2, 5, 1).finished()}, ego);
  const Vec2 pos = Vec2(3, 4) + rotation(kPi / 4).m.transpose() * Vec2(10, 0);
  EXPECT_NEAR(t.x, pos[0], 1e-12);
  EXPECT_NEAR(t.y, pos[1], 1e-12);
  EXPECT_NEAR(t.psi, kPi / 4, 1e-15);
  EXPECT_DOUBLE_EQ(t.psidot, 0.2);
  EXPECT_DOUBLE_EQ(t.v, 5.0);
  EXPECT_DOUBLE_EQ(t.a, 1.0);
}

TEST(FromRelative, DegenerateSpeedPropagates) {
  const CtraState ego{0, 0, 0, 0, 10, 0};
  Vec6 rel = Vec6::Zero();
  rel[2] = -10.0;  // target velocity over ground is zero
  EXPECT_THROW(from_relative(RelState{Model::A, rel}, ego), DegenerateSpeed);
  EXPECT_NO_THROW(from_relative_cartesian(RelState{Model::A, rel}, ego));
}

class RoundTrip : public ::testing::TestWithParam<Model> {};

TEST_P(RoundTrip, ToThenFromRelative) {
  const Model model = GetParam();
  oracle::Sampler rng(37);
  for (int i = 0; i < 100; ++i) {
    const CtraState ego = random_ego(rng);
    const CtraState target = rng.ctra(0.5);
    const RelState rel = to_relative(model, target, ego);
    const RelState again = to_relative(model, from_relative(rel, ego), ego);
    Vec6 d = again.data - rel.data;
    if (model == Model::C) d[2] = wrap_angle(d[2]);
    EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST_P(RoundTrip, CartesianInverse) {
  const Model model = GetParam();
  if (model == Model::C) GTEST_SKIP() << "Cartesian inverse applies to A and B";
  oracle::Sampler rng(38);
  for (int i = 0; i < 100; ++i) {
    const CtraState ego = random_ego(rng);
    const RelState rel{model, rng.relative(model)};
    const RelState again = to_relative(model, from_relative_cartesian(rel, ego), ego);
    EXPECT_LT((again.data - rel.data).cwiseAbs().maxCoeff(), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(AllModels, RoundTrip, ::testing::Values(Model::A, Model::B, Model::C),
                         [](const auto& info) { return std::string(to_string(info.param)); });

}  // namespace
}  // namespace relkal

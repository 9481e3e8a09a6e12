#include "locgan/pose.hpp"

#include <gtest/gtest.h>

#include "locgan/rng.hpp"

using namespace locgan;

namespace {
constexpr double kDeg = M_PI / 180.0;
}

TEST(Pose, ComposeZeroRotation) {
  const Pose2D a = make_pose(100.0, 200.0, 0.0);
  const Pose2D b = make_pose(1.0, -0.5, 2.0 * kDeg);
  const Pose2D c = se2_compose(a, b);
  EXPECT_NEAR(c.x, 101.0, 1e-12);
  EXPECT_NEAR(c.y, 199.5, 1e-12);
  EXPECT_NEAR(c.heading, 2.0 * kDeg, 1e-12);
}

TEST(Pose, ComposeQuarterTurn) {
  // (1,0) in the frame of a pose headed 90 degrees lands one unit along +y
  const Pose2D a = make_pose(0.0, 0.0, 90.0 * kDeg);
  const Pose2D c = se2_compose(a, make_pose(1.0, 0.0, 0.0));
  EXPECT_NEAR(c.x, 0.0, 1e-12);
  EXPECT_NEAR(c.y, 1.0, 1e-12);
  EXPECT_NEAR(c.heading, 90.0 * kDeg, 1e-12);
}

TEST(Pose, IdentityAndInverse) {
  const Pose2D p = make_pose(3.2, -7.5, 1.1);
  const Pose2D pi = se2_compose(p, Pose2D::identity());
  EXPECT_NEAR(pi.x, p.x, 1e-9);
  EXPECT_NEAR(pi.y, p.y, 1e-9);
  EXPECT_NEAR(pi.heading, p.heading, 1e-9);
  const Pose2D id = se2_compose(p, se2_inverse(p));
  EXPECT_NEAR(id.x, 0.0, 1e-9);
  EXPECT_NEAR(id.y, 0.0, 1e-9);
  EXPECT_NEAR(id.heading, 0.0, 1e-9);
}

TEST(Pose, RelativeRoundTripSweep) {
  Rng rng(1234);
  for (int i = 0; i < 10000; ++i) {
    const Pose2D a = make_pose(rng.uniform(-100, 100), rng.uniform(-100, 100),
                               rng.uniform(-M_PI, M_PI));
    const Pose2D d = make_pose(rng.uniform(-10, 10), rng.uniform(-10, 10),
                               rng.uniform(-M_PI, M_PI));
    const Pose2D r = se2_relative(a, se2_compose(a, d));
    ASSERT_NEAR(r.x, d.x, 1e-9);
    ASSERT_NEAR(r.y, d.y, 1e-9);
    ASSERT_NEAR(std::abs(wrap_angle(r.heading - d.heading)), 0.0, 1e-9);
  }
}

TEST(Pose, ComposeRelativeIsExactInverseOp) {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const Pose2D a = make_pose(rng.uniform(-50, 50), rng.uniform(-50, 50),
                               rng.uniform(-M_PI, M_PI));
    const Pose2D b = make_pose(rng.uniform(-50, 50), rng.uniform(-50, 50),
                               rng.uniform(-M_PI, M_PI));
    const Pose2D back = se2_compose(a, se2_relative(a, b));
    ASSERT_NEAR(back.x, b.x, 1e-9);
    ASSERT_NEAR(back.y, b.y, 1e-9);
    ASSERT_NEAR(std::abs(wrap_angle(back.heading - b.heading)), 0.0, 1e-9);
  }
}

TEST(Pose, WrapAngleConvention) {
  EXPECT_DOUBLE_EQ(wrap_angle(M_PI), M_PI);        // pi stays pi
  EXPECT_DOUBLE_EQ(wrap_angle(-M_PI), M_PI);       // -pi maps to pi
  EXPECT_NEAR(wrap_angle(3.0 * M_PI), M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(0.1 - 2.0 * M_PI), 0.1, 1e-12);
}

TEST(Pose, TransformPointMatchesCompose) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Pose2D p = make_pose(rng.uniform(-10, 10), rng.uniform(-10, 10),
                               rng.uniform(-M_PI, M_PI));
    const Vec2 local{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Vec2 w = se2_transform_point(p, local);
    const Vec2 back = se2_untransform_point(p, w);
    ASSERT_NEAR(back.x, local.x, 1e-9);
    ASSERT_NEAR(back.y, local.y, 1e-9);
  }
}

#include "bitesim/skeleton.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace bitesim;
using testing_support::p3;

namespace {

MandibleJoint joint_with(Vec3 pivot, Vec3 axis, double max_open = 2.0) {
  MandibleJoint j;
  j.pivot = pivot;
  j.hinge_axis = axis;
  j.max_open = max_open;
  return j;
}

RigidBody make_body(const std::string& name) {
  RigidBody b;
  b.name = name;
  return b;
}

}  // namespace

TEST(MandiblePose, ZeroIsIdentity) {
  const Pose p = mandible_pose(MandibleJoint{}, 0.0);
  EXPECT_LT(p.translation.norm(), 1e-15);
  EXPECT_LT((p.rotation.toRotationMatrix() - Mat3::Identity()).norm(), 1e-15);
}

TEST(MandiblePose, QuarterTurnAboutX) {
  const MandibleJoint j = joint_with(Vec3::Zero(), Vec3::UnitX());
  const Pose p = mandible_pose(j, std::numbers::pi / 2);
  EXPECT_LT(p.translation.norm(), 1e-15);
  EXPECT_LT((p.apply(Vec3::UnitY()) - Vec3::UnitZ()).norm(), 1e-15);
  EXPECT_LT((p.apply(Vec3::UnitZ()) + Vec3::UnitY()).norm(), 1e-15);
}

TEST(MandiblePose, MatchesHomogeneousOracle) {
  const Vec3 pivot(0, -0.02, -0.05);
  for (const Vec3& axis : {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(1, 2, -0.5).normalized()}) {
    const MandibleJoint j = joint_with(pivot, axis);
    const Pose p = mandible_pose(j, 0.3);
    const oracle::M4 m = oracle::mul4(oracle::translate4(p3(pivot)),
                                      oracle::mul4(oracle::rotate4(p3(axis), 0.3), oracle::translate4(p3(-pivot))));
    for (const Vec3& x : {Vec3(0, 0, 0), Vec3(0.03, 0.05, -0.07), Vec3(-1, 2, 3)}) {
      const oracle::P3 expected = oracle::apply4(m, p3(x));
      const Vec3 got = p.apply(x);
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], expected[k], 1e-12);
    }
  }
}

TEST(MandiblePose, PreservesDistances) {
  std::mt19937_64 rng(9);
  MandibleJoint j;
  Vec3List pts;
  for (int i = 0; i < 20; ++i) pts.push_back(testing_support::random_vec(rng, -0.1, 0.1));
  for (double angle : {0.05, 0.2, 0.35}) {
    const Pose p = mandible_pose(j, angle);
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b)
        EXPECT_NEAR((p.apply(pts[a]) - p.apply(pts[b])).norm(), (pts[a] - pts[b]).norm(), 1e-12);
  }
}

TEST(MandiblePose, OutOfRangeRejected) {
  MandibleJoint j;
  EXPECT_THROW(mandible_pose(j, -0.01), ValidationError);
  EXPECT_THROW(mandible_pose(j, j.max_open + 0.01), ValidationError);
}

TEST(JawTorque, Examples) {
  MandibleJoint j;
  j.target_angle = 0.2;
  EXPECT_EQ(jaw_torque(j, 0.2, 0.0), 0.0);

  j.stiffness = 2.0;
  j.damping = 0.0;
  j.target_angle = 0.1;
  EXPECT_NEAR(jaw_torque(j, 0.0, 0.0), 0.2, 1e-15);

  j.damping = 0.5;
  EXPECT_NEAR(jaw_torque(j, 0.0, 0.2), 0.1, 1e-15);
}

TEST(JawTorque, Clamped) {
  MandibleJoint j;
  j.stiffness = 1000.0;
  j.max_torque = 3.0;
  j.target_angle = 0.3;
  EXPECT_EQ(jaw_torque(j, 0.0, 0.0), 3.0);
  j.target_angle = 0.0;
  EXPECT_EQ(jaw_torque(j, 0.3, 0.0), -3.0);
}

TEST(StepSkeleton, ZeroTorqueKeepsAngle) {
  const RigidBody skull = make_body("skull");
  RigidBody mandible = make_body("mandible");
  MandibleJoint j;
  j.angle = 0.1;
  j.target_angle = 0.1;
  step_skeleton(skull, mandible, j, Wrench{}, 1e-3);
  EXPECT_EQ(j.angle, 0.1);
  EXPECT_EQ(j.rate, 0.0);
}

TEST(StepSkeleton, ConstantTorqueSemiImplicitUpdate) {
  RigidBody skull = make_body("skull");
  RigidBody mandible = make_body("mandible");
  MandibleJoint j;
  j.stiffness = 0.0;
  j.damping = 0.0;
  j.angle = 0.1;
  j.rate = 0.5;
  j.inertia = 2e-3;
  const double tau = 0.01;
  const double dt = 1e-3;
  // A pure couple about the hinge axis applied to the mandible.
  Wrench w;
  w.torque = tau * j.hinge_axis;
  const double expected_rate = 0.5 + dt * tau / j.inertia;
  step_skeleton(skull, mandible, j, w, dt);
  EXPECT_NEAR(j.rate, expected_rate, 1e-12);
  EXPECT_NEAR(j.angle, 0.1 + dt * expected_rate, 1e-12);
}

TEST(StepSkeleton, LimitClamp) {
  const RigidBody skull = make_body("skull");
  RigidBody mandible = make_body("mandible");
  MandibleJoint j;
  j.angle = j.max_open;
  j.rate = 1.0;
  j.target_angle = j.max_open;
  step_skeleton(skull, mandible, j, Wrench{}, 1e-3);
  EXPECT_EQ(j.angle, j.max_open);
  EXPECT_EQ(j.rate, 0.0);

  j.angle = 0.0;
  j.rate = -1.0;
  j.target_angle = 0.0;
  step_skeleton(skull, mandible, j, Wrench{}, 1e-3);
  EXPECT_EQ(j.angle, 0.0);
  EXPECT_EQ(j.rate, 0.0);
}

TEST(StepSkeleton, ServoTracksTargetWithinRange) {
  RigidBody skull = make_body("skull");
  skull.pose.translation = {0.01, 0.02, 0.03};
  skull.pose.rotation = Quat(Eigen::AngleAxisd(0.2, Vec3::UnitY()));
  const Pose skull_before = skull.pose;
  RigidBody mandible = make_body("mandible");
  MandibleJoint j;
  for (int i = 0; i < 200; ++i) {
    j.target_angle = i < 100 ? j.max_open : 0.0;
    step_skeleton(skull, mandible, j, Wrench{}, 5e-3);
    EXPECT_GE(j.angle, 0.0);
    EXPECT_LE(j.angle, j.max_open);
    if (i == 99) EXPECT_NEAR(j.angle, j.max_open, 1e-3);
  }
  EXPECT_NEAR(j.angle, 0.0, 1e-3);
  // The skull is never touched.
  EXPECT_EQ(skull.pose.translation, skull_before.translation);
  EXPECT_EQ(skull.pose.rotation.coeffs(), skull_before.rotation.coeffs());
  // The mandible pose follows the joint.
  const Pose expected = skull.pose.compose(mandible_pose(j, j.angle));
  EXPECT_LT((mandible.pose.translation - expected.translation).norm(), 1e-12);
  EXPECT_NEAR(std::abs(mandible.pose.rotation.dot(expected.rotation)), 1.0, 1e-12);
  EXPECT_NEAR(mandible.pose.rotation.norm(), 1.0, 1e-12);
}

TEST(StepSkeleton, NonFiniteTorqueRejected) {
  const RigidBody skull = make_body("skull");
  RigidBody mandible = make_body("mandible");
  MandibleJoint j;
  Wrench w;
  w.torque.x() = std::nan("");
  EXPECT_THROW(step_skeleton(skull, mandible, j, w, 1e-3), ValidationError);
}

TEST(HingeTorque, ForceAtLeverArm) {
  // A force along +z applied 0.1 m in front (+y) of the pivot turns about +x.
  Wrench w;
  w.force = Vec3(0, 0, 2.0);
  EXPECT_NEAR(hinge_torque(w, Vec3(0, 0.1, 0), Vec3::Zero(), Vec3::UnitX()), 0.2, 1e-15);
  EXPECT_NEAR(hinge_torque(w, Vec3(0, 0.1, 0), Vec3::Zero(), -Vec3::UnitX()), -0.2, 1e-15);
}

TEST(MandibleJointValidate, Rejects) {
  MandibleJoint j;
  j.hinge_axis = Vec3(1, 1, 0);
  EXPECT_THROW(j.validate(), ValidationError);
  j = {};
  j.stiffness = -1;
  EXPECT_THROW(j.validate(), ValidationError);
  j = {};
  j.angle = 1.0;
  EXPECT_THROW(j.validate(), ValidationError);
  EXPECT_NO_THROW(MandibleJoint{}.validate());
}

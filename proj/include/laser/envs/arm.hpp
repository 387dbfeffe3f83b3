#pragma once

#include <array>

namespace laser::envs {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

struct ArmParams {
  double l1 = 0.5;
  double l2 = 0.5;
  double m1 = 1.0;
  double m2 = 1.0;
  double joint_damping = 0.2;
  double max_joint_speed = 15.0;
  // Hard stops; hitting one stops the arm.
  double q_min = -3.0;
  double q_max = 3.0;
  Vec2 base{0.0, 0.0};
};

// Planar two-link arm with uniform-rod links and no gravity.
struct TwoLinkArm {
  ArmParams params;
  Vec2 q{0.0, 0.0};
  Vec2 qd{0.0, 0.0};

  Mat2 mass_matrix() const;
  // Coriolis and centrifugal generalized forces c(q, qd).
  Vec2 bias_forces() const;
  Mat2 jacobian() const;
  Vec2 end_effector() const;
  Vec2 end_effector_velocity() const;
  Vec2 elbow() const;
  double kinetic_energy() const;

  // Jacobian-transpose map of a Cartesian end-effector force.
  Vec2 joint_torque_from_force(const Vec2& force) const;

  // Semi-implicit Euler with implicit joint damping:
  //   (M + dt B) qd' = M qd + dt (tau - c)
  //   q' = q + dt qd'
  void integrate(const Vec2& tau, double dt);
};

Vec2 solve2(const Mat2& a, const Vec2& b);

}  // namespace laser::envs

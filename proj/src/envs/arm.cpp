#include "laser/envs/arm.hpp"

#include <algorithm>
#include <cmath>

namespace laser::envs {

Vec2 solve2(const Mat2& a, const Vec2& b) {
  const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  return {(a[1][1] * b[0] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det};
}

Mat2 TwoLinkArm::mass_matrix() const {
  const auto& p = params;
  const double lc1 = 0.5 * p.l1;
  const double lc2 = 0.5 * p.l2;
  const double i1 = p.m1 * p.l1 * p.l1 / 12.0;
  const double i2 = p.m2 * p.l2 * p.l2 / 12.0;
  const double c2 = std::cos(q[1]);
  const double m11 = p.m1 * lc1 * lc1 + i1 + p.m2 * (p.l1 * p.l1 + lc2 * lc2 + 2.0 * p.l1 * lc2 * c2) + i2;
  const double m12 = p.m2 * (lc2 * lc2 + p.l1 * lc2 * c2) + i2;
  const double m22 = p.m2 * lc2 * lc2 + i2;
  return {{{m11, m12}, {m12, m22}}};
}

Vec2 TwoLinkArm::bias_forces() const {
  const auto& p = params;
  const double h = p.m2 * p.l1 * 0.5 * p.l2 * std::sin(q[1]);
  return {-h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]), h * qd[0] * qd[0]};
}

Mat2 TwoLinkArm::jacobian() const {
  const auto& p = params;
  const double s1 = std::sin(q[0]);
  const double c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]);
  const double c12 = std::cos(q[0] + q[1]);
  return {{{-p.l1 * s1 - p.l2 * s12, -p.l2 * s12}, {p.l1 * c1 + p.l2 * c12, p.l2 * c12}}};
}

Vec2 TwoLinkArm::elbow() const {
  return {params.base[0] + params.l1 * std::cos(q[0]), params.base[1] + params.l1 * std::sin(q[0])};
}

Vec2 TwoLinkArm::end_effector() const {
  const Vec2 e = elbow();
  return {e[0] + params.l2 * std::cos(q[0] + q[1]), e[1] + params.l2 * std::sin(q[0] + q[1])};
}

Vec2 TwoLinkArm::end_effector_velocity() const {
  const Mat2 j = jacobian();
  return {j[0][0] * qd[0] + j[0][1] * qd[1], j[1][0] * qd[0] + j[1][1] * qd[1]};
}

double TwoLinkArm::kinetic_energy() const {
  const Mat2 m = mass_matrix();
  return 0.5 * (m[0][0] * qd[0] * qd[0] + 2.0 * m[0][1] * qd[0] * qd[1] + m[1][1] * qd[1] * qd[1]);
}

Vec2 TwoLinkArm::joint_torque_from_force(const Vec2& force) const {
  const Mat2 j = jacobian();
  return {j[0][0] * force[0] + j[1][0] * force[1], j[0][1] * force[0] + j[1][1] * force[1]};
}

void TwoLinkArm::integrate(const Vec2& tau, double dt) {
  Mat2 m = mass_matrix();
  const Vec2 c = bias_forces();
  const Vec2 rhs{m[0][0] * qd[0] + m[0][1] * qd[1] + dt * (tau[0] - c[0]),
                 m[1][0] * qd[0] + m[1][1] * qd[1] + dt * (tau[1] - c[1])};
  m[0][0] += dt * params.joint_damping;
  m[1][1] += dt * params.joint_damping;
  Vec2 next = solve2(m, rhs);
  // Uniform rescale keeps the direction and can only lower kinetic energy.
  const double fastest = std::max(std::abs(next[0]), std::abs(next[1]));
  if (fastest > params.max_joint_speed) {
    const double k = params.max_joint_speed / fastest;
    next = {next[0] * k, next[1] * k};
  }
  qd = next;
  q[0] += dt * qd[0];
  q[1] += dt * qd[1];
  if (q[0] < params.q_min || q[0] > params.q_max || q[1] < params.q_min || q[1] > params.q_max) {
    q[0] = std::clamp(q[0], params.q_min, params.q_max);
    q[1] = std::clamp(q[1], params.q_min, params.q_max);
    qd = {0.0, 0.0};
  }
}

}  // namespace laser::envs

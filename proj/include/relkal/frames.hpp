#pragma once

#include "relkal/statespace.hpp"

namespace relkal {

/// 2D rotation into the ego heading frame: rows (cos, sin) / (-sin, cos).
struct Rot2 {
  Mat2 m = Mat2::Identity();
};

Rot2 rotation(double psi);

/// The generator J with d rotation(psi) / d psi = J * rotation(psi).
inline Mat2 rotation_generator() { return (Mat2() << 0.0, 1.0, -1.0, 0.0).finished(); }

struct RotationRates {
  Mat2 r;
  Mat2 rdot;
  Mat2 rddot;
};

/// r(psi(t)) and its first two time derivatives for a heading with the given rate
/// and angular acceleration.
RotationRates rotation_rates(double psi, double psidot, double psiddot);

enum class TransformKind { NonInertial, Mixed, MixedCtra };

struct Transform6 {
  Mat6 m = Mat6::Identity();
  TransformKind kind = TransformKind::NonInertial;
};

/// Coordinate transform of the relative model evaluated at the ego state (with zero
/// angular acceleration):
///  A: M = (r 0 0 / rdot r 0 / rddot 2 rdot r)
///  B: R = blockdiag(r, r, r)            with projector diag(1,1,0,0,0,0)
///  C: R~ = blockdiag(r, I2, I2)         with projector diag(1,1,1,0,0,0)
Transform6 mixing_matrix(Model model, const CtraState& ego);

/// Ego-state projector paired with the model's transform.
Mat6 ego_projector(Model model);

/// Target (global CTRA) into model coordinates relative to the ego.
RelState to_relative(Model model, const CtraState& target, const CtraState& ego);
/// Cartesian target for the white-noise-jerk models (A, B only).
RelState to_relative(Model model, const CartesianState6& target, const CtraState& ego);

/// Inverse of to_relative. For A and B the target is converted back through
/// cartesian_to_ctra and DegenerateSpeed propagates.
CtraState from_relative(const RelState& rel, const CtraState& ego);
/// Cartesian inverse for A and B; never throws.
CartesianState6 from_relative_cartesian(const RelState& rel, const CtraState& ego);

}  // namespace relkal

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace relkal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Mat64 = Eigen::Matrix<double, 6, 4>;
using Mat62 = Eigen::Matrix<double, 6, 2>;

/// Speed at or below which cartesian_to_ctra refuses to extract a heading [m/s].
inline constexpr double kDegenerateSpeed = 1e-6;

/// Thrown when a heading has to be recovered from a velocity that is (numerically) zero.
class DegenerateSpeed : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid configuration or argument.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// Relative-coordinate flavour of a target track.
///  A: ego body-fixed Cartesian with non-inertial corrections, white-noise-jerk target.
///  B: mixed coordinates (relative position, over-ground velocity/acceleration rotated
///     into the ego frame), white-noise-jerk target.
///  C: mixed coordinates on CTRA target states (x_rel, y_rel, psi_rel, psidot, v, a).
enum class Model { A, B, C };

std::string_view to_string(Model m);
/// Throws ConfigError naming the valid set for anything but "A", "B", "C".
Model parse_model(std::string_view name);

/// Global constant-turn-rate-and-acceleration state.
struct CtraState {
  double x = 0.0;       ///< [m]
  double y = 0.0;       ///< [m]
  double psi = 0.0;     ///< heading [rad]
  double psidot = 0.0;  ///< yaw rate [rad/s]
  double v = 0.0;       ///< speed over ground [m/s]
  double a = 0.0;       ///< longitudinal acceleration [m/s^2]

  Vec6 vec() const { return (Vec6() << x, y, psi, psidot, v, a).finished(); }
  static CtraState from_vec(const Vec6& s) { return {s[0], s[1], s[2], s[3], s[4], s[5]}; }
  bool finite() const { return vec().allFinite(); }
};

/// Global Cartesian state: position, velocity, acceleration.
struct CartesianState6 {
  double x = 0.0, y = 0.0;    ///< [m]
  double vx = 0.0, vy = 0.0;  ///< [m/s]
  double ax = 0.0, ay = 0.0;  ///< [m/s^2]

  Vec6 vec() const { return (Vec6() << x, y, vx, vy, ax, ay).finished(); }
  static CartesianState6 from_vec(const Vec6& s) { return {s[0], s[1], s[2], s[3], s[4], s[5]}; }
};

/// Model-tagged relative state. Layout of `data`:
///  A: body-fixed (x, y, vx, vy, ax, ay)
///  B: relative (x, y), over-ground (vx, vy, ax, ay) rotated into the ego frame
///  C: (x_rel, y_rel, psi_rel, psidot_g, v_g, a_g)
struct RelState {
  Model model = Model::A;
  Vec6 data = Vec6::Zero();

  Vec2 position() const { return data.head<2>(); }
};

/// Mean and covariance. Used for the ego CTRA filter as well as for the target filters.
struct GaussianBelief {
  Vec6 mean = Vec6::Zero();
  Mat6 cov = Mat6::Zero();
};

/// Process and measurement noise covariances.
struct NoiseSpec {
  Mat2 target_ctra = Vec2(1.0, 25.0).asDiagonal();     ///< (nu_psiddot, nu_adot)
  Mat2 target_jerk = Vec2(325.0, 325.0).asDiagonal();  ///< Cartesian jerk (nu_jx, nu_jy)
  Mat2 ego_ctra = Vec2(1.0, 25.0).asDiagonal();        ///< (nu_psiddot, nu_adot)
  Mat3 meas_proprio = Vec3(1e-4, 1e-2, 9e-2).asDiagonal();  ///< (psidot, v, a) readings
  Mat2 meas_extero = Vec2(0.25, 0.25).asDiagonal();         ///< (x_rel, y_rel) readings
};

/// The observable part of the ego estimate that drives the relative target dynamics.
struct EgoInput {
  double v0 = 0.0;
  double a0 = 0.0;
  double psidot0 = 0.0;
  Mat3 cov = Mat3::Zero();  ///< ordered (v0, a0, psidot0)
};

CartesianState6 ctra_to_cartesian(const CtraState& s);

/// Inverse of ctra_to_cartesian. Throws DegenerateSpeed when the speed is at or below eps_v.
CtraState cartesian_to_ctra(const CartesianState6& s, double eps_v = kDegenerateSpeed);

/// True when `m` is symmetric within `rel_tol` and has no eigenvalue below -rel_tol * trace.
bool is_symmetric_psd(const Eigen::MatrixXd& m, double rel_tol = 1e-9);

}  // namespace relkal

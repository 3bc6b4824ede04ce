#pragma once

#include <stdexcept>

#include "relkal/relmodels.hpp"
#include "relkal/statespace.hpp"

namespace relkal {

/// Innovation covariance too ill-conditioned to invert.
class SingularInnovation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Condition number of S above which update() refuses to invert it.
inline constexpr double kMaxInnovationCondition = 1e12;

enum class MeasurementKind { ProprioPsidotVA, ExteroPositionXY };

/// Linear measurement z = H x + w, w ~ N(0, W).
struct MeasurementModel {
  MeasurementKind kind = MeasurementKind::ExteroPositionXY;
  Eigen::MatrixXd H;
  Eigen::MatrixXd W;

  /// H selects (psidot, v, a) of a CTRA state.
  static MeasurementModel proprio(const Mat3& W);
  /// H selects the relative position (x, y).
  static MeasurementModel extero(const Mat2& W);
};

/// Initial covariance of the four unmeasured entries, per model layout.
Mat4 default_unmeasured_cov(Model model);

/// Track from a single relative position reading: mean (z, 0, 0, 0, 0), covariance
/// blockdiag(W, unmeasured_cov).
GaussianBelief initialize_track(const Vec2& z, const MeasurementModel& meas, const Mat4& unmeasured_cov);

/// Time update of a target track: mean via propagate_relative at zero noise,
/// covariance A P A^T + B P_ego B^T + G V G^T.
GaussianBelief predict(const GaussianBelief& b, Model model, const EgoInput& ego_in, const Mat4& V_rel,
                       double dt);

struct Correction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Joseph-form Kalman correction for any state dimension. Throws SingularInnovation
/// when cond(H P H^T + W) exceeds kMaxInnovationCondition.
Correction kalman_correct(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const Eigen::VectorXd& z, const Eigen::MatrixXd& H, const Eigen::MatrixXd& W);

/// kalman_correct on a 6-state belief. `angle_index` (if >= 0) names a component
/// that is wrapped to (-pi, pi] after the correction.
GaussianBelief update(const GaussianBelief& b, const Eigen::VectorXd& z, const MeasurementModel& m,
                      int angle_index = -1);

/// Time update of the ego CTRA filter.
GaussianBelief ego_predict(const GaussianBelief& b, const Mat2& ego_noise_cov, double dt);

/// Ego filter state right after the first proprioceptive reading. Position and heading
/// start at the frame origin with the given (small) variances.
GaussianBelief initialize_ego(const Vec3& z_psidot_v_a, const MeasurementModel& meas,
                              double pose_variance = 0.0);

/// Observable part of the ego estimate: (v, a, psidot) and their covariance.
EgoInput ego_input_from(const GaussianBelief& ego);

}  // namespace relkal

#include "relkal/ekf.hpp"

#include <Eigen/SVD>

#include "relkal/global_models.hpp"

namespace relkal {

namespace {

template <class M>
M symmetrized(const M& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace

MeasurementModel MeasurementModel::proprio(const Mat3& W) {
  MeasurementModel m;
  m.kind = MeasurementKind::ProprioPsidotVA;
  m.H = Eigen::MatrixXd::Zero(3, 6);
  m.H(0, 3) = 1.0;
  m.H(1, 4) = 1.0;
  m.H(2, 5) = 1.0;
  m.W = W;
  return m;
}

MeasurementModel MeasurementModel::extero(const Mat2& W) {
  MeasurementModel m;
  m.kind = MeasurementKind::ExteroPositionXY;
  m.H = Eigen::MatrixXd::Zero(2, 6);
  m.H(0, 0) = 1.0;
  m.H(1, 1) = 1.0;
  m.W = W;
  return m;
}

Mat4 default_unmeasured_cov(Model model) {
  if (model == Model::C) return Vec4(1.0, 1.0, 400.0, 25.0).asDiagonal();
  return Vec4(100.0, 100.0, 25.0, 25.0).asDiagonal();
}

GaussianBelief initialize_track(const Vec2& z, const MeasurementModel& meas, const Mat4& unmeasured_cov) {
  if (meas.kind != MeasurementKind::ExteroPositionXY) {
    throw ConfigError("initialize_track needs a relative position measurement");
  }
  GaussianBelief b;
  b.mean.head<2>() = z;
  b.cov.block<2, 2>(0, 0) = meas.W;
  b.cov.block<4, 4>(2, 2) = unmeasured_cov;
  return b;
}

GaussianBelief predict(const GaussianBelief& b, Model model, const EgoInput& ego_in, const Mat4& V_rel,
                       double dt) {
  const RelState rel{model, b.mean};
  const DiscreteJacobians j = discrete_jacobians(rel, ego_in, dt);
  const NoiseCovariances q = noise_covariances(j, ego_in.cov, V_rel);
  GaussianBelief out;
  out.mean = propagate_relative(rel, ego_in, dt).data;
  out.cov = symmetrized(Mat6(j.A * b.cov * j.A.transpose() + q.input + q.process));
  return out;
}

Correction kalman_correct(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const Eigen::VectorXd& z, const Eigen::MatrixXd& H, const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd S = symmetrized(Eigen::MatrixXd(H * cov * H.transpose() + W));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!std::isfinite(smax) || !(smin > 0.0) || smax / smin > kMaxInnovationCondition) {
    throw SingularInnovation("innovation covariance is numerically singular");
  }
  const Eigen::MatrixXd K = S.ldlt().solve(H * cov).transpose();  // P H^T S^-1, S symmetric
  const Eigen::MatrixXd I_KH = Eigen::MatrixXd::Identity(cov.rows(), cov.cols()) - K * H;
  Correction c;
  c.mean = mean + K * (z - H * mean);
  c.cov = symmetrized(Eigen::MatrixXd(I_KH * cov * I_KH.transpose() + K * W * K.transpose()));
  return c;
}

GaussianBelief update(const GaussianBelief& b, const Eigen::VectorXd& z, const MeasurementModel& m,
                      int angle_index) {
  const Correction c = kalman_correct(b.mean, b.cov, z, m.H, m.W);
  GaussianBelief out;
  out.mean = c.mean;
  out.cov = c.cov;
  if (angle_index >= 0) out.mean[angle_index] = wrap_angle(out.mean[angle_index]);
  return out;
}

GaussianBelief ego_predict(const GaussianBelief& b, const Mat2& ego_noise_cov, double dt) {
  const CtraState s = CtraState::from_vec(b.mean);
  const CtraJacobians j = ctra_discrete_jacobians(s, dt);
  GaussianBelief out;
  out.mean = ctra_propagate(s, dt).vec();
  out.cov = symmetrized(Mat6(j.F * b.cov * j.F.transpose() + j.G * ego_noise_cov * j.G.transpose()));
  return out;
}

GaussianBelief initialize_ego(const Vec3& z_psidot_v_a, const MeasurementModel& meas, double pose_variance) {
  if (meas.kind != MeasurementKind::ProprioPsidotVA) {
    throw ConfigError("initialize_ego needs a proprioceptive measurement");
  }
  GaussianBelief b;
  b.mean.tail<3>() = z_psidot_v_a;
  b.cov.block<3, 3>(0, 0) = pose_variance * Mat3::Identity();
  b.cov.block<3, 3>(3, 3) = meas.W;
  return b;
}

EgoInput ego_input_from(const GaussianBelief& ego) {
  // CTRA layout (x, y, psi, psidot, v, a) -> input layout (v, a, psidot)
  constexpr int idx[3] = {4, 5, 3};
  EgoInput in;
  in.v0 = ego.mean[4];
  in.a0 = ego.mean[5];
  in.psidot0 = ego.mean[3];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) in.cov(r, c) = ego.cov(idx[r], idx[c]);
  }
  return in;
}

}  // namespace relkal

#pragma once

#include "relkal/global_models.hpp"
#include "relkal/statespace.hpp"

namespace relkal {

/// Stacked relative-dynamics noise (target, ego). The target part is Cartesian jerk
/// (nu_jx, nu_jy) for models A and B and CTRA noise (nu_psidd, nu_adot) for model C.
struct RelNoiseSample {
  Vec2 target = Vec2::Zero();
  CtraNoiseSample ego;

  Vec4 stacked() const { return {target[0], target[1], ego.nu_psidd, ego.nu_adot}; }
  static RelNoiseSample from_stacked(const Vec4& n) { return {n.head<2>(), {n[2], n[3]}}; }
};

struct DiscreteJacobians {
  Mat6 A = Mat6::Identity();  ///< w.r.t. the relative state
  Mat63 B = Mat63::Zero();    ///< w.r.t. the ego input (v0, a0, psidot0)
  Mat64 G = Mat64::Zero();    ///< w.r.t. the stacked noise (target, ego)
};

/// Vector field of the relative state at time t after the step start, with the ego
/// trajectory (initial heading ego_psi0, CTRA from ego_in, noise n.ego) substituted.
Vec6 relative_derivative(Model model, const RelState& rel, const EgoInput& ego_in, double ego_psi0,
                         double t, const RelNoiseSample& n = {});

/// Closed-form step of the relative state over dt with the noise held constant.
/// ego_psi0 is the ego's global heading at the step start; it only rotates the
/// Cartesian target jerk of models A and B and drops out entirely for model C.
RelState propagate_relative(const RelState& rel, const EgoInput& ego_in, double dt,
                            const RelNoiseSample& n = {}, double ego_psi0 = 0.0);

/// Analytic partial derivatives of propagate_relative at zero noise.
DiscreteJacobians discrete_jacobians(const RelState& rel, const EgoInput& ego_in, double dt,
                                     double ego_psi0 = 0.0);

struct NoiseCovariances {
  Mat6 input = Mat6::Zero();    ///< B P_ego B^T
  Mat6 process = Mat6::Zero();  ///< G V_rel G^T
};

NoiseCovariances noise_covariances(const DiscreteJacobians& j, const Mat3& P_ego, const Mat4& V_rel);

/// V_rel = blockdiag(target noise, ego CTRA noise) for the given model.
Mat4 stacked_noise_cov(Model model, const NoiseSpec& noise);

}  // namespace relkal

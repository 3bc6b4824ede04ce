#pragma once

#include <array>
#include <complex>

#include "relkal/statespace.hpp"

namespace relkal {

/// Piecewise-constant CTRA noise: yaw acceleration and jerk held over one step.
struct CtraNoiseSample {
  double nu_psidd = 0.0;  ///< [rad/s^2]
  double nu_adot = 0.0;   ///< [m/s^3]
};

/// Piecewise-constant Cartesian jerk held over one step.
struct JerkNoiseSample {
  double nu_jx = 0.0;  ///< [m/s^3]
  double nu_jy = 0.0;  ///< [m/s^3]
};

/// |psidot * dt| below which the turn integrals are evaluated by power series.
/// The recurrence for the higher moments loses ~n digits per decade of psidot*dt
/// below one, so the switch sits at 1 rad rather than at the removable singularity.
inline constexpr double kTurnSeriesThreshold = 1.0;

/// Moments I_n(omega, t) = integral_0^t s^n exp(i omega s) ds for n = 0..6.
using TurnMoments = std::array<std::complex<double>, 7>;
TurnMoments turn_moments(double omega, double t);
/// Same, forcing one evaluation branch. Exposed for the branch-agreement tests.
TurnMoments turn_moments_series(double omega, double t);
TurnMoments turn_moments_closed(double omega, double t);

/// Planar displacement of a CTRA vehicle over [0, t] together with its partial
/// derivatives. The yaw-acceleration noise enters the heading quadratically; the
/// resulting Fresnel-type integral is linearised in nu_psidd.
struct CtraDisplacement {
  Vec2 value = Vec2::Zero();
  Vec2 d_psi = Vec2::Zero();
  Vec2 d_psidot = Vec2::Zero();
  Vec2 d_v = Vec2::Zero();
  Vec2 d_a = Vec2::Zero();
  Vec2 d_nu_psidd = Vec2::Zero();
  Vec2 d_nu_adot = Vec2::Zero();
};

CtraDisplacement ctra_displacement(double psi, double psidot, double v, double a,
                                   const CtraNoiseSample& n, double t);

/// Right-hand side of the CTRA vector field.
Vec6 ctra_derivative(const CtraState& s, const CtraNoiseSample& n);

/// Closed-form CTRA step with the noise sample held constant over dt. Heading is
/// returned wrapped to (-pi, pi].
CtraState ctra_propagate(const CtraState& s, double dt, const CtraNoiseSample& n = {});

struct CtraJacobians {
  Mat6 F = Mat6::Identity();  ///< d(ctra_propagate)/d(state)
  Mat62 G = Mat62::Zero();    ///< d(ctra_propagate)/d(nu_psidd, nu_adot)
};

/// Analytic discrete Jacobians of ctra_propagate evaluated at zero noise.
CtraJacobians ctra_discrete_jacobians(const CtraState& s, double dt);

/// White-noise-jerk step (exact polynomial integral, per axis).
CartesianState6 wnj_propagate(const CartesianState6& s, double dt, const JerkNoiseSample& n = {});

}  // namespace relkal

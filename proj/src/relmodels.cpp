#include "relkal/relmodels.hpp"

#include <cmath>

#include "relkal/frames.hpp"

namespace relkal {

namespace {

const Mat2 kJ = rotation_generator();
const Vec2 kE1(1.0, 0.0);

/// Ego motion over [0, t] expressed in the ego frame at the step start.
struct EgoMotion {
  double theta = 0.0;  ///< heading change
  double omega = 0.0;  ///< yaw rate at t
  double v = 0.0;      ///< speed at t
  double a = 0.0;      ///< acceleration at t
  CtraDisplacement disp;
};

EgoMotion ego_motion(const EgoInput& in, const CtraNoiseSample& n, double t) {
  EgoMotion em;
  em.theta = in.psidot0 * t + 0.5 * n.nu_psidd * t * t;
  em.omega = in.psidot0 + n.nu_psidd * t;
  em.v = in.v0 + in.a0 * t + 0.5 * n.nu_adot * t * t;
  em.a = in.a0 + n.nu_adot * t;
  em.disp = ctra_displacement(0.0, in.psidot0, in.v0, in.a0, n, t);
  return em;
}

struct EgoKinematics {
  double omega;
  double v;
  double a;
};

// Body-fixed (model A) and mixed (model B) coordinates differ only by the ego's
// own velocity and acceleration and by the rotating-frame transport terms.
//   V   = U - w J p + (v, 0)
//   Acc = W - w^2 p - 2 w J U + (a, w v)
Vec6 body_to_mixed(const Vec6& x, const EgoKinematics& k) {
  const Vec2 p = x.segment<2>(0);
  const Vec2 u = x.segment<2>(2);
  const Vec2 w = x.segment<2>(4);
  Vec6 out;
  out.segment<2>(0) = p;
  out.segment<2>(2) = u - k.omega * kJ * p + k.v * kE1;
  out.segment<2>(4) = w - k.omega * k.omega * p - 2.0 * k.omega * kJ * u + Vec2(k.a, k.omega * k.v);
  return out;
}

Vec6 mixed_to_body(const Vec6& x, const EgoKinematics& k) {
  const Vec2 p = x.segment<2>(0);
  const Vec2 vel = x.segment<2>(2);
  const Vec2 acc = x.segment<2>(4);
  Vec6 out;
  out.segment<2>(0) = p;
  out.segment<2>(2) = k.omega * kJ * p + vel - k.v * kE1;
  out.segment<2>(4) =
      -k.omega * k.omega * p + 2.0 * k.omega * kJ * vel + acc + Vec2(-k.a, k.omega * k.v);
  return out;
}

Mat6 body_to_mixed_linear(double omega) {
  Mat6 l = Mat6::Identity();
  l.block<2, 2>(2, 0) = -omega * kJ;
  l.block<2, 2>(4, 0) = -omega * omega * Mat2::Identity();
  l.block<2, 2>(4, 2) = -2.0 * omega * kJ;
  return l;
}

Mat6 mixed_to_body_linear(double omega) {
  Mat6 l = Mat6::Identity();
  l.block<2, 2>(2, 0) = omega * kJ;
  l.block<2, 2>(4, 0) = -omega * omega * Mat2::Identity();
  l.block<2, 2>(4, 2) = 2.0 * omega * kJ;
  return l;
}

// Partials w.r.t. (omega, v, a) of the maps above at the given argument.
Mat63 body_to_mixed_partials(const Vec6& x, const EgoKinematics& k) {
  const Vec2 p = x.segment<2>(0);
  const Vec2 u = x.segment<2>(2);
  Mat63 d = Mat63::Zero();
  d.block<2, 1>(2, 0) = -kJ * p;
  d.block<2, 1>(4, 0) = -2.0 * k.omega * p - 2.0 * kJ * u + Vec2(0.0, k.v);
  d.block<2, 1>(2, 1) = kE1;
  d.block<2, 1>(4, 1) = Vec2(0.0, k.omega);
  d.block<2, 1>(4, 2) = kE1;
  return d;
}

Mat63 mixed_to_body_partials(const Vec6& x, const EgoKinematics& k) {
  const Vec2 p = x.segment<2>(0);
  const Vec2 vel = x.segment<2>(2);
  Mat63 d = Mat63::Zero();
  d.block<2, 1>(2, 0) = kJ * p;
  d.block<2, 1>(4, 0) = -2.0 * k.omega * p + 2.0 * kJ * vel + Vec2(0.0, k.v);
  d.block<2, 1>(2, 1) = -kE1;
  d.block<2, 1>(4, 1) = Vec2(0.0, k.omega);
  d.block<2, 1>(4, 2) = -kE1;
  return d;
}

// Mixed white-noise-jerk state: integrate in the initial ego frame, subtract the ego
// displacement and rotate into the final ego frame.
Vec6 propagate_mixed(const Vec6& x, const EgoMotion& em, const Vec2& jerk, double t) {
  const Mat2 r = rotation(em.theta).m;
  const Vec2 p0 = x.segment<2>(0);
  const Vec2 v0 = x.segment<2>(2);
  const Vec2 a0 = x.segment<2>(4);
  const double t2 = t * t;
  const double t3 = t2 * t;
  Vec6 out;
  out.segment<2>(0) = r * (p0 + v0 * t + a0 * (0.5 * t2) + jerk * (t3 / 6.0) - em.disp.value);
  out.segment<2>(2) = r * (v0 + a0 * t + jerk * (0.5 * t2));
  out.segment<2>(4) = r * (a0 + jerk * t);
  return out;
}

struct MixedJacobians {
  Mat6 A;
  Mat63 B;
  Mat64 G;
};

MixedJacobians mixed_jacobians(const Vec6& x_end, const EgoMotion& em, double ego_psi0, double t) {
  const Mat2 r = rotation(em.theta).m;
  const double t2 = t * t;
  MixedJacobians j;
  j.A.setZero();
  for (int i = 0; i < 3; ++i) j.A.block<2, 2>(2 * i, 2 * i) = r;
  j.A.block<2, 2>(0, 2) = r * t;
  j.A.block<2, 2>(0, 4) = r * (0.5 * t2);
  j.A.block<2, 2>(2, 4) = r * t;

  j.B.setZero();
  j.B.block<2, 1>(0, 0) = -r * em.disp.d_v;
  j.B.block<2, 1>(0, 1) = -r * em.disp.d_a;
  for (int i = 0; i < 3; ++i) j.B.block<2, 1>(2 * i, 2) = t * kJ * x_end.segment<2>(2 * i);
  j.B.block<2, 1>(0, 2) -= r * em.disp.d_psidot;

  j.G.setZero();
  const Mat2 rj = r * rotation(ego_psi0).m;
  j.G.block<2, 2>(0, 0) = rj * (t2 * t / 6.0);
  j.G.block<2, 2>(2, 0) = rj * (0.5 * t2);
  j.G.block<2, 2>(4, 0) = rj * t;
  for (int i = 0; i < 3; ++i) j.G.block<2, 1>(2 * i, 2) = 0.5 * t2 * kJ * x_end.segment<2>(2 * i);
  j.G.block<2, 1>(0, 2) -= r * em.disp.d_nu_psidd;
  j.G.block<2, 1>(0, 3) = -r * em.disp.d_nu_adot;
  return j;
}

Vec6 propagate_ctra_mixed(const Vec6& x, const EgoInput& in, const EgoMotion& em,
                          const RelNoiseSample& n, double t) {
  const CtraNoiseSample target_noise{n.target[0], n.target[1]};
  const CtraDisplacement dt_disp = ctra_displacement(x[2], x[3], x[4], x[5], target_noise, t);
  const Mat2 r = rotation(em.theta).m;
  const double t2 = t * t;
  Vec6 out;
  out.segment<2>(0) = r * (x.segment<2>(0) + dt_disp.value - em.disp.value);
  out[2] = wrap_angle(x[2] + (x[3] - in.psidot0) * t +
                      0.5 * (target_noise.nu_psidd - n.ego.nu_psidd) * t2);
  out[3] = x[3] + target_noise.nu_psidd * t;
  out[4] = x[4] + x[5] * t + 0.5 * target_noise.nu_adot * t2;
  out[5] = x[5] + target_noise.nu_adot * t;
  return out;
}

}  // namespace

Vec6 relative_derivative(Model model, const RelState& rel, const EgoInput& ego_in, double ego_psi0,
                         double t, const RelNoiseSample& n) {
  const double omega = ego_in.psidot0 + n.ego.nu_psidd * t;
  const double omega_dot = n.ego.nu_psidd;
  const double v_e = ego_in.v0 + ego_in.a0 * t + 0.5 * n.ego.nu_adot * t * t;
  const double a_e = ego_in.a0 + n.ego.nu_adot * t;
  const double a_e_dot = n.ego.nu_adot;
  const double heading = ego_psi0 + ego_in.psidot0 * t + 0.5 * n.ego.nu_psidd * t * t;
  const Vec6& x = rel.data;

  if (model == Model::C) {
    Vec6 d;
    d[0] = omega * x[1] + x[4] * std::cos(x[2]) - v_e;
    d[1] = -omega * x[0] + x[4] * std::sin(x[2]);
    d[2] = x[3] - omega;
    d[3] = n.target[0];
    d[4] = x[5];
    d[5] = n.target[1];
    return d;
  }

  const Vec6 mixed = model == Model::B ? x : body_to_mixed(x, {omega, v_e, a_e});
  const Vec2 p = mixed.segment<2>(0);
  const Vec2 vel = mixed.segment<2>(2);
  const Vec2 acc = mixed.segment<2>(4);
  const Vec2 p_dot = omega * kJ * p + vel - v_e * kE1;
  const Vec2 vel_dot = omega * kJ * vel + acc;
  const Vec2 acc_dot = omega * kJ * acc + rotation(heading).m * n.target;
  Vec6 d;
  if (model == Model::B) {
    d << p_dot, vel_dot, acc_dot;
    return d;
  }
  // Differentiate U = w J p + V - (v, 0) and W = -w^2 p + 2 w J (V - (v, 0)) + Acc - (a, w v).
  const Vec2 u_dot = omega_dot * kJ * p + omega * kJ * p_dot + vel_dot - a_e * kE1;
  const Vec2 w_dot = -2.0 * omega * omega_dot * p - omega * omega * p_dot +
                     2.0 * omega_dot * kJ * (vel - v_e * kE1) +
                     2.0 * omega * kJ * (vel_dot - a_e * kE1) + acc_dot -
                     Vec2(a_e_dot, omega_dot * v_e + omega * a_e);
  d << p_dot, u_dot, w_dot;
  return d;
}

RelState propagate_relative(const RelState& rel, const EgoInput& ego_in, double dt,
                            const RelNoiseSample& n, double ego_psi0) {
  const EgoMotion em = ego_motion(ego_in, n.ego, dt);
  switch (rel.model) {
    case Model::B: {
      const Vec2 jerk = rotation(ego_psi0).m * n.target;
      return {rel.model, propagate_mixed(rel.data, em, jerk, dt)};
    }
    case Model::A: {
      const Vec2 jerk = rotation(ego_psi0).m * n.target;
      const Vec6 mixed = body_to_mixed(rel.data, {ego_in.psidot0, ego_in.v0, ego_in.a0});
      const Vec6 mixed_end = propagate_mixed(mixed, em, jerk, dt);
      return {rel.model, mixed_to_body(mixed_end, {em.omega, em.v, em.a})};
    }
    case Model::C:
      return {rel.model, propagate_ctra_mixed(rel.data, ego_in, em, n, dt)};
  }
  return rel;
}

DiscreteJacobians discrete_jacobians(const RelState& rel, const EgoInput& ego_in, double dt,
                                     double ego_psi0) {
  DiscreteJacobians out;
  if (dt == 0.0) return out;
  const EgoMotion em = ego_motion(ego_in, {}, dt);
  const Mat2 r = rotation(em.theta).m;
  const Vec6& x = rel.data;

  if (rel.model == Model::C) {
    const Vec6 x_end = propagate_ctra_mixed(x, ego_in, em, {}, dt);
    const CtraDisplacement dd = ctra_displacement(x[2], x[3], x[4], x[5], {}, dt);
    const CtraDisplacement& de = em.disp;
    const double t2 = dt * dt;
    Mat6& A = out.A;
    A.block<2, 2>(0, 0) = r;
    A.block<2, 1>(0, 2) = r * dd.d_psi;
    A.block<2, 1>(0, 3) = r * dd.d_psidot;
    A.block<2, 1>(0, 4) = r * dd.d_v;
    A.block<2, 1>(0, 5) = r * dd.d_a;
    A(2, 3) = dt;
    A(4, 5) = dt;

    Mat63& B = out.B;
    B.block<2, 1>(0, 0) = -r * de.d_v;
    B.block<2, 1>(0, 1) = -r * de.d_a;
    B.block<2, 1>(0, 2) = dt * kJ * x_end.segment<2>(0) - r * de.d_psidot;
    B(2, 2) = -dt;

    Mat64& G = out.G;
    G.block<2, 1>(0, 0) = r * dd.d_nu_psidd;
    G(2, 0) = 0.5 * t2;
    G(3, 0) = dt;
    G.block<2, 1>(0, 1) = r * dd.d_nu_adot;
    G(4, 1) = 0.5 * t2;
    G(5, 1) = dt;
    G.block<2, 1>(0, 2) = 0.5 * t2 * kJ * x_end.segment<2>(0) - r * de.d_nu_psidd;
    G(2, 2) = -0.5 * t2;
    G.block<2, 1>(0, 3) = -r * de.d_nu_adot;
    return out;
  }

  if (rel.model == Model::B) {
    const MixedJacobians mj = mixed_jacobians(propagate_mixed(x, em, Vec2::Zero(), dt), em, ego_psi0, dt);
    out.A = mj.A;
    out.B = mj.B;
    out.G = mj.G;
    return out;
  }

  // Model A = (mixed -> body at t) o (mixed step) o (body -> mixed at 0).
  const EgoKinematics k0{ego_in.psidot0, ego_in.v0, ego_in.a0};
  const EgoKinematics kt{em.omega, em.v, em.a};
  const Vec6 mixed = body_to_mixed(x, k0);
  const Vec6 mixed_end = propagate_mixed(mixed, em, Vec2::Zero(), dt);
  const MixedJacobians mj = mixed_jacobians(mixed_end, em, ego_psi0, dt);
  const Mat6 l_in = body_to_mixed_linear(k0.omega);
  const Mat6 l_out = mixed_to_body_linear(kt.omega);
  const Mat63 p_in = body_to_mixed_partials(x, k0);
  const Mat63 p_out = mixed_to_body_partials(mixed_end, kt);
  // partial columns: 0 = omega, 1 = v, 2 = a

  out.A = l_out * mj.A * l_in;
  out.B.col(0) = l_out * (mj.A * p_in.col(1) + mj.B.col(0)) + p_out.col(1);
  out.B.col(1) = l_out * (mj.A * p_in.col(2) + mj.B.col(1)) + p_out.col(1) * dt + p_out.col(2);
  out.B.col(2) = l_out * (mj.A * p_in.col(0) + mj.B.col(2)) + p_out.col(0);
  out.G = l_out * mj.G;
  out.G.col(2) += p_out.col(0) * dt;
  out.G.col(3) += p_out.col(1) * (0.5 * dt * dt) + p_out.col(2) * dt;
  return out;
}

NoiseCovariances noise_covariances(const DiscreteJacobians& j, const Mat3& P_ego, const Mat4& V_rel) {
  NoiseCovariances q;
  q.input = j.B * P_ego * j.B.transpose();
  q.process = j.G * V_rel * j.G.transpose();
  q.input = 0.5 * (q.input + q.input.transpose()).eval();
  q.process = 0.5 * (q.process + q.process.transpose()).eval();
  return q;
}

Mat4 stacked_noise_cov(Model model, const NoiseSpec& noise) {
  Mat4 v = Mat4::Zero();
  v.block<2, 2>(0, 0) = model == Model::C ? noise.target_ctra : noise.target_jerk;
  v.block<2, 2>(2, 2) = noise.ego_ctra;
  return v;
}

}  // namespace relkal

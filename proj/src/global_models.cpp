#include "relkal/global_models.hpp"

#include <cmath>

namespace relkal {

namespace {

using cd = std::complex<double>;

Vec2 as_vec(cd z) { return {z.real(), z.imag()}; }

}  // namespace

TurnMoments turn_moments_series(double omega, double t) {
  // I_n = t^{n+1} sum_k (i omega t)^k / (k! (n + k + 1))
  TurnMoments out{};
  const cd iwt(0.0, omega * t);
  double tpow = t;
  for (std::size_t n = 0; n < out.size(); ++n) {
    cd term(1.0, 0.0);  // (i w t)^k / k!
    cd sum = term / static_cast<double>(n + 1);
    for (int k = 1; k < 40; ++k) {
      term *= iwt / static_cast<double>(k);
      const cd add = term / static_cast<double>(n + k + 1);
      sum += add;
      if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
    }
    out[n] = tpow * sum;
    tpow *= t;
  }
  return out;
}

TurnMoments turn_moments_closed(double omega, double t) {
  TurnMoments out{};
  const cd iw(0.0, omega);
  const cd e = std::exp(cd(0.0, omega * t));
  out[0] = (e - 1.0) / iw;
  double tpow = 1.0;
  for (std::size_t n = 1; n < out.size(); ++n) {
    tpow *= t;
    out[n] = (tpow * e - static_cast<double>(n) * out[n - 1]) / iw;
  }
  return out;
}

TurnMoments turn_moments(double omega, double t) {
  if (std::abs(omega * t) < kTurnSeriesThreshold) return turn_moments_series(omega, t);
  return turn_moments_closed(omega, t);
}

CtraDisplacement ctra_displacement(double psi, double psidot, double v, double a,
                                   const CtraNoiseSample& n, double t) {
  CtraDisplacement d;
  if (t == 0.0) return d;
  const TurnMoments I = turn_moments(psidot, t);
  const cd i(0.0, 1.0);
  const cd rot = std::exp(cd(0.0, psi));
  const double j = n.nu_adot;
  const double nu = n.nu_psidd;

  // speed(s) = v + a s + j s^2 / 2, heading(s) = psi + psidot s + nu s^2 / 2, with
  // exp(i nu s^2 / 2) ~ 1 + i nu s^2 / 2.
  const cd base = v * I[0] + a * I[1] + 0.5 * j * I[2];
  const cd fresnel = v * I[2] + a * I[3] + 0.5 * j * I[4];
  const cd value = rot * (base + 0.5 * i * nu * fresnel);

  const cd base_w = v * I[1] + a * I[2] + 0.5 * j * I[3];
  const cd fresnel_w = v * I[3] + a * I[4] + 0.5 * j * I[5];

  d.value = as_vec(value);
  d.d_psi = as_vec(i * value);
  d.d_psidot = as_vec(rot * i * (base_w + 0.5 * i * nu * fresnel_w));
  d.d_v = as_vec(rot * (I[0] + 0.5 * i * nu * I[2]));
  d.d_a = as_vec(rot * (I[1] + 0.5 * i * nu * I[3]));
  d.d_nu_adot = as_vec(rot * (0.5 * I[2] + 0.25 * i * nu * I[4]));
  d.d_nu_psidd = as_vec(rot * 0.5 * i * fresnel);
  return d;
}

Vec6 ctra_derivative(const CtraState& s, const CtraNoiseSample& n) {
  return (Vec6() << s.v * std::cos(s.psi), s.v * std::sin(s.psi), s.psidot, n.nu_psidd, s.a,
          n.nu_adot)
      .finished();
}

CtraState ctra_propagate(const CtraState& s, double dt, const CtraNoiseSample& n) {
  const CtraDisplacement d = ctra_displacement(s.psi, s.psidot, s.v, s.a, n, dt);
  CtraState out;
  out.x = s.x + d.value[0];
  out.y = s.y + d.value[1];
  out.psi = wrap_angle(s.psi + s.psidot * dt + 0.5 * n.nu_psidd * dt * dt);
  out.psidot = s.psidot + n.nu_psidd * dt;
  out.v = s.v + s.a * dt + 0.5 * n.nu_adot * dt * dt;
  out.a = s.a + n.nu_adot * dt;
  return out;
}

CtraJacobians ctra_discrete_jacobians(const CtraState& s, double dt) {
  CtraJacobians jac;
  const CtraDisplacement d = ctra_displacement(s.psi, s.psidot, s.v, s.a, {}, dt);
  Mat6& F = jac.F;
  F.block<2, 1>(0, 2) = d.d_psi;
  F.block<2, 1>(0, 3) = d.d_psidot;
  F.block<2, 1>(0, 4) = d.d_v;
  F.block<2, 1>(0, 5) = d.d_a;
  F(2, 3) = dt;
  F(4, 5) = dt;

  Mat62& G = jac.G;
  G.block<2, 1>(0, 0) = d.d_nu_psidd;
  G.block<2, 1>(0, 1) = d.d_nu_adot;
  G(2, 0) = 0.5 * dt * dt;
  G(3, 0) = dt;
  G(4, 1) = 0.5 * dt * dt;
  G(5, 1) = dt;
  return jac;
}

CartesianState6 wnj_propagate(const CartesianState6& s, double dt, const JerkNoiseSample& n) {
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  CartesianState6 out;
  out.x = s.x + s.vx * dt + 0.5 * s.ax * dt2 + n.nu_jx * dt3 / 6.0;
  out.y = s.y + s.vy * dt + 0.5 * s.ay * dt2 + n.nu_jy * dt3 / 6.0;
  out.vx = s.vx + s.ax * dt + 0.5 * n.nu_jx * dt2;
  out.vy = s.vy + s.ay * dt + 0.5 * n.nu_jy * dt2;
  out.ax = s.ax + n.nu_jx * dt;
  out.ay = s.ay + n.nu_jy * dt;
  return out;
}

}  // namespace relkal

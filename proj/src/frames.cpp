#include "relkal/frames.hpp"

#include <cmath>

namespace relkal {

Rot2 rotation(double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Rot2 r;
  r.m << c, s, -s, c;
  return r;
}

RotationRates rotation_rates(double psi, double psidot, double psiddot) {
  const Mat2 r = rotation(psi).m;
  const Mat2 dr = rotation_generator() * r;  // d r / d psi
  // d^2 r / d psi^2 = J^2 r = -r
  return {r, psidot * dr, psiddot * dr - psidot * psidot * r};
}

Transform6 mixing_matrix(Model model, const CtraState& ego) {
  Transform6 t;
  t.m.setZero();
  switch (model) {
    case Model::A: {
      const RotationRates rr = rotation_rates(ego.psi, ego.psidot, 0.0);
      t.kind = TransformKind::NonInertial;
      t.m.block<2, 2>(0, 0) = rr.r;
      t.m.block<2, 2>(2, 0) = rr.rdot;
      t.m.block<2, 2>(2, 2) = rr.r;
      t.m.block<2, 2>(4, 0) = rr.rddot;
      t.m.block<2, 2>(4, 2) = 2.0 * rr.rdot;
      t.m.block<2, 2>(4, 4) = rr.r;
      break;
    }
    case Model::B: {
      const Mat2 r = rotation(ego.psi).m;
      t.kind = TransformKind::Mixed;
      for (int i = 0; i < 3; ++i) t.m.block<2, 2>(2 * i, 2 * i) = r;
      break;
    }
    case Model::C:
      t.kind = TransformKind::MixedCtra;
      t.m.setIdentity();
      t.m.block<2, 2>(0, 0) = rotation(ego.psi).m;
      break;
  }
  return t;
}

Mat6 ego_projector(Model model) {
  Vec6 d = Vec6::Zero();
  switch (model) {
    case Model::A:
      d.setOnes();
      break;
    case Model::B:
      d << 1, 1, 0, 0, 0, 0;
      break;
    case Model::C:
      d << 1, 1, 1, 0, 0, 0;
      break;
  }
  return d.asDiagonal();
}

RelState to_relative(Model model, const CartesianState6& target, const CtraState& ego) {
  if (model == Model::C) {
    return to_relative(model, cartesian_to_ctra(target), ego);
  }
  const Vec6 ego_cart = ctra_to_cartesian(ego).vec();
  const Transform6 t = mixing_matrix(model, ego);
  return {model, t.m * (target.vec() - ego_projector(model) * ego_cart)};
}

RelState to_relative(Model model, const CtraState& target, const CtraState& ego) {
  if (model != Model::C) return to_relative(model, ctra_to_cartesian(target), ego);
  const Transform6 t = mixing_matrix(model, ego);
  RelState rel{model, t.m * (target.vec() - ego_projector(model) * ego.vec())};
  rel.data[2] = wrap_angle(rel.data[2]);
  return rel;
}

CartesianState6 from_relative_cartesian(const RelState& rel, const CtraState& ego) {
  if (rel.model == Model::C) return ctra_to_cartesian(from_relative(rel, ego));
  const Mat6 m = mixing_matrix(rel.model, ego).m;
  const Vec6 ego_cart = ctra_to_cartesian(ego).vec();
  // Block forward substitution; the diagonal blocks are rotations.
  const Mat2 rt = m.block<2, 2>(0, 0).transpose();
  Vec6 diff;
  diff.segment<2>(0) = rt * rel.data.segment<2>(0);
  diff.segment<2>(2) = rt * (rel.data.segment<2>(2) - m.block<2, 2>(2, 0) * diff.segment<2>(0));
  diff.segment<2>(4) = rt * (rel.data.segment<2>(4) - m.block<2, 2>(4, 0) * diff.segment<2>(0) -
                             m.block<2, 2>(4, 2) * diff.segment<2>(2));
  return CartesianState6::from_vec(diff + ego_projector(rel.model) * ego_cart);
}

CtraState from_relative(const RelState& rel, const CtraState& ego) {
  if (rel.model != Model::C) return cartesian_to_ctra(from_relative_cartesian(rel, ego));
  CtraState out;
  const Vec2 pos = rotation(ego.psi).m.transpose() * rel.position();
  out.x = ego.x + pos[0];
  out.y = ego.y + pos[1];
  out.psi = wrap_angle(ego.psi + rel.data[2]);
  out.psidot = rel.data[3];
  out.v = rel.data[4];
  out.a = rel.data[5];
  return out;
}

}  // namespace relkal

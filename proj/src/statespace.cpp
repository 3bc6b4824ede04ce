#include "relkal/statespace.hpp"

#include <Eigen/Eigenvalues>

namespace relkal {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(angle, two_pi);  // [-pi, pi]
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

std::string_view to_string(Model m) {
  switch (m) {
    case Model::A:
      return "A";
    case Model::B:
      return "B";
    case Model::C:
      return "C";
  }
  return "?";
}

Model parse_model(std::string_view name) {
  if (name == "A" || name == "a") return Model::A;
  if (name == "B" || name == "b") return Model::B;
  if (name == "C" || name == "c") return Model::C;
  throw ConfigError("unknown model '" + std::string(name) + "'; valid models are A, B, C");
}

CartesianState6 ctra_to_cartesian(const CtraState& s) {
  const double c = std::cos(s.psi);
  const double sn = std::sin(s.psi);
  return {s.x,
          s.y,
          s.v * c,
          s.v * sn,
          s.a * c - s.v * s.psidot * sn,
          s.a * sn + s.v * s.psidot * c};
}

CtraState cartesian_to_ctra(const CartesianState6& s, double eps_v) {
  const double speed = std::hypot(s.vx, s.vy);
  if (!(speed > eps_v)) {
    throw DegenerateSpeed("cartesian_to_ctra: speed " + std::to_string(speed) +
                          " m/s too small to define a heading");
  }
  CtraState out;
  out.x = s.x;
  out.y = s.y;
  out.psi = std::atan2(s.vy, s.vx);
  out.v = speed;
  out.a = (s.vx * s.ax + s.vy * s.ay) / speed;
  out.psidot = (s.vx * s.ay - s.vy * s.ax) / (speed * speed);
  return out;
}

bool is_symmetric_psd(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > rel_tol * scale) return false;
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double trace = std::max(sym.trace(), 0.0);
  return es.eigenvalues().minCoeff() >= -rel_tol * std::max(trace, scale);
}

}  // namespace relkal

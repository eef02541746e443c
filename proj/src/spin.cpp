#include "qnd/spin.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qnd {

Eigen::Vector3d GaussianSpinState::transverse_axis() const {
  const Eigen::Vector3d t = Eigen::Vector3d::UnitZ().cross(mean);
  if (t.norm() < 1e-12 * std::max(1.0, mean.norm())) return Eigen::Vector3d::UnitY();
  return t.normalized();
}

double GaussianSpinState::var_y() const {
  const Eigen::Vector3d t = transverse_axis();
  return t.dot(cov * t);
}

double GaussianSpinState::cov_yz() const {
  const Eigen::Vector3d t = transverse_axis();
  return t.dot(cov.col(2));
}

bool GaussianSpinState::is_psd(double tol) const {
  if (!cov.isApprox(cov.transpose(), 1e-12)) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

void PreparationModel::validate() const {
  if (!(prep_noise_factor >= 1.0)) throw std::invalid_argument("prep_noise_factor must be >= 1");
  if (!(impurity_fraction >= 0.0 && impurity_fraction <= 0.2))
    throw std::invalid_argument("impurity_fraction must lie in [0, 0.2]");
  if (!(initial_contrast > 0.0 && initial_contrast <= 1.0))
    throw std::invalid_argument("initial_contrast must lie in (0, 1]");
}

void PulseModel::validate() const {
  if (!(composite_pi_infidelity >= 0.0 && composite_pi_infidelity <= 0.1))
    throw std::invalid_argument("composite_pi_infidelity must lie in [0, 0.1]");
}

double ContrastModel::factor(double photons) const {
  return std::exp(-alpha * photons - 0.5 * beta * photons * photons);
}

GaussianSpinState prepare_css(double n0, const PreparationModel& prep) {
  if (!(n0 > 0.0)) throw std::invalid_argument("effective atom number must be positive");
  prep.validate();
  GaussianSpinState s;
  s.s0 = 0.5 * n0;
  s.mean = {prep.initial_contrast * s.s0, 0.0, 0.0};
  const double v = prep.prep_noise_factor * s.css_variance();
  s.cov = Eigen::Vector3d(0.0, v, v).asDiagonal();
  return s;
}

GaussianSpinState rotate(const GaussianSpinState& state, RotationAxis axis, double angle) {
  if (!std::isfinite(angle)) throw std::invalid_argument("rotation angle must be finite");
  Eigen::Vector3d n = Eigen::Vector3d::UnitX();
  switch (axis) {
    case RotationAxis::x: break;
    case RotationAxis::y: n = Eigen::Vector3d::UnitY(); break;
    case RotationAxis::z: n = Eigen::Vector3d::UnitZ(); break;
    case RotationAxis::mean_spin:
      if (state.mean.norm() == 0.0) throw std::invalid_argument("mean spin axis undefined for zero mean");
      n = state.mean.normalized();
      break;
  }
  const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, n).toRotationMatrix();
  GaussianSpinState out = state;
  out.mean = r * state.mean;
  out.cov = r * state.cov * r.transpose();
  return out;
}

double rotated_z_variance(const GaussianSpinState& state, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return state.var_z() * c * c + state.var_y() * s * s + state.cov_yz() * std::sin(2.0 * angle);
}

GaussianSpinState composite_pi(const GaussianSpinState& state, const PulseModel& pulse) {
  const double mu = pulse.composite_pi_infidelity;
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("flip infidelity must lie in [0, 1]");
  const Eigen::Matrix3d r = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const double keep = 1.0 - 2.0 * mu;
  GaussianSpinState out = state;
  out.mean = keep * (r * state.mean);
  Eigen::Matrix3d c = r * state.cov * r.transpose();
  c.block<2, 2>(1, 1) *= keep * keep;
  c.block<1, 2>(0, 1) *= keep;
  c.block<2, 1>(1, 0) *= keep;
  const double flip_noise = mu * (1.0 - mu) * state.n0();
  c(1, 1) += flip_noise;
  c(2, 2) += flip_noise;
  out.cov = c;
  return out;
}

GaussianSpinState measurement_backaction(const GaussianSpinState& state, double photons, double phi_eff,
                                         const ContrastModel& contrast) {
  if (!(photons >= 0.0)) throw std::invalid_argument("photon number must be >= 0");
  GaussianSpinState out = state;
  const Eigen::Vector3d t = state.transverse_axis();
  const double broadening = state.css_variance() * state.n0() * photons * phi_eff * phi_eff;
  out.cov += broadening * t * t.transpose();
  out.mean *= contrast.factor(photons);
  return out;
}

GaussianSpinState condition_on_measurement(const GaussianSpinState& state, double measurement, double var_meas) {
  if (!(var_meas > 0.0)) throw std::invalid_argument("measurement variance must be positive");
  if (std::isinf(var_meas)) return state;
  GaussianSpinState out = state;
  const double denom = state.var_z() + var_meas;
  const Eigen::Vector3d gain = state.cov.col(2) / denom;
  const double length = state.mean.norm();
  out.mean = state.mean + gain * (measurement - state.mean.z());
  if (out.mean.norm() > 0.0) out.mean *= length / out.mean.norm();
  out.cov = state.cov - gain * state.cov.row(2);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

GaussianSpinState raman_flip_update(const GaussianSpinState& state, const ScatteringRates& rates, double photons) {
  if (!(photons >= 0.0)) throw std::invalid_argument("photon number must be >= 0");
  if (photons * rates.p_raman_total > 0.1)
    throw std::domain_error("p * P_Ram > 0.1: first-order spin-flip model invalid");
  const double eps_f = photons * rates.p_delta_f;
  const double eps_l = photons * (rates.p_delta_mf + rates.p_delta_f_delta_mf);
  const double n0 = state.n0();
  // Per atom: s -> s (1 - 2 b_F)(1 - b_l) with Bernoulli b_F, b_l.
  const double a_z = (1.0 - 2.0 * eps_f) * (1.0 - eps_l);
  const double a_t = (1.0 - eps_f) * (1.0 - eps_l);
  // Atoms remaining in the clock states still carry s^2 = 1/4.
  const double noise_z = 0.25 * n0 * ((1.0 - eps_l) - a_z * a_z);
  const double noise_t = 0.25 * n0 * ((1.0 - eps_l) - a_t * a_t);
  const Eigen::Vector3d scale(a_t, a_t, a_z);
  GaussianSpinState out = state;
  out.mean = scale.cwiseProduct(state.mean);
  out.cov = scale.asDiagonal() * state.cov * scale.asDiagonal();
  out.cov(0, 0) += noise_t;
  out.cov(1, 1) += noise_t;
  out.cov(2, 2) += noise_z;
  return out;
}

double shot_noise_measurement_variance(double photons, double phi_eff) {
  if (!(photons > 0.0) || phi_eff == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (4.0 * photons * phi_eff * phi_eff);
}

}  // namespace qnd

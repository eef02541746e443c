#pragma once

#include <Eigen/Dense>

#include "qnd/cavity.hpp"

namespace qnd {

/// Semiclassical collective pseudo-spin: mean vector and full covariance
/// (spin units, x = clock coherence axis at preparation).
struct GaussianSpinState {
  double s0 = 0.0;  // N_0 / 2
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();

  [[nodiscard]] double n0() const { return 2.0 * s0; }
  [[nodiscard]] double css_variance() const { return 0.5 * s0; }
  [[nodiscard]] double contrast() const { return s0 > 0.0 ? mean.norm() / s0 : 0.0; }
  [[nodiscard]] double var_z() const { return cov(2, 2); }
  /// Unit vector along z x <S> (the in-plane transverse direction); y if <S> is parallel to z.
  [[nodiscard]] Eigen::Vector3d transverse_axis() const;
  [[nodiscard]] double var_y() const;
  [[nodiscard]] double cov_yz() const;
  [[nodiscard]] bool is_psd(double tol = 1e-9) const;
};

struct PreparationModel {
  double prep_noise_factor = 1.0;
  double impurity_fraction = 0.0;  // spectators in |1, +-1>, bookkeeping only
  double initial_contrast = 1.0;   // C_in

  void validate() const;
};

struct PulseModel {
  double composite_pi_infidelity = 0.0;  // mu
  void validate() const;
};

/// C(p) = C_0 exp(-alpha p - beta p^2 / 2), applied as a multiplicative factor.
struct ContrastModel {
  double alpha = 0.0;
  double beta = 0.0;
  [[nodiscard]] double factor(double photons) const;
};

enum class RotationAxis { x, y, z, mean_spin };

GaussianSpinState prepare_css(double n0, const PreparationModel& prep);

GaussianSpinState rotate(const GaussianSpinState& state, RotationAxis axis, double angle);

/// Var(S_z) after rotating by `angle` about <S>: var_z cos^2 + var_y sin^2 + cov_yz sin 2a.
double rotated_z_variance(const GaussianSpinState& state, double angle);

/// Incoherent pi pulse about x flipping a fraction 1 - mu of the atoms.
GaussianSpinState composite_pi(const GaussianSpinState& state, const PulseModel& pulse);

GaussianSpinState measurement_backaction(const GaussianSpinState& state, double photons, double phi_eff,
                                         const ContrastModel& contrast = {});

/// Gaussian update of S_z on a measurement with independent error variance var_meas.
/// The mean is renormalized to its prior length.
GaussianSpinState condition_on_measurement(const GaussianSpinState& state, double measurement, double var_meas);

/// First-order effect of free-space Raman events during p transmitted photons.
/// F-changing events flip the atom's S_z; m_F-changing events remove it from the clock states.
GaussianSpinState raman_flip_update(const GaussianSpinState& state, const ScatteringRates& rates, double photons);

/// Photon-shot-noise limited measurement error variance of S_z: 1 / (4 p phi^2).
double shot_noise_measurement_variance(double photons, double phi_eff);

}  // namespace qnd

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qnd {

struct LimitInputs {
  double collective_cooperativity = 0.0;  // N_0 eta_eff
  double p_raman = 0.0;                   // per transmitted photon
  double p_scatter = 0.0;                 // P_sc, per transmitted photon
  double phi_eff = 0.0;                   // rad per transmitted photon
  double rayleigh_f1 = 0.0;
  double rayleigh_f2 = 0.0;

  void validate() const;
};

/// 1 / (1 + N_0 p phi^2).
double ideal_sigma2(double n0, double photons, double phi_eff);

struct Sigma2Curve {
  std::vector<double> photons;
  std::vector<double> sigma2;
  std::size_t steps = 0;
};

/// d sigma^2 / dp = -2 N_0 eta_eff P_sc sigma^4 + 4 P_Ram from sigma^2(0) = 1, sampled on n_samples + 1 equidistant points.
Sigma2Curve integrate_sigma2(const LimitInputs& in, double p_max, std::size_t n_samples = 200, double rel_tol = 1e-8);

/// sqrt(2 / (N_0 eta_eff) * P_Ram / P_sc).
double sigma2_min(double collective_cooperativity, double raman_over_scatter);

/// p_opt = (sigma2_min / 8) ln(8 / sigma2_min) / P_Ram.
double optimal_photon_number(double sigma2_min_value, double p_raman);

/// p [(P_Ray1 + P_Ray2)/2 - sqrt(P_Ray1 P_Ray2) + P_Ram].
double limit_contrast_loss(const LimitInputs& in, double photons);

struct LimitsReport {
  double sigma2_min = 0.0;
  double p_opt = 0.0;
  double p_opt_p_raman = 0.0;
  double contrast_loss = 0.0;
  double zeta_m_min = 0.0;
  double inverse_zeta_bound_coherent = 0.0;  // sqrt(3/2 N_0 eta_eff)
  double inverse_zeta_bound_raman = 0.0;     // sqrt(N_0 eta_eff / 2 * P_sc / P_Ram)
  std::vector<std::string> warnings;
  LimitInputs inputs;

  [[nodiscard]] nlohmann::json to_json() const;
};

LimitsReport limit_contrast_and_zeta(const LimitInputs& in);

/// zeta_m(p) = sigma^2(p) / C(p)^2 along an integrated curve, C = 1 - contrast loss.
std::vector<double> zeta_m_curve(const LimitInputs& in, const Sigma2Curve& curve);

}  // namespace qnd

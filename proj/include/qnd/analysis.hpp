#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qnd/engine.hpp"

namespace qnd {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

enum class ErrorMethod { chi2, bootstrap };

struct VarianceOptions {
  ErrorMethod method = ErrorMethod::chi2;
  std::size_t bootstrap_samples = 500;
  std::uint64_t bootstrap_seed = 1;
};

/// Sample second moments of one TrialSet, in spin units unless noted.
struct VarianceReport {
  Estimate var_m1, var_m2;
  Estimate var_meas;  // Var(M1 - M2) / 2
  Estimate cov_m1_m2;
  Estimate var_prep;  // Var(M1) - var_meas
  Estimate y1;        // 4 Var(M1), atom units
  Estimate y1_adjacent;  // 2 Var(M1_k - M1_{k-1}) over disjoint pairs of consecutive cycles
  std::optional<Estimate> y2;  // 2 Var(Mt1 - Mt2), double-preparation runs only
  std::size_t n_trials = 0;
  std::size_t n_excluded = 0;  // saturated trials
  ErrorMethod method = ErrorMethod::chi2;

  [[nodiscard]] nlohmann::json to_json() const;
};

VarianceReport variance_stats(const TrialSet& set, const VarianceOptions& options = {});

/// var_meas var_prep / ((1 - eps)^2 (var_prep + var_meas)).
double conditional_variance(double var_prep, double var_meas, double epsilon_p);

/// Lowest-order fraction of atoms that changed state during one measurement: p P_dF + mu.
double spin_flip_fraction(double photons, double p_delta_f, double mu);

struct SqueezingReport {
  double conditional_variance = 0.0;  // spin units
  double sigma2 = 0.0;                // normalized to Var_CSS = S_0 / 2
  double zeta_e = 0.0;
  double zeta_m = 0.0;
  double epsilon_p = 0.0;
  double kappa_meas = 0.0;
  double contrast_meas = 0.0;
  double contrast = 0.0;  // C_meas / (1 - eps_p)
  double contrast_in = 0.0;

  [[nodiscard]] double sigma2_db() const;
  [[nodiscard]] double zeta_e_db() const;
  [[nodiscard]] double zeta_m_db() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

struct SqueezingInputs {
  double var_prep = 0.0;
  double var_meas = 0.0;
  double s0 = 0.0;
  double contrast_meas = 0.0;
  double contrast_in = 1.0;
  double epsilon_p = 0.0;
};

/// zeta_m = (C_in / C_meas^2) 2 var_meas var_prep / (S_0 (var_prep + var_meas)), which does not depend on eps_p;
/// zeta_e = sigma^2 / C with the flip-corrected sigma^2 and C.
SqueezingReport squeezing_parameters(const SqueezingInputs& in);

/// Same parameters from an already normalized sigma^2 (no variances available).
SqueezingReport squeezing_from_sigma2(double sigma2, double contrast_meas, double contrast_in, double epsilon_p = 0.0);

// ---------------------------------------------------------------- noise budget

enum class NoiseTerm : std::size_t { b_minus2 = 0, b_minus1, b0_tech, b0_mu, b1 };
inline constexpr std::size_t kNoiseTerms = 5;

enum class Provenance { fixed, fitted };

struct NoiseCoefficient {
  double value = 0.0;
  double se = 0.0;
  double ci95 = 0.0;  // half width
  Provenance provenance = Provenance::fixed;
};

/// 4 Var(S_z)_meas = b_-2 p^-2 + b_-1 p^-1 + (b0_tech + b0_mu) + b_1 p, atom units.
struct NoiseBudget {
  std::array<NoiseCoefficient, kNoiseTerms> coefficients{};
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::size_t n_points = 0;

  [[nodiscard]] const NoiseCoefficient& operator[](NoiseTerm t) const {
    return coefficients[static_cast<std::size_t>(t)];
  }
  NoiseCoefficient& operator[](NoiseTerm t) { return coefficients[static_cast<std::size_t>(t)]; }
  [[nodiscard]] double evaluate(double photons) const;
  [[nodiscard]] nlohmann::json to_json() const;
};

std::string noise_term_name(NoiseTerm t);

/// Budget implied by the engine parameters (first order in the flip probabilities).
NoiseBudget analytic_noise_budget(const EngineParams& params);

struct NoisePoint {
  double photons = 0.0;
  double four_var_meas = 0.0;
  double sigma = 0.0;  // <= 0: unit weights, errors scaled by the residual variance
};

struct NoiseConstraints {
  std::array<std::optional<double>, kNoiseTerms> fixed{};
  static NoiseConstraints freeze_all_but(NoiseTerm free, const NoiseBudget& values);
};

/// Weighted linear least squares in the coefficients; frozen ones are subtracted from the data.
/// b0_tech and b0_mu share the p^0 column and cannot both be free.
NoiseBudget fit_noise_model(const std::vector<NoisePoint>& points, const NoiseConstraints& constraints);

// ---------------------------------------------------------------- generic fits

struct LinearFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Least squares for y ~ A c with per-point sigma (all <= 0 means unit weights, scaled covariance).
LinearFit weighted_linear_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& sigma);

struct ScalingPoint {
  double n0 = 0.0;
  double y = 0.0;
  double sigma = 0.0;
};

struct QuadraticFit {
  Estimate a0, a1, a2;
  bool a1_constrained = false;
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 1.0;
  bool span_warning = false;  // N_0 range narrower than a factor 3
};

/// y = a0 + a1 N0 + a2 N0^2, or with a1 fixed to 1.
QuadraticFit fit_quadratic_scaling(const std::vector<ScalingPoint>& points, bool constrain_a1);

struct ContrastPoint {
  double photons = 0.0;
  double contrast = 0.0;
  double sigma = 0.0;
};

struct ContrastFit {
  Estimate c0, alpha, beta;
  Estimate c_in;  // C_0 corrected for the readout-pulse contrast loss
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int iterations = 0;

  [[nodiscard]] double evaluate(double photons) const;
};

inline constexpr double kReadoutContrastLoss = 0.04;
inline constexpr double kReadoutContrastLossError = 0.02;

/// C = C_0 exp(-alpha p - beta p^2 / 2) by Levenberg-Marquardt from C_0 = max C, two-point log slope, beta = 0.
ContrastFit fit_contrast(const std::vector<ContrastPoint>& points);

struct RotatedVariance {
  Estimate value;  // Var(M1 - M2)|_alpha - var_meas, spin units
  bool clipped = false;
};

RotatedVariance rotated_variance(const TrialSet& set_at_alpha, const Estimate& var_meas);

double to_db(double linear);
double from_db(double db);

}  // namespace qnd

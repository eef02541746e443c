#include "qnd/limits.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

#include "qnd/analysis.hpp"

namespace qnd {

void LimitInputs::validate() const {
  if (!(collective_cooperativity >= 0.0)) throw std::invalid_argument("N0 eta_eff must be >= 0");
  if (!(p_raman >= 0.0 && p_scatter >= 0.0 && phi_eff >= 0.0 && rayleigh_f1 >= 0.0 && rayleigh_f2 >= 0.0))
    throw std::invalid_argument("limit inputs must be >= 0");
  if (p_scatter < p_raman) throw std::invalid_argument("P_sc must be >= P_Ram");
}

double ideal_sigma2(double n0, double photons, double phi_eff) {
  if (n0 < 0.0 || photons < 0.0) throw std::invalid_argument("ideal_sigma2 inputs must be >= 0");
  return 1.0 / (1.0 + n0 * photons * phi_eff * phi_eff);
}

Sigma2Curve integrate_sigma2(const LimitInputs& in, double p_max, std::size_t n_samples, double rel_tol) {
  in.validate();
  if (!(p_max > 0.0)) throw std::invalid_argument("p_max must be positive");
  if (n_samples < 1) throw std::invalid_argument("need at least one sample interval");
  namespace ode = boost::numeric::odeint;
  const double a = 2.0 * in.collective_cooperativity * in.p_scatter;
  const double b = 4.0 * in.p_raman;
  auto rhs = [a, b](const double& s, double& ds, double) { ds = -a * s * s + b; };

  Sigma2Curve c;
  std::vector<double> times(n_samples + 1);
  for (std::size_t i = 0; i <= n_samples; ++i) times[i] = p_max * static_cast<double>(i) / static_cast<double>(n_samples);
  double s = 1.0;
  auto stepper = ode::make_dense_output(rel_tol * 1e-3, rel_tol, ode::runge_kutta_dopri5<double>());
  const double dt0 = 1e-3 / std::max({a, b, 1.0 / p_max});
  try {
    c.steps = ode::integrate_times(stepper, rhs, s, times.begin(), times.end(), dt0, [&](const double& x, double p) {
      c.photons.push_back(p);
      c.sigma2.push_back(x);
    });
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("sigma^2 integration failed: ") + e.what());
  }
  return c;
}

double sigma2_min(double collective_cooperativity, double raman_over_scatter) {
  if (!(collective_cooperativity > 0.0)) throw std::invalid_argument("N0 eta_eff must be positive");
  if (raman_over_scatter < 0.0) throw std::invalid_argument("P_Ram / P_sc must be >= 0");
  return std::sqrt(2.0 / collective_cooperativity * raman_over_scatter);
}

double optimal_photon_number(double s2min, double p_raman) {
  if (!(s2min > 0.0 && s2min < 1.0)) throw std::invalid_argument("sigma2_min must lie in (0, 1)");
  if (!(p_raman > 0.0)) throw std::invalid_argument("P_Ram must be positive");
  return s2min / 8.0 * std::log(8.0 / s2min) / p_raman;
}

double limit_contrast_loss(const LimitInputs& in, double photons) {
  const double r1 = in.rayleigh_f1, r2 = in.rayleigh_f2;
  return photons * (0.5 * (r1 + r2) - std::sqrt(r1 * r2) + in.p_raman);
}

LimitsReport limit_contrast_and_zeta(const LimitInputs& in) {
  in.validate();
  LimitsReport r;
  r.inputs = in;
  if (in.collective_cooperativity < 100.0)
    r.warnings.push_back("N0 eta_eff below 100: asymptotic limit formulas not applicable");
  if (!(in.collective_cooperativity > 0.0) || !(in.p_scatter > 0.0) || !(in.p_raman > 0.0)) {
    r.warnings.push_back("degenerate inputs: no finite optimum");
    r.sigma2_min = in.collective_cooperativity > 0.0 && in.p_scatter > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.sigma2_min = sigma2_min(in.collective_cooperativity, in.p_raman / in.p_scatter);
  r.p_opt = optimal_photon_number(r.sigma2_min, in.p_raman);
  r.p_opt_p_raman = r.p_opt * in.p_raman;
  r.contrast_loss = limit_contrast_loss(in, r.p_opt);
  const double c = 1.0 - r.contrast_loss;
  r.zeta_m_min = r.sigma2_min / (c * c);
  r.inverse_zeta_bound_coherent = std::sqrt(1.5 * in.collective_cooperativity);
  r.inverse_zeta_bound_raman = std::sqrt(0.5 * in.collective_cooperativity * in.p_scatter / in.p_raman);
  return r;
}

std::vector<double> zeta_m_curve(const LimitInputs& in, const Sigma2Curve& curve) {
  std::vector<double> z(curve.sigma2.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double c = 1.0 - limit_contrast_loss(in, curve.photons[i]);
    z[i] = c > 0.0 ? curve.sigma2[i] / (c * c) : std::numeric_limits<double>::infinity();
  }
  return z;
}

nlohmann::json LimitsReport::to_json() const {
  const auto db = [](double v) { return v > 0.0 ? nlohmann::json(to_db(v)) : nlohmann::json(nullptr); };
  return {{"sigma2_min", sigma2_min},
          {"sigma2_min_db", db(sigma2_min)},
          {"p_opt", p_opt},
          {"p_opt_p_raman", p_opt_p_raman},
          {"contrast_loss", contrast_loss},
          {"zeta_m_min", zeta_m_min},
          {"zeta_m_min_db", db(zeta_m_min)},
          {"inverse_zeta_bound_coherent_db", db(inverse_zeta_bound_coherent)},
          {"inverse_zeta_bound_raman_db", db(inverse_zeta_bound_raman)},
          {"warnings", warnings},
          {"inputs",
           {{"collective_cooperativity", inputs.collective_cooperativity},
            {"p_raman", inputs.p_raman},
            {"p_scatter", inputs.p_scatter},
            {"phi_eff", inputs.phi_eff},
            {"rayleigh_f1", inputs.rayleigh_f1},
            {"rayleigh_f2", inputs.rayleigh_f2}}}};
}

}  // namespace qnd

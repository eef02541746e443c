#include "qnd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "qnd/rng.hpp"

namespace qnd {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double chi2_upper_tail(double chi2, int dof) {
  if (dof <= 0) return kNaN;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
}

double t_quantile_95(int dof) {
  if (dof <= 0) return kNaN;
  return boost::math::quantile(boost::math::complement(boost::math::students_t(dof), 0.025));
}

Eigen::Matrix2d sample_cov(const std::vector<double>& a, const std::vector<double>& b,
                           const std::vector<std::size_t>& idx) {
  const double n = static_cast<double>(idx.size());
  double ma = 0, mb = 0;
  for (auto i : idx) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  for (auto i : idx) {
    const double da = a[i] - ma, db = b[i] - mb;
    s(0, 0) += da * da;
    s(0, 1) += da * db;
    s(1, 1) += db * db;
  }
  s(1, 0) = s(0, 1);
  return s / (n - 1.0);
}

double sample_var(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double v = 0;
  for (double e : x) v += (e - m) * (e - m);
  return v / (n - 1.0);
}

// Estimators as linear functionals tr(W S) of the (M1, M2) sample covariance.
struct Functional {
  Eigen::Matrix2d w;
};

const std::array<Functional, 5>& functionals() {
  static const std::array<Functional, 5> f = [] {
    std::array<Functional, 5> out;
    out[0].w << 1, 0, 0, 0;            // Var(M1)
    out[1].w << 0, 0, 0, 1;            // Var(M2)
    out[2].w << 0.5, -0.5, -0.5, 0.5;  // var_meas
    out[3].w << 0, 0.5, 0.5, 0;        // Cov
    out[4].w = out[0].w - out[2].w;    // var_prep
    return out;
  }();
  return f;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive and finite");
}

nlohmann::json estimate_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

}  // namespace

// ---------------------------------------------------------------- variances

VarianceReport variance_stats(const TrialSet& set, const VarianceOptions& options) {
  std::vector<double> m1, m2, t1, t2;
  VarianceReport rep;
  rep.method = options.method;
  bool have_tilde = true;
  for (const auto& r : set.records) {
    if (r.saturated || !std::isfinite(r.m1) || !std::isfinite(r.m2)) {
      ++rep.n_excluded;
      continue;
    }
    m1.push_back(r.m1);
    m2.push_back(r.m2);
    if (std::isfinite(r.mt1) && std::isfinite(r.mt2)) {
      t1.push_back(r.mt1);
      t2.push_back(r.mt2);
    } else {
      have_tilde = false;
    }
  }
  const std::size_t n = m1.size();
  if (n < 2) throw std::invalid_argument("variance_stats needs at least 2 usable trials");
  rep.n_trials = n;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  const Eigen::Matrix2d s = sample_cov(m1, m2, all);
  const auto& fs = functionals();
  std::array<Estimate, 5> est;
  for (std::size_t k = 0; k < fs.size(); ++k) {
    est[k].value = (fs[k].w * s).trace();
    const Eigen::Matrix2d ws = fs[k].w * s;
    est[k].se = std::sqrt(std::max(0.0, 2.0 * (ws * ws).trace() / (static_cast<double>(n) - 1.0)));
  }

  std::optional<Estimate> y2;
  if (have_tilde && t1.size() == n) {
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = t1[i] - t2[i];
    const double v = sample_var(d);
    y2 = Estimate{2.0 * v, 2.0 * v * std::sqrt(2.0 / (static_cast<double>(n) - 1.0))};
  }

  if (options.method == ErrorMethod::bootstrap) {
    if (options.bootstrap_samples < 2) throw std::invalid_argument("bootstrap needs at least 2 resamples");
    auto rng = make_stream(options.bootstrap_seed, StreamDomain::bootstrap, 0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::array<double, 6>> draws(options.bootstrap_samples);
    std::vector<std::size_t> idx(n);
    for (auto& dr : draws) {
      for (auto& i : idx) i = pick(rng);
      const Eigen::Matrix2d sb = sample_cov(m1, m2, idx);
      for (std::size_t k = 0; k < fs.size(); ++k) dr[k] = (fs[k].w * sb).trace();
      if (y2) {
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = t1[idx[i]] - t2[idx[i]];
        dr[5] = 2.0 * sample_var(d);
      }
    }
    for (std::size_t k = 0; k < 6; ++k) {
      std::vector<double> col(draws.size());
      for (std::size_t b = 0; b < draws.size(); ++b) col[b] = draws[b][k];
      const double se = std::sqrt(sample_var(col));
      if (k < 5)
        est[k].se = se;
      else if (y2)
        y2->se = se;
    }
  }

  rep.var_m1 = est[0];
  rep.var_m2 = est[1];
  rep.var_meas = est[2];
  rep.cov_m1_m2 = est[3];
  rep.var_prep = est[4];
  rep.y1 = {4.0 * est[0].value, 4.0 * est[0].se};
  rep.y2 = y2;

  if (n >= 4) {
    std::vector<double> d;
    for (std::size_t i = 1; i < n; i += 2) d.push_back(m1[i] - m1[i - 1]);
    const double v = sample_var(d);
    rep.y1_adjacent = {2.0 * v, 2.0 * v * std::sqrt(2.0 / (static_cast<double>(d.size()) - 1.0))};
  } else {
    rep.y1_adjacent = {kNaN, kNaN};
  }
  return rep;
}

nlohmann::json VarianceReport::to_json() const {
  nlohmann::json j = {{"var_m1", estimate_json(var_m1)},
                      {"var_m2", estimate_json(var_m2)},
                      {"var_meas", estimate_json(var_meas)},
                      {"cov_m1_m2", estimate_json(cov_m1_m2)},
                      {"var_prep", estimate_json(var_prep)},
                      {"y1", estimate_json(y1)},
                      {"y1_adjacent", estimate_json(y1_adjacent)},
                      {"n_trials", n_trials},
                      {"n_excluded", n_excluded},
                      {"error_method", method == ErrorMethod::chi2 ? "chi2" : "bootstrap"}};
  j["y2"] = y2 ? estimate_json(*y2) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------- squeezing

double conditional_variance(double var_prep, double var_meas, double epsilon_p) {
  require_positive(var_prep, "var_prep");
  require_positive(var_meas, "var_meas");
  if (!(epsilon_p >= 0.0 && epsilon_p < 0.5)) throw std::invalid_argument("epsilon_p must lie in [0, 0.5)");
  const double k = 1.0 - epsilon_p;
  return var_meas * var_prep / (k * k * (var_prep + var_meas));
}

double spin_flip_fraction(double photons, double p_delta_f, double mu) {
  if (photons < 0.0 || p_delta_f < 0.0 || mu < 0.0) throw std::invalid_argument("flip fraction inputs must be >= 0");
  return photons * p_delta_f + mu;
}

double SqueezingReport::sigma2_db() const { return to_db(sigma2); }
double SqueezingReport::zeta_e_db() const { return to_db(zeta_e); }
double SqueezingReport::zeta_m_db() const { return to_db(zeta_m); }

nlohmann::json SqueezingReport::to_json() const {
  return {{"conditional_variance", conditional_variance},
          {"sigma2", sigma2},
          {"sigma2_db", sigma2_db()},
          {"zeta_e", zeta_e},
          {"zeta_e_db", zeta_e_db()},
          {"zeta_m", zeta_m},
          {"zeta_m_db", zeta_m_db()},
          {"epsilon_p", epsilon_p},
          {"kappa_meas", kappa_meas},
          {"contrast_meas", contrast_meas},
          {"contrast", contrast},
          {"contrast_in", contrast_in}};
}

namespace {

void check_contrasts(double c_meas, double c_in) {
  if (!(c_in > 0.0 && c_in <= 1.0)) throw std::invalid_argument("contrast_in must lie in (0, 1]");
  if (!(c_meas > 0.0)) throw std::invalid_argument("contrast_meas must be positive");
  if (c_meas > c_in) throw std::domain_error("measured contrast exceeds the initial contrast");
}

}  // namespace

SqueezingReport squeezing_parameters(const SqueezingInputs& in) {
  require_positive(in.s0, "S_0");
  check_contrasts(in.contrast_meas, in.contrast_in);
  SqueezingReport r;
  r.epsilon_p = in.epsilon_p;
  r.conditional_variance = conditional_variance(in.var_prep, in.var_meas, in.epsilon_p);
  r.sigma2 = r.conditional_variance / (0.5 * in.s0);
  r.kappa_meas = std::sqrt(in.var_prep / in.var_meas);
  r.contrast_meas = in.contrast_meas;
  r.contrast_in = in.contrast_in;
  r.contrast = in.contrast_meas / (1.0 - in.epsilon_p);
  r.zeta_m = in.contrast_in / (in.contrast_meas * in.contrast_meas) * 2.0 * in.var_meas * in.var_prep /
             (in.s0 * (in.var_prep + in.var_meas));
  r.zeta_e = r.sigma2 / r.contrast;
  return r;
}

SqueezingReport squeezing_from_sigma2(double sigma2, double contrast_meas, double contrast_in, double epsilon_p) {
  require_positive(sigma2, "sigma2");
  check_contrasts(contrast_meas, contrast_in);
  if (!(epsilon_p >= 0.0 && epsilon_p < 0.5)) throw std::invalid_argument("epsilon_p must lie in [0, 0.5)");
  SqueezingReport r;
  r.sigma2 = sigma2;
  r.epsilon_p = epsilon_p;
  r.contrast_meas = contrast_meas;
  r.contrast_in = contrast_in;
  r.contrast = contrast_meas / (1.0 - epsilon_p);
  r.zeta_e = sigma2 / r.contrast;
  r.zeta_m = contrast_in * sigma2 / (r.contrast * r.contrast);
  r.kappa_meas = kNaN;
  r.conditional_variance = kNaN;
  return r;
}

// ---------------------------------------------------------------- noise budget

std::string noise_term_name(NoiseTerm t) {
  switch (t) {
    case NoiseTerm::b_minus2: return "b_minus2";
    case NoiseTerm::b_minus1: return "b_minus1";
    case NoiseTerm::b0_tech: return "b0_tech";
    case NoiseTerm::b0_mu: return "b0_mu";
    case NoiseTerm::b1: return "b1";
  }
  return "?";
}

double NoiseBudget::evaluate(double photons) const {
  require_positive(photons, "photon number");
  const auto v = [&](NoiseTerm t) { return (*this)[t].value; };
  return v(NoiseTerm::b_minus2) / (photons * photons) + v(NoiseTerm::b_minus1) / photons + v(NoiseTerm::b0_tech) +
         v(NoiseTerm::b0_mu) + v(NoiseTerm::b1) * photons;
}

nlohmann::json NoiseBudget::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t k = 0; k < kNoiseTerms; ++k) {
    const auto& c = coefficients[k];
    j[noise_term_name(static_cast<NoiseTerm>(k))] = {
        {"value", c.value}, {"se", c.se}, {"ci95", c.ci95},
        {"provenance", c.provenance == Provenance::fitted ? "fitted" : "fixed"}};
  }
  j["chi2"] = chi2;
  j["dof"] = dof;
  j["p_value"] = p_value;
  j["n_points"] = n_points;
  return j;
}

NoiseBudget analytic_noise_budget(const EngineParams& params) {
  const auto& pr = params.probe;
  const double k = params.k_factor();
  NoiseBudget b;
  b[NoiseTerm::b_minus2].value = pr.electronic_noise ? pr.electronic_b_minus2 : 0.0;
  b[NoiseTerm::b_minus1].value =
      pr.shot_noise ? 2.0 * (pr.apd_excess_factor / pr.quantum_efficiency) * k * k * (pr.compensation ? 1.0 : 0.5)
                    : 0.0;
  b[NoiseTerm::b0_tech].value =
      pr.technical_noise ? pr.technical_noise_fraction * params.n0 * (1.0 - pr.technical_noise_correlation) : 0.0;
  b[NoiseTerm::b0_mu].value = params.total_mu() * params.n0;
  const auto& r = params.rates;
  b[NoiseTerm::b1].value = (4.0 / 3.0 * r.delta_f + 0.5 * r.delta_mf + r.delta_f_delta_mf / 3.0) * params.n0;
  return b;
}

NoiseConstraints NoiseConstraints::freeze_all_but(NoiseTerm free, const NoiseBudget& values) {
  NoiseConstraints c;
  for (std::size_t k = 0; k < kNoiseTerms; ++k)
    if (k != static_cast<std::size_t>(free)) c.fixed[k] = values.coefficients[k].value;
  return c;
}

LinearFit weighted_linear_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& sigma) {
  const Eigen::Index n = design.rows(), m = design.cols();
  if (y.size() != n || sigma.size() != n) throw std::invalid_argument("fit input sizes differ");
  if (n <= m) throw std::invalid_argument("fit needs more points than free parameters");
  const bool weighted = (sigma.array() > 0.0).all();
  if (!weighted && (sigma.array() > 0.0).any())
    throw std::invalid_argument("either all or none of the points must carry a sigma");
  const Eigen::VectorXd w = weighted ? sigma.cwiseInverse().eval() : Eigen::VectorXd::Ones(n).eval();
  Eigen::MatrixXd a = w.asDiagonal() * design;
  const Eigen::VectorXd b = w.cwiseProduct(y);
  // Columns span many orders of magnitude (p^-2 ... p); equilibrate before the rank decision.
  Eigen::VectorXd scale(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    scale(j) = a.col(j).norm();
    if (!(scale(j) > 0.0)) throw FitError("singular design matrix: empty column");
    a.col(j) /= scale(j);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) throw FitError("singular design matrix (rank " + std::to_string(qr.rank()) + " < " +
                                    std::to_string(m) + ")");
  const Eigen::VectorXd cs = qr.solve(b);
  LinearFit f;
  f.coefficients = cs.cwiseQuotient(scale);
  const Eigen::VectorXd resid = b - a * cs;
  f.chi2 = resid.squaredNorm();
  f.dof = static_cast<int>(n - m);
  const Eigen::MatrixXd ata_inv = (a.transpose() * a).inverse();
  f.covariance = scale.cwiseInverse().asDiagonal() * ata_inv * scale.cwiseInverse().asDiagonal();
  if (!weighted) f.covariance *= f.chi2 / f.dof;
  f.p_value = weighted ? chi2_upper_tail(f.chi2, f.dof) : kNaN;
  return f;
}

NoiseBudget fit_noise_model(const std::vector<NoisePoint>& points, const NoiseConstraints& constraints) {
  for (const auto& pt : points) {
    require_positive(pt.photons, "photon number");
    if (!std::isfinite(pt.four_var_meas)) throw std::invalid_argument("non-finite variance in noise data");
  }
  const auto column = [](std::size_t k, double p) {
    switch (static_cast<NoiseTerm>(k)) {
      case NoiseTerm::b_minus2: return 1.0 / (p * p);
      case NoiseTerm::b_minus1: return 1.0 / p;
      case NoiseTerm::b0_tech:
      case NoiseTerm::b0_mu: return 1.0;
      case NoiseTerm::b1: return p;
    }
    return 0.0;
  };
  std::vector<std::size_t> free;
  NoiseBudget out;
  out.n_points = points.size();
  for (std::size_t k = 0; k < kNoiseTerms; ++k) {
    if (constraints.fixed[k]) {
      if (*constraints.fixed[k] < 0.0) throw std::invalid_argument("frozen noise coefficients must be >= 0");
      out.coefficients[k] = {*constraints.fixed[k], 0.0, 0.0, Provenance::fixed};
    } else {
      free.push_back(k);
    }
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd y(n), sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = points[static_cast<std::size_t>(i)];
    double r = pt.four_var_meas;
    for (std::size_t k = 0; k < kNoiseTerms; ++k)
      if (constraints.fixed[k]) r -= *constraints.fixed[k] * column(k, pt.photons);
    y(i) = r;
    sigma(i) = pt.sigma;
  }

  if (free.empty()) {
    // Residual report only.
    const bool weighted = (sigma.array() > 0.0).all();
    out.chi2 = weighted ? y.cwiseQuotient(sigma).squaredNorm() : y.squaredNorm();
    out.dof = static_cast<int>(n);
    out.p_value = weighted ? chi2_upper_tail(out.chi2, out.dof) : kNaN;
    return out;
  }
  if (points.size() < free.size() + 2)
    throw std::invalid_argument("noise fit needs at least 2 more points than free coefficients");
  Eigen::MatrixXd a(n, static_cast<Eigen::Index>(free.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < free.size(); ++j)
      a(i, static_cast<Eigen::Index>(j)) = column(free[j], points[static_cast<std::size_t>(i)].photons);
  const auto fit = weighted_linear_fit(a, y, sigma);
  const double t = t_quantile_95(fit.dof);
  for (std::size_t j = 0; j < free.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double se = std::sqrt(std::max(0.0, fit.covariance(jj, jj)));
    out.coefficients[free[j]] = {fit.coefficients(jj), se, t * se, Provenance::fitted};
  }
  out.chi2 = fit.chi2;
  out.dof = fit.dof;
  out.p_value = fit.p_value;
  return out;
}

QuadraticFit fit_quadratic_scaling(const std::vector<ScalingPoint>& points, bool constrain_a1) {
  if (points.size() < 4) throw std::invalid_argument("quadratic scaling fit needs at least 4 points");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& pt : points) {
    require_positive(pt.n0, "N_0");
    lo = std::min(lo, pt.n0);
    hi = std::max(hi, pt.n0);
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  const Eigen::Index m = constrain_a1 ? 2 : 3;
  Eigen::MatrixXd a(n, m);
  Eigen::VectorXd y(n), sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = points[static_cast<std::size_t>(i)];
    y(i) = pt.y - (constrain_a1 ? pt.n0 : 0.0);
    sigma(i) = pt.sigma;
    a(i, 0) = 1.0;
    if (constrain_a1) {
      a(i, 1) = pt.n0 * pt.n0;
    } else {
      a(i, 1) = pt.n0;
      a(i, 2) = pt.n0 * pt.n0;
    }
  }
  const auto fit = weighted_linear_fit(a, y, sigma);
  const auto est = [&](Eigen::Index j) { return Estimate{fit.coefficients(j), std::sqrt(fit.covariance(j, j))}; };
  QuadraticFit q;
  q.a1_constrained = constrain_a1;
  q.a0 = est(0);
  if (constrain_a1) {
    q.a1 = {1.0, 0.0};
    q.a2 = est(1);
  } else {
    q.a1 = est(1);
    q.a2 = est(2);
  }
  q.chi2 = fit.chi2;
  q.dof = fit.dof;
  q.p_value = fit.p_value;
  q.span_warning = hi < 3.0 * lo;
  return q;
}

// ---------------------------------------------------------------- contrast

double ContrastFit::evaluate(double photons) const {
  return c0.value * std::exp(-alpha.value * photons - 0.5 * beta.value * photons * photons);
}

namespace {

// Parameters (C_0, alpha p_s, beta p_s^2) with p_s the largest photon number.
struct ContrastFunctor : Eigen::DenseFunctor<double> {
  const std::vector<ContrastPoint>& pts;
  double ps;
  bool weighted;
  ContrastFunctor(const std::vector<ContrastPoint>& p, double scale, bool w)
      : Eigen::DenseFunctor<double>(3, static_cast<int>(p.size())), pts(p), ps(scale), weighted(w) {}

  int operator()(const InputType& x, ValueType& f) const {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double u = pts[i].photons / ps;
      const double model = x(0) * std::exp(-x(1) * u - 0.5 * x(2) * u * u);
      f(static_cast<Eigen::Index>(i)) = (model - pts[i].contrast) / (weighted ? pts[i].sigma : 1.0);
    }
    return 0;
  }
  int df(const InputType& x, JacobianType& j) const {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double u = pts[i].photons / ps;
      const double e = std::exp(-x(1) * u - 0.5 * x(2) * u * u);
      const double w = weighted ? pts[i].sigma : 1.0;
      const auto r = static_cast<Eigen::Index>(i);
      j(r, 0) = e / w;
      j(r, 1) = -x(0) * u * e / w;
      j(r, 2) = -0.5 * x(0) * u * u * e / w;
    }
    return 0;
  }
};

}  // namespace

ContrastFit fit_contrast(const std::vector<ContrastPoint>& points) {
  if (points.size() < 4) throw std::invalid_argument("contrast fit needs at least 4 points");
  for (const auto& pt : points) {
    if (!(pt.contrast > 0.0 && pt.contrast <= 1.0)) throw std::invalid_argument("contrast values must lie in (0, 1]");
    if (!(pt.photons >= 0.0)) throw std::invalid_argument("photon numbers must be >= 0");
  }
  std::vector<double> ps;
  for (const auto& pt : points) ps.push_back(pt.photons);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  if (ps.size() < 3 || ps.back() <= 0.0)
    throw FitError("contrast fit: need at least 3 distinct photon numbers (alpha, beta unidentifiable)");
  const bool weighted = std::all_of(points.begin(), points.end(), [](const ContrastPoint& p) { return p.sigma > 0.0; });
  const double scale = ps.back();

  const auto lo = *std::min_element(points.begin(), points.end(),
                                    [](const auto& a, const auto& b) { return a.photons < b.photons; });
  const auto hi = *std::max_element(points.begin(), points.end(),
                                    [](const auto& a, const auto& b) { return a.photons < b.photons; });
  Eigen::VectorXd x(3);
  x(0) = std::max_element(points.begin(), points.end(),
                          [](const auto& a, const auto& b) { return a.contrast < b.contrast; })
             ->contrast;
  x(1) = -std::log(hi.contrast / lo.contrast) / (hi.photons - lo.photons) * scale;
  x(2) = 0.0;

  ContrastFunctor functor(points, scale, weighted);
  Eigen::LevenbergMarquardt<ContrastFunctor> lm(functor);
  lm.setXtol(1e-14);
  lm.setFtol(1e-14);
  lm.setMaxfev(2000);
  const auto status = lm.minimize(x);
  const bool ok = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::FtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::GtolTooSmall;
  if (!ok || !x.allFinite())
    throw FitError("contrast fit did not converge (status " + std::to_string(static_cast<int>(status)) +
                   ", iterations " + std::to_string(lm.iterations()) + ", C0 " + std::to_string(x(0)) + ")");

  Eigen::VectorXd f(static_cast<Eigen::Index>(points.size()));
  functor(x, f);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(points.size()), 3);
  functor.df(x, jac);
  const double chi2 = f.squaredNorm();
  const int dof = static_cast<int>(points.size()) - 3;
  Eigen::Matrix3d cov = (jac.transpose() * jac).inverse();
  if (!weighted && dof > 0) cov *= chi2 / dof;

  ContrastFit out;
  out.iterations = static_cast<int>(lm.iterations());
  out.c0 = {x(0), std::sqrt(cov(0, 0))};
  out.alpha = {x(1) / scale, std::sqrt(cov(1, 1)) / scale};
  out.beta = {x(2) / (scale * scale), std::sqrt(cov(2, 2)) / (scale * scale)};
  const double k = 1.0 - kReadoutContrastLoss;
  out.c_in.value = out.c0.value / k;
  out.c_in.se = std::hypot(out.c0.se / k, out.c0.value * kReadoutContrastLossError / (k * k));
  out.chi2 = chi2;
  out.dof = dof;
  out.p_value = weighted ? chi2_upper_tail(chi2, dof) : kNaN;
  return out;
}

RotatedVariance rotated_variance(const TrialSet& set_at_alpha, const Estimate& var_meas) {
  const auto rep = variance_stats(set_at_alpha);
  const double diff = 2.0 * rep.var_meas.value;  // Var(M1 - M2)
  RotatedVariance out;
  out.value.value = diff - var_meas.value;
  out.value.se = std::hypot(2.0 * rep.var_meas.se, var_meas.se);
  if (out.value.value < 0.0) {
    out.value.value = 0.0;
    out.clipped = true;
  }
  return out;
}

double to_db(double linear) {
  if (!(linear > 0.0)) throw std::domain_error("dB conversion needs a positive value");
  return 10.0 * std::log10(linear);
}

double from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace qnd

#include "qnd/scenarios.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "qnd/rng.hpp"
#include "qnd/spin.hpp"

namespace qnd {
namespace {

using nlohmann::json;

struct Context {
  const RunConfig& config;
  Model model;
  unsigned threads;
  std::string scenario;
  std::string hash;
};

std::string csv_banner(const Context& ctx) {
  return "# qndsim " + std::string(QND_VERSION) + " scenario=" + ctx.scenario +
         " seed=" + std::to_string(ctx.config.master_seed) + " trials=" + std::to_string(ctx.config.n_trials) +
         " config=" + ctx.hash + "\n";
}

json json_banner(const Context& ctx) {
  return {{"tool", "qndsim"},
          {"version", QND_VERSION},
          {"scenario", ctx.scenario},
          {"seed", ctx.config.master_seed},
          {"trials", ctx.config.n_trials},
          {"config_hash", ctx.hash}};
}

class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void row(const std::vector<double>& values) {
    if (values.size() != columns_.size()) throw std::logic_error("csv row width mismatch");
    rows_.push_back(values);
  }
  [[nodiscard]] std::string render(const Context& ctx) const {
    std::string s = csv_banner(ctx);
    for (std::size_t i = 0; i < columns_.size(); ++i) s += (i ? "," : "") + columns_[i];
    s += "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + format_number(r[i]);
      s += "\n";
    }
    return s;
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

std::string render_json(const Context& ctx, json body) {
  body["manifest"] = json_banner(ctx);
  return body.dump(2) + "\n";
}

json coupling_json(const CouplingSummary& c) {
  return {{"antinode_cooperativity", c.antinode_cooperativity},
          {"effective_cooperativity", c.effective_cooperativity},
          {"effective_atom_number", c.effective_atom_number},
          {"shift_per_atom_f1", c.shift_per_atom_f1},
          {"shift_per_atom_f2", c.shift_per_atom_f2},
          {"compensation_shift_f1", c.compensation_shift_f1},
          {"compensation_shift_f2", c.compensation_shift_f2},
          {"effective_detuning_f1_hz", angular_to_hz(c.effective_detuning_f1)},
          {"effective_detuning_f2_hz", angular_to_hz(c.effective_detuning_f2)},
          {"domega_dn", c.domega_dn},
          {"effective_detuning_hz", angular_to_hz(c.effective_detuning)},
          {"phase_per_photon_antinode", c.phase_per_photon_antinode},
          {"phase_per_photon_effective", c.phase_per_photon_effective},
          {"finesse_from_geometry", c.finesse_from_geometry}};
}

json scattering_json(const ScatteringRates& r) {
  return {{"p_delta_f", r.p_delta_f},
          {"p_delta_mf", r.p_delta_mf},
          {"p_delta_f_delta_mf", r.p_delta_f_delta_mf},
          {"p_rayleigh_f1", r.p_rayleigh_f1},
          {"p_rayleigh_f2", r.p_rayleigh_f2},
          {"p_raman", r.p_raman_total},
          {"p_scatter", r.p_total},
          {"p_scatter_over_p_raman", r.p_raman_total > 0.0 ? json(r.p_total / r.p_raman_total) : json(nullptr)}};
}

ScenarioResult scenario_params(Context& ctx) {
  const auto& m = ctx.model;
  const auto& res = ctx.config.resonator;
  json body = {
      {"coupling", coupling_json(m.coupling)},
      {"trap_antinode_cooperativity",
       antinode_cooperativity(res.trap.finesse, res.trap.wavelength, res.trap.waist)},
      {"scattering", scattering_json(m.rates)},
      {"effective_atom_number", m.n0},
      {"b1_over_n0", raman_noise_coefficient(m.rates, m.n0) / m.n0},
      {"noise_budget", analytic_noise_budget(m.engine).to_json()},
      {"engine", engine_params_to_json(m.engine)},
  };
  ScenarioResult r;
  r.files.push_back({"params.json", render_json(ctx, body)});
  r.summary = {{"antinode_cooperativity", m.coupling.antinode_cooperativity},
               {"domega_dn", m.coupling.domega_dn},
               {"p_raman", m.rates.p_raman_total}};
  return r;
}

json fit_json(const QuadraticFit& f) {
  return {{"a0", f.a0.value},         {"a0_err", f.a0.se},   {"a1", f.a1.value},
          {"a1_err", f.a1.se},        {"a2", f.a2.value},    {"a2_err", f.a2.se},
          {"a1_constrained", f.a1_constrained}, {"chi2", f.chi2}, {"dof", f.dof},
          {"p_value", f.p_value},     {"span_warning", f.span_warning}};
}

ScenarioResult scenario_fig2(Context& ctx) {
  const auto& c = ctx.config;
  Table t({"N0", "y1", "y1_err", "y1_adjacent", "y1_adjacent_err", "y2", "y2_err", "meas2", "meas2_err", "css_line"});
  std::vector<ScalingPoint> y1, adj;
  ScenarioResult r;
  std::uint64_t index = 0;
  for (double n0 : c.scenario.atom_grid) {
    const auto params = engine_at(ctx.model, c.scenario.readout_photons, n0);
    const auto set = run_trials(params, SequencePlan::double_prep(), c.n_trials, point_seed(c.master_seed, index++),
                                ctx.threads);
    if (set.saturation_warning) r.warnings.push_back("saturated trials above 1% at N0 = " + format_number(n0));
    const auto v = variance_stats(set, {c.bootstrap_errors ? ErrorMethod::bootstrap : ErrorMethod::chi2, 500,
                                        c.master_seed});
    const Estimate y2 = v.y2.value_or(Estimate{NAN, NAN});
    t.row({n0, v.y1.value, v.y1.se, v.y1_adjacent.value, v.y1_adjacent.se, y2.value, y2.se, 4.0 * v.var_meas.value,
           4.0 * v.var_meas.se, n0});
    y1.push_back({n0, v.y1.value, v.y1.se});
    adj.push_back({n0, v.y1_adjacent.value, v.y1_adjacent.se});
  }
  json fits;
  if (y1.size() >= 4) {
    fits["y1_unconstrained"] = fit_json(fit_quadratic_scaling(y1, false));
    fits["y1_a1_fixed"] = fit_json(fit_quadratic_scaling(y1, true));
    if (std::all_of(adj.begin(), adj.end(), [](const ScalingPoint& p) { return std::isfinite(p.y); }))
      fits["y1_adjacent"] = fit_json(fit_quadratic_scaling(adj, false));
  } else {
    r.warnings.push_back("fewer than 4 atom-number points: no scaling fits");
  }
  r.files.push_back({"fig2.csv", t.render(ctx)});
  r.files.push_back({"fig2_fits.json", render_json(ctx, {{"fits", fits}})});
  r.summary = {{"points", y1.size()}};
  if (fits.contains("y1_unconstrained")) r.summary["a1"] = fits["y1_unconstrained"]["a1"];
  return r;
}

ScenarioResult scenario_fig3(Context& ctx) {
  const auto& c = ctx.config;
  Table t({"p", "sigma2", "sigma2_err", "sigma2_db", "sigma2_raw_db", "model_sigma2_db", "C", "C_corrected",
           "zeta_m_db", "zeta_e_db", "model_zeta_m_db", "var_meas", "var_meas_err", "var_prep", "var_prep_err",
           "epsilon_p"});
  ScenarioResult r;
  json points = json::array();
  std::uint64_t index = 0;
  for (double p : c.scenario.photon_grid) {
    const auto pt = readout_point(ctx.model, c, p, point_seed(c.master_seed, index++), ctx.threads);
    const auto& s = pt.squeezing;
    const double raw = to_db(s.sigma2 * (1.0 - s.epsilon_p) * (1.0 - s.epsilon_p));
    t.row({p, s.sigma2, pt.sigma2_se, s.sigma2_db(), raw, pt.model.sigma2_db(), s.contrast_meas, s.contrast,
           s.zeta_m_db(), s.zeta_e_db(), pt.model.zeta_m_db(), pt.variances.var_meas.value, pt.variances.var_meas.se,
           pt.variances.var_prep.value, pt.variances.var_prep.se, s.epsilon_p});
    points.push_back({{"p", p}, {"sigma2_db", s.sigma2_db()}, {"zeta_m_db", s.zeta_m_db()},
                      {"zeta_e_db", s.zeta_e_db()}});
  }
  r.files.push_back({"fig3.csv", t.render(ctx)});
  r.summary = {{"points", points}};
  return r;
}

ScenarioResult scenario_rotation(Context& ctx) {
  const auto& c = ctx.config;
  const double p = c.scenario.readout_photons;
  const auto& params = ctx.model.engine;
  ScenarioResult r;
  const auto base = variance_stats(run_trials(params, SequencePlan::squeeze_readout(), c.n_trials,
                                              point_seed(c.master_seed, 0), ctx.threads));

  // Gaussian model: CSS with the model preparation variance, back-action along y, conditioned on M1.
  const double vm = analytic_noise_budget(params).evaluate(p) / 4.0;
  auto state = prepare_css(params.n0, params.prep);
  state.cov(2, 2) = model_prep_variance(params);
  state = measurement_backaction(state, p, params.phi_eff, params.contrast);
  const double vz = state.var_z(), vy = state.var_y();
  const auto conditioned = condition_on_measurement(state, 0.0, vm);

  Table t({"alpha", "var_alpha", "var_alpha_err", "clipped", "model_sinusoid", "model_estimator"});
  std::uint64_t index = 1;
  for (double alpha : c.scenario.angle_grid) {
    const auto set =
        run_trials(params, SequencePlan::rotate_alpha(alpha), c.n_trials, point_seed(c.master_seed, index++), ctx.threads);
    const auto rv = rotated_variance(set, base.var_meas);
    const double co = std::cos(alpha), si = std::sin(alpha);
    t.row({alpha, rv.value.value, rv.value.se, rv.clipped ? 1.0 : 0.0, rotated_z_variance(conditioned, alpha),
           (1.0 - co) * (1.0 - co) * vz + si * si * vy + vm});
    if (rv.clipped) r.warnings.push_back("rotated variance clipped at 0 for alpha = " + format_number(alpha));
  }
  r.files.push_back({"rotation.csv", t.render(ctx)});
  r.summary = {{"var_meas", base.var_meas.value}, {"model_var_y", vy}, {"css", params.n0 / 4.0}};
  return r;
}

ScenarioResult scenario_ramsey(Context& ctx) {
  const auto& c = ctx.config;
  const auto& params = ctx.model.engine;
  const double p = c.scenario.readout_photons;
  const SqueezingInputs proto{0, 0, 0.5 * params.n0, c.contrast.at(p), params.prep.initial_contrast,
                              spin_flip_fraction(p, params.rates.delta_f, params.total_mu())};
  Table t({"sequence", "sigma2", "sigma2_err", "sigma2_db", "var_meas", "var_prep"});
  ScenarioResult r;
  const SequencePlan plans[] = {SequencePlan::squeeze_readout(),
                                SequencePlan::ramsey_clock(c.scenario.ramsey_precession_phase,
                                                           c.scenario.ramsey_phase_noise)};
  json summary;
  for (int k = 0; k < 2; ++k) {
    const auto v = variance_stats(run_trials(params, plans[k], c.n_trials, point_seed(c.master_seed, k), ctx.threads));
    SqueezingInputs in = proto;
    in.var_prep = v.var_prep.value;
    in.var_meas = v.var_meas.value;
    const auto s = squeezing_parameters(in);
    const double a = v.var_prep.value, b = v.var_meas.value, d = (a + b) * (a + b);
    const double se = std::hypot(b * b / d * v.var_prep.se, a * a / d * v.var_meas.se) / (1.0 - in.epsilon_p) /
                      (1.0 - in.epsilon_p) / (0.25 * params.n0);
    t.row({static_cast<double>(k), s.sigma2, se, s.sigma2_db(), v.var_meas.value, v.var_prep.value});
    summary[k == 0 ? "before_db" : "after_db"] = s.sigma2_db();
  }
  summary["precession_us"] = c.scenario.ramsey_precession_us;
  r.files.push_back({"ramsey.csv", t.render(ctx)});
  r.summary = summary;
  return r;
}

ScenarioResult scenario_limits(Context& ctx) {
  ScenarioResult r;
  const auto in = limit_inputs(ctx.model, ctx.config);
  const auto report = limit_contrast_and_zeta(in);
  r.warnings = report.warnings;
  json body = report.to_json();

  auto scaled = in;
  scaled.collective_cooperativity *= 4.0;
  const auto rep4 = limit_contrast_and_zeta(scaled);
  body["scaling_check"] = {{"factor", 4.0},
                           {"sigma2_min", rep4.sigma2_min},
                           {"ratio", report.sigma2_min > 0.0 ? json(rep4.sigma2_min / report.sigma2_min) : json(nullptr)}};

  const double p_max = report.p_opt > 0.0 ? 20.0 * report.p_opt : 1e6;
  const auto curve = integrate_sigma2(in, p_max, 200);
  const auto zeta = zeta_m_curve(in, curve);
  const double lowest = *std::min_element(curve.sigma2.begin(), curve.sigma2.end());
  body["ode_minimum"] = lowest;
  body["ode_vs_closed_form"] = report.sigma2_min > 0.0 ? json(lowest / report.sigma2_min - 1.0) : json(nullptr);
  body["ode_steps"] = curve.steps;

  Table t({"p", "sigma2", "zeta_m"});
  for (std::size_t i = 0; i < curve.photons.size(); ++i) t.row({curve.photons[i], curve.sigma2[i], zeta[i]});
  r.files.push_back({"limits.json", render_json(ctx, body)});
  r.files.push_back({"limits_curve.csv", t.render(ctx)});
  r.summary = {{"sigma2_min_db", body["sigma2_min_db"]}, {"p_opt_p_raman", report.p_opt_p_raman}};
  return r;
}

ScenarioResult scenario_noise(Context& ctx) {
  const auto& c = ctx.config;
  ScenarioResult r;
  const auto truth = analytic_noise_budget(ctx.model.engine);
  std::vector<NoisePoint> pts;
  std::vector<double> analytic;
  std::uint64_t index = 0;
  for (double p : c.scenario.photon_grid) {
    const auto params = engine_at(ctx.model, p, ctx.model.n0);
    const auto v = variance_stats(
        run_trials(params, SequencePlan::squeeze_readout(), c.n_trials, point_seed(c.master_seed, index++), ctx.threads));
    pts.push_back({p, 4.0 * v.var_meas.value, 4.0 * v.var_meas.se});
    analytic.push_back(analytic_noise_budget(params).evaluate(p));
  }
  const auto fit = fit_noise_model(pts, NoiseConstraints::freeze_all_but(NoiseTerm::b0_tech, truth));
  Table t({"p", "four_var_meas", "four_var_meas_err", "model_analytic", "model_fit"});
  for (std::size_t i = 0; i < pts.size(); ++i)
    t.row({pts[i].photons, pts[i].four_var_meas, pts[i].sigma, analytic[i], fit.evaluate(pts[i].photons)});
  r.files.push_back({"noise.csv", t.render(ctx)});
  r.files.push_back({"noise_fit.json", render_json(ctx, {{"fit", fit.to_json()}, {"analytic", truth.to_json()}})});
  r.summary = {{"b0_tech_over_n0", fit[NoiseTerm::b0_tech].value / ctx.model.n0},
               {"b0_tech_over_n0_err", fit[NoiseTerm::b0_tech].se / ctx.model.n0}};
  return r;
}

const std::map<std::string, std::function<ScenarioResult(Context&)>>& registry() {
  static const std::map<std::string, std::function<ScenarioResult(Context&)>> m = {
      {"params", scenario_params}, {"fig2", scenario_fig2},     {"fig3", scenario_fig3}, {"rotation", scenario_rotation},
      {"ramsey", scenario_ramsey}, {"limits", scenario_limits}, {"noise", scenario_noise}};
  return m;
}

json hashable_config(const RunConfig& config) {
  json j = resolved_config(config);
  j.erase("constants_file");
  j["constants"] = constants_to_json(config.constants);
  return j;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : registry()) v.push_back(k);
    return v;
  }();
  return names;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(hashable_config(config).dump()); }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::uint64_t point_seed(std::uint64_t master_seed, std::uint64_t index) {
  std::uint64_t s = master_seed ^ (0x5851f42d4c957f2dULL * (index + 1));
  return splitmix64(s);
}

double model_prep_variance(const EngineParams& params) {
  const auto an = spinflip_covariance_analytic(params.rates.delta_f, params.rates.delta_mf,
                                               params.rates.delta_f_delta_mf, params.total_mu(),
                                               params.probe.photons_per_measurement, params.n0);
  const Eigen::Vector4d w1(0.5, 0.5, 0, 0), w2(0, 0, 0.5, 0.5);
  return params.prep.prep_noise_factor * w1.dot(an.covariance * w2) + 0.25 * params.prep_quadratic * params.n0 * params.n0;
}

ReadoutPoint readout_point(const Model& model, const RunConfig& config, double photons, std::uint64_t seed,
                           unsigned threads) {
  ReadoutPoint pt;
  pt.photons = photons;
  const auto params = engine_at(model, photons, model.n0);
  const auto set = run_trials(params, SequencePlan::squeeze_readout(), config.n_trials, seed, threads);
  pt.variances =
      variance_stats(set, {config.bootstrap_errors ? ErrorMethod::bootstrap : ErrorMethod::chi2, 500, seed});
  SqueezingInputs in{pt.variances.var_prep.value,
                     pt.variances.var_meas.value,
                     0.5 * params.n0,
                     config.contrast.at(photons),
                     params.prep.initial_contrast,
                     spin_flip_fraction(photons, params.rates.delta_f, params.total_mu())};
  pt.squeezing = squeezing_parameters(in);
  const double a = in.var_prep, b = in.var_meas, d = (a + b) * (a + b);
  const double cond_se = std::hypot(b * b / d * pt.variances.var_prep.se, a * a / d * pt.variances.var_meas.se);
  pt.sigma2_se = cond_se / ((1.0 - in.epsilon_p) * (1.0 - in.epsilon_p)) / (0.25 * params.n0);

  pt.model_var_meas = analytic_noise_budget(params).evaluate(photons) / 4.0;
  pt.model_var_prep = model_prep_variance(params);
  in.var_prep = pt.model_var_prep;
  in.var_meas = pt.model_var_meas;
  pt.model = squeezing_parameters(in);
  return pt;
}

LimitInputs limit_inputs(const Model& model, const RunConfig& config) {
  LimitInputs in;
  in.collective_cooperativity = config.scenario.limits_collective_cooperativity.value_or(
      model.n0 * model.coupling.effective_cooperativity);
  in.p_raman = model.rates.p_raman_total;
  in.p_scatter = model.rates.p_total;
  in.phi_eff = model.coupling.phase_per_photon_effective;
  in.rayleigh_f1 = model.rates.p_rayleigh_f1;
  in.rayleigh_f2 = model.rates.p_rayleigh_f2;
  return in;
}

ScenarioResult run_scenario(const std::string& name, const RunConfig& config, unsigned threads) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    std::string known;
    for (const auto& n : scenario_names()) known += " " + n;
    throw std::invalid_argument("unknown scenario '" + name + "' (known:" + known + ")");
  }
  Context ctx{config, build_model(config), std::max(1u, threads), name, config_hash(config)};
  auto r = it->second(ctx);
  r.scenario = name;
  return r;
}

json run_manifest(const ScenarioResult& result, const RunConfig& config) {
  json files = json::object();
  for (const auto& f : result.files) files[f.name] = fnv1a_hex(f.content);
  return {{"tool", "qndsim"},
          {"version", QND_VERSION},
          {"scenario", result.scenario},
          {"seed", config.master_seed},
          {"trials", config.n_trials},
          {"config_hash", config_hash(config)},
          {"files", files},
          {"warnings", result.warnings},
          {"summary", result.summary}};
}

json write_outputs(const std::filesystem::path& dir, const ScenarioResult& result, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  };
  for (const auto& f : result.files) put(f.name, f.content);
  put("resolved_config.json", resolved_config(config).dump(2) + "\n");
  auto manifest = run_manifest(result, config);
  put("manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::vector<std::string> compare_manifests(const json& expected, const json& actual) {
  std::vector<std::string> diff;
  for (const char* key : {"version", "scenario", "seed", "trials", "config_hash"}) {
    if (expected.value(key, json()) != actual.value(key, json()))
      diff.push_back(std::string(key) + ": expected " + expected.value(key, json()).dump() + ", got " +
                     actual.value(key, json()).dump());
  }
  const json ef = expected.value("files", json::object()), af = actual.value("files", json::object());
  for (auto it = ef.begin(); it != ef.end(); ++it) {
    if (!af.contains(it.key()))
      diff.push_back("file " + it.key() + ": missing");
    else if (af.at(it.key()) != it.value())
      diff.push_back("file " + it.key() + ": hash " + af.at(it.key()).get<std::string>() + " != " +
                     it.value().get<std::string>());
  }
  for (auto it = af.begin(); it != af.end(); ++it)
    if (!ef.contains(it.key())) diff.push_back("file " + it.key() + ": not in the expected manifest");
  return diff;
}

}  // namespace qnd

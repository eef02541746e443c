#include "qnd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "qnd/rng.hpp"

namespace qnd {
namespace {

enum class EventKind { delta_f, delta_mf, delta_f_delta_mf };

struct Event {
  double u;
  EventKind kind;
};

// Effective-atom populations in the measurement frame: e = alpha * sigma, where
// sigma = +1 for F=2 and alpha flips at every spin-echo pulse.
struct Ensemble {
  long long cp = 0, cm = 0;  // clock atoms
  long long sp = 0, sm = 0;  // atoms scattered into m_F != 0
  int alpha = 1;
  double sy = 0.0;  // transverse spin in the measurement frame
  double photons_so_far = 0.0;
  int echo_count = 0;

  [[nodiscard]] long long clock() const { return cp + cm; }
  [[nodiscard]] long long e_sum() const { return cp - cm + sp - sm; }
  [[nodiscard]] double clock_sz() const { return 0.5 * static_cast<double>(cp - cm); }

  void set_clock_sz(double sz) {
    const long long n = clock();
    const long long up = std::llround(0.5 * static_cast<double>(n) + sz);
    cp = std::clamp(up, 0LL, n);
    cm = n - cp;
  }
};

double gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

long long binomial(std::mt19937_64& rng, long long n, double prob) {
  if (n <= 0 || prob <= 0.0) return 0;
  return std::binomial_distribution<long long>(n, prob)(rng);
}

long long poisson(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<long long>(mean)(rng);
}

std::pair<Slot, Slot> measurement_slots(int m) {
  switch (m) {
    case 0: return {Slot::m1m, Slot::m1p};
    case 1: return {Slot::m2p, Slot::m2m};
    case 2: return {Slot::mt1m, Slot::mt1p};
    default: return {Slot::mt2m, Slot::mt2p};
  }
}

}  // namespace

void ProbeConfig::validate() const {
  if (!(photons_per_measurement >= 0.0)) throw std::invalid_argument("photons_per_measurement must be >= 0");
  if (!(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0))
    throw std::invalid_argument("quantum_efficiency must lie in (0, 1]");
  if (!(apd_excess_factor >= 1.0)) throw std::invalid_argument("apd_excess_factor must be >= 1");
  if (probe_offset == 0.0) throw std::invalid_argument("probe_offset must be nonzero (probe on the slope)");
  if (compensation && !(probe_offset * compensation_offset < 0.0))
    throw std::invalid_argument("probe and compensation offsets must have opposite signs");
  if (!(electronic_b_minus2 >= 0.0)) throw std::invalid_argument("electronic_b_minus2 must be >= 0");
  if (!(technical_noise_fraction >= 0.0)) throw std::invalid_argument("technical_noise_fraction must be >= 0");
  if (!(technical_noise_correlation >= -1.0 && technical_noise_correlation <= 1.0))
    throw std::invalid_argument("technical_noise_correlation must lie in [-1, 1]");
}

void EngineParams::validate() const {
  if (!(n0 > 0.0)) throw std::invalid_argument("n0 must be positive");
  if (!(domega_dn != 0.0 && std::isfinite(domega_dn))) throw std::invalid_argument("domega_dn must be nonzero");
  if (!(phi_eff >= 0.0)) throw std::invalid_argument("phi_eff must be >= 0");
  if (rates.delta_f < 0.0 || rates.delta_mf < 0.0 || rates.delta_f_delta_mf < 0.0)
    throw std::invalid_argument("flip rates must be >= 0");
  probe.validate();
  prep.validate();
  pulse.validate();
  if (!(mu_lock >= 0.0 && mu_lock <= 0.1)) throw std::invalid_argument("mu_lock must lie in [0, 0.1]");
  if (!(prep_quadratic >= 0.0)) throw std::invalid_argument("prep_quadratic must be >= 0");
  if (contrast.alpha < 0.0 || contrast.beta < 0.0) throw std::invalid_argument("contrast alpha, beta must be >= 0");
}

bool SequencePlan::has_slot(Slot s) const {
  return std::any_of(steps.begin(), steps.end(),
                     [s](const SequenceStep& st) { return st.kind == StepKind::pulse && st.slot == s; });
}

void SequencePlan::validate() const {
  if (steps.empty() || steps.front().kind != StepKind::prepare)
    throw std::invalid_argument("plan '" + name + "' must start with a preparation");
  std::array<int, kSlotCount> where{};
  where.fill(-1);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].kind != StepKind::pulse) continue;
    auto& w = where[static_cast<std::size_t>(steps[i].slot)];
    if (w >= 0) throw std::invalid_argument("plan '" + name + "' uses pulse slot " + slot_name(steps[i].slot) + " twice");
    w = static_cast<int>(i);
  }
  for (int m = 0; m < 4; ++m) {
    const auto [a, b] = measurement_slots(m);
    const int ia = where[static_cast<std::size_t>(a)], ib = where[static_cast<std::size_t>(b)];
    if (ia < 0 && ib < 0) {
      if (m < 2) throw std::invalid_argument("plan '" + name + "' lacks measurement M" + std::to_string(m + 1));
      continue;
    }
    if (ia < 0 || ib < 0 || ib < ia) throw std::invalid_argument("plan '" + name + "' has an incomplete pulse pair");
    int pis = 0;
    for (int i = ia + 1; i < ib; ++i) {
      if (steps[static_cast<std::size_t>(i)].kind == StepKind::composite_pi)
        ++pis;
      else
        throw std::invalid_argument("plan '" + name + "': only the spin-echo pulse may separate a pulse pair");
    }
    if (pis != 1) throw std::invalid_argument("plan '" + name + "': each pulse pair must bracket exactly one pi pulse");
  }
  if (where[static_cast<std::size_t>(Slot::m2p)] < where[static_cast<std::size_t>(Slot::m1p)])
    throw std::invalid_argument("plan '" + name + "': M2 must follow M1");
}

SequencePlan SequencePlan::squeeze_readout() {
  SequencePlan p;
  p.name = "squeeze-readout";
  p.steps = {{StepKind::prepare},
             {StepKind::pulse, Slot::m1m},
             {StepKind::composite_pi},
             {StepKind::pulse, Slot::m1p},
             {StepKind::record_szf},
             {StepKind::pulse, Slot::m2p},
             {StepKind::composite_pi},
             {StepKind::pulse, Slot::m2m}};
  return p;
}

SequencePlan SequencePlan::double_prep() {
  SequencePlan p = squeeze_readout();
  p.name = "double-prep";
  const std::vector<SequenceStep> tail = {{StepKind::prepare},
                                          {StepKind::pulse, Slot::mt1m},
                                          {StepKind::composite_pi},
                                          {StepKind::pulse, Slot::mt1p},
                                          {StepKind::prepare},
                                          {StepKind::pulse, Slot::mt2m},
                                          {StepKind::composite_pi},
                                          {StepKind::pulse, Slot::mt2p}};
  p.steps.insert(p.steps.end(), tail.begin(), tail.end());
  return p;
}

SequencePlan SequencePlan::rotate_alpha(double alpha) {
  SequencePlan p = squeeze_readout();
  p.name = "rotate-alpha";
  SequenceStep rot{StepKind::rotate};
  rot.angle = alpha;
  p.steps.insert(p.steps.begin() + 5, rot);
  return p;
}

SequencePlan SequencePlan::ramsey_clock(double precession_phase, double phase_noise) {
  SequencePlan p = squeeze_readout();
  p.name = "ramsey-clock";
  SequenceStep r{StepKind::ramsey};
  r.angle = precession_phase;
  r.phase_noise = phase_noise;
  p.steps.insert(p.steps.begin() + 5, r);
  return p;
}

double ShiftTrajectory::mean_transmission(double probe_offset) const {
  double t = 0.0;
  for (std::size_t k = 0; k < omega.size(); ++k)
    t += lorentzian_transmission(probe_offset - omega[k], 1.0) * (breakpoints[k + 1] - breakpoints[k]);
  return t;
}

double ShiftTrajectory::mean_shift() const {
  double w = 0.0;
  for (std::size_t k = 0; k < omega.size(); ++k) w += omega[k] * (breakpoints[k + 1] - breakpoints[k]);
  return w;
}

double electronic_count_variance(const ProbeConfig& probe, double k_factor) {
  // 4 Var_meas = 2 sigma_e^2 K^2 / (Q^2 p^2) for two pulses of p incident photons each.
  const double q = probe.quantum_efficiency;
  return probe.electronic_b_minus2 * q * q / (2.0 * k_factor * k_factor);
}

PulseReading simulate_probe_pulse(const ShiftTrajectory& trajectory, double photons, const ProbeConfig& probe,
                                  double electronic_variance, std::mt19937_64& rng) {
  if (!(photons >= 0.0)) throw std::invalid_argument("photons must be >= 0");
  PulseReading r;
  if (photons == 0.0) {
    r.saturated = true;
    return r;
  }
  const double incident = photons / lorentzian_transmission(probe.probe_offset, 1.0);
  const double t_comp = probe.compensation ? lorentzian_transmission(probe.compensation_offset, 1.0) : 0.0;
  const double scale = probe.quantum_efficiency * incident;
  const double mean = scale * (trajectory.mean_transmission(probe.probe_offset) + t_comp);
  double var = electronic_variance;
  if (probe.shot_noise) var += probe.apd_excess_factor * mean;
  r.counts = mean + gaussian(rng, std::sqrt(var));
  double t = r.counts / scale - t_comp;
  if (!(t > 0.0 && t <= 1.0)) {
    r.saturated = true;
    t = std::clamp(t, 1e-12, 1.0);
  }
  r.transmission = t;
  r.omega = probe.probe_offset - inverse_transmission(t, 1.0, probe.branch());
  return r;
}

TrialRecord simulate_trial(const EngineParams& params, const SequencePlan& plan, std::mt19937_64& rng,
                           double drift_offset) {
  const double photons = 0.5 * params.probe.photons_per_measurement;
  const double css = 0.25 * params.n0;
  const double mu = params.total_mu();
  const double elec = params.probe.electronic_noise ? electronic_count_variance(params.probe, params.k_factor()) : 0.0;
  const double kick = std::sqrt(css * params.n0 * photons) * params.phi_eff;
  const long long n_atoms = std::llround(params.n0);

  TrialRecord rec;
  rec.pulses.fill(std::numeric_limits<double>::quiet_NaN());
  Ensemble ens;
  bool first_prep = true;
  std::vector<Event> events;

  for (const auto& step : plan.steps) {
    switch (step.kind) {
      case StepKind::prepare: {
        ens = Ensemble{};
        const long long up = binomial(rng, n_atoms, 0.5);
        const double excess =
            gaussian(rng, std::sqrt((params.prep.prep_noise_factor - 1.0) * css)) + drift_offset;
        ens.cp = up;
        ens.cm = n_atoms - up;
        if (excess != 0.0) ens.set_clock_sz(ens.clock_sz() + excess);
        ens.sy = gaussian(rng, std::sqrt(params.prep.prep_noise_factor * css));
        if (first_prep) rec.true_sz0 = ens.clock_sz();
        first_prep = false;
        break;
      }
      case StepKind::pulse: {
        const double nc = static_cast<double>(ens.clock());
        events.clear();
        const std::array<std::pair<EventKind, double>, 3> kinds = {
            {{EventKind::delta_f, params.rates.delta_f},
             {EventKind::delta_mf, params.rates.delta_mf},
             {EventKind::delta_f_delta_mf, params.rates.delta_f_delta_mf}}};
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (const auto& [kind, rate] : kinds) {
          const long long n = poisson(rng, nc * photons * rate);
          for (long long i = 0; i < n; ++i) events.push_back({uni(rng), kind});
        }
        std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.u < b.u; });

        ShiftTrajectory traj;
        traj.breakpoints = {0.0};
        traj.omega.clear();
        const double to_omega = ens.alpha * params.domega_dn;
        traj.omega.push_back(to_omega * static_cast<double>(ens.e_sum()));
        for (const auto& ev : events) {
          if (ens.clock() == 0) break;
          const bool plus = uni(rng) * static_cast<double>(ens.clock()) < static_cast<double>(ens.cp);
          long long& from = plus ? ens.cp : ens.cm;
          --from;
          if (params.record_flip_events)
            rec.flip_events.push_back({step.slot, ev.u, static_cast<int>(ev.kind), plus ? 1 : -1});
          switch (ev.kind) {
            case EventKind::delta_f:
              ++(plus ? ens.cm : ens.cp);
              ++rec.flips_df;
              break;
            case EventKind::delta_mf:
              ++(plus ? ens.sp : ens.sm);
              ++rec.flips_dmf;
              break;
            case EventKind::delta_f_delta_mf:
              ++(plus ? ens.sm : ens.sp);
              ++rec.flips_both;
              break;
          }
          traj.breakpoints.push_back(ev.u);
          traj.omega.push_back(to_omega * static_cast<double>(ens.e_sum()));
        }
        traj.breakpoints.push_back(1.0);

        const auto reading = simulate_probe_pulse(traj, photons, params.probe, elec, rng);
        rec.saturated = rec.saturated || reading.saturated;
        rec.pulses[static_cast<std::size_t>(step.slot)] = ens.alpha * reading.omega / (2.0 * params.domega_dn);
        ens.sy += gaussian(rng, kick);
        ens.photons_so_far += photons;
        break;
      }
      case StepKind::composite_pi: {
        const long long fp = binomial(rng, ens.cp, mu);
        const long long fm = binomial(rng, ens.cm, mu);
        ens.cp += fm - fp;
        ens.cm += fp - fm;
        std::swap(ens.sp, ens.sm);
        ens.alpha = -ens.alpha;
        ens.sy = (1.0 - 2.0 * mu) * ens.sy + gaussian(rng, std::sqrt(mu * (1.0 - mu) * params.n0));
        ++ens.echo_count;
        rec.flips_mu += fp + fm;
        break;
      }
      case StepKind::rotate: {
        const double c = std::cos(step.angle), s = std::sin(step.angle);
        const double sz = ens.clock_sz();
        ens.set_clock_sz(c * sz + s * ens.sy);
        ens.sy = c * ens.sy - s * sz;
        break;
      }
      case StepKind::ramsey: {
        const double phase = step.angle + gaussian(rng, step.phase_noise);
        const double sx = params.prep.initial_contrast * std::pow(1.0 - 2.0 * mu, ens.echo_count) *
                          params.contrast.factor(ens.photons_so_far) * 0.5 * params.n0;
        ens.set_clock_sz(ens.clock_sz() * std::cos(phase) - ens.alpha * sx * std::sin(phase));
        std::swap(ens.sp, ens.sm);
        ens.alpha = -ens.alpha;
        break;
      }
      case StepKind::record_szf:
        rec.true_szf = ens.clock_sz();
        break;
    }
  }

  // Technical noise enters each measurement M_i, common to both of its pulses.
  const double tech_sigma =
      params.probe.technical_noise ? std::sqrt(0.25 * params.probe.technical_noise_fraction * params.n0) : 0.0;
  const double rho = params.probe.technical_noise_correlation;
  const double g1 = gaussian(rng, 1.0), g2 = gaussian(rng, 1.0), g3 = gaussian(rng, 1.0), g4 = gaussian(rng, 1.0);
  const std::array<double, 4> tech = {tech_sigma * g1, tech_sigma * (rho * g1 + std::sqrt(1.0 - rho * rho) * g2),
                                      tech_sigma * g3, tech_sigma * g4};
  std::array<double, 4> means{};
  for (int m = 0; m < 4; ++m) {
    const auto [a, b] = measurement_slots(m);
    auto& pa = rec.pulses[static_cast<std::size_t>(a)];
    auto& pb = rec.pulses[static_cast<std::size_t>(b)];
    if (std::isnan(pa) || std::isnan(pb)) {
      means[static_cast<std::size_t>(m)] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    pa += tech[static_cast<std::size_t>(m)];
    pb += tech[static_cast<std::size_t>(m)];
    means[static_cast<std::size_t>(m)] = 0.5 * (pa + pb);
  }
  rec.m1 = means[0];
  rec.m2 = means[1];
  rec.mt1 = means[2];
  rec.mt2 = means[3];
  return rec;
}

std::vector<double> preparation_drift(const EngineParams& params, std::size_t n_trials, std::uint64_t master_seed) {
  std::vector<double> out(n_trials, 0.0);
  if (params.prep_quadratic <= 0.0) return out;
  auto rng = make_stream(master_seed, StreamDomain::drift, 0);
  std::normal_distribution<double> g;
  const double rho = params.drift_correlation_trials > 0.0 ? std::exp(-1.0 / params.drift_correlation_trials) : 0.0;
  const double sigma = 0.5 * std::sqrt(params.prep_quadratic) * params.n0;
  double x = g(rng);
  for (std::size_t i = 0; i < n_trials; ++i) {
    if (i > 0) x = rho * x + std::sqrt(1.0 - rho * rho) * g(rng);
    out[i] = sigma * x;
  }
  return out;
}

TrialSet run_trials(const EngineParams& params, const SequencePlan& plan, std::size_t n_trials,
                    std::uint64_t master_seed, unsigned threads) {
  if (n_trials < 2) throw std::invalid_argument("n_trials must be >= 2 (variance undefined otherwise)");
  params.validate();
  plan.validate();
  const auto drift = preparation_drift(params, n_trials, master_seed);

  TrialSet set;
  set.master_seed = master_seed;
  set.scenario = plan.name;
  set.parameters = engine_params_to_json(params);
  set.records.resize(n_trials);

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t i = w; i < n_trials; i += workers) {
        auto rng = make_stream(master_seed, StreamDomain::trial, i);
        set.records[i] = simulate_trial(params, plan, rng, drift[i]);
        set.records[i].trial_id = i;
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& r : set.records) set.saturated_trials += r.saturated ? 1 : 0;
  set.saturation_warning = static_cast<double>(set.saturated_trials) > 0.01 * static_cast<double>(n_trials);
  return set;
}

SpinFlipCovariance spinflip_covariance_analytic(double a, double b, double c, double mu, double photons, double n0) {
  const double p = photons;
  Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
  const double same = (a + c) * p / 6.0;
  for (int k = 0; k < 4; ++k) r(k, k) = same;
  r(0, 1) = (a + b + c) * p / 2.0 + mu;
  r(0, 2) = a * p + b * p / 2.0 + c * p + mu;
  r(0, 3) = 1.5 * a * p + b * p + c * p / 2.0 + 2.0 * mu;
  r(1, 2) = (a + c) * p / 2.0;
  r(1, 3) = a * p + 1.5 * b * p + c * p + mu;
  r(2, 3) = a * p / 2.0 + 1.5 * b * p + 1.5 * c * p + mu;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) r(i, j) = r(j, i);

  SpinFlipCovariance out;
  out.mean_flip_probability = r;
  out.covariance = 0.25 * n0 * (Eigen::Matrix4d::Ones() - 2.0 * r);
  // M_1 = (M_1- + M_1+)/2, M_2 = (M_2+ + M_2-)/2.
  Eigen::Vector4d w1(0.5, 0.5, 0.0, 0.0), w2(0.0, 0.0, 0.5, 0.5);
  const Eigen::Vector4d d = w1 - w2;
  out.var_meas_term = 4.0 * 0.5 * d.dot(out.covariance * d);
  out.var_m1_term = 4.0 * w1.dot(out.covariance * w1);
  return out;
}

double coherent_error_bound(double dphi_max, double contrast_spin_echo, double n0) {
  if (dphi_max < 0.0 || contrast_spin_echo < 0.0 || n0 < 0.0)
    throw std::invalid_argument("coherent error bound inputs must be >= 0");
  return dphi_max * dphi_max * contrast_spin_echo * contrast_spin_echo * n0;
}

std::string slot_name(Slot s) {
  switch (s) {
    case Slot::m1m: return "M1m";
    case Slot::m1p: return "M1p";
    case Slot::m2p: return "M2p";
    case Slot::m2m: return "M2m";
    case Slot::mt1m: return "Mt1m";
    case Slot::mt1p: return "Mt1p";
    case Slot::mt2m: return "Mt2m";
    case Slot::mt2p: return "Mt2p";
  }
  return "?";
}

nlohmann::json engine_params_to_json(const EngineParams& p) {
  const auto& pr = p.probe;
  return {
      {"n0", p.n0},
      {"domega_dn", p.domega_dn},
      {"phi_eff", p.phi_eff},
      {"rates", {{"delta_f", p.rates.delta_f}, {"delta_mf", p.rates.delta_mf},
                 {"delta_f_delta_mf", p.rates.delta_f_delta_mf}}},
      {"probe",
       {{"photons_per_measurement", pr.photons_per_measurement},
        {"pulse_duration_s", pr.pulse_duration},
        {"probe_offset", pr.probe_offset},
        {"compensation_offset", pr.compensation_offset},
        {"compensation", pr.compensation},
        {"quantum_efficiency", pr.quantum_efficiency},
        {"apd_excess_factor", pr.apd_excess_factor},
        {"electronic_b_minus2", pr.electronic_b_minus2},
        {"technical_noise_fraction", pr.technical_noise_fraction},
        {"technical_noise_correlation", pr.technical_noise_correlation},
        {"shot_noise", pr.shot_noise},
        {"electronic_noise", pr.electronic_noise},
        {"technical_noise", pr.technical_noise}}},
      {"preparation",
       {{"prep_noise_factor", p.prep.prep_noise_factor},
        {"impurity_fraction", p.prep.impurity_fraction},
        {"initial_contrast", p.prep.initial_contrast},
        {"quadratic_coefficient", p.prep_quadratic},
        {"drift_correlation_trials", p.drift_correlation_trials}}},
      {"pulse", {{"mu", p.pulse.composite_pi_infidelity}, {"mu_lock", p.mu_lock}}},
      {"contrast", {{"alpha", p.contrast.alpha}, {"beta", p.contrast.beta}}},
  };
}

}  // namespace qnd

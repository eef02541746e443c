#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "qnd/engine.hpp"
#include "qnd/rng.hpp"

using namespace qnd;
using doctest::Approx;

namespace {

constexpr double kN0 = 3.3e4;
constexpr double kP = 6.4e5;

EngineParams quiet_params() {
  EngineParams p;
  p.n0 = kN0;
  p.domega_dn = 4.494e-5;
  p.phi_eff = 1.8e-4;
  p.mu_lock = 0.0;
  p.probe.photons_per_measurement = kP;
  p.probe.shot_noise = false;
  p.probe.electronic_noise = false;
  p.probe.technical_noise = false;
  return p;
}

struct Sample {
  double var = 0.0;
  double se = 0.0;
};

template <class F>
Sample sample_variance(const TrialSet& set, F f) {
  const double n = static_cast<double>(set.records.size());
  double m = 0.0;
  for (const auto& r : set.records) m += f(r);
  m /= n;
  double v = 0.0;
  for (const auto& r : set.records) v += (f(r) - m) * (f(r) - m);
  v /= n - 1.0;
  return {v, v * std::sqrt(2.0 / (n - 1.0))};
}

// 2 Var(M1 - M2) in atom units.
Sample four_var_meas(const TrialSet& set) {
  auto s = sample_variance(set, [](const TrialRecord& r) { return r.m1 - r.m2; });
  return {2.0 * s.var, 2.0 * s.se};
}

void check_within(const Sample& s, double expected, double n_se = 3.0) {
  INFO("sample " << s.var << " +- " << s.se << ", expected " << expected);
  CHECK(std::abs(s.var - expected) <= n_se * s.se + 1e-9);
}

constexpr std::array<Slot, 4> kOrder = {Slot::m1m, Slot::m1p, Slot::m2p, Slot::m2m};

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("noiseless readout equals the true spin") {
    auto p = quiet_params();
    const auto set = run_trials(p, SequencePlan::squeeze_readout(), 200, 11);
    for (const auto& r : set.records) {
      CHECK(r.m1 == Approx(r.true_sz0).epsilon(1e-9).scale(1.0));
      CHECK(r.m2 == Approx(r.true_sz0).epsilon(1e-9).scale(1.0));
      CHECK(r.true_szf == r.true_sz0);
      CHECK(r.m1 == 0.5 * (r.pulse(Slot::m1m) + r.pulse(Slot::m1p)));
    }
    const auto v = sample_variance(set, [](const TrialRecord& r) { return r.m1; });
    check_within(v, 0.25 * kN0);
  }

  TEST_CASE("projection noise times preparation factor") {
    auto p = quiet_params();
    p.prep.prep_noise_factor = 1.14;
    const auto set = run_trials(p, SequencePlan::squeeze_readout(), 10000, 12);
    check_within(sample_variance(set, [](const TrialRecord& r) { return r.m1; }), 1.14 * 0.25 * kN0);
  }

  TEST_CASE("probe pulse inversion") {
    ProbeConfig probe;
    probe.shot_noise = false;
    std::mt19937_64 rng(1);
    for (double w : {-0.02, -1e-3, 0.0, 4e-4, 0.03}) {
      ShiftTrajectory t;
      t.omega = {w};
      const auto r = simulate_probe_pulse(t, 3.2e5, probe, 0.0, rng);
      CHECK_FALSE(r.saturated);
      CHECK(std::abs(r.omega - w) < 1e-6);
    }
    ShiftTrajectory t;
    t.omega = {0.0};
    CHECK(simulate_probe_pulse(t, 0.0, probe, 0.0, rng).saturated);
    CHECK_THROWS_AS(simulate_probe_pulse(t, -1.0, probe, 0.0, rng), std::invalid_argument);
    probe.compensation = false;
    t.omega = {0.5};  // on resonance with the probe sideband
    std::mt19937_64 rng2(3);
    auto big = probe;
    big.shot_noise = true;
    int saturated = 0;
    for (int i = 0; i < 100; ++i) saturated += simulate_probe_pulse(t, 3.2e5, big, 0.0, rng2).saturated ? 1 : 0;
    CHECK(saturated > 20);
  }

  TEST_CASE("each detector noise source alone") {
    const double k = 1.0 / (2.0 * 4.494e-5);
    SUBCASE("photon shot noise, b_-1 / p") {
      auto p = quiet_params();
      p.probe.shot_noise = true;
      const double b_m1 = 2.0 * (p.probe.apd_excess_factor / p.probe.quantum_efficiency) * k * k;
      CHECK(b_m1 == Approx(1.09e9).epsilon(0.01));
      check_within(four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 10000, 21)), b_m1 / kP);
    }
    SUBCASE("electronic noise, b_-2 / p^2") {
      auto p = quiet_params();
      p.probe.electronic_noise = true;
      check_within(four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 10000, 22)), 6e13 / (kP * kP));
    }
    SUBCASE("technical noise, b_0,tech") {
      auto p = quiet_params();
      p.probe.technical_noise = true;
      check_within(four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 10000, 23)), 0.04 * kN0);
    }
    SUBCASE("composite pulse infidelity, mu N_0") {
      auto p = quiet_params();
      p.pulse.composite_pi_infidelity = 0.02;
      check_within(four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 10000, 24)), 0.02 * kN0);
    }
    SUBCASE("shot noise without the compensation sideband is halved") {
      auto p = quiet_params();
      p.probe.shot_noise = true;
      p.probe.compensation = false;
      const double b_m1 = 2.0 * (p.probe.apd_excess_factor / p.probe.quantum_efficiency) * k * k;
      check_within(four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 10000, 25)), 0.5 * b_m1 / kP);
    }
  }

  TEST_CASE("technical noise correlation knob") {
    auto p = quiet_params();
    p.probe.technical_noise = true;
    p.probe.technical_noise_correlation = 0.5;
    check_within(four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 10000, 26)), 0.5 * 0.04 * kN0);
  }

  TEST_CASE("analytic spin-flip matrix") {
    const auto z = spinflip_covariance_analytic(0, 0, 0, 0, kP, kN0);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(z.covariance(i, j) == Approx(0.25 * kN0));
    CHECK(z.var_meas_term == Approx(0.0).scale(1.0));
    CHECK(z.var_m1_term == Approx(kN0));

    CHECK(spinflip_covariance_analytic(0, 0, 0, 0.02, kP, kN0).var_meas_term == Approx(660.0));

    // Aggregates: (4a/3 + b/2 + c/3) p N_0 + mu N_0 and N_0 (1 - mu - [2a/3 + b/2 + 2c/3] p).
    const double a = 1.1e-8, b = 2.3e-8, c = 0.7e-8, mu = 0.01;
    const auto s = spinflip_covariance_analytic(a, b, c, mu, kP, kN0);
    CHECK(s.var_meas_term == Approx((4.0 * a / 3.0 + b / 2.0 + c / 3.0) * kP * kN0 + mu * kN0));
    CHECK(s.var_m1_term == Approx(kN0 * (1.0 - mu - (2.0 * a / 3.0 + b / 2.0 + 2.0 * c / 3.0) * kP)));
    CHECK(s.covariance.isApprox(s.covariance.transpose()));
  }

  TEST_CASE("b_1 coefficient from scattering rates") {
    // P_dF, P_dmF, P_dFdmF for the reference configuration.
    ScatteringRates r;
    r.p_delta_f = 2.63e-8;
    r.p_delta_mf = 1.459e-8;
    r.p_delta_f_delta_mf = 1.539e-8;
    const auto s = spinflip_covariance_analytic(r.p_delta_f, r.p_delta_mf, r.p_delta_f_delta_mf, 0.0, 6e5, kN0);
    CHECK(s.var_meas_term / (6e5 * kN0) == Approx(raman_noise_coefficient(r, kN0) / kN0).epsilon(1e-12));
  }

  TEST_CASE("spin-flip covariance structure against Monte Carlo") {
    // lambda = p * P small so second-order terms stay below the statistical error.
    const double lam = 1e-3;
    struct Case {
      const char* name;
      double a, b, c, mu;
    };
    const std::array<Case, 4> cases = {{{"delta F", lam / kP, 0, 0, 0},
                                        {"delta mF", 0, lam / kP, 0, 0},
                                        {"delta F delta mF", 0, 0, lam / kP, 0},
                                        {"mixed with mu", 0.4 * lam / kP, 0.4 * lam / kP, 0.4 * lam / kP, 2e-3}}};
    std::uint64_t seed = 100;
    for (const auto& cs : cases) {
      CAPTURE(cs.name);
      auto p = quiet_params();
      p.rates = {cs.a, cs.b, cs.c};
      p.pulse.composite_pi_infidelity = cs.mu;
      const auto set = run_trials(p, SequencePlan::squeeze_readout(), 100000, ++seed);
      const auto an = spinflip_covariance_analytic(cs.a, cs.b, cs.c, cs.mu, kP, kN0);
      const auto& r = an.mean_flip_probability;
      for (int k = 0; k < 4; ++k)
        for (int l = k + 1; l < 4; ++l) {
          CAPTURE(k);
          CAPTURE(l);
          const Slot sk = kOrder[k], sl = kOrder[l];
          const auto v = sample_variance(set, [&](const TrialRecord& t) { return t.pulse(sk) - t.pulse(sl); });
          check_within(v, kN0 * (r(k, l) - 0.5 * (r(k, k) + r(l, l))));
        }
      check_within(four_var_meas(set), an.var_meas_term);
    }
  }

  TEST_CASE("F-changing flips beyond first order") {
    // With only Delta F events the measurement-frame sign is a telegraph process, so
    // 2 Var(M1 - M2) = (N0 / 2) int int w(t) w(s) exp(-2 lambda |t - s|), lambda = P_dF p / 2 per pulse.
    // Oracle values from numerical double quadrature of that integral.
    auto p = quiet_params();
    p.rates = {2.63e-8, 0, 0};
    const auto s = four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 100000, 131));
    check_within(s, 722.20);
    // The first-order term (4/3) P_dF p N0 = 740.6 sits 2.5 % high at this lambda.
    CHECK(std::abs(s.var - 740.61) > 3.0 * s.se);
    p.rates = {5.26e-8, 0, 0};
    check_within(four_var_meas(run_trials(p, SequencePlan::squeeze_readout(), 100000, 132)), 1408.72);
  }

  TEST_CASE("flip times are uniform and enter linearly") {
    auto p = quiet_params();
    p.rates = {2e-8, 0.0, 0.0};
    p.record_flip_events = true;
    const auto many = run_trials(p, SequencePlan::squeeze_readout(), 4000, 31);
    constexpr int kBins = 20;
    std::vector<double> hist(kBins, 0.0);
    double n_events = 0;
    for (const auto& r : many.records)
      for (const auto& ev : r.flip_events) {
        hist[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>(ev.time * kBins)))] += 1;
        n_events += 1;
      }
    CHECK(n_events > 1e6);
    // Cumulative distribution of flip times: linear with unit slope.
    double cum = 0, fxx = 0, fxy = 0, fx = 0, fy = 0;
    for (int k = 0; k < kBins; ++k) {
      cum += hist[static_cast<std::size_t>(k)] / n_events;
      const double x = (k + 1.0) / kBins;
      fxx += x * x;
      fxy += x * cum;
      fx += x;
      fy += cum;
    }
    const double slope = (kBins * fxy - fx * fy) / (kBins * fxx - fx * fx);
    CHECK(slope == Approx(1.0).epsilon(0.05));

    // Single events in the first pulse: reading - S_z0 = -e (1 - t).
    p.rates = {1e-10, 0.0, 0.0};
    const auto few = run_trials(p, SequencePlan::squeeze_readout(), 20000, 32);
    double sxx = 0, sxy = 0, sx = 0, sy = 0, m = 0;
    for (const auto& r : few.records) {
      if (r.flip_events.empty() || r.flip_events.front().slot != Slot::m1m) continue;
      if (r.flip_events.size() > 1 && r.flip_events[1].slot == Slot::m1m) continue;
      const auto& ev = r.flip_events.front();
      const double y = -(r.pulse(Slot::m1m) - r.true_sz0) * ev.e;
      sxx += ev.time * ev.time;
      sxy += ev.time * y;
      sx += ev.time;
      sy += y;
      m += 1;
    }
    REQUIRE(m > 1000);
    const double s = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(s == Approx(-1.0).epsilon(0.05));
    CHECK((sy - s * sx) / m == Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("bitwise reproducibility across thread counts") {
    EngineParams p;
    p.rates = {2.6e-8, 2e-8, 1e-8};
    p.prep.prep_noise_factor = 1.14;
    p.prep_quadratic = 3e-6;
    const auto plan = SequencePlan::double_prep();
    const auto a = run_trials(p, plan, 301, 77, 1);
    const auto b = run_trials(p, plan, 301, 77, 4);
    const auto c = run_trials(p, plan, 301, 78, 1);
    REQUIRE(a.records.size() == b.records.size());
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      same = same && std::memcmp(a.records[i].pulses.data(), b.records[i].pulses.data(), sizeof(double) * kSlotCount) == 0;
      same = same && a.records[i].flips_df == b.records[i].flips_df && a.records[i].trial_id == i;
      differs = differs || a.records[i].m1 != c.records[i].m1;
    }
    CHECK(same);
    CHECK(differs);
  }

  TEST_CASE("double preparation gives fresh states") {
    auto p = quiet_params();
    p.prep_quadratic = 4e-5;
    const auto set = run_trials(p, SequencePlan::double_prep(), 5000, 41);
    // Slow drift is common to all preparations of a trial and cancels in the difference.
    const auto y2 = sample_variance(set, [](const TrialRecord& r) { return r.mt1 - r.mt2; });
    check_within({2.0 * y2.var, 2.0 * y2.se}, kN0);
    const auto m1 = sample_variance(set, [](const TrialRecord& r) { return r.m1; });
    CHECK(m1.var > 0.25 * kN0 * 1.5);
  }

  TEST_CASE("rotation before readout") {
    auto p = quiet_params();
    // Back-action kick per pulse of p/2 photons on the transverse spin.
    const double kick2 = 0.25 * kN0 * kN0 * 0.5 * kP * p.phi_eff * p.phi_eff;
    const double var_y = 0.25 * kN0 + 2.0 * kick2;
    for (double a : {0.05, std::numbers::pi / 2}) {
      CAPTURE(a);
      const auto set = run_trials(p, SequencePlan::rotate_alpha(a), 5000, 51);
      const double c = std::cos(a), s = std::sin(a);
      check_within(sample_variance(set, [](const TrialRecord& r) { return r.m2; }),
                   c * c * 0.25 * kN0 + s * s * var_y);
    }
  }

  TEST_CASE("ramsey step converts phase into population") {
    auto p = quiet_params();
    const double phi = 1e-3;
    const auto set = run_trials(p, SequencePlan::ramsey_clock(phi, 0.0), 4000, 61);
    double mean_shift = 0;
    for (const auto& r : set.records) mean_shift += r.m2 - r.m1;
    mean_shift /= static_cast<double>(set.records.size());
    // The Ramsey pulse flips the measurement frame, so S_x sin(phi) appears with the frame sign.
    CHECK(std::abs(mean_shift) == Approx(0.5 * kN0 * std::sin(phi)).epsilon(0.05));
  }

  TEST_CASE("linear regime at reference parameters") {
    EngineParams p;
    p.rates = {2.63e-8, 1.459e-8, 1.539e-8};
    p.prep.prep_noise_factor = 1.14;
    const auto set = run_trials(p, SequencePlan::squeeze_readout(), 2000, 71);
    const auto v = sample_variance(set, [](const TrialRecord& r) { return r.m1; });
    CHECK(2.0 * std::sqrt(v.var) * p.domega_dn <= 0.01);
    CHECK(set.saturated_trials == 0);
    CHECK_FALSE(set.saturation_warning);
  }

  TEST_CASE("plan and parameter validation") {
    auto p = quiet_params();
    CHECK_THROWS_AS(run_trials(p, SequencePlan::squeeze_readout(), 1, 1), std::invalid_argument);
    auto plan = SequencePlan::squeeze_readout();
    plan.steps.erase(plan.steps.begin() + 2);
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
    plan = SequencePlan::squeeze_readout();
    plan.steps.insert(plan.steps.begin() + 2, SequenceStep{StepKind::composite_pi});
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
    plan = SequencePlan::squeeze_readout();
    plan.steps.erase(plan.steps.begin());
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
    for (const auto& ok : {SequencePlan::squeeze_readout(), SequencePlan::double_prep(), SequencePlan::rotate_alpha(0.3),
                           SequencePlan::ramsey_clock(0.1, 0.01)})
      CHECK_NOTHROW(ok.validate());
    auto bad = p;
    bad.probe.compensation_offset = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.probe.quantum_efficiency = 1.2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.probe.apd_excess_factor = 0.9;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("coherent pulse error bound") {
    CHECK(coherent_error_bound(2e-3 * std::numbers::pi, 0.10, kN0) == Approx(0.0130).epsilon(0.01));
    CHECK(coherent_error_bound(0.0, 0.1, kN0) == 0.0);
    CHECK(coherent_error_bound(0.1, 0.0, kN0) == 0.0);
    CHECK_THROWS_AS(coherent_error_bound(-1.0, 0.1, kN0), std::invalid_argument);
  }

  TEST_CASE("stream independence") {
    auto a = make_stream(5, StreamDomain::trial, 3);
    auto b = make_stream(5, StreamDomain::trial, 3);
    auto c = make_stream(5, StreamDomain::drift, 3);
    CHECK(a() == b());
    CHECK(a() != c());
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qnd/analysis.hpp"
#include "qnd/limits.hpp"

using namespace qnd;
using doctest::Approx;

namespace {

// Reference rates per transmitted photon at the +3.57 GHz probe.
LimitInputs reference_inputs() {
  LimitInputs in;
  in.collective_cooperativity = 3100;
  in.p_raman = 5.628e-8;
  in.p_scatter = 3.0 * 5.628e-8;
  in.phi_eff = 1.799e-4;
  in.rayleigh_f1 = 1.3844e-7;
  in.rayleigh_f2 = 8.606e-8;
  return in;
}

}  // namespace

TEST_SUITE("limits") {
  TEST_CASE("ideal sigma2") {
    CHECK(ideal_sigma2(3.3e4, 0.0, 1e-3) == 1.0);
    CHECK(ideal_sigma2(1.0, 1.0, 1.0) == 0.5);
    CHECK_THROWS_AS(ideal_sigma2(-1.0, 1.0, 1.0), std::invalid_argument);

    // The ODE without Raman flips solves to the same closed form when 2 eta_eff P_sc = phi_eff^2.
    const double n0 = 3.3e4, eta = 0.0948, phi = 0.47 * 2.54e-4;
    LimitInputs in;
    in.collective_cooperativity = n0 * eta;
    in.p_scatter = phi * phi / (2.0 * eta);
    in.phi_eff = phi;
    const auto c = integrate_sigma2(in, 1e5, 50);
    for (std::size_t i = 0; i < c.photons.size(); ++i)
      CHECK(std::abs(c.sigma2[i] / ideal_sigma2(n0, c.photons[i], phi) - 1.0) < 1e-6);
  }

  TEST_CASE("pure degradation without collective coupling") {
    LimitInputs in;
    in.p_raman = 1e-7;
    in.p_scatter = 3e-7;
    const auto c = integrate_sigma2(in, 1e6, 20);
    for (std::size_t i = 0; i < c.photons.size(); ++i)
      CHECK(c.sigma2[i] == Approx(1.0 + 4e-7 * c.photons[i]).epsilon(1e-9));
    const auto rep = limit_contrast_and_zeta(in);
    CHECK_FALSE(rep.warnings.empty());
  }

  TEST_CASE("closed-form limit at the reference cooperativity") {
    const auto in = reference_inputs();
    const auto r = limit_contrast_and_zeta(in);
    CHECK(r.sigma2_min == Approx(0.014663).epsilon(1e-4));
    CHECK(to_db(r.sigma2_min) == Approx(-18.3).epsilon(0.2 / 18.3));
    CHECK(r.p_opt_p_raman == Approx(0.012).epsilon(0.001 / 0.012));
    CHECK(r.contrast_loss == Approx(0.012).epsilon(0.002 / 0.012));
    CHECK(to_db(r.zeta_m_min) == Approx(-18.2).epsilon(0.01));
    CHECK(to_db(r.inverse_zeta_bound_coherent) == Approx(18.34).epsilon(1e-3));
    CHECK(r.inverse_zeta_bound_raman == Approx(r.inverse_zeta_bound_coherent).epsilon(1e-12));
    CHECK(r.warnings.empty());
  }

  TEST_CASE("closed-form identities") {
    CHECK(sigma2_min(3100, 0.0) == 0.0);
    CHECK(sigma2_min(4.0 * 3100, 1.0 / 3.0) == Approx(0.5 * sigma2_min(3100, 1.0 / 3.0)));
    for (double c : {1e2, 1e3, 1e4, 1e5})
      CHECK(sigma2_min(c, 0.3) * std::sqrt(c) == Approx(sigma2_min(1e2, 0.3) * 10.0).epsilon(1e-13));
    const double s = 8.0 * std::exp(-8.0);
    CHECK(optimal_photon_number(s, 1.0) == Approx(s));
    CHECK(optimal_photon_number(0.0147, 2.8e-8) == Approx(2.0 * optimal_photon_number(0.0147, 5.6e-8)));
    CHECK_THROWS_AS(optimal_photon_number(1.0, 1e-8), std::invalid_argument);

    LimitInputs in = reference_inputs();
    in.rayleigh_f1 = in.rayleigh_f2 = 1e-7;
    CHECK(limit_contrast_loss(in, 2e5) == Approx(2e5 * in.p_raman));
    in.p_raman = 0.0;
    CHECK(limit_contrast_loss(in, 2e5) == Approx(0.0).scale(1.0));
  }

  TEST_CASE("integrated curve approaches the closed-form minimum") {
    const auto in = reference_inputs();
    const auto r = limit_contrast_and_zeta(in);
    const auto c = integrate_sigma2(in, 20.0 * r.p_opt, 400);
    const double lowest = *std::min_element(c.sigma2.begin(), c.sigma2.end());
    CHECK(std::abs(lowest / r.sigma2_min - 1.0) < 1e-3);
    // The curve relaxes monotonically onto the fixed point sigma2_min (up to integrator tolerance there).
    for (std::size_t i = 1; i < c.sigma2.size(); ++i) CHECK(c.sigma2[i] <= c.sigma2[i - 1] * (1.0 + 1e-7));

    // Contrast loss turns zeta_m into a curve with a single interior minimum near p_opt.
    const auto z = zeta_m_curve(in, c);
    const auto it = std::min_element(z.begin(), z.end());
    const auto k = static_cast<std::size_t>(it - z.begin());
    CHECK(k > 0);
    CHECK(k + 1 < z.size());
    for (std::size_t i = 1; i <= k; ++i) CHECK(z[i] <= z[i - 1]);
    for (std::size_t i = k + 1; i < z.size(); ++i) CHECK(z[i] >= z[i - 1]);
  }

  TEST_CASE("curve at the optimal photon number") {
    for (double coop : {1e3, 3100.0, 1e4, 1e5}) {
      auto in = reference_inputs();
      in.collective_cooperativity = coop;
      const auto r = limit_contrast_and_zeta(in);
      const auto c = integrate_sigma2(in, r.p_opt, 10);
      CHECK(c.sigma2.back() == Approx(r.sigma2_min).epsilon(0.05));
    }
  }

  TEST_CASE("integration accuracy against a tighter reference") {
    const auto in = reference_inputs();
    const auto a = integrate_sigma2(in, 1e6, 100, 1e-8);
    const auto b = integrate_sigma2(in, 1e6, 100, 1e-11);
    for (std::size_t i = 0; i < a.sigma2.size(); ++i) CHECK(std::abs(a.sigma2[i] / b.sigma2[i] - 1.0) < 1e-6);
    const auto again = integrate_sigma2(in, 1e6, 100, 1e-8);
    CHECK(again.sigma2 == a.sigma2);
    CHECK_THROWS_AS(integrate_sigma2(in, 0.0), std::invalid_argument);
    auto bad = in;
    bad.p_scatter = 0.5 * in.p_raman;
    CHECK_THROWS_AS(integrate_sigma2(bad, 1e5), std::invalid_argument);
  }

  TEST_CASE("limits report") {
    const auto j = limit_contrast_and_zeta(reference_inputs()).to_json();
    for (const char* key : {"sigma2_min_db", "p_opt", "contrast_loss", "zeta_m_min_db", "inputs"})
      CHECK(j.contains(key));
  }
}

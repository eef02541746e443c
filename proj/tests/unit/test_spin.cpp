#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qnd/spin.hpp"

using namespace qnd;
using doctest::Approx;

namespace {

GaussianSpinState random_state(std::mt19937_64& rng, double n0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GaussianSpinState s;
  s.s0 = 0.5 * n0;
  Eigen::Vector3d dir(u(rng), u(rng), u(rng));
  s.mean = dir.normalized() * s.s0 * (0.3 + 0.6 * std::abs(u(rng)));
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = u(rng) * std::sqrt(n0);
  s.cov = a * a.transpose();
  return s;
}

}  // namespace

TEST_SUITE("spin") {
  TEST_CASE("prepare_css") {
    const auto s = prepare_css(3.3e4, {});
    CHECK(s.var_z() == Approx(8250.0));
    CHECK(s.var_y() == Approx(8250.0));
    CHECK(s.cov_yz() == 0.0);
    CHECK(s.contrast() == Approx(1.0));
    PreparationModel p;
    p.prep_noise_factor = 1.3;
    CHECK(prepare_css(3.3e4, p).var_z() == Approx(1.07e4).epsilon(0.01));
    CHECK_THROWS_AS(prepare_css(0.0, {}), std::invalid_argument);
    p.impurity_fraction = 0.3;
    CHECK_THROWS_AS(prepare_css(1e4, p), std::invalid_argument);
  }

  TEST_CASE("rotation about the mean spin") {
    auto s = prepare_css(3.3e4, {});
    s.cov(2, 2) = 1000.0;
    s.cov(1, 1) = 50000.0;
    s.cov(1, 2) = s.cov(2, 1) = 300.0;
    const auto id = rotate(s, RotationAxis::mean_spin, 0.0);
    CHECK((id.cov - s.cov).norm() == Approx(0.0));
    const auto q = rotate(s, RotationAxis::mean_spin, std::numbers::pi / 2);
    CHECK(q.var_z() == Approx(s.var_y()).epsilon(1e-12));
    CHECK(q.var_y() == Approx(s.var_z()).epsilon(1e-12));
    for (double a : {0.1, 0.7, 1.3, 2.9}) {
      const auto r = rotate(s, RotationAxis::mean_spin, a);
      CHECK(r.var_z() == Approx(rotated_z_variance(s, a)).epsilon(1e-12));
      CHECK(std::abs(r.mean.norm() - s.mean.norm()) < 1e-12 * s.mean.norm());
      CHECK(r.cov.determinant() == Approx(s.cov.determinant()).epsilon(1e-10));
    }
  }

  TEST_CASE("rotated variance against Monte Carlo sampling of the Gaussian state") {
    auto s = prepare_css(1e4, {});
    s.cov(2, 2) = 400.0;
    s.cov(1, 1) = 9000.0;
    s.cov(1, 2) = s.cov(2, 1) = 1200.0;
    const double a = 0.4;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    Eigen::LLT<Eigen::Matrix2d> llt(s.cov.block<2, 2>(1, 1));
    const Eigen::Matrix2d l = llt.matrixL();
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d yz = l * Eigen::Vector2d(g(rng), g(rng));
      const double z = std::sin(a) * yz(0) + std::cos(a) * yz(1);
      sum += z;
      sum2 += z * z;
    }
    const double var = (sum2 - sum * sum / n) / (n - 1);
    const double expect = rotated_z_variance(s, a);
    CHECK(std::abs(var - expect) < 3.0 * expect * std::sqrt(2.0 / (n - 1)));
  }

  TEST_CASE("composite pi") {
    auto s = prepare_css(3.3e4, {});
    s.mean = {1000.0, 0.0, 300.0};
    const auto ideal = composite_pi(s, {0.0});
    CHECK(ideal.mean.z() == Approx(-300.0));
    CHECK(ideal.var_z() == Approx(s.var_z()));
    const auto scrambled = composite_pi(s, {0.5});
    CHECK(scrambled.mean.z() == Approx(0.0));
    CHECK(scrambled.var_z() == Approx(3.3e4 / 4));
    const auto two = composite_pi(s, {0.02});
    CHECK(two.var_z() == Approx(0.96 * 0.96 * 8250 + 0.0196 * 3.3e4).epsilon(1e-12));
    CHECK(two.var_z() == Approx(8250.0).epsilon(1e-12));
    CHECK(two.mean.z() == Approx(-0.96 * 300.0));
  }

  TEST_CASE("composite pi against binomial flip sampling") {
    // N atoms with s = +-1/2 drawn from a CSS, each flipped with probability 1 - mu.
    const int n_atoms = 2000, trials = 20000;
    const double mu = 0.05;
    std::mt19937_64 rng(11);
    std::binomial_distribution<int> up(n_atoms, 0.5);
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < trials; ++t) {
      const int n_up = up(rng);
      const int fail_up = std::binomial_distribution<int>(n_up, mu)(rng);
      const int fail_dn = std::binomial_distribution<int>(n_atoms - n_up, mu)(rng);
      // Flipped ups become downs, and vice versa.
      const int after_up = fail_up + (n_atoms - n_up - fail_dn);
      const double sz = after_up - 0.5 * n_atoms;
      sum += sz;
      sum2 += sz * sz;
    }
    const double var = (sum2 - sum * sum / trials) / (trials - 1);
    auto s = prepare_css(n_atoms, {});
    const auto out = composite_pi(s, {mu});
    CHECK(std::abs(var - out.var_z()) < 3.0 * out.var_z() * std::sqrt(2.0 / (trials - 1)));
  }

  TEST_CASE("measurement back-action and conditioning") {
    const double n0 = 3.3e4, p = 2e5, phi = 1.8e-4;
    const auto s = prepare_css(n0, {});
    const auto same = measurement_backaction(s, 0.0, phi);
    CHECK((same.cov - s.cov).norm() == 0.0);
    CHECK(same.contrast() == s.contrast());
    const auto b = measurement_backaction(s, p, phi);
    const double k = n0 * p * phi * phi;
    CHECK(b.var_y() == Approx(s.css_variance() * (1.0 + k)));
    const auto c = condition_on_measurement(b, 0.0, shot_noise_measurement_variance(p, phi));
    CHECK(c.var_z() / s.css_variance() == Approx(1.0 / (1.0 + k)).epsilon(1e-6));
    CHECK(c.var_z() * c.var_y() == Approx(s.css_variance() * s.css_variance()).epsilon(1e-10));
    ContrastModel cm{7e-7, 9e-13};
    PreparationModel prep;
    prep.initial_contrast = 0.69;
    const auto d = measurement_backaction(prepare_css(n0, prep), 3e5, phi, cm);
    CHECK(d.contrast() == Approx(0.537).epsilon(1e-3));
  }

  TEST_CASE("conditioning examples") {
    auto s = prepare_css(3.3e4, {});
    s.cov(2, 2) = 9405.0;
    CHECK(condition_on_measurement(s, 10.0, 1206.0).var_z() == Approx(9405.0 * 1206.0 / (9405.0 + 1206.0)));
    CHECK(condition_on_measurement(s, 10.0, 1206.0).var_z() == Approx(1069).epsilon(1e-3));
    CHECK(condition_on_measurement(s, 0.0, 9405.0).var_z() == Approx(9405.0 / 2));
    const auto inf = condition_on_measurement(s, 50.0, std::numeric_limits<double>::infinity());
    CHECK((inf.cov - s.cov).norm() == 0.0);
    CHECK((inf.mean - s.mean).norm() == 0.0);
    CHECK_THROWS(condition_on_measurement(s, 0.0, 0.0));
  }

  TEST_CASE("raman flip update") {
    const double n0 = 3.3e4;
    const auto s = prepare_css(n0, {});
    const auto same = raman_flip_update(s, ScatteringRates{}, 1e5);
    CHECK((same.cov - s.cov).norm() == 0.0);
    ScatteringRates r;
    r.p_delta_f = 1e-8;
    r.p_raman_total = 1e-8;
    const double p = 1e6, eps = p * r.p_delta_f;
    const auto f = raman_flip_update(s, r, p);
    CHECK(f.var_z() == Approx((1 - 2 * eps) * (1 - 2 * eps) * s.var_z() + eps * (1 - eps) * n0).epsilon(1e-12));
    r.p_raman_total = 2e-7;
    CHECK_THROWS_AS(raman_flip_update(s, r, 1e6), std::domain_error);
  }

  TEST_CASE("raman flip update against per-atom flip sampling") {
    const int n_atoms = 4000, trials = 20000;
    const double eps = 0.03, eps_l = 0.02;
    std::mt19937_64 rng(5);
    std::binomial_distribution<int> up(n_atoms, 0.5);
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < trials; ++t) {
      const int n_up = up(rng), n_dn = n_atoms - n_up;
      // Losses first, then F flips among the remaining clock atoms (order is irrelevant in distribution).
      const int lu = std::binomial_distribution<int>(n_up, eps_l)(rng);
      const int ld = std::binomial_distribution<int>(n_dn, eps_l)(rng);
      const int fu = std::binomial_distribution<int>(n_up - lu, eps)(rng);
      const int fd = std::binomial_distribution<int>(n_dn - ld, eps)(rng);
      const double sz = 0.5 * ((n_up - lu - fu + fd) - (n_dn - ld - fd + fu));
      sum += sz;
      sum2 += sz * sz;
    }
    const double var = (sum2 - sum * sum / trials) / (trials - 1);
    ScatteringRates r;
    r.p_delta_f = eps;
    r.p_delta_mf = eps_l;
    r.p_raman_total = eps + eps_l;
    const auto out = raman_flip_update(prepare_css(n_atoms, {}), r, 1.0);
    CHECK(std::abs(var - out.var_z()) < 3.0 * out.var_z() * std::sqrt(2.0 / (trials - 1)));
  }

  TEST_CASE("randomized invariants") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 300; ++k) {
      const auto s = random_state(rng, 1e4);
      REQUIRE(s.is_psd());
      const double len = s.mean.norm();
      const auto a = composite_pi(s, {0.1 * u(rng)});
      const auto b = measurement_backaction(s, 1e5 * u(rng), 2e-4, {1e-7, 1e-12});
      const auto c = condition_on_measurement(s, 100.0 * (u(rng) - 0.5), 10.0 + 5000.0 * u(rng));
      ScatteringRates r;
      r.p_delta_f = 1e-8 * u(rng);
      r.p_delta_mf = 1e-8 * u(rng);
      r.p_raman_total = r.p_delta_f + r.p_delta_mf;
      const auto d = raman_flip_update(s, r, 1e6 * u(rng));
      const auto e = rotate(s, RotationAxis::mean_spin, 6.0 * u(rng));
      for (const auto* x : {&a, &b, &c, &d, &e}) CHECK(x->is_psd());
      for (const auto* x : {&a, &b, &c, &d}) CHECK(x->mean.norm() <= len * (1 + 1e-12));
      CHECK(c.var_z() <= s.var_z() * (1 + 1e-12));
      CHECK(e.cov.determinant() == Approx(s.cov.determinant()).epsilon(1e-10));
      CHECK(std::abs(e.mean.norm() - len) <= 1e-12 * len);
    }
  }
}

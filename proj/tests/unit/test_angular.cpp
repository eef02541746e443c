#include <doctest.h>

#include <cmath>

#include "qnd/angular.hpp"
#include "qnd/cavity.hpp"
#include "qnd/constants.hpp"

using namespace qnd;
using doctest::Approx;

TEST_SUITE("angular") {
  TEST_CASE("3j symbols against tabulated values") {
    CHECK(angular::wigner_3j(2, 2, 0, 0, 0, 0) == Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(angular::wigner_3j(1, 1, 2, 1, -1, 0) == Approx(1.0 / std::sqrt(6.0)).epsilon(1e-14));
    CHECK(angular::wigner_3j(2, 2, 2, 0, 0, 0) == 0.0);
    CHECK(angular::wigner_3j(4, 2, 2, 0, 0, 0) == Approx(std::sqrt(2.0 / 15.0)).epsilon(1e-14));
    // Selection rules.
    CHECK(angular::wigner_3j(2, 2, 2, 2, 0, 0) == 0.0);
    CHECK(angular::wigner_3j(2, 2, 6, 0, 0, 0) == 0.0);
  }

  TEST_CASE("6j symbols against tabulated values") {
    CHECK(angular::wigner_6j(2, 2, 2, 2, 2, 2) == Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(angular::wigner_6j(1, 1, 2, 1, 1, 0) == Approx(0.5).epsilon(1e-14));
    // {1/2 3/2 1; 3 2 3/2}, the F=2 -> F'=3 recoupling coefficient: 1/sqrt(20).
    CHECK(angular::wigner_6j(1, 3, 2, 6, 4, 3) == Approx(1.0 / std::sqrt(20.0)).epsilon(1e-14));
  }

  TEST_CASE("3j orthogonality") {
    const int tj1 = 3, tj2 = 2;
    for (int tj3 = 1; tj3 <= 5; tj3 += 2) {
      for (int tj3p = 1; tj3p <= 5; tj3p += 2) {
        for (int tm3 = -tj3; tm3 <= tj3; tm3 += 2) {
          double sum = 0.0;
          for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2) {
            const int tm2 = -tm3 - tm1;
            if (std::abs(tm2) > tj2) continue;
            sum += (tj3 + 1) * angular::wigner_3j(tj1, tj2, tj3, tm1, tm2, tm3) *
                   angular::wigner_3j(tj1, tj2, tj3p, tm1, tm2, tm3);
          }
          if (std::abs(tm3) > tj3p)
            CHECK(sum == Approx(0.0));
          else
            CHECK(sum == Approx(tj3 == tj3p ? 1.0 : 0.0).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("excited sublevels decay with unit total strength") {
    for (int fp = 0; fp <= 3; ++fp) {
      for (int mp = -fp; mp <= fp; ++mp) {
        double s = 0.0;
        for (int f = 1; f <= 2; ++f)
          for (int m = -f; m <= f; ++m) {
            const double d = angular::d2_dipole_element(f, m, fp, mp);
            s += d * d;
          }
        CHECK(s == Approx(1.0).epsilon(1e-12));
      }
    }
    CHECK(std::abs(angular::d2_dipole_element(2, 2, 3, 3)) == Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("summed sublevel strengths reproduce the tabulated S_FF'") {
    const auto c = PhysicalConstants::rb87();
    for (const auto& [key, s_ff] : c.line_strengths) {
      const auto [f, fp] = key;
      // Isotropic ground level: each sublevel carries total strength (2J'+1)/(2J+1) = 2.
      for (int m = -f; m <= f; ++m) {
        double s = 0.0;
        for (int mp = -fp; mp <= fp; ++mp) {
          const double d = angular::d2_dipole_element(f, m, fp, mp);
          s += d * d;
        }
        CHECK(s == Approx(2.0 * s_ff).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("clock-state sigma+/sigma- strengths sum to the oscillator strength") {
    for (int f = 1; f <= 2; ++f) {
      double s = 0.0;
      for (int fp = 0; fp <= 3; ++fp) s += clock_line_strength(f, fp);
      CHECK(s == Approx(2.0 / 3.0).epsilon(1e-12));
    }
  }
}

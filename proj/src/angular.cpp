#include "qnd/angular.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qnd::angular {
namespace {

// n! for the small arguments that occur here (n <= 20 keeps full precision).
double factorial(int n) {
  if (n < 0) throw std::logic_error("negative factorial argument");
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

// Doubled value -> integer, requiring even parity.
int half(int doubled) {
  if (doubled % 2 != 0) throw std::logic_error("non-integer combination of angular momenta");
  return doubled / 2;
}

bool triangle(int ta, int tb, int tc) {
  return tc >= std::abs(ta - tb) && tc <= ta + tb && (ta + tb + tc) % 2 == 0;
}

double triangle_coefficient(int ta, int tb, int tc) {
  return factorial(half(ta + tb - tc)) * factorial(half(ta - tb + tc)) * factorial(half(-ta + tb + tc)) /
         factorial(half(ta + tb + tc) + 1);
}

}  // namespace

double wigner_3j(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3) {
  if (tm1 + tm2 + tm3 != 0) return 0.0;
  if (!triangle(tj1, tj2, tj3)) return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tm3) > tj3) return 0.0;
  if ((tj1 + tm1) % 2 || (tj2 + tm2) % 2 || (tj3 + tm3) % 2) return 0.0;

  const int kmin = std::max({0, half(tj2 - tj3 - tm1), half(tj1 - tj3 + tm2)});
  const int kmax = std::min({half(tj1 + tj2 - tj3), half(tj1 - tm1), half(tj2 + tm2)});
  double sum = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    const double den = factorial(k) * factorial(half(tj3 - tj2 + tm1) + k) * factorial(half(tj3 - tj1 - tm2) + k) *
                       factorial(half(tj1 + tj2 - tj3) - k) * factorial(half(tj1 - tm1) - k) *
                       factorial(half(tj2 + tm2) - k);
    sum += ((k % 2) ? -1.0 : 1.0) / den;
  }
  const double pre = std::sqrt(triangle_coefficient(tj1, tj2, tj3) * factorial(half(tj1 + tm1)) *
                               factorial(half(tj1 - tm1)) * factorial(half(tj2 + tm2)) * factorial(half(tj2 - tm2)) *
                               factorial(half(tj3 + tm3)) * factorial(half(tj3 - tm3)));
  const int phase = half(tj1 - tj2 - tm3);
  return ((phase % 2) ? -1.0 : 1.0) * pre * sum;
}

double wigner_6j(int tj1, int tj2, int tj3, int tj4, int tj5, int tj6) {
  if (!triangle(tj1, tj2, tj3) || !triangle(tj1, tj5, tj6) || !triangle(tj4, tj2, tj6) || !triangle(tj4, tj5, tj3))
    return 0.0;
  const int a1 = half(tj1 + tj2 + tj3);
  const int a2 = half(tj1 + tj5 + tj6);
  const int a3 = half(tj4 + tj2 + tj6);
  const int a4 = half(tj4 + tj5 + tj3);
  const int b1 = half(tj1 + tj2 + tj4 + tj5);
  const int b2 = half(tj2 + tj3 + tj5 + tj6);
  const int b3 = half(tj3 + tj1 + tj6 + tj4);
  const int tmin = std::max({a1, a2, a3, a4});
  const int tmax = std::min({b1, b2, b3});
  double sum = 0.0;
  for (int t = tmin; t <= tmax; ++t) {
    const double den = factorial(t - a1) * factorial(t - a2) * factorial(t - a3) * factorial(t - a4) *
                       factorial(b1 - t) * factorial(b2 - t) * factorial(b3 - t);
    sum += ((t % 2) ? -1.0 : 1.0) * factorial(t + 1) / den;
  }
  return std::sqrt(triangle_coefficient(tj1, tj2, tj3) * triangle_coefficient(tj1, tj5, tj6) *
                   triangle_coefficient(tj4, tj2, tj6) * triangle_coefficient(tj4, tj5, tj3)) *
         sum;
}

namespace {

// Unnormalized element following the standard reduction to <J||d||J'>.
double raw_element(int f, int m_f, int f_prime, int m_f_prime) {
  constexpr int tj = 1;   // J = 1/2
  constexpr int tjp = 3;  // J' = 3/2
  constexpr int ti = 3;   // I = 3/2
  const int q = m_f - m_f_prime;
  if (std::abs(q) > 1) return 0.0;
  const int reduced_phase = half(2 * f_prime + tj + 2 + ti);
  const double reduced = ((reduced_phase % 2) ? -1.0 : 1.0) * std::sqrt((2.0 * f_prime + 1.0) * (tj + 1.0)) *
                         wigner_6j(tj, tjp, 2, 2 * f_prime, 2 * f, ti);
  const int phase = f_prime - 1 + m_f;
  return reduced * ((phase % 2 != 0) ? -1.0 : 1.0) * std::sqrt(2.0 * f + 1.0) *
         wigner_3j(2 * f_prime, 2, 2 * f, 2 * m_f_prime, 2 * q, -2 * m_f);
}

}  // namespace

double d2_dipole_element(int f, int m_f, int f_prime, int m_f_prime) {
  static const double cycling = std::abs(raw_element(2, 2, 3, 3));
  if (f < 1 || f > 2 || f_prime < 0 || f_prime > 3) return 0.0;
  if (std::abs(m_f) > f || std::abs(m_f_prime) > f_prime) return 0.0;
  return raw_element(f, m_f, f_prime, m_f_prime) / cycling;
}

}  // namespace qnd::angular

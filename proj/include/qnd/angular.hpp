#pragma once

// Angular-momentum coupling coefficients. Arguments are passed as doubled
// integers (2j, 2m) so half-integer momenta are exact.

namespace qnd::angular {

double wigner_3j(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3);
double wigner_6j(int tj1, int tj2, int tj3, int tj4, int tj5, int tj6);

/// Dipole matrix element <F mF| d_q |F' mF'> (q = mF - mF') on the D2 line
/// (J=1/2 -> J'=3/2, I=3/2), normalized so the cycling transition
/// |2,2> <-> |3',3'> has unit squared magnitude. Every excited sublevel then
/// has total decay strength 1.
double d2_dipole_element(int f, int m_f, int f_prime, int m_f_prime);

}  // namespace qnd::angular

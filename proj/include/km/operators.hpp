#pragma once

#include "km/decomposition.hpp"
#include "km/grid.hpp"

namespace km {

// (K0 g)(x) = int G(x-y) Gamma0^{-1} g(y) dy on [-L, L], G the Green function
// of Gamma0 v' = E0 v, plus closed-form tail corrections that extend g by its
// boundary values as constants. The convolution uses exact exponential-kernel
// moments against a piecewise-cubic interpolant of g, so constants are
// reproduced exactly and smooth data is O(h^4). Input values are projected
// onto Vt; the result has values in Vt. Satisfies Gamma0 (K0 g)' = E0 K0 g + g
// in the interior up to interpolation and tail error.
GridFunction apply_K0(const Decomposition& dec, const GridFunction& g);

// (V g)(x) = int_0^x g(y) dy by cumulative integration of the piecewise-cubic
// interpolant; x = 0 is a node and (Vg)(0) = 0 exactly.
GridFunction apply_volterra(const GridFunction& g);

// K f = V(Gamma3 f) + Gamma4 K0 (P_Vt f) for f with values in V.
GridFunction apply_K(const Decomposition& dec, const GridFunction& f);

// u = w0 + f_c(., P_V1 w0) + K f, the H1_{-alpha} solution of
// A u' = Q'(u_bar) u + f with P_c u(0) = w0.
GridFunction solve_inhomogeneous(const Decomposition& dec, const Vec& w0,
                                 const GridFunction& f);

// f_c(x, v1) = x * E1 (I - E0^{-1} P_Vt E) v1, ambient; v1 given as the
// V1-component of an ambient vector.
Vec center_drift(const Decomposition& dec, const Vec& w0, double x);

// Interior residual of A u' - Q'(u_bar) u - f (4th-order differences),
// max over nodes with |x| <= interior_fraction * L.
double linear_residual(const Decomposition& dec, const KineticModel& model,
                       const GridFunction& u, const GridFunction& f,
                       double interior_fraction = 0.8);

}  // namespace km

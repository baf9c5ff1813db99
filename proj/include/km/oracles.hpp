#pragma once

#include <complex>
#include <functional>

#include "km/decomposition.hpp"
#include "km/grid.hpp"

namespace km {

// Generalized eigen-data of the pencil Q'(u_bar) x = lambda A x, with the
// Jordan-chain structure at lambda = 0. Built from a generic QZ eigensolve
// plus SVD kernel chains; shares no code path with build_decomposition.
struct PencilSpectrum {
    Vec eigenvalues;       // all n, real (asserted), unsorted
    Mat Hc_basis;          // n x n_c, orthonormalized
    Mat Hs_basis, Hu_basis;
    Mat Pc;                // spectral projection onto the center space
    int n_center = 0, n_stable = 0, n_unstable = 0;
    int chains_height2 = 0;  // number of height-2 Jordan chains at lambda = 0
};

PencilSpectrum pencil_trichotomy(const KineticModel& m);

// 4th-order central-difference Jacobian of an arbitrary map.
Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& point, double step);

// Fourier-path reference for apply_K0: FFT, multiply by
// (2*pi*i*omega*Gamma0 - E0)^{-1}, inverse FFT. Valid for decaying inputs;
// requires m-1 to be a power of two.
GridFunction fourier_k0(const Decomposition& dec, const GridFunction& g);

// Adaptive Simpson quadrature to absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol);

// Full-system steady BVP: solves A w' = 2B(u_bar,w) + B(w,w) between the
// endstates w_minus/w_plus (deviations from u_bar) by damped Newton on a
// box-scheme discretization with trichotomy boundary conditions and the
// phase condition <r_dir, w(0)>_gram = phase_value on the V-perp part.
struct BvpConfig {
    double L = 0.0;
    int m = 0;
    int max_iter = 40;
    double tol = 1e-11;
    double guess_rate = 0.0;  // tanh rate of the initial guess; 6/L if 0
};
GridFunction bvp_full_shoot(const KineticModel& model, const Decomposition& dec,
                            const Vec& w_minus, const Vec& w_plus, const Vec& r_dir,
                            double phase_value, const BvpConfig& cfg);

}  // namespace km

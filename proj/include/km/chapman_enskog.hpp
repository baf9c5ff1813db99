#pragma once

#include "km/decomposition.hpp"

namespace km {

enum class CaseTag { Noncharacteristic, SimpleGNL, LinearlyDegenerate, Unclassified };

struct Classification {
    CaseTag tag = CaseTag::Unclassified;
    int m = 0;            // dim ker f*'(u_bar) (characteristic multiplicity)
    Vec r_bar;            // unit kernel eigenvector (ambient, empty if m = 0)
    double Lambda = 0.0;  // r.f*''(r,r), Richardson second differences
    Mat kappa;            // r' D* r on the kernel block (m x m; 1 x 1 for GNL)
    Vec f_prime_eigs;     // spectrum of f*'(u_bar)
    std::string diagnostics;

    std::string to_json() const;
};

struct NewtonOptions {
    double basin_radius = 0.0;  // 0: default 0.1*||u_bar|| + 0.1
    int max_iter = 60;
};

// v*(u): V-valued solution of Q(u_bar + u + v) = 0, Newton from v = 0.
// u is an ambient vector in V-perp.
Vec equilibrium_graph(const KineticModel& m, const Decomposition& dec, const Vec& u,
                      const NewtonOptions& opt = {});

// f*(u) = P_Vperp A (u + v*(u)), ambient V-perp vector; f*(0) = 0.
Vec flux(const KineticModel& m, const Decomposition& dec, const Vec& u,
         const NewtonOptions& opt = {});

// Jacobian of the flux at u via implicit differentiation, as a p x p matrix
// in the V-perp block of the adapted frame.
Mat flux_jacobian(const KineticModel& m, const Decomposition& dec, const Vec& u,
                  const NewtonOptions& opt = {});

// D* = -A12 E^{-1} A12^*, p x p in the V-perp block of the adapted frame.
Mat viscosity(const KineticModel& m, const Decomposition& dec);

// The eigenvalue of f*'(u) nearest zero (the characteristic speed that
// vanishes at u_bar).
double lambda_weak(const KineticModel& m, const Decomposition& dec, const Vec& u,
                   const NewtonOptions& opt = {});

Classification classify(const KineticModel& m, const Decomposition& dec, double tol = 1e-6);

struct RankineHugoniot {
    Vec u_minus, u_plus;  // ambient V-perp states, u_minus the x = -inf side
    Vec q;                // shared flux value (ambient V-perp vector)
    double q1 = 0.0;      // <r_bar, q>
};

// Endstates of the standing shock with amplitude parameter eps:
// q1 = Lambda eps^2 / 2, Newton on f*(u) = q1 r_bar from both branches.
RankineHugoniot rankine_hugoniot(const KineticModel& m, const Decomposition& dec,
                                 const Classification& cls, double eps,
                                 const NewtonOptions& opt = {});

}  // namespace km

#pragma once

#include <map>

#include "km/center_manifold.hpp"

namespace km {

enum class ProfileKind { Relaxation, CE2, BurgersExact };

struct Profile {
    ProfileKind kind = ProfileKind::Relaxation;
    GridFunction grid;   // full deviation state for Relaxation; V-perp
                         // coordinates (p columns) for CE2; scalar for Burgers
    Vec u1;              // scalar coordinate <r_bar, u(x)> per node
    Vec lambda_path;     // characteristic speed along the profile (empty for Burgers)
    double eps = 0.0;
    double q1 = 0.0;
    Vec q;               // flux constant, ambient V-perp vector
    Vec u_minus, u_plus; // endstates: full deviation states (Relaxation),
                         // V-perp coordinate vectors (CE2), scalars (Burgers)
    std::map<std::string, double> metrics;
};

struct ProfileConfig {
    double L_scale = 16.0;    // grid half-width = L_scale * kappa / (|Lambda| eps)
    int m = 2049;
    int expansion_order = 6;  // Taylor order of the manifold reduction
    double rk_rel_tol = 1e-10;
    double ball_radius = 0.0; // manifold validity ball; 0 = 0.35 * basin radius
};

// eta(x) = -eps * tanh(Lambda eps x / (2 kappa))
double burgers_exact(double eps, double Lambda, double kappa, double x);
Profile burgers_profile(double eps, double Lambda, double kappa, double L, int m);

// Heteroclinic of the manifold-reduced fiber flow, reconstructed to the full
// state via the expansion; phase condition u1(0) = midpoint of the endstates.
Profile relaxation_profile(const KineticModel& model, const Decomposition& dec,
                           const Classification& cls, double eps, const ProfileConfig& cfg);

// Viscous profile of u' = D*^{-1}(f*(u) - q), collocation-free shooting from
// the weak direction of the x = -inf endstate (or reversed when the strong
// spectrum is unstable).
Profile ce2_profile(const KineticModel& model, const Decomposition& dec,
                    const Classification& cls, double eps, const ProfileConfig& cfg);

// Corollary-style comparison metrics for phase-aligned profiles on one grid.
std::map<std::string, double> compare_profiles(const KineticModel& model,
                                               const Decomposition& dec,
                                               const Classification& cls, const Profile& rel,
                                               const Profile& ce);

struct LdgFiberReport {
    double q1 = 0.0;
    double max_field_on_fiber = 0.0;   // q1 = 0: sup |reduced field| on the ball
    double min_field_on_fiber = 0.0;   // q1 != 0: inf |reduced field| on the ball
    bool all_equilibria = false;
    bool exits_forward = false;
    bool exits_backward = false;
};

std::vector<LdgFiberReport> ldg_fiber_check(const KineticModel& model, const Decomposition& dec,
                                            const Classification& cls,
                                            const std::vector<double>& q1_values,
                                            const ProfileConfig& cfg);

struct SweepRow {
    double eps = 0.0;
    double sup_u_diff = 0.0;      // sup |u_REL - u_CE|
    double sup_du_diff = 0.0;     // sup |d(u_REL - u_CE)|
    double sup_v_diff = 0.0;      // sup |v_REL - v*(u_CE)|
    double endstate_err = 0.0;    // max |u1_pm -+ eps| against the Burgers limits
    double tail_sup = 0.0;        // max one-sided sup |u_REL - u_pm|
    double burgers_sup = 0.0;     // sup |u1_REL - burgers_exact|
    double monotone_margin = 0.0; // min |d lambda/dx| near the center, scaled
    bool monotone = false;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::map<std::string, double> slopes;  // log-log fits over eps
};

SweepTable epsilon_sweep(const KineticModel& model, const Decomposition& dec,
                         const Classification& cls, const std::vector<double>& eps_list,
                         const ProfileConfig& cfg, int jobs = 1);

}  // namespace km

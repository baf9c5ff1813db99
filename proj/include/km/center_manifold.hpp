#pragma once

#include "km/chapman_enskog.hpp"
#include "km/grid.hpp"
#include "km/poly.hpp"
#include "km/spaces.hpp"

namespace km {

// Canonical coordinates (w_c, w_h) of the adapted frame: the center block
// w_c = (c1, c2, c3) with c1, c2 in ker A11 and c3 in im A11, and the
// hyperbolic block w_h in Vt. The system becomes
//   w_c' = J w_c + g_c,   Gamma0 w_h' = E0 w_h + g_h.
struct CanonicalFrame {
    int n = 0, p = 0, r = 0, q = 0, nt = 0, dc = 0;
    Mat fwd;  // (dc + nt) x n: adapted coords -> (w_c, w_h)
    Mat inv;  // n x (dc + nt)
    Mat J;    // dc x dc nilpotent block-Jordan matrix

    Vec to_canonical(const Decomposition& dec, const Vec& ambient) const;
    Vec from_canonical(const Decomposition& dec, const Vec& canonical) const;
};

CanonicalFrame build_canonical(const Decomposition& dec);

// Taylor expansion of the manifold graph Xi: w_c -> w_h (degrees 2..order)
// and of the reduced center flow w_c' = J w_c + g_c(w_c, Xi(w_c)).
struct CenterManifoldExpansion {
    int order = 0;
    int dc = 0, nt = 0;
    PolyMap Xi;        // dc -> nt, no constant or linear terms
    PolyMap gc;        // dc -> dc, quadratic and higher terms of the flow
    double residual_estimate = 0.0;

    std::string to_json() const;
};

CenterManifoldExpansion taylor_expand(const Decomposition& dec, const KineticModel& model,
                                      int order);

// J w_c + g_c(w_c, Xi(w_c)) evaluated at a center coordinate vector.
Vec reduced_field(const CenterManifoldExpansion& exp, const CanonicalFrame& frame,
                  const Vec& w_c);

// Residual of the defining relation
// Gamma0 Xi'(w_c)(J w_c + g_c) - E0 Xi(w_c) - g_h at a sample point.
double defining_relation_residual(const CenterManifoldExpansion& exp, const CanonicalFrame& frame,
                                  const Decomposition& dec, const KineticModel& model,
                                  const Vec& w_c);

// Max norm of the degree-2..max_degree coefficients of the kernel-fiber
// field: the c1-block of g_c restricted to pure-c1 monomials (the q1 = 0,
// zero-parameter fiber). Zero for a linearly degenerate model.
double kernel_fiber_terms_norm(const KineticModel& model, const Decomposition& dec,
                               int max_degree);

struct NormalForm {
    Mat kappa;            // m x m (from the classification)
    double chi = 0.0;     // quadratic fiber coefficient (r = 1)
    double kappa_chi = 0.0;
    double lambda_half = 0.0;
    double deviation = 0.0;  // |kappa chi - Lambda/2| / |Lambda/2|
    double ldg_quadratic_norm = 0.0;  // kernel-fiber quadratic terms (LDG case)
};

NormalForm normal_form(const CenterManifoldExpansion& exp, const CanonicalFrame& frame,
                       const Decomposition& dec, const Classification& cls);

// Smooth bump: 1 on [-1,1], support in [-2,2]; evaluated for s >= 0.
double cutoff_rho(double s);
double cutoff_rho_d1(double s);
double cutoff_rho_d2(double s);

// Pointwise cutoff nonlinearity N(h) = rho(|h|^2/eps0^2) B(h,h) with its
// first two derivatives (for the substitution-operator checks).
SmoothMapSpec make_cutoff_quadratic_spec(const KineticModel& model, double eps0);

struct PicardConfig {
    double eps0 = 0.0;   // cutoff radius
    double eps1 = 0.0;   // ball radius for w0
    double delta = 0.0;  // H1_{-alpha} ball radius
    WeightParams weights;
    double grid_L = 0.0;
    int grid_m = 2049;
    int max_iter = 80;
    double tol_fixpoint = 1e-13;
};

struct PicardConstants {
    double c_B = 0.0;  // bilinear map norm
    double c_K = 0.0;  // operator norm of K on the probe set (Z and H1 weighted)
    double c = 0.0;    // effective constant used in the smallness conditions
};

PicardConstants measure_picard_constants(const Decomposition& dec, const KineticModel& model,
                                         const PicardConfig& cfg);

// Defaults: alpha = 0.05 nu, gamma = 0.1 nu, beta = 0.25 nu, L = 20/nu,
// m = 2049, and eps0/eps1/delta from the measured constant c.
PicardConfig default_picard_config(const Decomposition& dec, const KineticModel& model);

// Throws NumericError if the smallness conditions c*eps0 < 1/4,
// c*eps1 < delta/2, c*delta < 1/4 fail for the measured c.
void validate_picard_config(const PicardConfig& cfg, const PicardConstants& k,
                            const Decomposition& dec);

struct PicardResult {
    GridFunction solution;              // ambient values
    std::vector<double> distances;      // successive Z distances
    std::vector<double> ratios;         // contraction ratios
    double residual = 0.0;              // interior residual of the truncated equation
    int iterations = 0;
    bool converged = false;
};

// Picard iteration w_{n+1} = F_c(., w0) + K[rho(|w_n|^2/eps0^2) B(w_n,w_n)],
// w_1 = 0, monitored in Z_{gamma,beta}.
PicardResult picard_solve(const Decomposition& dec, const KineticModel& model, const Vec& w0,
                          const PicardConfig& cfg);

// J_c(w0) = (Id - P_c) wbar(0, w0).
Vec graph_Jc(const Decomposition& dec, const PicardResult& solution);

}  // namespace km

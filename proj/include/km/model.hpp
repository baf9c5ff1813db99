#pragma once

#include <optional>
#include <string>
#include <vector>

#include "km/common.hpp"

namespace km {

// A finite-dimensional kinetic relaxation model A w' = Q(w), Q(w) = B(w,w),
// on R^n with inner product <x,y> = x' * gram * y. Immutable after
// construction; all operations are pure.
struct KineticModel {
    int dim = 0;
    Mat gram;                 // n x n, symmetric positive definite
    Mat A;                    // n x n, gram-self-adjoint, injective
    std::vector<Mat> B;       // B[k](i,j) = k-th coordinate of B(e_i,e_j)
    Vec u_bar;                // equilibrium
    Mat v_perp_basis;         // n x p, columns span V-perp
    std::string name;

    int vperp_dim() const { return static_cast<int>(v_perp_basis.cols()); }

    double ip(const Vec& x, const Vec& y) const { return x.dot(gram * y); }
    double norm(const Vec& x) const { return std::sqrt(std::max(0.0, ip(x, x))); }

    // Bilinear map B(x, y).
    Vec apply_B(const Vec& x, const Vec& y) const;
};

// Q(w) = B(w,w).
Vec apply_Q(const KineticModel& m, const Vec& w);

// dQ(w0)h = 2 B(w0, h).
Vec apply_dQ(const KineticModel& m, const Vec& w0, const Vec& h);

// Matrix of dQ(w0) in the ambient basis.
Mat dQ_matrix(const KineticModel& m, const Vec& w0);

struct HypothesisViolation {
    std::string tag;      // "gram", "H1i", "H1ii", "H2i", "H2ii", "H2eq"
    double witness = 0.0; // numeric witness of the failure
    std::string detail;
};

struct HypothesisReport {
    bool pass = false;
    double delta = 0.0;  // largest delta certifying H2(ii); > 0 iff pass
    std::vector<HypothesisViolation> violations;
};

// Checks (H1)(H2) plus the structural model invariants. Failures are
// report entries, never exceptions. Tolerances are relative to ||A||.
HypothesisReport verify_hypotheses(const KineticModel& m, double tol = 1e-8);

enum class SyntheticKind { GNL_MIN, GNL_RICH, LDG_MIN, NONCHAR };

// Deterministic synthetic model construction; the returned model passes
// verify_hypotheses and classifies as requested (validated by the caller's
// tests / classify). Throws NumericError after bounded retries.
KineticModel generate_synthetic(SyntheticKind kind, std::uint64_t seed, int n);

// JSON model file (External Interfaces schema).
KineticModel load_model(const std::string& bytes);
std::string save_model(const KineticModel& m);

// Built-in registry: "gnl-min", "gnl-rich", "ldg-min", "nonchar".
std::vector<std::string> registry_names();
bool is_registry_model(const std::string& name);
KineticModel registry_model(const std::string& name);

}  // namespace km

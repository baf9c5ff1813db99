#pragma once

#include "km/model.hpp"

namespace km {

// All linear data derived from a model satisfying (H1)(H2): the adapted
// splitting H = ker A11 + im A11 + V1 + Vt, the operators Gamma0/E0,
// Gamma1/E1, Gamma3/Gamma4, the hyperbolic split of S = Gamma0^{-1} E0, and
// the trichotomy H = Hc + Hs + Hu with its center projection.
//
// Internally everything is stored in an adapted gram-orthonormal frame whose
// columns span, in order, ker A11 (r), im A11 (p-r), V1 (r), Vt (nt). In
// these coordinates the gram matrix is the identity, adjoints are plain
// transposes, and the four subspaces are contiguous coordinate ranges.
struct Decomposition {
    int n = 0;   // ambient dimension
    int p = 0;   // dim V-perp
    int r = 0;   // dim ker A11 = dim V1
    int q = 0;   // dim im A11 = p - r
    int nt = 0;  // dim Vt = n - p - r

    Mat gram;
    Mat frame;      // n x n, columns = adapted basis, frame' * gram * frame = I
    Mat coord_map;  // frame' * gram: ambient -> adapted coordinates

    // blocks in adapted coordinates
    Mat A_c;       // full A, symmetric
    Mat E_c;       // full Q'(u_bar), symmetric, zero on V-perp rows/cols
    Mat A11;       // p x p
    Mat A12;       // p x (n-p)
    Mat A22;       // (n-p) x (n-p)
    Mat At11;      // q x q, invertible
    Mat At12;      // q x (n-p)  (P_im A12 on all of V)
    Mat T12;       // r x (n-p)  (P_ker A12 on all of V; Vt columns vanish)
    Mat T12s_inv;  // r x r, (T12^*)^{-1}: V1 -> ker A11
    Mat E;         // (n-p) x (n-p), Q'(u_bar) restricted to V
    Mat Gamma0;    // nt x nt, symmetric invertible
    Mat E0;        // nt x nt, symmetric negative definite
    Mat Gamma1;    // r x (n-p), (T12^*)^{-1}(At12^* At11^{-1} At12 - A22)
    Mat E1;        // r x (n-p), (T12^*)^{-1} P_V1 E   (E1 vanishes on V-perp)
    Mat Gamma3;    // r x n   (adapted coords; ambient op has range in ker A11)
    Mat Gamma4;    // n x nt  (input in Vt coordinates)
    Mat G1E;       // r x nt, Gamma1|Vt + E1|Vt E0^{-1} Gamma0
    Mat Mv1;       // nt x r, E0^{-1} P_Vt E|V1  (so Vc = {(v1, -Mv1 v1)})
    Mat At11_inv_At12_t;  // q x nt, At11^{-1} At12|Vt

    double delta = 0.0;  // H2(ii) margin of the model

    // hyperbolic data of S = Gamma0^{-1} E0 on Vt
    Vec s_eigenvalues;   // nt, real, sorted ascending
    Mat s_eigenvectors;  // nt x nt, columns; inverse = s_eigvec_inv
    Mat s_eigvec_inv;
    int n_stable = 0;    // eigenvalues < 0
    int n_unstable = 0;  // eigenvalues > 0
    double nu = 0.0;     // min |eigenvalue|
    double eig_cond = 0.0;  // condition number of the eigenvector basis
    Mat Ps_t, Pu_t;      // nt x nt spectral projections inside Vt

    // trichotomy in adapted coordinates and ambient form
    Mat Pc_coords;  // n x n
    Mat Pc;         // ambient n x n
    Mat Hc_basis;   // ambient n x (p + r)
    Mat Hs_basis;   // ambient n x n_stable
    Mat Hu_basis;   // ambient n x n_unstable

    int dim_center() const { return p + r; }

    Vec to_coords(const Vec& w) const { return coord_map * w; }
    Vec from_coords(const Vec& c) const { return frame * c; }

    // coordinate ranges in the adapted frame
    int off_ker() const { return 0; }
    int off_im() const { return r; }
    int off_v1() const { return p; }
    int off_vt() const { return p + r; }

    // ambient gram-orthogonal projections (spec surface)
    Mat P_V() const;
    Mat P_Vperp() const;
    Mat P_kerA11() const;
    Mat P_imA11() const;
    Mat P_V1() const;
    Mat P_Vt() const;
};

// Builds the full decomposition. Requires verify_hypotheses to pass; throws
// NumericError on hypothesis failure or ambiguous rank decisions (singular
// values within 10x of the rank tolerance).
Decomposition build_decomposition(const KineticModel& m);

// w = w_c + w_s + w_u along the trichotomy.
struct TrichotomySplit {
    Vec w_c, w_s, w_u;
};
TrichotomySplit trichotomy_project(const Decomposition& dec, const Vec& w);

// Unique linear center solution through w0 in Hc (Eq. of Lemma 2.9); affine
// in x, returned in ambient coordinates.
Vec linear_center_solution(const Decomposition& dec, const Vec& w0, double x);

// Green function of Gamma0 v' = E0 v: x >= 0 -> e^{xS} Ps v, x < 0 ->
// -e^{xS} Pu v. Input and output ambient vectors in Vt.
Vec green_apply(const Decomposition& dec, double x, const Vec& v);

}  // namespace km

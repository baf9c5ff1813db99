#include "km/decomposition.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace km {

namespace {

Mat gram_orthonormalize_full(const Mat& gram, const Mat& seed) {
    const int n = static_cast<int>(gram.rows());
    Mat ext(n, seed.cols() + n);
    ext << seed, Mat::Identity(n, n);
    Mat out(n, n);
    int k = 0;
    for (int j = 0; j < ext.cols() && k < n; ++j) {
        Vec v = ext.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < k; ++i) v -= out.col(i).dot(gram * v) * out.col(i);
        const double nrm = std::sqrt(std::max(0.0, v.dot(gram * v)));
        if (nrm > 1e-10) out.col(k++) = v / nrm;
    }
    if (k != n) throw NumericError("gram orthonormalization failed");
    return out;
}

}  // namespace

Mat Decomposition::P_V() const {
    Mat cols = frame.rightCols(n - p);
    return cols * cols.transpose() * gram;
}
Mat Decomposition::P_Vperp() const {
    Mat cols = frame.leftCols(p);
    return cols * cols.transpose() * gram;
}
Mat Decomposition::P_kerA11() const {
    Mat cols = frame.middleCols(off_ker(), r);
    return cols * cols.transpose() * gram;
}
Mat Decomposition::P_imA11() const {
    Mat cols = frame.middleCols(off_im(), q);
    return cols * cols.transpose() * gram;
}
Mat Decomposition::P_V1() const {
    Mat cols = frame.middleCols(off_v1(), r);
    return cols * cols.transpose() * gram;
}
Mat Decomposition::P_Vt() const {
    Mat cols = frame.middleCols(off_vt(), nt);
    return cols * cols.transpose() * gram;
}

Decomposition build_decomposition(const KineticModel& m) {
    auto rep = verify_hypotheses(m);
    if (!rep.pass) {
        std::string tags;
        for (const auto& v : rep.violations) tags += v.tag + " ";
        throw NumericError("build_decomposition: hypotheses fail: " + tags);
    }

    Decomposition d;
    d.n = m.dim;
    d.p = m.vperp_dim();
    d.gram = m.gram;
    d.delta = rep.delta;
    const int n = d.n, p = d.p;

    // gram-orthonormal basis of V-perp, then of V
    const Mat Ufull = gram_orthonormalize_full(m.gram, m.v_perp_basis);
    const Mat Uperp = Ufull.leftCols(p);
    const Mat Uv = Ufull.rightCols(n - p);

    // split V-perp into ker A11 / im A11 by the spectrum of A11
    const Mat S11 = Uperp.transpose() * m.gram * m.A * Uperp;  // symmetric p x p
    Eigen::SelfAdjointEigenSolver<Mat> es11(0.5 * (S11 + S11.transpose()));
    const double nrmA = m.A.norm();
    const double rank_tol = 1e-9 * std::max(nrmA, 1.0);
    std::vector<int> ker_idx, im_idx;
    for (int i = 0; i < p; ++i) {
        const double a = std::abs(es11.eigenvalues()(i));
        if (a <= rank_tol)
            ker_idx.push_back(i);
        else if (a < 10.0 * rank_tol)
            throw NumericError("build_decomposition: rank of A11 ambiguous (eigenvalue " +
                               std::to_string(es11.eigenvalues()(i)) + ")");
        else
            im_idx.push_back(i);
    }
    d.r = static_cast<int>(ker_idx.size());
    d.q = p - d.r;
    d.nt = n - p - d.r;
    if (d.nt < 0) throw NumericError("build_decomposition: dim Vt negative");
    const int r = d.r, q = d.q, nt = d.nt;

    Mat Uker(n, r), Uim(n, q);
    for (int i = 0; i < r; ++i) Uker.col(i) = Uperp * es11.eigenvectors().col(ker_idx[i]);
    for (int i = 0; i < q; ++i) Uim.col(i) = Uperp * es11.eigenvectors().col(im_idx[i]);

    // split V into V1 = im T12^* and Vt = ker T12 via the SVD of T12
    // T12 = P_ker A |_V, as an r x (n-p) matrix in the (Uker, Uv) bases
    Mat Uv1(n, r), Uvt(n, nt);
    if (r > 0) {
        const Mat T12_full = Uker.transpose() * m.gram * m.A * Uv;  // r x (n-p)
        Eigen::JacobiSVD<Mat> svd(T12_full.transpose(), Eigen::ComputeFullU);
        if (svd.singularValues()(r - 1) <= rank_tol)
            throw NumericError("build_decomposition: T12 rank deficient (Lemma 2.1 violated)");
        const Mat W = svd.matrixU();  // (n-p) x (n-p)
        Uv1 = Uv * W.leftCols(r);
        Uvt = Uv * W.rightCols(nt);
    } else {
        Uvt = Uv;
    }

    d.frame.resize(n, n);
    d.frame << Uker, Uim, Uv1, Uvt;
    d.coord_map = d.frame.transpose() * m.gram;

    // operators in adapted coordinates
    d.A_c = d.frame.transpose() * m.gram * m.A * d.frame;
    d.A_c = 0.5 * (d.A_c + d.A_c.transpose()).eval();
    const Mat dQ = dQ_matrix(m, m.u_bar);
    d.E_c = d.frame.transpose() * m.gram * dQ * d.frame;
    d.E_c = 0.5 * (d.E_c + d.E_c.transpose()).eval();

    d.A11 = d.A_c.topLeftCorner(p, p);
    d.A12 = d.A_c.topRightCorner(p, n - p);
    d.A22 = d.A_c.bottomRightCorner(n - p, n - p);
    d.At11 = d.A_c.block(r, r, q, q);
    d.At12 = d.A_c.block(r, p, q, n - p);
    d.T12 = d.A_c.block(0, p, r, n - p);
    d.E = d.E_c.bottomRightCorner(n - p, n - p);

    // T12 in adapted coordinates: the V1 block is r x r invertible, the Vt
    // block vanishes by construction of the split.
    if (r > 0) {
        const Mat T12_v1 = d.T12.leftCols(r);
        d.T12s_inv = T12_v1.transpose().inverse();  // (T12^*)^{-1}: V1 -> ker A11
    } else {
        d.T12s_inv = Mat(0, 0);
    }

    // Gamma0 = P_Vt (A22 - At12^* At11^{-1} At12)|Vt, E0 = P_Vt E|Vt
    Mat core = d.A22;
    if (q > 0) core -= d.At12.transpose() * d.At11.ldlt().solve(d.At12);
    d.Gamma0 = core.bottomRightCorner(nt, nt);
    d.Gamma0 = 0.5 * (d.Gamma0 + d.Gamma0.transpose()).eval();
    d.E0 = d.E.bottomRightCorner(nt, nt);
    d.E0 = 0.5 * (d.E0 + d.E0.transpose()).eval();

    {
        Eigen::JacobiSVD<Mat> svg(d.Gamma0);
        if (nt > 0 && svg.singularValues()(nt - 1) <= rank_tol)
            throw NumericError("build_decomposition: Gamma0 numerically singular");
    }

    // Gamma1 = (T12^*)^{-1}(At12^* At11^{-1} At12 - A22), E1 = (T12^*)^{-1} P_V1 E
    if (r > 0) {
        // P_V1 of the inner operator is its V1-row block
        Mat inner = -d.A22;
        if (q > 0) inner += d.At12.transpose() * d.At11.ldlt().solve(d.At12);
        d.Gamma1 = d.T12s_inv * inner.topRows(r);
        d.E1 = d.T12s_inv * d.E.topRows(r);
    } else {
        d.Gamma1 = Mat(0, n - p);
        d.E1 = Mat(0, n - p);
    }

    const Mat E0_inv = d.E0.ldlt().solve(Mat::Identity(nt, nt));
    const Mat E_vt_v1 = d.E.bottomLeftCorner(nt, r);  // P_Vt E |_V1
    d.Mv1 = E0_inv * E_vt_v1;                         // nt x r
    const Mat E1_vt = (r > 0) ? Mat(d.E1.rightCols(nt)) : Mat(0, nt);
    d.G1E = (r > 0) ? Mat(d.Gamma1.rightCols(nt) + E1_vt * E0_inv * d.Gamma0) : Mat(0, nt);
    d.At11_inv_At12_t = (q > 0) ? Mat(d.At11.ldlt().solve(d.At12.rightCols(nt))) : Mat(0, nt);

    // Gamma3 (r x n) and Gamma4 (n x nt) in adapted coordinates
    d.Gamma3 = Mat::Zero(r, n);
    if (r > 0) {
        d.Gamma3.middleCols(p, r) = d.T12s_inv;
        d.Gamma3.middleCols(p + r, nt) = -E1_vt * E0_inv;
    }
    d.Gamma4 = Mat::Zero(n, nt);
    if (r > 0) d.Gamma4.topRows(r) = d.G1E;
    if (q > 0) d.Gamma4.middleRows(r, q) = -d.At11_inv_At12_t;
    d.Gamma4.bottomRows(nt) = Mat::Identity(nt, nt);

    // hyperbolic split of S = Gamma0^{-1} E0 via the symmetric-definite
    // pencil Gamma0 y = mu (-E0) y; lambda = -1/mu, eigenvectors shared.
    if (nt > 0) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(d.Gamma0, -d.E0);
        if (ges.info() != Eigen::Success)
            throw NumericError("build_decomposition: pencil eigensolve failed");
        Vec lambda(nt);
        for (int i = 0; i < nt; ++i) {
            const double mu = ges.eigenvalues()(i);
            if (std::abs(mu) < 1e-14)
                throw NumericError("build_decomposition: Gamma0 pencil has zero eigenvalue");
            lambda(i) = -1.0 / mu;
        }
        // sort ascending by lambda
        std::vector<int> order(nt);
        for (int i = 0; i < nt; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&lambda](int a, int b) { return lambda(a) < lambda(b); });
        d.s_eigenvalues.resize(nt);
        d.s_eigenvectors.resize(nt, nt);
        for (int i = 0; i < nt; ++i) {
            d.s_eigenvalues(i) = lambda(order[i]);
            d.s_eigenvectors.col(i) = ges.eigenvectors().col(order[i]);
        }
        // eigenvectors are (-E0)-orthonormal: X^T (-E0) X = I
        d.s_eigvec_inv = d.s_eigenvectors.transpose() * (-d.E0);
        d.n_stable = 0;
        for (int i = 0; i < nt; ++i)
            if (d.s_eigenvalues(i) < 0) ++d.n_stable;
        d.n_unstable = nt - d.n_stable;
        d.nu = d.s_eigenvalues.cwiseAbs().minCoeff();
        Eigen::JacobiSVD<Mat> svx(d.s_eigenvectors);
        d.eig_cond = svx.singularValues()(0) / svx.singularValues()(nt - 1);
        Vec sel_s = Vec::Zero(nt), sel_u = Vec::Zero(nt);
        for (int i = 0; i < nt; ++i) (d.s_eigenvalues(i) < 0 ? sel_s : sel_u)(i) = 1.0;
        d.Ps_t = d.s_eigenvectors * sel_s.asDiagonal() * d.s_eigvec_inv;
        d.Pu_t = d.s_eigenvectors * sel_u.asDiagonal() * d.s_eigvec_inv;
    } else {
        d.n_stable = d.n_unstable = 0;
        d.nu = std::numeric_limits<double>::infinity();
        d.eig_cond = 1.0;
        d.Ps_t = d.Pu_t = Mat(0, 0);
    }

    // center projection in adapted coordinates (Lemma 2.10(iii))
    Mat Pc = Mat::Zero(n, n);
    Pc.topLeftCorner(r, r) = Mat::Identity(r, r);
    if (q > 0) Pc.block(r, r, q, q) = Mat::Identity(q, q);
    Pc.block(p, p, r, r) = Mat::Identity(r, r);
    if (nt > 0) {
        if (r > 0) {
            Pc.block(0, p, r, r) = -d.G1E * d.Mv1;       // u1 <- v1
            Pc.block(0, p + r, r, nt) = -d.G1E;          // u1 <- vt
        }
        if (q > 0) {
            Pc.block(r, p, q, r) = d.At11_inv_At12_t * d.Mv1;
            Pc.block(r, p + r, q, nt) = d.At11_inv_At12_t;
        }
        Pc.block(p + r, p, nt, r) = -d.Mv1;  // vt <- v1
        // vt <- vt block is zero
    }
    d.Pc_coords = Pc;
    d.Pc = d.frame * Pc * d.coord_map;

    // trichotomy bases, ambient: V-perp columns (ker then im), then Vc
    d.Hc_basis.resize(n, p + r);
    d.Hc_basis.leftCols(p) = d.frame.leftCols(p);
    for (int j = 0; j < r; ++j) {
        Vec c = Vec::Zero(n);
        c(p + j) = 1.0;
        c.tail(nt) = -d.Mv1.col(j);
        d.Hc_basis.col(p + j) = d.frame * c;
    }
    auto hyper_col = [&](const Vec& vt_coord) {
        Vec c = Vec::Zero(n);
        if (r > 0) c.head(r) = d.G1E * vt_coord;
        if (q > 0) c.segment(r, q) = -d.At11_inv_At12_t * vt_coord;
        c.tail(nt) = vt_coord;
        return Vec(d.frame * c);
    };
    d.Hs_basis.resize(n, d.n_stable);
    d.Hu_basis.resize(n, d.n_unstable);
    int is = 0, iu = 0;
    for (int i = 0; i < nt; ++i) {
        const Vec col = hyper_col(d.s_eigenvectors.col(i));
        if (d.s_eigenvalues(i) < 0)
            d.Hs_basis.col(is++) = col;
        else
            d.Hu_basis.col(iu++) = col;
    }
    return d;
}

TrichotomySplit trichotomy_project(const Decomposition& d, const Vec& w) {
    if (w.size() != d.n) throw InputError("trichotomy_project: dimension mismatch");
    const Vec c = d.to_coords(w);
    const Vec cc = d.Pc_coords * c;
    // hyperbolic part parametrized by wt = vt + Mv1 v1 in Vt
    Vec wt = c.tail(d.nt);
    if (d.r > 0) wt += d.Mv1 * c.segment(d.p, d.r);
    TrichotomySplit out;
    out.w_c = d.from_coords(cc);
    auto hyper = [&](const Mat& P) {
        const Vec part = P * wt;
        Vec hc = Vec::Zero(d.n);
        if (d.r > 0) hc.head(d.r) = d.G1E * part;
        if (d.q > 0) hc.segment(d.r, d.q) = -d.At11_inv_At12_t * part;
        hc.tail(d.nt) = part;
        return Vec(d.from_coords(hc));
    };
    if (d.nt > 0) {
        out.w_s = hyper(d.Ps_t);
        out.w_u = hyper(d.Pu_t);
    } else {
        out.w_s = Vec::Zero(d.n);
        out.w_u = Vec::Zero(d.n);
    }
    return out;
}

Vec linear_center_solution(const Decomposition& d, const Vec& w0, double x) {
    if (w0.size() != d.n) throw InputError("linear_center_solution: dimension mismatch");
    const Vec c = d.to_coords(w0);
    const Vec resid = c - d.Pc_coords * c;
    if (resid.norm() > 1e-8 * std::max(1.0, c.norm()))
        throw InputError("linear_center_solution: w0 not in Hc");
    Vec out = c;
    if (d.r > 0) {
        const Vec v1 = c.segment(d.p, d.r);
        // u1(x) = u1(0) + x E1 (I - E0^{-1} P_Vt E) v1
        Vec arg = Vec::Zero(d.n - d.p);
        arg.head(d.r) = v1;
        arg.tail(d.nt) -= d.Mv1 * v1;
        out.head(d.r) += x * d.E1 * arg;
    }
    return d.from_coords(out);
}

Vec green_apply(const Decomposition& d, double x, const Vec& v) {
    if (v.size() != d.n) throw InputError("green_apply: dimension mismatch");
    if (d.nt == 0) return Vec::Zero(d.n);
    const Vec vt = d.to_coords(v).tail(d.nt);
    Vec modal = d.s_eigvec_inv * vt;
    Vec out_modal = Vec::Zero(d.nt);
    for (int i = 0; i < d.nt; ++i) {
        const double lam = d.s_eigenvalues(i);
        if (x >= 0 && lam < 0) out_modal(i) = std::exp(lam * x) * modal(i);
        if (x < 0 && lam > 0) out_modal(i) = -std::exp(lam * x) * modal(i);
    }
    Vec coords = Vec::Zero(d.n);
    coords.tail(d.nt) = d.s_eigenvectors * out_modal;
    return d.from_coords(coords);
}

}  // namespace km

#include "km/oracles.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/Sparse>

namespace km {

namespace {

// gram-orthonormalize columns (thin)
Mat orthonormal_cols(const Mat& gram, const Mat& cols) {
    Mat out(cols.rows(), cols.cols());
    int k = 0;
    for (int j = 0; j < cols.cols(); ++j) {
        Vec v = cols.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < k; ++i) v -= out.col(i).dot(gram * v) * out.col(i);
        const double nrm = std::sqrt(std::max(0.0, v.dot(gram * v)));
        if (nrm > 1e-12) out.col(k++) = v / nrm;
    }
    return out.leftCols(k);
}

}  // namespace

PencilSpectrum pencil_trichotomy(const KineticModel& m) {
    auto rep = verify_hypotheses(m);
    if (!rep.pass) throw NumericError("pencil_trichotomy: hypotheses fail");
    const int n = m.dim;

    // work in a gram-orthonormal basis so adjoints are transposes
    Eigen::SelfAdjointEigenSolver<Mat> gs(m.gram);
    const Mat Ghalf = gs.operatorSqrt();
    const Mat Ghalf_inv = gs.operatorInverseSqrt();
    const Mat Ao = Ghalf * m.A * Ghalf_inv;              // symmetric
    const Mat Qo = Ghalf * dQ_matrix(m, m.u_bar) * Ghalf_inv;  // symmetric NSD

    // center: kernel of Qo and its height-2 chains
    Eigen::JacobiSVD<Mat> svdQ(Qo, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double qtol = 1e-9 * std::max(1.0, svdQ.singularValues()(0));
    int rank = 0;
    while (rank < n && svdQ.singularValues()(rank) > qtol) ++rank;
    const int p = n - rank;  // dim ker Q'(u_bar)
    const Mat ker = svdQ.matrixV().rightCols(p);

    // chains: Qo x2 = Ao x1 solvable iff Ao x1 is orthogonal to ker(Qo^T)=ker(Qo)
    PencilSpectrum out;
    const Mat compat = ker.transpose() * Ao * ker;  // p x p, solvability Gram block
    Eigen::SelfAdjointEigenSolver<Mat> esc(0.5 * (compat + compat.transpose()));
    std::vector<Vec> chain_tips;
    const double ctol = 1e-9 * std::max(1.0, Ao.norm());
    for (int i = 0; i < p; ++i) {
        if (std::abs(esc.eigenvalues()(i)) < ctol) {
            // x1 in ker Q' with Ao x1 orthogonal to the kernel: lift to x2
            const Vec x1 = ker * esc.eigenvectors().col(i);
            const Vec rhs = Ao * x1;
            const Vec x2 = svdQ.solve(rhs);
            if ((Qo * x2 - rhs).norm() > 1e-7 * std::max(1.0, rhs.norm()))
                throw NumericError("pencil_trichotomy: chain lift failed");
            // no height-3 modes: Qo x3 = Ao x2 must be unsolvable
            const Vec rhs3 = Ao * x2;
            if ((ker.transpose() * rhs3).norm() < 1e-7 * rhs3.norm())
                throw NumericError("pencil_trichotomy: defective pencil beyond height 2");
            chain_tips.push_back(x2);
            ++out.chains_height2;
        } else if (std::abs(esc.eigenvalues()(i)) < 10.0 * ctol) {
            throw NumericError("pencil_trichotomy: chain rank decision ambiguous");
        }
    }

    Mat Hc(n, p + static_cast<int>(chain_tips.size()));
    Hc.leftCols(p) = ker;
    for (std::size_t i = 0; i < chain_tips.size(); ++i) Hc.col(p + i) = chain_tips[i];
    out.n_center = static_cast<int>(Hc.cols());

    // hyperbolic eigenvectors from the generic QZ route
    Eigen::GeneralizedEigenSolver<Mat> qz(Qo, Ao);
    if (qz.info() != Eigen::Success) throw NumericError("pencil_trichotomy: QZ failed");
    out.eigenvalues.resize(n);
    std::vector<Vec> stab, unst;
    for (int i = 0; i < n; ++i) {
        const std::complex<double> alpha = qz.alphas()(i);
        const double beta = qz.betas()(i);
        if (std::abs(beta) < 1e-12)
            throw NumericError("pencil_trichotomy: infinite pencil eigenvalue (A singular?)");
        const std::complex<double> lam = alpha / beta;
        out.eigenvalues(i) = lam.real();
        // the lambda = 0 cluster is defective (Jordan chains); QZ may report
        // it as complex pairs of magnitude ~ sqrt(machine eps), which is
        // fine: the center space comes from the SVD chains above
        const double scale = std::max(1.0, Ao.norm());
        if (std::abs(lam) <= 1e-7 * scale) continue;
        if (std::abs(lam.imag()) > 1e-8 * (1.0 + std::abs(lam.real())))
            throw NumericError("pencil_trichotomy: non-real hyperbolic pencil eigenvalue");
        Eigen::VectorXcd vc = qz.eigenvectors().col(i);
        if (vc.imag().norm() > 1e-8 * vc.norm()) {
            // real eigenvalue with a complex phase; rotate to real
            int k0;
            vc.cwiseAbs().maxCoeff(&k0);
            vc *= std::conj(vc(k0)) / std::abs(vc(k0));
        }
        Vec v = vc.real();
        v /= v.norm();
        if (lam.real() < 0)
            stab.push_back(v);
        else
            unst.push_back(v);
    }
    out.n_stable = static_cast<int>(stab.size());
    out.n_unstable = static_cast<int>(unst.size());
    if (out.n_center + out.n_stable + out.n_unstable != n)
        throw NumericError("pencil_trichotomy: eigenvalue count mismatch");

    Mat Hs(n, out.n_stable), Hu(n, out.n_unstable);
    for (int i = 0; i < out.n_stable; ++i) Hs.col(i) = stab[i];
    for (int i = 0; i < out.n_unstable; ++i) Hu.col(i) = unst[i];

    // spectral projection onto the center space along the hyperbolic space
    Mat Tfull(n, n);
    Tfull << Hc, Hs, Hu;
    Mat sel = Mat::Zero(n, n);
    sel.topLeftCorner(out.n_center, out.n_center) = Mat::Identity(out.n_center, out.n_center);
    const Mat Pc_o = Tfull * sel * Tfull.inverse();

    // map back to the original (gram) coordinates
    out.Pc = Ghalf_inv * Pc_o * Ghalf;
    out.Hc_basis = orthonormal_cols(m.gram, Ghalf_inv * Hc);
    out.Hs_basis = orthonormal_cols(m.gram, Ghalf_inv * Hs);
    out.Hu_basis = orthonormal_cols(m.gram, Ghalf_inv * Hu);
    return out;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& point, double step) {
    const Vec f0 = f(point);
    const int rows = static_cast<int>(f0.size());
    const int cols = static_cast<int>(point.size());
    Mat J(rows, cols);
    for (int j = 0; j < cols; ++j) {
        Vec e = Vec::Zero(cols);
        e(j) = 1.0;
        const Vec fp2 = f(point + 2.0 * step * e);
        const Vec fp1 = f(point + step * e);
        const Vec fm1 = f(point - step * e);
        const Vec fm2 = f(point - 2.0 * step * e);
        J.col(j) = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * step);
    }
    return J;
}

// ---------------------------------------------------------------------------
// Fourier path for K0

namespace {

using Cplx = std::complex<double>;

void fft_inplace(std::vector<Cplx>& a, bool inverse) {
    const std::size_t N = a.size();
    if (N == 0 || (N & (N - 1)) != 0) throw InputError("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < N; ++i) {
        std::size_t bit = N >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= N; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const Cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < N; i += len) {
            Cplx w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const Cplx u = a[i + k];
                const Cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& z : a) z /= static_cast<double>(N);
}

}  // namespace

GridFunction fourier_k0(const Decomposition& dec, const GridFunction& g) {
    g.check();
    const int m = g.m();
    const std::size_t M = static_cast<std::size_t>(m - 1);
    if ((M & (M - 1)) != 0) throw InputError("fourier_k0: m-1 must be a power of two");
    const int nt = dec.nt;
    const double period = 2.0 * g.L;

    // Vt coordinates of the data, truncated to the periodic grid (node m-1
    // coincides with node 0 after periodization)
    Mat C(static_cast<int>(M), nt);
    for (int i = 0; i < static_cast<int>(M); ++i) {
        const Vec c = dec.to_coords(g.values.row(i).transpose());
        C.row(i) = c.tail(nt).transpose();
    }

    std::vector<std::vector<Cplx>> comp(nt, std::vector<Cplx>(M));
    for (int k = 0; k < nt; ++k) {
        for (std::size_t i = 0; i < M; ++i) comp[k][i] = C(static_cast<int>(i), k);
        fft_inplace(comp[k], false);
    }

    // multiply by (2*pi*i*omega Gamma0 - E0)^{-1} at omega_j = j_signed/period
    for (std::size_t j = 0; j < M; ++j) {
        const long js = (j <= M / 2) ? static_cast<long>(j) : static_cast<long>(j) - static_cast<long>(M);
        const double omega = static_cast<double>(js) / period;
        Eigen::MatrixXcd L0 =
            (-dec.E0).cast<Cplx>() + Cplx(0.0, 2.0 * M_PI * omega) * dec.Gamma0.cast<Cplx>();
        Eigen::VectorXcd rhs(nt);
        for (int k = 0; k < nt; ++k) rhs(k) = comp[k][j];
        const Eigen::VectorXcd sol = L0.partialPivLu().solve(rhs);
        for (int k = 0; k < nt; ++k) comp[k][j] = sol(k);
    }

    for (int k = 0; k < nt; ++k) fft_inplace(comp[k], true);

    GridFunction out(g.L, m, g.n());
    for (int i = 0; i < m; ++i) {
        const std::size_t ii = (i == m - 1) ? 0 : static_cast<std::size_t>(i);
        Vec coords = Vec::Zero(dec.n);
        for (int k = 0; k < nt; ++k) coords(dec.off_vt() + k) = comp[k][ii].real();
        out.values.row(i) = dec.from_coords(coords).transpose();
    }
    return out;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    struct Impl {
        const std::function<double(double)>& f;
        double run(double a, double b, double fa, double fm, double fb, double whole, double tol,
                   int depth) {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if (depth > 48) return left + right;
            if (std::abs(left + right - whole) <= 15.0 * tol)
                return left + right + (left + right - whole) / 15.0;
            return run(a, m, fa, flm, fm, left, tol / 2.0, depth + 1) +
                   run(m, b, fm, frm, fb, right, tol / 2.0, depth + 1);
        }
    } impl{f};
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return impl.run(a, b, fa, fm, fb, whole, tol, 0);
}

// ---------------------------------------------------------------------------
// Full-system BVP oracle

GridFunction bvp_full_shoot(const KineticModel& model, const Decomposition& dec,
                            const Vec& w_minus, const Vec& w_plus, const Vec& r_dir,
                            double phase_value, const BvpConfig& cfg) {
    const int n = model.dim;
    const int m = cfg.m;
    if (m < 5 || m % 2 == 0) throw InputError("bvp_full_shoot: need odd m >= 5");
    if (dec.r != 1) throw InputError("bvp_full_shoot: requires a simple characteristic (r = 1)");
    const double h = 2.0 * cfg.L / (m - 1);
    const int N = n * m;

    // boundary condition rows: stable components at -L, unstable at +L,
    // conserved center coordinates (w_c2, w_c3) at -L, phase at x = 0.
    // Rows are expressed through the adapted coordinate map.
    const int r = dec.r, p = dec.p, nt = dec.nt;
    // w_c2/w_c3 coordinate extractor (r + q rows), from the canonical change
    // of variables: c2 = E1 (I - E0^{-1} P_Vt E) v1, c3 = ut + At11^{-1}At12(vt + Mv1 v1)
    Mat Ccons = Mat::Zero(p, n);  // acts on adapted coords
    if (r > 0) {
        Mat arg = Mat::Zero(n - p, r);
        arg.topRows(r) = Mat::Identity(r, r);
        arg.bottomRows(nt) = -dec.Mv1;
        Ccons.block(0, p, r, r) = dec.E1 * arg;
    }
    if (dec.q > 0) {
        Ccons.block(r, r, dec.q, dec.q) = Mat::Identity(dec.q, dec.q);
        Ccons.block(r, p, dec.q, r) = dec.At11_inv_At12_t * dec.Mv1;
        Ccons.block(r, p + r, dec.q, nt) = dec.At11_inv_At12_t;
    }
    const Mat Ccons_amb = Ccons * dec.coord_map;

    // stable/unstable extractors: modal coefficients of wt = vt + Mv1 v1
    Mat Wt = Mat::Zero(nt, n);
    Wt.rightCols(nt) = Mat::Identity(nt, nt);
    if (r > 0) Wt.middleCols(p, r) = dec.Mv1;
    const Mat modal = dec.s_eigvec_inv * Wt * dec.coord_map;  // nt x n ambient
    std::vector<int> stable_rows, unstable_rows;
    for (int i = 0; i < nt; ++i)
        (dec.s_eigenvalues(i) < 0 ? stable_rows : unstable_rows).push_back(i);

    const Vec rbar_row = dec.gram * r_dir;

    const Mat dQbar = dQ_matrix(model, model.u_bar);

    // initial guess: tanh interpolation between the endstates
    GridFunction w(cfg.L, m, n);
    const double rate = (cfg.guess_rate > 0) ? cfg.guess_rate : 6.0 / cfg.L;
    for (int i = 0; i < m; ++i) {
        const double t = 0.5 * (1.0 + std::tanh(rate * w.x(i)));
        w.values.row(i) = ((1.0 - t) * w_minus + t * w_plus).transpose();
    }

    using Trip = Eigen::Triplet<double>;
    Eigen::SparseMatrix<double> J(N, N);
    Vec F(N);

    auto assemble = [&](const GridFunction& wg, Vec& Fout,
                        std::vector<Trip>* trips) {
        Fout.setZero();
        int row = 0;
        // interior box-scheme equations
        for (int i = 0; i + 1 < m; ++i) {
            const Vec wi = wg.values.row(i).transpose();
            const Vec wj = wg.values.row(i + 1).transpose();
            const Vec wm = 0.5 * (wi + wj);
            const Vec rhs = dQbar * wm + apply_Q(model, wm);
            const Vec lhs = model.A * (wj - wi) / h;
            Fout.segment(row, n) = lhs - rhs;
            if (trips) {
                const Mat dmid = 0.5 * (dQbar + dQ_matrix(model, wm));
                const Mat Ji = -model.A / h - 0.5 * dmid;
                const Mat Jj = model.A / h - 0.5 * dmid;
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) {
                        trips->emplace_back(row + a, i * n + b, Ji(a, b));
                        trips->emplace_back(row + a, (i + 1) * n + b, Jj(a, b));
                    }
            }
            row += n;
        }
        // boundary conditions
        const Vec w0 = wg.values.row(0).transpose();
        const Vec wl = wg.values.row(m - 1).transpose();
        for (int k : stable_rows) {
            Fout(row) = modal.row(k).dot(w0 - w_minus);
            if (trips)
                for (int b = 0; b < n; ++b) trips->emplace_back(row, b, modal(k, b));
            ++row;
        }
        for (int k : unstable_rows) {
            Fout(row) = modal.row(k).dot(wl - w_plus);
            if (trips)
                for (int b = 0; b < n; ++b)
                    trips->emplace_back(row, (m - 1) * n + b, modal(k, b));
            ++row;
        }
        for (int k = 0; k < p; ++k) {
            Fout(row) = Ccons_amb.row(k).dot(w0 - w_minus);
            if (trips)
                for (int b = 0; b < n; ++b) trips->emplace_back(row, b, Ccons_amb(k, b));
            ++row;
        }
        // phase condition; one row per ker A11 direction is needed only for
        // r = 1 here (simple GNL)
        {
            const int ic = (m - 1) / 2;
            const Vec wc = wg.values.row(ic).transpose();
            Fout(row) = rbar_row.dot(wc) - phase_value;
            if (trips)
                for (int b = 0; b < n; ++b) trips->emplace_back(row, ic * n + b, rbar_row(b));
            ++row;
        }
        if (row != N) throw NumericError("bvp_full_shoot: equation count mismatch");
    };

    for (int it = 0; it < cfg.max_iter; ++it) {
        std::vector<Trip> trips;
        trips.reserve(static_cast<std::size_t>(2 * n) * N);
        assemble(w, F, &trips);
        const double fnorm = F.norm();
        if (fnorm < cfg.tol) return w;
        J.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
        if (lu.info() != Eigen::Success) throw NumericError("bvp_full_shoot: singular Jacobian");
        const Vec dw = lu.solve(-F);
        // damped step
        double step = 1.0;
        GridFunction trial = w;
        Vec Ftrial(N);
        for (int ls = 0; ls < 12; ++ls) {
            for (int i = 0; i < m; ++i)
                trial.values.row(i) =
                    w.values.row(i) + step * dw.segment(i * n, n).transpose();
            assemble(trial, Ftrial, nullptr);
            if (Ftrial.norm() < (1.0 - 0.25 * step) * fnorm) break;
            step *= 0.5;
        }
        w = trial;
        if (!w.values.allFinite()) throw NumericError("bvp_full_shoot: Newton diverged");
    }
    assemble(w, F, nullptr);
    if (F.norm() > 1e3 * cfg.tol)
        throw NumericError("bvp_full_shoot: Newton did not converge (residual " +
                           std::to_string(F.norm()) + ")");
    return w;
}

}  // namespace km

#include "km/operators.hpp"

#include "km/spaces.hpp"

namespace km {

namespace {

// mu_k(z) = int_0^1 e^{z(1-t)} t^k dt = k! sum_j z^j/(j+k+1)!, z <= 0
void moments_mu(double z, double mu[4]) {
    if (std::abs(z) < 0.5) {
        for (int k = 0; k < 4; ++k) {
            double term = 1.0 / static_cast<double>(k + 1);  // j = 0
            double acc = term;
            for (int j = 1; j < 30; ++j) {
                term *= z / static_cast<double>(j + k + 1);
                acc += term;
                if (std::abs(term) < 1e-18) break;
            }
            mu[k] = acc;
        }
    } else {
        mu[0] = (std::exp(z) - 1.0) / z;
        for (int k = 1; k < 4; ++k) mu[k] = (k * mu[k - 1] - 1.0) / z;
    }
}

// nu_k(w) = int_0^1 e^{w t} t^k dt = sum_j w^j/(j! (j+k+1)), w <= 0
void moments_nu(double w, double nu[4]) {
    if (std::abs(w) < 0.5) {
        for (int k = 0; k < 4; ++k) {
            double pw = 1.0;  // w^j / j!
            double acc = 1.0 / static_cast<double>(k + 1);
            for (int j = 1; j < 30; ++j) {
                pw *= w / static_cast<double>(j);
                acc += pw / static_cast<double>(j + k + 1);
                if (std::abs(pw) < 1e-18) break;
            }
            nu[k] = acc;
        }
    } else {
        const double ew = std::exp(w);
        nu[0] = (ew - 1.0) / w;
        for (int k = 1; k < 4; ++k) nu[k] = (ew - k * nu[k - 1]) / w;
    }
}

// 4-point interpolation stencils per interval [x_j, x_{j+1}]: node offsets
// relative to x_j in units of h.
struct Stencil {
    int first;         // index of first stencil node relative to j
    Mat vand_inv_t;    // 4x4: weights = vand_inv_t * moment_vector
};

Stencil make_stencil(const double offsets[4], int first) {
    Mat V(4, 4);
    for (int s = 0; s < 4; ++s) {
        double pw = 1.0;
        for (int k = 0; k < 4; ++k) {
            V(s, k) = pw;
            pw *= offsets[s];
        }
    }
    return Stencil{first, V.inverse().transpose()};
}

const Stencil& stencil_for(int j, int m) {
    static const double o_left[4] = {0.0, 1.0, 2.0, 3.0};
    static const double o_mid[4] = {-1.0, 0.0, 1.0, 2.0};
    static const double o_right[4] = {-2.0, -1.0, 0.0, 1.0};
    static const Stencil s_left = make_stencil(o_left, 0);
    static const Stencil s_mid = make_stencil(o_mid, -1);
    static const Stencil s_right = make_stencil(o_right, -2);
    if (j == 0) return s_left;
    if (j == m - 2) return s_right;
    return s_mid;
}

}  // namespace

GridFunction apply_K0(const Decomposition& dec, const GridFunction& g) {
    g.check();
    if (g.n() != dec.n) throw InputError("apply_K0: dimension mismatch");
    const int m = g.m();
    const int nt = dec.nt;
    const double h = g.h();
    GridFunction out(g.L, m, g.n());
    if (nt == 0) return out;

    // modal data c = X^{-1} Gamma0^{-1} (Vt coords of g)
    const Mat R = dec.s_eigvec_inv * dec.Gamma0.partialPivLu().solve(Mat::Identity(nt, nt));
    Mat C(m, nt);
    for (int i = 0; i < m; ++i) {
        const Vec coords = dec.to_coords(g.values.row(i).transpose());
        C.row(i) = (R * coords.tail(nt)).transpose();
    }

    Mat vals = Mat::Zero(m, nt);  // modal results
    for (int k = 0; k < nt; ++k) {
        const double lam = dec.s_eigenvalues(k);
        if (lam < 0) {
            // stable: A_i = e^{lam h} A_{i-1} + product-integration increment
            double mu[4];
            moments_mu(lam * h, mu);
            const Vec mvec = Eigen::Map<const Vec>(mu, 4);
            const double decay = std::exp(lam * h);
            double acc = 0.0;
            vals(0, k) = 0.0;
            for (int i = 1; i < m; ++i) {
                const Stencil& st = stencil_for(i - 1, m);
                const Vec w = st.vand_inv_t * mvec;
                double inc = 0.0;
                for (int s = 0; s < 4; ++s) inc += w(s) * C(i - 1 + st.first + s, k);
                acc = decay * acc + h * inc;
                vals(i, k) = acc;
            }
            // left tail: -(1/lam) e^{lam (x+L)} c(-L)
            const double cL = C(0, k);
            for (int i = 0; i < m; ++i)
                vals(i, k) += -(1.0 / lam) * std::exp(lam * (g.x(i) + g.L)) * cL;
        } else {
            // unstable: B_i = e^{-lam h} B_{i+1} + increment; contribution -B_i
            double nu[4];
            moments_nu(-lam * h, nu);
            const Vec nvec = Eigen::Map<const Vec>(nu, 4);
            const double decay = std::exp(-lam * h);
            double acc = 0.0;
            vals(m - 1, k) = 0.0;
            for (int i = m - 2; i >= 0; --i) {
                const Stencil& st = stencil_for(i, m);
                const Vec w = st.vand_inv_t * nvec;
                double inc = 0.0;
                for (int s = 0; s < 4; ++s) inc += w(s) * C(i + st.first + s, k);
                acc = decay * acc + h * inc;
                vals(i, k) = -acc;
            }
            // right tail: -(1/lam) e^{lam (x-L)} c(L)
            const double cR = C(m - 1, k);
            for (int i = 0; i < m; ++i)
                vals(i, k) += -(1.0 / lam) * std::exp(lam * (g.x(i) - g.L)) * cR;
        }
    }

    for (int i = 0; i < m; ++i) {
        Vec coords = Vec::Zero(dec.n);
        coords.tail(nt) = dec.s_eigenvectors * vals.row(i).transpose();
        out.values.row(i) = dec.from_coords(coords).transpose();
    }
    return out;
}

GridFunction apply_volterra(const GridFunction& g) {
    g.check();
    const int m = g.m();
    const double h = g.h();
    const int ic = g.center_index();
    GridFunction out(g.L, m, g.n());
    // per-interval integrals of the piecewise-cubic interpolant (kernel-free
    // moments 1/(k+1)), same quadrature family as apply_K0
    Vec mom(4);
    mom << 1.0, 0.5, 1.0 / 3.0, 0.25;
    Mat inc(m - 1, g.n());
    for (int j = 0; j + 1 < m; ++j) {
        const Stencil& st = stencil_for(j, m);
        const Vec w = st.vand_inv_t * mom;
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(g.n());
        for (int s = 0; s < 4; ++s) acc += w(s) * g.values.row(j + st.first + s);
        inc.row(j) = h * acc;
    }
    out.values.row(ic).setZero();
    for (int i = ic + 1; i < m; ++i) out.values.row(i) = out.values.row(i - 1) + inc.row(i - 1);
    for (int i = ic - 1; i >= 0; --i) out.values.row(i) = out.values.row(i + 1) - inc.row(i);
    return out;
}

GridFunction apply_K(const Decomposition& dec, const GridFunction& f) {
    f.check();
    if (f.n() != dec.n) throw InputError("apply_K: dimension mismatch");
    const int m = f.m();

    // Gamma3 f nodewise (values in ker A11), then the Volterra integral
    GridFunction g3(f.L, m, dec.n);
    for (int i = 0; i < m; ++i) {
        const Vec coords = dec.to_coords(f.values.row(i).transpose());
        Vec c3 = Vec::Zero(dec.n);
        if (dec.r > 0) c3.head(dec.r) = dec.Gamma3 * coords;
        g3.values.row(i) = dec.from_coords(c3).transpose();
    }
    GridFunction out = apply_volterra(g3);

    // Gamma4 K0 P_Vt f
    const GridFunction k0f = apply_K0(dec, f);
    for (int i = 0; i < m; ++i) {
        const Vec kc = dec.to_coords(k0f.values.row(i).transpose());
        const Vec g4 = dec.Gamma4 * kc.tail(dec.nt);
        out.values.row(i) += dec.from_coords(g4).transpose();
    }
    return out;
}

Vec center_drift(const Decomposition& dec, const Vec& w0, double x) {
    const Vec c = dec.to_coords(w0);
    Vec out = Vec::Zero(dec.n);
    if (dec.r > 0) {
        const Vec v1 = c.segment(dec.p, dec.r);
        Vec arg = Vec::Zero(dec.n - dec.p);
        arg.head(dec.r) = v1;
        arg.tail(dec.nt) = -dec.Mv1 * v1;
        out.head(dec.r) = x * (dec.E1 * arg);
    }
    return dec.from_coords(out);
}

GridFunction solve_inhomogeneous(const Decomposition& dec, const Vec& w0,
                                 const GridFunction& f) {
    const Vec c = dec.to_coords(w0);
    if ((c - dec.Pc_coords * c).norm() > 1e-8 * std::max(1.0, c.norm()))
        throw InputError("solve_inhomogeneous: w0 not in Hc");
    GridFunction u = apply_K(dec, f);
    for (int i = 0; i < u.m(); ++i)
        u.values.row(i) += (w0 + center_drift(dec, w0, u.x(i))).transpose();
    return u;
}

double linear_residual(const Decomposition& dec, const KineticModel& model,
                       const GridFunction& u, const GridFunction& f,
                       double interior_fraction) {
    const GridFunction du = derivative(u);
    const Mat dQbar = dQ_matrix(model, model.u_bar);
    double worst = 0.0;
    for (int i = 0; i < u.m(); ++i) {
        if (std::abs(u.x(i)) > interior_fraction * u.L) continue;
        const Vec resid = model.A * du.values.row(i).transpose() -
                          dQbar * u.values.row(i).transpose() - f.values.row(i).transpose();
        worst = std::max(worst, resid.norm());
    }
    return worst;
}

}  // namespace km

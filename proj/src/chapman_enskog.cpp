#include "km/chapman_enskog.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include "km/center_manifold.hpp"

namespace km {

namespace {

double basin(const KineticModel& m, const NewtonOptions& opt) {
    return opt.basin_radius > 0 ? opt.basin_radius : 0.1 * m.norm(m.u_bar) + 0.1;
}

// Newton data at a point on the equilibrium manifold: v* and the blocks of
// P_V dQ needed for implicit differentiation.
struct GraphPoint {
    Vec v_coords;   // v*(u) in V coordinates of the adapted frame
    Mat Mv;         // P_V dQ(.)|_V   ((n-p) x (n-p))
    Mat Mperp;      // P_V dQ(.)|_Vperp  ((n-p) x p)
};

GraphPoint solve_graph(const KineticModel& m, const Decomposition& dec, const Vec& u,
                       const NewtonOptions& opt) {
    const int n = dec.n, p = dec.p;
    if (u.size() != n) throw InputError("equilibrium_graph: dimension mismatch");
    const Vec ucoords = dec.to_coords(u);
    if (ucoords.tail(n - p).norm() > 1e-10 * std::max(1.0, u.norm()))
        throw InputError("equilibrium_graph: u not in V-perp");
    if (m.norm(u) > basin(m, opt))
        throw NumericError("equilibrium_graph: u outside the Newton basin radius");

    const Mat Uv = dec.frame.rightCols(n - p);
    Vec v = Vec::Zero(n - p);
    double last = std::numeric_limits<double>::infinity();
    GraphPoint out;
    for (int it = 0; it < opt.max_iter; ++it) {
        const Vec state = m.u_bar + u + Uv * v;
        const Vec F = dec.coord_map.bottomRows(n - p) * apply_Q(m, state);
        const double fn = F.norm();
        const Mat dQ = dQ_matrix(m, state);
        out.Mv = dec.coord_map.bottomRows(n - p) * dQ * Uv;
        if (fn < 1e-14 || (fn < 1e-12 && fn >= 0.5 * last)) {
            out.Mperp = dec.coord_map.bottomRows(n - p) * dQ * dec.frame.leftCols(p);
            out.v_coords = v;
            return out;
        }
        if (fn > 10.0 * last + 1.0)
            throw NumericError("equilibrium_graph: Newton divergence (radius too large)");
        v -= out.Mv.partialPivLu().solve(F);
        last = fn;
    }
    throw NumericError("equilibrium_graph: Newton did not converge");
}

}  // namespace

Vec equilibrium_graph(const KineticModel& m, const Decomposition& dec, const Vec& u,
                      const NewtonOptions& opt) {
    const GraphPoint gp = solve_graph(m, dec, u, opt);
    return dec.frame.rightCols(dec.n - dec.p) * gp.v_coords;
}

Vec flux(const KineticModel& m, const Decomposition& dec, const Vec& u,
         const NewtonOptions& opt) {
    const Vec v = equilibrium_graph(m, dec, u, opt);
    const Vec f = dec.coord_map.topRows(dec.p) * (m.A * (u + v));
    return dec.frame.leftCols(dec.p) * f;
}

Mat flux_jacobian(const KineticModel& m, const Decomposition& dec, const Vec& u,
                  const NewtonOptions& opt) {
    const GraphPoint gp = solve_graph(m, dec, u, opt);
    // dv*/du = -Mv^{-1} Mperp, f*' = A11 + A12 dv*/du (blocks of the frame)
    const Mat dv = -gp.Mv.partialPivLu().solve(gp.Mperp);
    return dec.A11 + dec.A12 * dv;
}

Mat viscosity(const KineticModel& m, const Decomposition& dec) {
    (void)m;
    return -dec.A12 * dec.E.ldlt().solve(dec.A12.transpose());
}

double lambda_weak(const KineticModel& m, const Decomposition& dec, const Vec& u,
                   const NewtonOptions& opt) {
    const Mat J = flux_jacobian(m, dec, u, opt);
    Eigen::EigenSolver<Mat> es(J);
    int best = 0;
    for (int i = 0; i < J.rows(); ++i)
        if (std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(best))) best = i;
    const auto lam = es.eigenvalues()(best);
    if (std::abs(lam.imag()) > 1e-9 * (1.0 + std::abs(lam.real())))
        throw NumericError("lambda_weak: nearest eigenvalue not real");
    return lam.real();
}

Classification classify(const KineticModel& m, const Decomposition& dec, double tol) {
    Classification cls;
    const int p = dec.p;

    const Mat J0 = flux_jacobian(m, dec, Vec::Zero(dec.n));
    const Mat J0s = 0.5 * (J0 + J0.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(J0s);
    cls.f_prime_eigs = es.eigenvalues();

    const double scale = std::max(1.0, m.A.norm());
    std::vector<int> kernel;
    for (int i = 0; i < p; ++i)
        if (std::abs(es.eigenvalues()(i)) <= tol * scale) kernel.push_back(i);
    cls.m = static_cast<int>(kernel.size());

    if (cls.m == 0) {
        cls.tag = CaseTag::Noncharacteristic;
        cls.r_bar = Vec(0);
        cls.kappa = Mat(0, 0);
        return cls;
    }

    // kernel basis in ambient coordinates, sign-normalized
    Mat R(dec.n, cls.m);
    for (int j = 0; j < cls.m; ++j) {
        Vec rc = Vec::Zero(dec.n);
        rc.head(p) = es.eigenvectors().col(kernel[j]);
        Vec r = dec.from_coords(rc);
        int k0;
        r.cwiseAbs().maxCoeff(&k0);
        if (r(k0) < 0) r = -r;
        R.col(j) = r;
    }
    cls.r_bar = R.col(0);

    // kappa = r' D* r on the kernel block
    const Mat D = viscosity(m, dec);
    Mat kap(cls.m, cls.m);
    for (int i = 0; i < cls.m; ++i)
        for (int j = 0; j < cls.m; ++j) {
            const Vec ri = dec.to_coords(R.col(i)).head(p);
            const Vec rj = dec.to_coords(R.col(j)).head(p);
            kap(i, j) = ri.dot(D * rj);
        }
    cls.kappa = kap;

    // Lambda by Richardson-extrapolated second differences of <r, f*(s r)>
    auto q1 = [&](double s) {
        const Vec f = flux(m, dec, s * cls.r_bar);
        return cls.r_bar.dot(m.gram * f);
    };
    auto second = [&](double h) { return (q1(h) - 2.0 * q1(0.0) + q1(-h)) / (h * h); };
    const double h0 = 1e-3;
    const double d2a = second(h0), d2b = second(h0 / 2.0);
    cls.Lambda = (4.0 * d2b - d2a) / 3.0;

    const double lam_scale = std::max(1.0, std::abs(cls.Lambda));
    if (cls.m == 1 && std::abs(cls.Lambda) > 10.0 * tol * lam_scale) {
        cls.tag = CaseTag::SimpleGNL;
        Eigen::SelfAdjointEigenSolver<Mat> ek(kap);
        if (ek.eigenvalues()(0) <= 0)
            throw NumericError("classify: kappa not positive (weakened Kawashima fails)");
        return cls;
    }
    if (std::abs(cls.Lambda) > tol) {
        // kernel present but Lambda in the ambiguity band
        cls.tag = CaseTag::Unclassified;
        cls.diagnostics = "Lambda within 10x of tol with kernel present";
        return cls;
    }

    // Lambda ~ 0: candidate linear degeneracy; require the quadratic and
    // cubic kernel-fiber terms of the reduced field to vanish
    const double fiber = kernel_fiber_terms_norm(m, dec, 3);
    if (fiber <= tol) {
        cls.tag = CaseTag::LinearlyDegenerate;
        Eigen::SelfAdjointEigenSolver<Mat> ek(kap);
        if (ek.eigenvalues()(0) <= 0)
            throw NumericError("classify: kappa not positive definite in the LDG case");
    } else {
        cls.tag = CaseTag::Unclassified;
        cls.diagnostics = "Lambda ~ 0 but kernel-fiber terms do not vanish (norm " +
                          std::to_string(fiber) + ")";
    }
    return cls;
}

RankineHugoniot rankine_hugoniot(const KineticModel& m, const Decomposition& dec,
                                 const Classification& cls, double eps,
                                 const NewtonOptions& opt) {
    if (cls.tag != CaseTag::SimpleGNL)
        throw InputError("rankine_hugoniot: requires the simple genuinely nonlinear case");
    RankineHugoniot rh;
    rh.q1 = cls.Lambda * eps * eps / 2.0;
    rh.q = rh.q1 * cls.r_bar;
    if (eps == 0.0) {
        rh.u_minus = Vec::Zero(dec.n);
        rh.u_plus = Vec::Zero(dec.n);
        return rh;
    }

    auto solve_branch = [&](double guess) {
        Vec u = guess * cls.r_bar;
        for (int it = 0; it < opt.max_iter; ++it) {
            const Vec F = dec.to_coords(flux(m, dec, u, opt) - rh.q).head(dec.p);
            if (F.norm() < 1e-13) return u;
            const Mat J = flux_jacobian(m, dec, u, opt);
            Vec du = J.partialPivLu().solve(F);
            // keep the iterate on its branch of the fold
            const double cap = 0.5 * eps;
            if (du.norm() > cap) du *= cap / du.norm();
            u -= dec.frame.leftCols(dec.p) * du;
        }
        throw NumericError("rankine_hugoniot: Newton did not converge");
    };
    const Vec ua = solve_branch(eps);
    const Vec ub = solve_branch(-eps);
    if ((ua - ub).norm() < 0.1 * eps ||
        (cls.r_bar.dot(m.gram * ua)) * (cls.r_bar.dot(m.gram * ub)) >= 0)
        throw NumericError("rankine_hugoniot: branches collapsed (no two real solutions)");
    // u_minus carries the larger characteristic speed (Lax ordering)
    if (lambda_weak(m, dec, ua, opt) > lambda_weak(m, dec, ub, opt)) {
        rh.u_minus = ua;
        rh.u_plus = ub;
    } else {
        rh.u_minus = ub;
        rh.u_plus = ua;
    }
    return rh;
}

std::string Classification::to_json() const {
    nlohmann::json j;
    switch (tag) {
        case CaseTag::Noncharacteristic: j["case"] = "noncharacteristic"; break;
        case CaseTag::SimpleGNL: j["case"] = "simple_gnl"; break;
        case CaseTag::LinearlyDegenerate: j["case"] = "linearly_degenerate"; break;
        case CaseTag::Unclassified: j["case"] = "unclassified"; break;
    }
    j["m"] = m;
    j["lambda"] = Lambda;
    j["kappa"] = std::vector<double>(kappa.data(), kappa.data() + kappa.size());
    j["r_bar"] = std::vector<double>(r_bar.data(), r_bar.data() + r_bar.size());
    j["eigs"] = std::vector<double>(f_prime_eigs.data(), f_prime_eigs.data() + f_prime_eigs.size());
    if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
    return j.dump(2);
}

}  // namespace km

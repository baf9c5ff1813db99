#include "km/profiles.hpp"

#include <Eigen/Eigenvalues>
#include <future>

#include "km/spaces.hpp"

namespace km {

namespace {

// Dormand-Prince 5(4) step; returns the 5th-order value and an error estimate.
struct Dp54 {
    std::function<Vec(const Vec&)> f;

    Vec step(const Vec& y, double h, double& err, Vec& f_end) const {
        static const double a21 = 1.0 / 5;
        static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
        static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
        const Vec k1 = f(y);
        const Vec k2 = f(y + h * (a21 * k1));
        const Vec k3 = f(y + h * (a31 * k1 + a32 * k2));
        const Vec k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = f(y5);
        const Vec ev = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        err = ev.norm();
        f_end = k7;
        return y5;
    }
};

// Integrate y' = f(y) from (x0, y0), landing exactly on each requested node
// (nodes ascending, >= x0). rel_tol controls the local error per step.
std::vector<Vec> integrate_to_nodes(const std::function<Vec(const Vec&)>& f, double x0,
                                    const Vec& y0, const std::vector<double>& nodes,
                                    double rel_tol) {
    Dp54 rk{f};
    std::vector<Vec> out;
    out.reserve(nodes.size());
    Vec y = y0;
    double x = x0;
    double h = 0.0;
    for (double target : nodes) {
        if (target < x - 1e-12) throw InputError("integrate_to_nodes: nodes must ascend");
        if (h <= 0) h = std::max(1e-8, (target - x) * 0.1);
        int guard = 0;
        while (x < target - 1e-13 * std::max(1.0, std::abs(target))) {
            const bool clipped = (x + h >= target);
            const double hh = clipped ? (target - x) : h;
            double err;
            Vec f_end;
            const Vec ynew = rk.step(y, hh, err, f_end);
            const double scale = rel_tol * std::max(1.0, y.norm());
            if (err <= scale || hh < 1e-12) {
                y = ynew;
                x += hh;
                if (!clipped) h = hh * std::min(5.0, std::max(0.2, 0.9 * std::pow(scale / std::max(err, 1e-300), 0.2)));
            } else {
                h = hh * std::max(0.2, 0.9 * std::pow(scale / err, 0.2));
            }
            if (++guard > 2000000) throw NumericError("integrate_to_nodes: step limit exceeded");
        }
        out.push_back(y);
    }
    return out;
}

double newton_scalar_zero(const std::function<double(double)>& f, double guess, double scale) {
    double s = guess;
    for (int it = 0; it < 60; ++it) {
        const double v = f(s);
        if (std::abs(v) < 1e-13 * std::max(1.0, scale)) return s;
        const double h = 1e-7 * std::max(std::abs(s), 1e-3);
        const double d = (f(s + h) - f(s - h)) / (2.0 * h);
        if (d == 0.0) break;
        s -= v / d;
    }
    throw NumericError("fiber endstate Newton did not converge");
}

}  // namespace

double burgers_exact(double eps, double Lambda, double kappa, double x) {
    if (!(kappa > 0.0) || Lambda == 0.0)
        throw InputError("burgers_exact: need kappa > 0 and Lambda != 0");
    return -eps * std::tanh(Lambda * eps * x / (2.0 * kappa));
}

Profile burgers_profile(double eps, double Lambda, double kappa, double L, int m) {
    Profile p;
    p.kind = ProfileKind::BurgersExact;
    p.eps = eps;
    p.q1 = Lambda * eps * eps / 2.0;
    p.grid = GridFunction(L, m, 1);
    p.u1.resize(m);
    for (int i = 0; i < m; ++i) {
        p.grid.values(i, 0) = burgers_exact(eps, Lambda, kappa, p.grid.x(i));
        p.u1(i) = p.grid.values(i, 0);
    }
    p.u_minus = Vec::Constant(1, eps * (Lambda > 0 ? 1.0 : -1.0));
    p.u_plus = Vec::Constant(1, -eps * (Lambda > 0 ? 1.0 : -1.0));
    return p;
}

Profile relaxation_profile(const KineticModel& model, const Decomposition& dec,
                           const Classification& cls, double eps, const ProfileConfig& cfg) {
    if (cls.tag != CaseTag::SimpleGNL)
        throw InputError("relaxation_profile: requires the simple genuinely nonlinear case");
    const CanonicalFrame frame = build_canonical(dec);
    const CenterManifoldExpansion exp = taylor_expand(dec, model, cfg.expansion_order);
    const RankineHugoniot rh = rankine_hugoniot(model, dec, cls, eps);

    // full equilibrium states and their canonical coordinates
    const Vec Wm = rh.u_minus + equilibrium_graph(model, dec, rh.u_minus);
    const Vec Wp = rh.u_plus + equilibrium_graph(model, dec, rh.u_plus);
    const Vec cm = frame.to_canonical(dec, Wm);
    const Vec cp = frame.to_canonical(dec, Wp);
    const int dc = frame.dc;
    if ((cm.segment(1, dc - 1) - cp.segment(1, dc - 1)).norm() > 1e-8 * std::max(1.0, eps))
        throw NumericError("relaxation_profile: endstates not on a common fiber");
    const Vec zeta = 0.5 * (cm.segment(1, dc - 1) + cp.segment(1, dc - 1));

    const double ball = cfg.ball_radius > 0
                            ? cfg.ball_radius
                            : 0.35 * (0.1 * model.norm(model.u_bar) + 0.1);
    if (std::max(std::abs(cm(0)), std::abs(cp(0))) + zeta.norm() > ball)
        throw NumericError("relaxation_profile: endstates outside the validity ball");

    auto fiber = [&](double s) {
        Vec wc(dc);
        wc(0) = s;
        wc.tail(dc - 1) = zeta;
        return reduced_field(exp, frame, wc)(0);
    };
    const double s_minus = newton_scalar_zero(fiber, cm(0), eps * eps);
    const double s_plus = newton_scalar_zero(fiber, cp(0), eps * eps);
    const double mid = 0.5 * (s_minus + s_plus);
    if (fiber(mid) == 0.0 || (s_plus - s_minus) * fiber(mid) <= 0.0)
        throw NumericError("relaxation_profile: no heteroclinic on the fiber");

    const double kappa = cls.kappa(0, 0);
    const double L = cfg.L_scale * kappa / (std::abs(cls.Lambda) * eps);
    const int m = cfg.m;
    GridFunction grid(L, m, dec.n);
    const int ic = grid.center_index();

    // integrate the scalar fiber flow from the phase anchor to both sides
    std::vector<double> nodes_fwd, nodes_bwd;
    for (int i = ic + 1; i < m; ++i) nodes_fwd.push_back(grid.x(i));
    for (int i = ic - 1; i >= 0; --i) nodes_bwd.push_back(-grid.x(i));
    auto f_fwd = [&fiber](const Vec& y) { return Vec::Constant(1, fiber(y(0))); };
    auto f_bwd = [&fiber](const Vec& y) { return Vec::Constant(1, -fiber(y(0))); };
    const auto fwd = integrate_to_nodes(f_fwd, 0.0, Vec::Constant(1, mid), nodes_fwd,
                                        cfg.rk_rel_tol);
    const auto bwd = integrate_to_nodes(f_bwd, 0.0, Vec::Constant(1, mid), nodes_bwd,
                                        cfg.rk_rel_tol);

    Vec sigma(m);
    sigma(ic) = mid;
    for (int k = 0; k < static_cast<int>(fwd.size()); ++k) sigma(ic + 1 + k) = fwd[k](0);
    for (int k = 0; k < static_cast<int>(bwd.size()); ++k) sigma(ic - 1 - k) = bwd[k](0);

    Profile p;
    p.kind = ProfileKind::Relaxation;
    p.eps = eps;
    p.q1 = rh.q1;
    p.q = rh.q;
    p.u_minus = Wm;
    p.u_plus = Wp;
    p.u1.resize(m);
    p.lambda_path.resize(m);
    for (int i = 0; i < m; ++i) {
        Vec wc(dc);
        wc(0) = sigma(i);
        wc.tail(dc - 1) = zeta;
        Vec canonical(dc + frame.nt);
        canonical.head(dc) = wc;
        canonical.tail(frame.nt) = exp.Xi.eval(wc);
        const Vec state = frame.from_canonical(dec, canonical);
        grid.values.row(i) = state.transpose();
        p.u1(i) = cls.r_bar.dot(dec.gram * state);
        const Vec up = dec.frame.leftCols(dec.p) * dec.to_coords(state).head(dec.p);
        p.lambda_path(i) = lambda_weak(model, dec, up);
    }
    p.grid = grid;

    p.metrics["sigma_hat_minus_err"] = std::abs(s_minus - cm(0));
    p.metrics["sigma_hat_plus_err"] = std::abs(s_plus - cp(0));
    p.metrics["edge_gap_minus"] = (grid.values.row(0).transpose() - Wm).norm();
    p.metrics["edge_gap_plus"] = (grid.values.row(m - 1).transpose() - Wp).norm();
    // strict monotonicity of the characteristic speed, and its central margin
    bool monotone = true;
    const double dir = p.lambda_path(m - 1) - p.lambda_path(0);
    for (int i = 0; i + 1 < m; ++i) {
        const double dl = p.lambda_path(i + 1) - p.lambda_path(i);
        if (dl * dir <= 0.0) monotone = false;
    }
    double margin = std::numeric_limits<double>::infinity();
    for (int i = ic - 8; i < ic + 8; ++i)
        margin = std::min(margin,
                          std::abs(p.lambda_path(i + 1) - p.lambda_path(i)) / grid.h());
    p.metrics["lambda_monotone"] = monotone ? 1.0 : 0.0;
    p.metrics["lambda_margin_center"] = margin;
    return p;
}

Profile ce2_profile(const KineticModel& model, const Decomposition& dec,
                    const Classification& cls, double eps, const ProfileConfig& cfg) {
    if (cls.tag != CaseTag::SimpleGNL)
        throw InputError("ce2_profile: requires the simple genuinely nonlinear case");
    const int p = dec.p;
    const RankineHugoniot rh = rankine_hugoniot(model, dec, cls, eps);
    const Vec um = dec.to_coords(rh.u_minus).head(p);
    const Vec up = dec.to_coords(rh.u_plus).head(p);
    const Vec qc = dec.to_coords(rh.q).head(p);
    const Mat D = viscosity(model, dec);
    const Eigen::PartialPivLU<Mat> Dlu(D);
    const Vec rk = dec.to_coords(cls.r_bar).head(p);

    auto field = [&](const Vec& U) {
        const Vec famb = flux(model, dec, dec.frame.leftCols(p) * U);
        return Vec(Dlu.solve(dec.to_coords(famb).head(p) - qc));
    };

    // direction of integration: the weak direction is unstable at u_minus;
    // the strong spectrum decides from which end the connection is attracting
    const Mat Jm = Dlu.solve(flux_jacobian(model, dec, rh.u_minus));
    Eigen::EigenSolver<Mat> es(Jm);
    int weak = 0;
    for (int i = 0; i < p; ++i)
        if (std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(weak))) weak = i;
    bool strong_stable = true, strong_unstable = true;
    for (int i = 0; i < p; ++i) {
        if (i == weak) continue;
        (es.eigenvalues()(i).real() < 0 ? strong_unstable : strong_stable) = false;
    }

    Vec start, target;
    std::function<Vec(const Vec&)> f;
    bool reversed = false;
    if (strong_stable) {
        start = um;
        target = up;
        f = field;
    } else if (strong_unstable) {
        start = up;
        target = um;
        f = [&field](const Vec& U) { return Vec(-field(U)); };
        reversed = true;
    } else {
        throw NumericError("ce2_profile: shooting divergence (mixed strong spectrum)");
    }

    // weak eigenvector at the launch endstate of the integrated field
    const Mat Jl = Dlu.solve(flux_jacobian(model, dec, dec.frame.leftCols(p) * start));
    Eigen::EigenSolver<Mat> esl(reversed ? Mat(-Jl) : Jl);
    int wl = 0;
    for (int i = 0; i < p; ++i)
        if (std::abs(esl.eigenvalues()(i)) < std::abs(esl.eigenvalues()(wl))) wl = i;
    if (std::abs(esl.eigenvalues()(wl).imag()) > 1e-10)
        throw NumericError("ce2_profile: weak eigenvalue not real");
    const double mu_w = esl.eigenvalues()(wl).real();
    if (mu_w <= 0) throw NumericError("ce2_profile: launch direction not unstable");
    Vec vw = esl.eigenvectors().col(wl).real();
    vw /= vw.norm();
    const double to_target = rk.dot(target - start);
    if (rk.dot(vw) * to_target < 0) vw = -vw;

    const double t0 = 1e-6 * eps;
    const double phase = 0.5 * (rk.dot(um) + rk.dot(up));
    const double kappa = cls.kappa(0, 0);
    const double L = cfg.L_scale * kappa / (std::abs(cls.Lambda) * eps);
    const int m = cfg.m;

    // pass 1: find the trajectory length tau_mid at which the weak scalar
    // crosses the phase anchor
    double tau_mid = -1.0;
    {
        Dp54 rkst{f};
        Vec y = start + t0 * vw;
        double x = 0.0, h = 0.05 / mu_w;
        for (int guard = 0; guard < 2000000; ++guard) {
            double err;
            Vec f_end;
            const Vec ynew = rkst.step(y, h, err, f_end);
            const double scale = cfg.rk_rel_tol * std::max(1.0, y.norm());
            if (err <= scale) {
                const double s0 = rk.dot(y) - phase, s1 = rk.dot(ynew) - phase;
                if (s0 == 0.0 || s0 * s1 < 0) {
                    tau_mid = x + h * s0 / (s0 - s1);
                    break;
                }
                y = ynew;
                x += h;
                h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(scale / std::max(err, 1e-300), 0.2)));
                if (x > 1e4 * L) break;
            } else {
                h *= std::max(0.2, 0.9 * std::pow(scale / err, 0.2));
            }
        }
        if (tau_mid < 0) throw NumericError("ce2_profile: phase crossing not reached");
    }

    // pass 2: land exactly on the grid nodes tau = tau_mid + xi
    GridFunction grid(L, m, p);
    std::vector<double> taus;
    std::vector<int> node_of_tau;
    for (int i = 0; i < m; ++i) {
        const double tau = tau_mid + (reversed ? -grid.x(i) : grid.x(i));
        if (tau >= 0) {
            taus.push_back(tau);
            node_of_tau.push_back(i);
        } else {
            // analytic weak tail before the launch point
            const Vec y = start + t0 * std::exp(mu_w * tau) * vw;
            grid.values.row(i) = y.transpose();
        }
    }
    std::vector<std::size_t> order(taus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&taus](std::size_t a, std::size_t b) { return taus[a] < taus[b]; });
    std::vector<double> sorted_taus;
    for (auto i : order) sorted_taus.push_back(taus[i]);
    const auto vals = integrate_to_nodes(f, 0.0, Vec(start + t0 * vw), sorted_taus,
                                         cfg.rk_rel_tol);
    for (std::size_t k = 0; k < order.size(); ++k)
        grid.values.row(node_of_tau[order[k]]) = vals[k].transpose();

    Profile out;
    out.kind = ProfileKind::CE2;
    out.eps = eps;
    out.q1 = rh.q1;
    out.q = rh.q;
    out.grid = grid;
    out.u_minus = um;
    out.u_plus = up;
    out.u1.resize(m);
    out.lambda_path.resize(m);
    for (int i = 0; i < m; ++i) {
        const Vec U = grid.values.row(i).transpose();
        out.u1(i) = rk.dot(U);
        out.lambda_path(i) = lambda_weak(model, dec, dec.frame.leftCols(p) * U);
    }
    // residual of the CE2 ODE in the interior; in reversed mode the grid
    // already holds U(x) = y(tau_mid - x), so dU/dx = field(U) either way
    const GridFunction du = derivative(grid);
    double worst = 0.0;
    for (int i = 0; i < m; ++i) {
        if (std::abs(grid.x(i)) > 0.8 * L) continue;
        worst = std::max(
            worst, (du.values.row(i).transpose() - field(grid.values.row(i).transpose())).norm());
    }
    out.metrics["ode_residual"] = worst;
    out.metrics["edge_gap_minus"] = (grid.values.row(0).transpose() - um).norm();
    out.metrics["edge_gap_plus"] = (grid.values.row(m - 1).transpose() - up).norm();
    return out;
}

std::map<std::string, double> compare_profiles(const KineticModel& model,
                                               const Decomposition& dec,
                                               const Classification& cls, const Profile& rel,
                                               const Profile& ce) {
    if (rel.grid.m() != ce.grid.m() || std::abs(rel.grid.L - ce.grid.L) > 1e-12 * rel.grid.L)
        throw InputError("compare_profiles: grids differ");
    if (std::abs(rel.eps - ce.eps) > 1e-14)
        throw InputError("compare_profiles: eps differs");
    const int m = rel.grid.m();
    const int ic = rel.grid.center_index();
    const int p = dec.p;
    if (std::abs(rel.u1(ic) - ce.u1(ic)) > 1e-6 * std::max(1.0, rel.eps))
        throw InputError("compare_profiles: phase misalignment above tolerance");

    // V-perp coordinates of both profiles on the shared grid
    GridFunction urel(rel.grid.L, m, p), vdiff(rel.grid.L, m, 1);
    Mat uce = ce.grid.values;
    for (int i = 0; i < m; ++i) {
        const Vec coords = dec.to_coords(rel.grid.values.row(i).transpose());
        urel.values.row(i) = coords.head(p).transpose();
        // v_REL - v*(u_CE)
        const Vec uce_amb = dec.frame.leftCols(p) * uce.row(i).transpose();
        const Vec vstar = dec.to_coords(equilibrium_graph(model, dec, uce_amb)).tail(dec.n - p);
        vdiff.values(i, 0) = (coords.tail(dec.n - p) - vstar).norm();
    }

    std::map<std::string, double> out;
    GridFunction diff(rel.grid.L, m, p);
    diff.values = urel.values - uce;
    double sup0 = 0.0;
    for (int i = 0; i < m; ++i) sup0 = std::max(sup0, diff.values.row(i).norm());
    const GridFunction ddiff = derivative(diff);
    double sup1 = 0.0;
    for (int i = 0; i < m; ++i) sup1 = std::max(sup1, ddiff.values.row(i).norm());
    out["sup_u_diff"] = sup0;
    out["sup_du_diff"] = sup1;
    out["sup_v_diff"] = vdiff.values.col(0).maxCoeff();

    // endstate tails of the relaxation profile (V-perp part)
    const Vec um = dec.to_coords(rel.u_minus).head(p);
    const Vec upl = dec.to_coords(rel.u_plus).head(p);
    double tail_m = 0.0, tail_p = 0.0;
    for (int i = 0; i < m; ++i) {
        const Vec u = urel.values.row(i).transpose();
        if (rel.grid.x(i) <= 0) tail_m = std::max(tail_m, (u - um).norm());
        if (rel.grid.x(i) >= 0) tail_p = std::max(tail_p, (u - upl).norm());
    }
    out["tail_sup_minus"] = tail_m;
    out["tail_sup_plus"] = tail_p;

    // decay-rate fit of |u_REL - u_plus| on [L/4, 3L/4]
    std::vector<double> xs, ys;
    for (int i = ic; i < m; ++i) {
        const double x = rel.grid.x(i);
        if (x < 0.25 * rel.grid.L || x > 0.75 * rel.grid.L) continue;
        const double d = (urel.values.row(i).transpose() - upl).norm();
        if (d > 1e-13) {
            xs.push_back(x);
            ys.push_back(d);
        }
    }
    double rate = 0.0;
    if (xs.size() >= 4) {
        // log-linear fit: log d = a - rate x
        const int nn = static_cast<int>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < nn; ++i) {
            sx += xs[i];
            sy += std::log(ys[i]);
            sxx += xs[i] * xs[i];
            sxy += xs[i] * std::log(ys[i]);
        }
        rate = -(nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    }
    out["decay_rate_fit"] = rate;
    out["decay_delta_fit"] = rate / std::max(rel.eps, 1e-300);

    // weighted sups e^{+delta eps |x|} |d^j(u_REL - u_CE)| over |x| <= 3L/4
    double wsup0 = 0.0, wsup1 = 0.0;
    for (int i = 0; i < m; ++i) {
        const double x = std::abs(rel.grid.x(i));
        if (x > 0.75 * rel.grid.L) continue;
        const double w = std::exp(std::min(rate, 2.0 * std::abs(cls.Lambda) * rel.eps) * x);
        wsup0 = std::max(wsup0, w * diff.values.row(i).norm());
        wsup1 = std::max(wsup1, w * ddiff.values.row(i).norm());
    }
    out["weighted_sup_u_diff"] = wsup0;
    out["weighted_sup_du_diff"] = wsup1;
    return out;
}

std::vector<LdgFiberReport> ldg_fiber_check(const KineticModel& model, const Decomposition& dec,
                                            const Classification& cls,
                                            const std::vector<double>& q1_values,
                                            const ProfileConfig& cfg) {
    if (cls.tag != CaseTag::LinearlyDegenerate)
        throw InputError("ldg_fiber_check: not linearly degenerate");
    const CanonicalFrame frame = build_canonical(dec);
    const CenterManifoldExpansion exp = taylor_expand(dec, model, cfg.expansion_order);
    const int r = dec.r, dc = frame.dc;
    const double ball = cfg.ball_radius > 0
                            ? cfg.ball_radius
                            : 0.35 * (0.1 * model.norm(model.u_bar) + 0.1);

    // zeta2(q1): v1 = (T12|V1)^{-1} P_ker(q1 r), c2 = fwd block * v1
    const Vec rker = dec.to_coords(cls.r_bar).head(r);
    const Mat T12v1 = dec.T12.leftCols(r);
    const Mat c2_of_v1 = frame.fwd.block(r, dec.p, r, r);

    std::vector<LdgFiberReport> out;
    for (double q1 : q1_values) {
        LdgFiberReport rep;
        rep.q1 = q1;
        const Vec v1 = T12v1.partialPivLu().solve(q1 * rker);
        const Vec zeta2 = c2_of_v1 * v1;

        auto fiber = [&](const Vec& s) {
            Vec wc = Vec::Zero(dc);
            wc.head(r) = s;
            wc.segment(r, r) = zeta2;
            return Vec(reduced_field(exp, frame, wc).head(r));
        };

        double maxf = 0.0, minf = std::numeric_limits<double>::infinity();
        const int samples = 201;
        for (int i = 0; i < samples; ++i) {
            // radial sampling of the kernel ball (r = 1 for the registry model)
            const double s = -ball + 2.0 * ball * i / (samples - 1);
            const double fv = fiber(Vec::Constant(r, s)).norm();
            maxf = std::max(maxf, fv);
            minf = std::min(minf, fv);
        }
        rep.max_field_on_fiber = maxf;
        rep.min_field_on_fiber = minf;
        if (q1 == 0.0) {
            rep.all_equilibria = maxf <= 1e-10;
        } else {
            // trajectories must exit the ball in both directions
            auto run = [&](double dir) {
                Vec s = Vec::Zero(r);
                double x = 0.0, h = 0.01 * ball / std::max(minf, 1e-12);
                Dp54 rkst{[&fiber, dir](const Vec& y) { return Vec(dir * fiber(y)); }};
                for (int guard = 0; guard < 200000; ++guard) {
                    double err;
                    Vec fe;
                    const Vec snew = rkst.step(s, h, err, fe);
                    if (err <= 1e-10 * std::max(1.0, s.norm())) {
                        s = snew;
                        x += h;
                    } else {
                        h *= 0.5;
                    }
                    if (s.norm() > ball) return true;
                    if (x > 1e6 * ball / std::max(minf, 1e-12)) return false;
                }
                return false;
            };
            rep.exits_forward = run(1.0);
            rep.exits_backward = run(-1.0);
        }
        out.push_back(rep);
    }
    return out;
}

SweepTable epsilon_sweep(const KineticModel& model, const Decomposition& dec,
                         const Classification& cls, const std::vector<double>& eps_list,
                         const ProfileConfig& cfg, int jobs) {
    SweepTable table;
    if (eps_list.empty()) return table;

    auto run_one = [&](double eps) {
        SweepRow row;
        row.eps = eps;
        const Profile rel = relaxation_profile(model, dec, cls, eps, cfg);
        const Profile ce = ce2_profile(model, dec, cls, eps, cfg);
        const auto cmp = compare_profiles(model, dec, cls, rel, ce);
        row.sup_u_diff = cmp.at("sup_u_diff");
        row.sup_du_diff = cmp.at("sup_du_diff");
        row.sup_v_diff = cmp.at("sup_v_diff");
        row.tail_sup = std::max(cmp.at("tail_sup_minus"), cmp.at("tail_sup_plus"));
        row.monotone = rel.metrics.at("lambda_monotone") > 0.5;
        row.monotone_margin = rel.metrics.at("lambda_margin_center");
        // endstate error against the exact Burgers limits
        const double kappa = cls.kappa(0, 0);
        const double eta_minus = burgers_exact(eps, cls.Lambda, kappa, -1e6 / eps);
        const double eta_plus = burgers_exact(eps, cls.Lambda, kappa, 1e6 / eps);
        const int ml = rel.grid.m();
        (void)ml;
        const double s_minus = cls.r_bar.dot(dec.gram * rel.u_minus);
        const double s_plus = cls.r_bar.dot(dec.gram * rel.u_plus);
        row.endstate_err =
            std::max(std::abs(s_minus - eta_minus), std::abs(s_plus - eta_plus));
        // Burgers overlay on the u1 coordinate
        double bs = 0.0;
        for (int i = 0; i < rel.grid.m(); ++i)
            bs = std::max(bs, std::abs(rel.u1(i) -
                                       burgers_exact(eps, cls.Lambda, kappa, rel.grid.x(i))));
        row.burgers_sup = bs;
        return row;
    };

    if (jobs <= 1 || eps_list.size() == 1) {
        for (double e : eps_list) table.rows.push_back(run_one(e));
    } else {
        std::vector<std::future<SweepRow>> futs;
        for (double e : eps_list)
            futs.push_back(std::async(std::launch::async, run_one, e));
        for (auto& f : futs) table.rows.push_back(f.get());
    }

    if (table.rows.size() >= 2) {
        std::vector<double> eps, d0, d1, dv, de, dt, db;
        for (const auto& r : table.rows) {
            eps.push_back(r.eps);
            d0.push_back(r.sup_u_diff);
            d1.push_back(r.sup_du_diff);
            dv.push_back(r.sup_v_diff);
            de.push_back(std::max(r.endstate_err, 1e-300));
            dt.push_back(r.tail_sup);
            db.push_back(r.burgers_sup);
        }
        table.slopes["sup_u_diff"] = loglog_slope(eps, d0);
        table.slopes["sup_du_diff"] = loglog_slope(eps, d1);
        table.slopes["sup_v_diff"] = loglog_slope(eps, dv);
        table.slopes["endstate_err"] = loglog_slope(eps, de);
        table.slopes["tail_sup"] = loglog_slope(eps, dt);
        table.slopes["burgers_sup"] = loglog_slope(eps, db);
    }
    return table;
}

}  // namespace km

#include "km/center_manifold.hpp"

#include <nlohmann/json.hpp>

#include "km/operators.hpp"

namespace km {

Vec CanonicalFrame::to_canonical(const Decomposition& dec, const Vec& ambient) const {
    return fwd * dec.to_coords(ambient);
}

Vec CanonicalFrame::from_canonical(const Decomposition& dec, const Vec& canonical) const {
    return dec.from_coords(inv * canonical);
}

CanonicalFrame build_canonical(const Decomposition& dec) {
    CanonicalFrame f;
    f.n = dec.n;
    f.p = dec.p;
    f.r = dec.r;
    f.q = dec.q;
    f.nt = dec.nt;
    f.dc = dec.p + dec.r;
    const int r = f.r, q = f.q, nt = f.nt, n = f.n, p = f.p;

    // c2 = E1 (I - E0^{-1} P_Vt E) v1, an invertible map V1 -> ker A11; its
    // invertibility is the Schur-complement positivity of the E blocks
    Mat Mv1q(r, r);
    if (r > 0) {
        Mat arg(n - p, r);
        arg.topRows(r) = Mat::Identity(r, r);
        arg.bottomRows(nt) = -dec.Mv1;
        Mv1q = dec.E1 * arg;
        // Schur complement E11 - E12 E22^{-1} E21 on V1 must be negative definite
        const Mat E11 = dec.E.topLeftCorner(r, r);
        const Mat E12 = dec.E.topRightCorner(r, nt);
        const Mat schur = E11 - E12 * dec.E0.ldlt().solve(E12.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (schur + schur.transpose()));
        if (es.eigenvalues()(r - 1) >= 0)
            throw NumericError("build_canonical: E Schur complement not negative definite");
    }

    // forward map on adapted coordinates (u1, ut, v1, vt)
    f.fwd = Mat::Zero(f.dc + nt, n);
    // c1 = u1 - G1E vt
    f.fwd.block(0, 0, r, r) = Mat::Identity(r, r);
    if (nt > 0 && r > 0) f.fwd.block(0, p + r, r, nt) = -dec.G1E;
    // c2 = Mv1q v1
    if (r > 0) f.fwd.block(r, p, r, r) = Mv1q;
    // c3 = ut + At11^{-1} At12 (vt + Mv1 v1)
    if (q > 0) {
        f.fwd.block(2 * r, r, q, q) = Mat::Identity(q, q);
        f.fwd.block(2 * r, p, q, r) = dec.At11_inv_At12_t * dec.Mv1;
        f.fwd.block(2 * r, p + r, q, nt) = dec.At11_inv_At12_t;
    }
    // w_h = vt + Mv1 v1
    if (nt > 0) {
        f.fwd.block(f.dc, p + r, nt, nt) = Mat::Identity(nt, nt);
        if (r > 0) f.fwd.block(f.dc, p, nt, r) = dec.Mv1;
    }

    // inverse map
    f.inv = Mat::Zero(n, f.dc + nt);
    Mat Mv1q_inv;
    if (r > 0) Mv1q_inv = Mv1q.partialPivLu().solve(Mat::Identity(r, r));
    // v1 = Mv1q^{-1} c2
    if (r > 0) f.inv.block(p, r, r, r) = Mv1q_inv;
    // vt = w_h - Mv1 v1
    if (nt > 0) {
        f.inv.block(p + r, f.dc, nt, nt) = Mat::Identity(nt, nt);
        if (r > 0) f.inv.block(p + r, r, nt, r) = -dec.Mv1 * Mv1q_inv;
    }
    // u1 = c1 + G1E vt
    if (r > 0) {
        f.inv.block(0, 0, r, r) = Mat::Identity(r, r);
        if (nt > 0) {
            f.inv.block(0, f.dc, r, nt) = dec.G1E;
            f.inv.block(0, r, r, r) = -dec.G1E * dec.Mv1 * Mv1q_inv;
        }
    }
    // ut = c3 - At11^{-1} At12 w_h
    if (q > 0) {
        f.inv.block(r, 2 * r, q, q) = Mat::Identity(q, q);
        if (nt > 0) f.inv.block(r, f.dc, q, nt) = -dec.At11_inv_At12_t;
    }

    if ((f.fwd * f.inv - Mat::Identity(f.dc + nt, f.dc + nt)).norm() > 1e-10)
        throw NumericError("build_canonical: coordinate change not invertible");

    f.J = Mat::Zero(f.dc, f.dc);
    if (r > 0) f.J.block(0, r, r, r) = Mat::Identity(r, r);
    return f;
}

namespace {

// B tensor in adapted coordinates: Bc[k](i,j) = k-th adapted coordinate of
// B(frame_i, frame_j)
std::vector<Mat> adapted_B(const KineticModel& model, const Decomposition& dec) {
    const int n = dec.n;
    std::vector<Mat> Bc(n, Mat::Zero(n, n));
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const Vec b = dec.coord_map * model.apply_B(dec.frame.col(i), dec.frame.col(j));
            for (int k = 0; k < n; ++k) {
                Bc[k](i, j) = b(k);
                Bc[k](j, i) = b(k);
            }
        }
    return Bc;
}

struct ExpansionWork {
    CanonicalFrame frame;
    std::vector<Mat> Bc;
    Mat E0_inv;
    Mat selector_gh;  // nt x n: P_Vt rows of adapted coordinates
    Mat gamma3_rows;  // dc x n: rows 0..r = Gamma3, rest zero
};

ExpansionWork make_work(const Decomposition& dec, const KineticModel& model) {
    ExpansionWork w;
    w.frame = build_canonical(dec);
    w.Bc = adapted_B(model, dec);
    w.E0_inv = dec.E0.ldlt().solve(Mat::Identity(dec.nt, dec.nt));
    w.selector_gh = Mat::Zero(dec.nt, dec.n);
    w.selector_gh.rightCols(dec.nt) = Mat::Identity(dec.nt, dec.nt);
    w.gamma3_rows = Mat::Zero(w.frame.dc, dec.n);
    if (dec.r > 0) w.gamma3_rows.topRows(dec.r) = dec.Gamma3;
    return w;
}

// w(w_c) = inv * (w_c, Xi(w_c)) as a polynomial map into adapted coordinates
PolyMap state_poly(const ExpansionWork& w, const PolyMap& Xi, int max_deg) {
    const int dc = w.frame.dc;
    PolyMap out = PolyMap::identity(dc, max_deg).apply_linear(w.frame.inv.leftCols(dc));
    if (w.frame.nt > 0)
        out.add_scaled(Xi.truncated(max_deg).apply_linear(w.frame.inv.rightCols(w.frame.nt)),
                       1.0);
    return out;
}

}  // namespace

CenterManifoldExpansion taylor_expand(const Decomposition& dec, const KineticModel& model,
                                      int order) {
    if (order < 2 || order > 6) throw InputError("taylor_expand: order must be in [2, 6]");
    const ExpansionWork w = make_work(dec, model);
    const int dc = w.frame.dc, nt = dec.nt;

    CenterManifoldExpansion exp;
    exp.order = order;
    exp.dc = dc;
    exp.nt = nt;
    exp.Xi = PolyMap(dc, nt, order);

    for (int d = 2; d <= order; ++d) {
        const PolyMap wp = state_poly(w, exp.Xi, d);
        const PolyMap f = bilinear_product(w.Bc, wp, wp, d);
        const PolyMap gh = f.apply_linear(w.selector_gh);
        const PolyMap gc = f.apply_linear(w.gamma3_rows);

        // known part: E0^{-1}(Gamma0 [Xi' g_c]_d - [g_h]_d)
        Mat known;
        if (nt > 0) {
            const PolyMap xg = deriv_contract(exp.Xi, gc, d);
            known = w.E0_inv * (dec.Gamma0 * xg.coeffs(d) - gh.coeffs(d));
        } else {
            break;  // no hyperbolic block, nothing to expand
        }

        // J-shift iteration within the degree; the shift is nilpotent, so the
        // coefficients stabilize after at most d+1 passes
        PolyMap xd(dc, nt, d);
        xd.coeffs(d) = known;
        for (int pass = 0; pass <= d + 2; ++pass) {
            const PolyMap shift = deriv_contract_linear(xd, w.frame.J);
            Mat next = w.E0_inv * (dec.Gamma0 * shift.coeffs(d)) + known;
            const double change = (next - xd.coeffs(d)).cwiseAbs().maxCoeff();
            xd.coeffs(d) = next;
            if (change == 0.0) break;
            if (pass == d + 2 && change > 1e-12 * std::max(1.0, next.cwiseAbs().maxCoeff()))
                throw NumericError("taylor_expand: degree iteration did not stabilize");
        }
        exp.Xi.coeffs(d) = xd.coeffs(d);
        if (exp.Xi.max_coeff_norm(d) > 1e12)
            throw NumericError("taylor_expand: coefficient blow-up, order too large");
    }

    // final reduced flow g_c(w_c, Xi(w_c)) to full order
    const PolyMap wp = state_poly(w, exp.Xi, order);
    const PolyMap f = bilinear_product(w.Bc, wp, wp, order);
    exp.gc = f.apply_linear(w.gamma3_rows);

    // algebraic residual of the defining relation, truncated at `order`
    if (nt > 0) {
        const PolyMap gh = f.apply_linear(w.selector_gh);
        PolyMap vel = exp.gc;  // J w_c + g_c
        vel.add_scaled(PolyMap::identity(dc, order).apply_linear(w.frame.J), 1.0);
        const PolyMap lhs = deriv_contract(exp.Xi, vel, order).apply_linear(dec.Gamma0);
        double worst = 0.0;
        for (int d = 0; d <= order; ++d) {
            Mat resid = lhs.coeffs(d) - dec.E0 * exp.Xi.coeffs(d) - gh.coeffs(d);
            worst = std::max(worst, resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0);
        }
        exp.residual_estimate = worst;
    }
    return exp;
}

Vec reduced_field(const CenterManifoldExpansion& exp, const CanonicalFrame& frame,
                  const Vec& w_c) {
    if (w_c.size() != exp.dc) throw InputError("reduced_field: dimension mismatch");
    return frame.J * w_c + exp.gc.eval(w_c);
}

double defining_relation_residual(const CenterManifoldExpansion& exp, const CanonicalFrame& frame,
                                  const Decomposition& dec, const KineticModel& model,
                                  const Vec& w_c) {
    // evaluate the truncated residual polynomial at w_c
    const ExpansionWork w = [&] {
        ExpansionWork ww = make_work(dec, model);
        ww.frame = frame;
        return ww;
    }();
    const int order = exp.order;
    const PolyMap wp = state_poly(w, exp.Xi, order);
    const PolyMap f = bilinear_product(w.Bc, wp, wp, order);
    const PolyMap gh = f.apply_linear(w.selector_gh);
    PolyMap vel = f.apply_linear(w.gamma3_rows);
    vel.add_scaled(PolyMap::identity(exp.dc, order).apply_linear(frame.J), 1.0);
    const PolyMap lhs = deriv_contract(exp.Xi, vel, order).apply_linear(dec.Gamma0);
    Vec resid = lhs.eval(w_c) - dec.E0 * exp.Xi.eval(w_c) - gh.eval(w_c);
    return resid.norm();
}

double kernel_fiber_terms_norm(const KineticModel& model, const Decomposition& dec,
                               int max_degree) {
    if (dec.r == 0) return 0.0;
    const CenterManifoldExpansion exp = taylor_expand(dec, model, std::max(2, max_degree));
    double worst = 0.0;
    for (int d = 2; d <= std::max(2, max_degree); ++d) {
        const auto& tab = MonomialTable::get(exp.dc, d);
        for (int pp = 0; pp < tab.count(); ++pp) {
            bool pure_c1 = true;
            for (int v = dec.r; v < exp.dc; ++v)
                if (tab.exps[pp][v] != 0) pure_c1 = false;
            if (!pure_c1) continue;
            worst = std::max(worst, exp.gc.coeffs(d).col(pp).head(dec.r).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

NormalForm normal_form(const CenterManifoldExpansion& exp, const CanonicalFrame& frame,
                       const Decomposition& dec, const Classification& cls) {
    if (cls.tag == CaseTag::Noncharacteristic || dec.r == 0)
        throw InputError("normal_form: noncharacteristic input");
    if (frame.dc != exp.dc) throw InputError("normal_form: frame/expansion mismatch");
    NormalForm nf;
    nf.kappa = cls.kappa;

    // quadratic coefficient of the c1-block in the pure-c1 direction
    const auto& tab2 = MonomialTable::get(exp.dc, 2);
    std::vector<int> e(exp.dc, 0);
    e[0] = 2;
    const int pos = tab2.find(e);

    if (cls.tag == CaseTag::LinearlyDegenerate) {
        nf.ldg_quadratic_norm = 0.0;
        for (int pp = 0; pp < tab2.count(); ++pp) {
            bool pure = true;
            for (int v = dec.r; v < exp.dc; ++v)
                if (tab2.exps[pp][v] != 0) pure = false;
            if (pure)
                nf.ldg_quadratic_norm = std::max(
                    nf.ldg_quadratic_norm, exp.gc.coeffs(2).col(pp).head(dec.r).cwiseAbs().maxCoeff());
        }
        nf.chi = nf.ldg_quadratic_norm;
        nf.lambda_half = 0.0;
        nf.deviation = 0.0;
        return nf;
    }

    if (dec.r != 1) throw InputError("normal_form: scalar extraction needs a simple kernel");
    double chi_b = exp.gc.coeffs(2)(0, pos);
    // align the canonical c1 basis vector with the classification's r_bar
    const double s = cls.r_bar.dot(dec.gram * dec.frame.col(0)) >= 0 ? 1.0 : -1.0;
    nf.chi = s * chi_b;
    nf.kappa_chi = cls.kappa(0, 0) * nf.chi;
    nf.lambda_half = cls.Lambda / 2.0;
    nf.deviation = std::abs(nf.kappa_chi - nf.lambda_half) / std::abs(nf.lambda_half);
    return nf;
}

// ---------------------------------------------------------------------------
// cutoff

namespace {
double sigma(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }
double sigma_d1(double t) { return t > 0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }
double sigma_d2(double t) {
    return t > 0 ? std::exp(-1.0 / t) * (1.0 / (t * t * t * t) - 2.0 / (t * t * t)) : 0.0;
}
}  // namespace

double cutoff_rho(double s) {
    const double t = std::abs(s);
    const double a = sigma(2.0 - t), b = sigma(t - 1.0);
    return a + b > 0 ? a / (a + b) : 0.0;
}

double cutoff_rho_d1(double s) {
    const double t = std::abs(s);
    const double a = sigma(2.0 - t), b = sigma(t - 1.0);
    if (a + b == 0.0) return 0.0;
    const double ap = -sigma_d1(2.0 - t), bp = sigma_d1(t - 1.0);
    const double d = (ap * b - a * bp) / sq(a + b);
    return s >= 0 ? d : -d;
}

double cutoff_rho_d2(double s) {
    const double t = std::abs(s);
    const double a = sigma(2.0 - t), b = sigma(t - 1.0);
    if (a + b == 0.0) return 0.0;
    const double ap = -sigma_d1(2.0 - t), bp = sigma_d1(t - 1.0);
    const double app = sigma_d2(2.0 - t), bpp = sigma_d2(t - 1.0);
    const double den = a + b;
    return ((app * b - a * bpp) * den - 2.0 * (ap * b - a * bp) * (ap + bp)) / (den * den * den);
}

SmoothMapSpec make_cutoff_quadratic_spec(const KineticModel& model, double eps0) {
    SmoothMapSpec spec;
    const double e2 = eps0 * eps0;
    spec.N = [model, e2](const Vec& h) {
        return Vec(cutoff_rho(model.ip(h, h) / e2) * model.apply_B(h, h));
    };
    spec.dN = [model, e2](const Vec& h, const Vec& g) {
        const double s = model.ip(h, h) / e2;
        return Vec(cutoff_rho_d1(s) * (2.0 * model.ip(h, g) / e2) * model.apply_B(h, h) +
                   2.0 * cutoff_rho(s) * model.apply_B(h, g));
    };
    spec.d2N = [model, e2](const Vec& h, const Vec& g1, const Vec& g2) {
        const double s = model.ip(h, h) / e2;
        const double h1 = 2.0 * model.ip(h, g1) / e2, h2 = 2.0 * model.ip(h, g2) / e2;
        Vec out = cutoff_rho_d2(s) * h1 * h2 * model.apply_B(h, h);
        out += cutoff_rho_d1(s) * (2.0 * model.ip(g1, g2) / e2) * model.apply_B(h, h);
        out += cutoff_rho_d1(s) * h1 * 2.0 * model.apply_B(h, g2);
        out += cutoff_rho_d1(s) * h2 * 2.0 * model.apply_B(h, g1);
        out += 2.0 * cutoff_rho(s) * model.apply_B(g1, g2);
        return out;
    };
    return spec;
}

// ---------------------------------------------------------------------------
// Picard iteration

namespace {

GridFunction coords_grid(const Decomposition& dec, const GridFunction& g) {
    GridFunction out(g.L, g.m(), g.n());
    for (int i = 0; i < g.m(); ++i)
        out.values.row(i) = dec.to_coords(g.values.row(i).transpose()).transpose();
    return out;
}

GridFunction cutoff_nonlinearity(const Decomposition& dec, const KineticModel& model,
                                 const GridFunction& w, double eps0) {
    (void)dec;
    GridFunction f(w.L, w.m(), w.n());
    for (int i = 0; i < w.m(); ++i) {
        const Vec wi = w.values.row(i).transpose();
        const double s = model.ip(wi, wi) / (eps0 * eps0);
        f.values.row(i) = (cutoff_rho(s) * model.apply_B(wi, wi)).transpose();
    }
    return f;
}

}  // namespace

PicardConstants measure_picard_constants(const Decomposition& dec, const KineticModel& model,
                                         const PicardConfig& cfg) {
    PicardConstants k;
    Rng rng(2024);
    // bilinear norm over random unit pairs (gram-orthonormal coordinates)
    const std::vector<Mat> Bc = adapted_B(model, dec);
    for (int t = 0; t < 64; ++t) {
        Vec h = rng.normal_vec(dec.n);
        h /= h.norm();
        Mat Mh(dec.n, dec.n);
        for (int kk = 0; kk < dec.n; ++kk) Mh.row(kk) = (Bc[kk] * h).transpose();
        k.c_B = std::max(k.c_B, Mh.jacobiSvd().singularValues()(0));
    }
    // operator norm of K over decaying + constant probes with values in V
    const int m_probe = std::min(cfg.grid_m, 513) | 1;
    for (int t = 0; t < 8; ++t) {
        const Vec a = rng.normal_vec(dec.n - dec.p);
        const Vec b = rng.normal_vec(dec.n - dec.p);
        const double wdt = rng.uniform(1.0, 4.0) / dec.nu;
        const double x0 = rng.uniform(-0.2, 0.2) * cfg.grid_L;
        GridFunction f(cfg.grid_L, m_probe, dec.n);
        for (int i = 0; i < m_probe; ++i) {
            Vec c = Vec::Zero(dec.n);
            c.tail(dec.n - dec.p) = a * std::exp(-sq((f.x(i) - x0) / wdt)) + 0.3 * b;
            f.values.row(i) = dec.from_coords(c).transpose();
        }
        const GridFunction kf = apply_K(dec, f);
        const GridFunction fc = coords_grid(dec, f), kfc = coords_grid(dec, kf);
        const double rz = norm_z(kfc, cfg.weights) / std::max(1e-300, norm_z(fc, cfg.weights));
        const double rh =
            norm_h1w(kfc, cfg.weights.alpha) / std::max(1e-300, norm_h1w(fc, cfg.weights.alpha));
        k.c_K = std::max({k.c_K, rz, rh});
    }
    k.c = 2.0 * k.c_B * k.c_K;
    return k;
}

PicardConfig default_picard_config(const Decomposition& dec, const KineticModel& model) {
    PicardConfig cfg;
    cfg.weights = WeightParams::defaults_for(dec.nu);
    cfg.grid_L = 20.0 / dec.nu;
    cfg.grid_m = 2049;
    const PicardConstants k = measure_picard_constants(dec, model, cfg);
    cfg.eps0 = 1.0 / (8.0 * k.c);
    cfg.delta = 1.0 / (8.0 * k.c);
    cfg.eps1 = cfg.delta / (4.0 * k.c);
    return cfg;
}

void validate_picard_config(const PicardConfig& cfg, const PicardConstants& k,
                            const Decomposition& dec) {
    cfg.weights.validate(dec.nu);
    if (!(k.c * cfg.eps0 < 0.25))
        throw NumericError("picard config: c*eps0 < 1/4 violated");
    if (!(k.c * cfg.delta < 0.25))
        throw NumericError("picard config: c*delta < 1/4 violated");
    if (!(k.c * cfg.eps1 < cfg.delta / 2.0))
        throw NumericError("picard config: c*eps1 < delta/2 violated");
    if (!(2.0 * cfg.weights.beta * cfg.grid_L >= 8.0))
        throw NumericError("picard config: boundary weight too large (2 beta L < 8)");
    if (cfg.grid_m < 5 || cfg.grid_m % 2 == 0)
        throw NumericError("picard config: grid_m must be odd >= 5");
}

PicardResult picard_solve(const Decomposition& dec, const KineticModel& model, const Vec& w0,
                          const PicardConfig& cfg) {
    const PicardConstants k = measure_picard_constants(dec, model, cfg);
    validate_picard_config(cfg, k, dec);
    const Vec c0 = dec.to_coords(w0);
    if ((c0 - dec.Pc_coords * c0).norm() > 1e-9 * std::max(1.0, c0.norm()))
        throw InputError("picard_solve: w0 not in Hc");
    if (c0.norm() > cfg.eps1 * (1.0 + 1e-9))
        throw InputError("picard_solve: |w0| exceeds eps1");

    const int m = cfg.grid_m;
    GridFunction Fc(cfg.grid_L, m, dec.n);
    for (int i = 0; i < m; ++i)
        Fc.values.row(i) = (w0 + center_drift(dec, w0, Fc.x(i))).transpose();

    PicardResult out;
    GridFunction w(cfg.grid_L, m, dec.n);  // w_1 = 0
    for (int it = 0; it < cfg.max_iter; ++it) {
        const GridFunction f = cutoff_nonlinearity(dec, model, w, cfg.eps0);
        GridFunction next = apply_K(dec, f);
        next.values += Fc.values;
        const double dist =
            norm_z_diff(coords_grid(dec, next), coords_grid(dec, w), cfg.weights);
        out.iterations = it + 1;
        if (!out.distances.empty() && out.distances.back() > 0 && dist > 1e-14)
            out.ratios.push_back(dist / out.distances.back());
        out.distances.push_back(dist);
        w = next;
        if (out.ratios.size() >= 3 && dist > 100.0 * cfg.tol_fixpoint) {
            const auto& rr = out.ratios;
            if (rr[rr.size() - 1] > 0.9 && rr[rr.size() - 2] > 0.9 && rr[rr.size() - 3] > 0.9)
                throw NumericError("picard_solve: contraction ratio above 0.9; config violates "
                                   "the smallness conditions");
        }
        if (dist <= cfg.tol_fixpoint) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged)
        throw NumericError("picard_solve: no convergence; residual plateau above tolerance");

    const GridFunction f = cutoff_nonlinearity(dec, model, w, cfg.eps0);
    out.residual = linear_residual(dec, model, w, f);
    out.solution = w;
    return out;
}

Vec graph_Jc(const Decomposition& dec, const PicardResult& result) {
    const Vec w0val = result.solution.values.row(result.solution.center_index()).transpose();
    return w0val - dec.Pc * w0val;
}

std::string CenterManifoldExpansion::to_json() const {
    nlohmann::json j;
    j["order"] = order;
    j["dim_c"] = dc;
    nlohmann::json terms = nlohmann::json::array();
    for (int d = 2; d <= order; ++d) {
        const auto& tab = MonomialTable::get(dc, d);
        for (int p = 0; p < tab.count(); ++p)
            for (int i = 0; i < nt; ++i) {
                if (Xi.coeffs(d)(i, p) == 0.0) continue;
                nlohmann::json t;
                t["target_index"] = i;
                t["multi_index"] = tab.exps[p];
                t["coeff"] = Xi.coeffs(d)(i, p);
                terms.push_back(t);
            }
    }
    j["terms"] = terms;
    return j.dump(2);
}

}  // namespace km

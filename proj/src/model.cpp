#include "km/model.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <sstream>

namespace km {

using nlohmann::json;

Vec KineticModel::apply_B(const Vec& x, const Vec& y) const {
    if (x.size() != dim || y.size() != dim)
        throw InputError("apply_B: dimension mismatch");
    Vec out(dim);
    for (int k = 0; k < dim; ++k) out(k) = x.dot(B[k] * y);
    return out;
}

Vec apply_Q(const KineticModel& m, const Vec& w) { return m.apply_B(w, w); }

Vec apply_dQ(const KineticModel& m, const Vec& w0, const Vec& h) {
    return 2.0 * m.apply_B(w0, h);
}

Mat dQ_matrix(const KineticModel& m, const Vec& w0) {
    // dQ(w0)h = 2 B(w0, h); row k is 2 * w0' B[k]
    Mat out(m.dim, m.dim);
    for (int k = 0; k < m.dim; ++k) out.row(k) = 2.0 * (m.B[k].transpose() * w0).transpose();
    return out;
}

namespace {

double op_norm(const Mat& m) { return m.norm() == 0 ? 0.0 : m.jacobiSvd().singularValues()(0); }

// Gram-orthonormalize the columns of basis; returns n x k with k = rank.
Mat gram_orthonormalize(const Mat& gram, const Mat& basis, double tol) {
    const int n = static_cast<int>(basis.rows());
    Mat out(n, basis.cols());
    int k = 0;
    for (int j = 0; j < basis.cols(); ++j) {
        Vec v = basis.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < k; ++i) v -= out.col(i).dot(gram * v) * out.col(i);
        const double nrm = std::sqrt(std::max(0.0, v.dot(gram * v)));
        if (nrm > tol) out.col(k++) = v / nrm;
    }
    return out.leftCols(k);
}

}  // namespace

HypothesisReport verify_hypotheses(const KineticModel& m, double tol) {
    HypothesisReport rep;
    auto fail = [&rep](const std::string& tag, double witness, const std::string& detail) {
        rep.violations.push_back({tag, witness, detail});
    };

    const int n = m.dim;
    const int p = m.vperp_dim();
    if (n <= 0 || p <= 0 || p >= n) {
        fail("gram", static_cast<double>(n), "degenerate dimensions");
        rep.pass = false;
        return rep;
    }

    const double nrmA = std::max(op_norm(m.A), 1e-300);
    const double tol_spd = 1e-10 * nrmA;

    // gram symmetric positive definite
    const double gram_asym = (m.gram - m.gram.transpose()).norm();
    if (gram_asym > tol * m.gram.norm())
        fail("gram", gram_asym, "gram not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> ges(0.5 * (m.gram + m.gram.transpose()));
    if (ges.eigenvalues()(0) <= tol_spd)
        fail("gram", ges.eigenvalues()(0), "gram not positive definite");
    if (!rep.violations.empty()) {
        rep.pass = false;
        return rep;
    }

    // H1(i): A gram-self-adjoint and injective
    const Mat GA = m.gram * m.A;
    const double sa = (GA - GA.transpose()).norm();
    if (sa > tol * std::max(1.0, GA.norm()))
        fail("H1i", sa, "A not self-adjoint w.r.t. gram");
    const double smin = m.A.jacobiSvd().singularValues().tail(1)(0);
    if (smin <= 1e-10 * nrmA)
        fail("H1i", smin, "A not injective (smallest singular value)");

    // V-perp basis sanity + orthonormal frame of V-perp and V
    Mat Uperp = gram_orthonormalize(m.gram, m.v_perp_basis, 1e-10);
    if (Uperp.cols() != p)
        fail("H1ii", static_cast<double>(Uperp.cols()), "v_perp_basis not linearly independent");
    Mat ext(n, n + p);
    ext << Uperp, Mat::Identity(n, n);
    Mat full = gram_orthonormalize(m.gram, ext, 1e-10);
    const Mat Uv = full.rightCols(n - p);  // gram-orthonormal basis of V
    const Mat PperpG = Uperp * Uperp.transpose() * m.gram;  // projection onto V-perp

    // H1(ii): B symmetric in its arguments, range orthogonal to V-perp
    double bsym = 0.0;
    for (int k = 0; k < n; ++k) bsym = std::max(bsym, (m.B[k] - m.B[k].transpose()).norm());
    double bnorm = 0.0;
    for (int k = 0; k < n; ++k) bnorm = std::max(bnorm, m.B[k].norm());
    if (bsym > tol * std::max(1.0, bnorm))
        fail("H1ii", bsym, "B not symmetric in its two arguments");
    double brange = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Vec bij = m.apply_B(Mat::Identity(n, n).col(i), Mat::Identity(n, n).col(j));
            brange = std::max(brange, (PperpG * bij).norm());
        }
    if (brange > tol * std::max(1.0, bnorm))
        fail("H1ii", brange, "range of B not orthogonal to V-perp");

    // H2: Q(u_bar) = 0
    const double qbar = m.norm(apply_Q(m, m.u_bar));
    if (qbar > tol * std::max(1.0, bnorm * sq(m.norm(m.u_bar))))
        fail("H2eq", qbar, "u_bar is not an equilibrium: ||Q(u_bar)|| > tol");

    // H2(i): Q'(u_bar) gram-self-adjoint, kernel exactly V-perp
    const Mat dQ = dQ_matrix(m, m.u_bar);
    const Mat GdQ = m.gram * dQ;
    const double dqsa = (GdQ - GdQ.transpose()).norm();
    if (dqsa > tol * std::max(1.0, GdQ.norm()))
        fail("H2i", dqsa, "Q'(u_bar) not self-adjoint w.r.t. gram");
    const double ker_res = (dQ * Uperp).norm();
    if (ker_res > tol * std::max(1.0, dQ.norm()))
        fail("H2i", ker_res, "V-perp not contained in ker Q'(u_bar)");

    // E = Q'(u_bar) restricted to V, in the gram-orthonormal V basis.
    const Mat E = Uv.transpose() * m.gram * dQ * Uv;
    const Mat Esym = 0.5 * (E + E.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> ee(Esym);
    const double lmax = ee.eigenvalues()(n - p - 1);
    const double lminE = ee.eigenvalues()(0);
    if (lmax >= -tol * std::max(1.0, std::abs(lminE))) {
        fail("H2ii", lmax, "Q'(u_bar) restricted to V not negative definite");
    } else {
        rep.delta = -lmax;
    }

    rep.pass = rep.violations.empty();
    if (!rep.pass) rep.delta = 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Synthetic models

namespace {

KineticModel try_generate(SyntheticKind kind, Rng& rng, int n) {
    int p = 0;
    switch (kind) {
        case SyntheticKind::GNL_MIN: p = 2; break;
        case SyntheticKind::GNL_RICH: p = 3; break;
        case SyntheticKind::LDG_MIN: p = 1; break;
        case SyntheticKind::NONCHAR: p = 2; break;
    }
    if (n < p + 2) throw InputError("generate_synthetic: n must be >= dim V-perp + 2");
    const int nv = n - p;

    KineticModel m;
    m.dim = n;
    m.gram = Mat::Identity(n, n);
    m.u_bar = Vec::Zero(n);
    m.u_bar(0) = 1.0;
    m.v_perp_basis = Mat::Identity(n, n).leftCols(p);

    // E symmetric negative definite on V, eigenvalues in about [-2, -0.3]
    Mat M = rng.normal_mat(nv, nv);
    Mat EE = M * M.transpose();
    EE *= 1.7 / std::max(op_norm(EE), 1e-12);
    const Mat E = -(EE + 0.3 * Mat::Identity(nv, nv));

    // B: range in V; B(u_bar, .) = 0 on V-perp, E/2 on V; rest random.
    m.B.assign(n, Mat::Zero(n, n));
    for (int k = p; k < n; ++k) {
        for (int i = 1; i < n; ++i)
            for (int j = i; j < n; ++j) {
                const double val = 0.35 * rng.normal();
                m.B[k](i, j) = val;
                m.B[k](j, i) = val;
            }
        for (int j = 0; j < n; ++j) {
            const double val = (j >= p) ? E(k - p, j - p) / 2.0 : 0.0;
            m.B[k](0, j) = val;
            m.B[k](j, 0) = val;
        }
    }

    if (kind == SyntheticKind::LDG_MIN) {
        // With p = 1 the kernel fiber u_bar + span(r) is a line of exact
        // equilibria (B(r,r) = B(u_bar,u_bar) = 0), which is the linearly
        // degenerate structure; nothing extra to zero out.
    }

    // A symmetric, scaled to ||A|| ~ 1.5, with the prescribed V-perp block.
    Mat A = rng.normal_mat(n, n);
    A = 0.5 * (A + A.transpose()).eval();
    A *= 1.5 / std::max(op_norm(A), 1e-12);

    Mat A11(p, p);
    if (kind == SyntheticKind::NONCHAR) {
        A11 = rng.normal_mat(p, p);
        A11 = 0.5 * (A11 + A11.transpose()).eval();
        A11 += ((A11.trace() >= 0) ? 1.0 : -1.0) * 0.8 * Mat::Identity(p, p);
    } else if (kind == SyntheticKind::LDG_MIN) {
        A11 = Mat::Zero(1, 1);
    } else {
        // GNL kinds: symmetric with a simple kernel direction away from u_bar.
        Vec diag(p);
        for (int i = 0; i + 1 < p; ++i)
            diag(i) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.6, 1.4);
        diag(p - 1) = 0.0;
        // Rotate within span(e_2..e_p) so the kernel is generic but keeps a
        // component off u_bar = e_1.
        Mat R = Mat::Identity(p, p);
        if (p > 2) {
            Mat Rm = rng.normal_mat(p - 1, p - 1);
            Eigen::HouseholderQR<Mat> qr(Rm);
            Mat Q = qr.householderQ();
            R.bottomRightCorner(p - 1, p - 1) = Q;
        }
        A11 = R * diag.asDiagonal() * R.transpose();
    }
    A.topLeftCorner(p, p) = A11;
    m.A = A;

    // Checks and Lambda adjustment
    if (m.A.jacobiSvd().singularValues().tail(1)(0) < 0.05)
        throw NumericError("A nearly singular");

    if (kind == SyntheticKind::GNL_MIN || kind == SyntheticKind::GNL_RICH) {
        // analytic Lambda = -2 <r, A12 E^{-1} B(r,r)> with r the unit kernel
        // vector of A11 inside V-perp
        Eigen::SelfAdjointEigenSolver<Mat> es(A11);
        int k0 = 0;
        for (int i = 0; i < p; ++i)
            if (std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(k0))) k0 = i;
        if (std::abs(es.eigenvalues()(k0)) > 1e-9) throw NumericError("A11 kernel lost");
        for (int i = 0; i < p; ++i)
            if (i != k0 && std::abs(es.eigenvalues()(i)) < 0.3)
                throw NumericError("A11 spectrum poorly separated");
        Vec rbar = Vec::Zero(n);
        rbar.head(p) = es.eigenvectors().col(k0);
        const Vec brr_full = m.apply_B(rbar, rbar);
        const Vec brr = brr_full.tail(nv);
        const Mat A12 = m.A.topRightCorner(p, nv);
        const Vec w = A12 * E.ldlt().solve(brr);
        const double Lambda = -2.0 * rbar.head(p).dot(w);
        // Only a mild rescale of the kernel-block quadratics is allowed; a
        // large one would inflate B(r,r) and with it the cubic terms of the
        // reduced flux, shrinking the small-amplitude window the sweeps need.
        if (std::abs(Lambda) < 0.15 || std::abs(Lambda) > 2.5)
            throw NumericError("Lambda outside the accepted band, reseed");
        if (std::abs(Lambda) < 0.3) {
            const double s = 0.3 / std::abs(Lambda);
            for (int k = p; k < n; ++k)
                for (int i = 1; i < p; ++i)
                    for (int j = 1; j < p; ++j) m.B[k](i, j) *= s;
        }
    }

    auto rep = verify_hypotheses(m);
    if (!rep.pass) throw NumericError("synthetic model failed hypothesis check");
    return m;
}

const char* kind_name(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::GNL_MIN: return "gnl_min";
        case SyntheticKind::GNL_RICH: return "gnl_rich";
        case SyntheticKind::LDG_MIN: return "ldg_min";
        case SyntheticKind::NONCHAR: return "nonchar";
    }
    return "?";
}

}  // namespace

KineticModel generate_synthetic(SyntheticKind kind, std::uint64_t seed, int n) {
    std::string last;
    for (int attempt = 0; attempt < 24; ++attempt) {
        Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL * attempt + 1);
        try {
            KineticModel m = try_generate(kind, rng, n);
            std::ostringstream nm;
            nm << "synthetic-" << kind_name(kind) << "-s" << seed << "-n" << n;
            m.name = nm.str();
            return m;
        } catch (const NumericError& e) {
            last = e.what();
            continue;
        }
    }
    throw NumericError("generate_synthetic: recipe failed after bounded retries (" + last +
                       "); reseed needed");
}

// ---------------------------------------------------------------------------
// JSON model files

KineticModel load_model(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::exception& e) {
        throw InputError(std::string("model file: invalid JSON: ") + e.what());
    }
    auto need = [&j](const char* key) {
        if (!j.contains(key)) throw InputError(std::string("model file: missing field ") + key);
    };
    for (const char* key : {"name", "dim", "gram", "A", "B", "u_bar", "v_perp_basis"}) need(key);

    KineticModel m;
    m.name = j["name"].get<std::string>();
    m.dim = j["dim"].get<int>();
    const int n = m.dim;
    if (n <= 0) throw InputError("model file: empty state space");

    auto get_matrix = [n](const json& a, const char* what) {
        if (!a.is_array() || static_cast<int>(a.size()) != n * n)
            throw InputError(std::string("model file: ") + what + " must have dim*dim entries");
        Mat out(n, n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) out(i, k) = a[i * n + k].get<double>();
        return out;
    };
    m.gram = get_matrix(j["gram"], "gram");
    m.A = get_matrix(j["A"], "A");

    const json& jb = j["B"];
    if (!jb.is_array() || static_cast<int>(jb.size()) != n * n * n)
        throw InputError("model file: B must have dim^3 entries (index order k*n^2+i*n+j)");
    m.B.assign(n, Mat::Zero(n, n));
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int jj = 0; jj < n; ++jj) m.B[k](i, jj) = jb[k * n * n + i * n + jj].get<double>();
    // normalize tensor symmetry over (i, j)
    for (int k = 0; k < n; ++k) m.B[k] = 0.5 * (m.B[k] + m.B[k].transpose()).eval();

    const json& ju = j["u_bar"];
    if (!ju.is_array() || static_cast<int>(ju.size()) != n)
        throw InputError("model file: u_bar must have dim entries");
    m.u_bar = Vec(n);
    for (int i = 0; i < n; ++i) m.u_bar(i) = ju[i].get<double>();

    const json& jv = j["v_perp_basis"];
    if (!jv.is_array() || jv.empty()) throw InputError("model file: v_perp_basis empty");
    const int p = static_cast<int>(jv.size());
    if (p >= n) throw InputError("model file: dim V-perp must be < dim");
    m.v_perp_basis = Mat(n, p);
    for (int c = 0; c < p; ++c) {
        if (!jv[c].is_array() || static_cast<int>(jv[c].size()) != n)
            throw InputError("model file: v_perp_basis rows must have dim entries");
        for (int i = 0; i < n; ++i) m.v_perp_basis(i, c) = jv[c][i].get<double>();
    }

    // The metric must be structurally usable before any hypothesis check.
    const double gasym = (m.gram - m.gram.transpose()).norm();
    if (gasym > 1e-12 * std::max(1.0, m.gram.norm()))
        throw InputError("model file: gram matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> ges(m.gram);
    if (ges.eigenvalues()(0) <= 0.0)
        throw InputError("model file: gram matrix not positive definite");
    return m;
}

std::string save_model(const KineticModel& m) {
    const int n = m.dim;
    json j;
    j["name"] = m.name;
    j["dim"] = n;
    auto flat = [n](const Mat& M) {
        std::vector<double> v(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) v[i * n + k] = M(i, k);
        return v;
    };
    j["gram"] = flat(m.gram);
    j["A"] = flat(m.A);
    std::vector<double> b(static_cast<std::size_t>(n) * n * n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int jj = 0; jj < n; ++jj) b[k * n * n + i * n + jj] = m.B[k](i, jj);
    j["B"] = b;
    j["u_bar"] = std::vector<double>(m.u_bar.data(), m.u_bar.data() + n);
    std::vector<std::vector<double>> vb;
    for (int c = 0; c < m.v_perp_basis.cols(); ++c)
        vb.emplace_back(m.v_perp_basis.col(c).data(), m.v_perp_basis.col(c).data() + n);
    j["v_perp_basis"] = vb;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Registry

std::vector<std::string> registry_names() { return {"gnl-min", "gnl-rich", "ldg-min", "nonchar"}; }

bool is_registry_model(const std::string& name) {
    for (const auto& s : registry_names())
        if (s == name) return true;
    return false;
}

KineticModel registry_model(const std::string& name) {
    KineticModel m;
    if (name == "gnl-min")
        m = generate_synthetic(SyntheticKind::GNL_MIN, 7, 5);
    else if (name == "gnl-rich")
        m = generate_synthetic(SyntheticKind::GNL_RICH, 11, 9);
    else if (name == "ldg-min")
        m = generate_synthetic(SyntheticKind::LDG_MIN, 3, 6);
    else if (name == "nonchar")
        m = generate_synthetic(SyntheticKind::NONCHAR, 1, 6);
    else
        throw InputError("model not found: " + name);
    m.name = name;
    return m;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("loglog_slope: need >= 2 points");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(std::max(y[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace km

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <nlohmann/json.hpp>

#include "km/chapman_enskog.hpp"
#include "km/oracles.hpp"

using namespace km;

namespace {

struct Ctx {
    KineticModel model;
    Decomposition dec;
    Ctx(const std::string& name) : model(registry_model(name)), dec(build_decomposition(model)) {}
};

// model transformed by an invertible change of coordinates w -> T z (the
// abstract objects transported so the dynamics is identical)
KineticModel transform_model(const KineticModel& m, const Mat& T) {
    KineticModel out = m;
    const Mat Tinv = T.inverse();
    out.gram = T.transpose() * m.gram * T;
    out.A = Tinv * m.A * T;
    out.u_bar = Tinv * m.u_bar;
    out.v_perp_basis = Tinv * m.v_perp_basis;
    out.B.assign(m.dim, Mat::Zero(m.dim, m.dim));
    for (int k = 0; k < m.dim; ++k) {
        // B'(x,y) = T^{-1} B(Tx, Ty): component k of out is row k of Tinv
        // applied to B(Tx, Ty)
        for (int i = 0; i < m.dim; ++i)
            for (int j = 0; j < m.dim; ++j) {
                const Vec b = m.apply_B(T.col(i), T.col(j));
                out.B[k](i, j) = Tinv.row(k).dot(b);
            }
    }
    out.name = m.name + "-transformed";
    return out;
}

}  // namespace

TEST_CASE("equilibrium graph: base point, tangency, residual") {
    Ctx c("gnl-min");
    const Vec zero = Vec::Zero(c.dec.n);
    CHECK(equilibrium_graph(c.model, c.dec, zero).norm() < 1e-12);

    // tangency: dv*/du(0) = 0 via finite-difference slope at step 1e-4
    Rng rng(2);
    for (int t = 0; t < 5; ++t) {
        Vec du = c.dec.frame.leftCols(c.dec.p) * rng.normal_vec(c.dec.p);
        du /= c.model.norm(du);
        const Vec vp = equilibrium_graph(c.model, c.dec, 1e-4 * du);
        const Vec vm = equilibrium_graph(c.model, c.dec, -1e-4 * du);
        CHECK(((vp - vm) / 2e-4).norm() < 1e-6 / 1e-4 * 1e-4);  // slope <= 1e-6... see below
        CHECK(((vp - vm) / 2e-4).norm() < 1e-6);
    }

    // Q(u_bar + u + v*(u)) = 0 for random small u
    for (int t = 0; t < 10; ++t) {
        const Vec u = c.dec.frame.leftCols(c.dec.p) * (0.05 * rng.normal_vec(c.dec.p));
        const Vec v = equilibrium_graph(c.model, c.dec, u);
        CHECK(c.model.norm(apply_Q(c.model, c.model.u_bar + u + v)) < 1e-10);
    }

    // outside the basin -> error
    const Vec big = 10.0 * c.dec.frame.col(0);
    CHECK_THROWS_AS(equilibrium_graph(c.model, c.dec, big), NumericError);
}

TEST_CASE("flux and viscosity basics") {
    Ctx c("gnl-min");
    CHECK(flux(c.model, c.dec, Vec::Zero(c.dec.n)).norm() < 1e-12);

    // D* symmetric
    const Mat D = viscosity(c.model, c.dec);
    CHECK((D - D.transpose()).norm() < 1e-12);

    // kappa = r' D* r > 0
    const auto cls = classify(c.model, c.dec);
    REQUIRE(cls.tag == CaseTag::SimpleGNL);
    CHECK(cls.kappa(0, 0) > 0.0);

    // flux Jacobian at 0 equals A11 and matches the fd oracle
    const Mat J0 = flux_jacobian(c.model, c.dec, Vec::Zero(c.dec.n));
    CHECK((J0 - c.dec.A11).norm() < 1e-9);
    const auto fluxmap = [&](const Vec& up) {
        return Vec(c.dec.to_coords(flux(c.model, c.dec, c.dec.frame.leftCols(c.dec.p) * up))
                       .head(c.dec.p));
    };
    const Mat Jfd = fd_jacobian(fluxmap, Vec::Zero(c.dec.p), 1e-4);
    CHECK((J0 - Jfd).norm() < 1e-8);
}

TEST_CASE("classification of the registry models") {
    {
        Ctx c("nonchar");
        const auto cls = classify(c.model, c.dec);
        CHECK(cls.tag == CaseTag::Noncharacteristic);
        CHECK(cls.r_bar.size() == 0);
        CHECK(cls.m == 0);
    }
    {
        Ctx c("gnl-min");
        const auto cls = classify(c.model, c.dec);
        CHECK(cls.tag == CaseTag::SimpleGNL);
        CHECK(cls.m == 1);
        CHECK(std::abs(cls.Lambda) > 0.2);
        // Lambda against the analytic second-derivative formula
        // Lambda = -2 <r, A12 E^{-1} B(r,r)>
        const Vec r = cls.r_bar;
        const Vec brr = c.dec.coord_map * c.model.apply_B(r, r);
        const Vec w = c.dec.A12 * c.dec.E.ldlt().solve(brr.tail(c.dec.n - c.dec.p));
        const Vec rc = c.dec.to_coords(r);
        const double lambda_analytic = -2.0 * rc.head(c.dec.p).dot(w);
        CHECK(cls.Lambda == doctest::Approx(lambda_analytic).epsilon(1e-7));
    }
    {
        Ctx c("gnl-rich");
        const auto cls = classify(c.model, c.dec);
        CHECK(cls.tag == CaseTag::SimpleGNL);
        CHECK(cls.m == 1);
    }
    {
        Ctx c("ldg-min");
        const auto cls = classify(c.model, c.dec);
        CHECK(cls.tag == CaseTag::LinearlyDegenerate);
        CHECK(cls.m == 1);
        CHECK(std::abs(cls.Lambda) < 1e-8);
        Eigen::SelfAdjointEigenSolver<Mat> ek(cls.kappa);
        CHECK(ek.eigenvalues()(0) > 0.0);  // kappa positive definite
    }
}

TEST_CASE("classification JSON has the documented shape") {
    Ctx c("gnl-min");
    const auto cls = classify(c.model, c.dec);
    const auto j = nlohmann::json::parse(cls.to_json());
    CHECK(j["case"] == "simple_gnl");
    CHECK(j["m"] == 1);
    CHECK(j.contains("lambda"));
    CHECK(j.contains("kappa"));
    CHECK(j.contains("r_bar"));
    CHECK(j.contains("eigs"));
}

TEST_CASE("Lambda sign flip under quadratic surgery along r_bar") {
    Ctx c("gnl-min");
    const auto cls = classify(c.model, c.dec);
    // r_bar = +- e2 for this recipe (kernel of diag(a, 0) within V-perp)
    KineticModel flipped = c.model;
    for (int k = 0; k < c.model.dim; ++k) flipped.B[k](1, 1) = -flipped.B[k](1, 1);
    const Decomposition dec2 = build_decomposition(flipped);
    const auto cls2 = classify(flipped, dec2);
    CHECK(cls2.tag == CaseTag::SimpleGNL);
    CHECK(cls2.Lambda == doctest::Approx(-cls.Lambda).epsilon(1e-6));
}

TEST_CASE("classification invariant under gram rescaling and coordinate change") {
    Ctx c("gnl-min");
    const auto cls = classify(c.model, c.dec);

    // pure gram rescaling: T = s*Id changes the metric but not the case
    KineticModel scaled = c.model;
    scaled.gram *= 2.7;
    const auto cls_s = classify(scaled, build_decomposition(scaled));
    CHECK(cls_s.tag == cls.tag);
    CHECK(cls_s.m == cls.m);

    // generic invertible transform
    Rng rng(31);
    Mat T = Mat::Identity(c.dec.n, c.dec.n) + 0.15 * rng.normal_mat(c.dec.n, c.dec.n);
    REQUIRE(T.jacobiSvd().singularValues().minCoeff() > 0.2);
    const KineticModel tm = transform_model(c.model, T);
    REQUIRE(verify_hypotheses(tm).pass);
    const auto cls_t = classify(tm, build_decomposition(tm));
    CHECK(cls_t.tag == cls.tag);
    CHECK(cls_t.m == cls.m);
}

TEST_CASE("pencil oracle agrees on a transformed-gram model") {
    Ctx c("gnl-min");
    Rng rng(77);
    Mat T = Mat::Identity(c.dec.n, c.dec.n) + 0.15 * rng.normal_mat(c.dec.n, c.dec.n);
    REQUIRE(T.jacobiSvd().singularValues().minCoeff() > 0.2);
    const KineticModel tm = transform_model(c.model, T);
    REQUIRE(verify_hypotheses(tm).pass);
    const Decomposition dec2 = build_decomposition(tm);
    const PencilSpectrum o = pencil_trichotomy(tm);
    CHECK(o.n_center == dec2.dim_center());
    CHECK((o.Pc - dec2.Pc).norm() < 1e-8);
}

TEST_CASE("rankine-hugoniot endstates") {
    Ctx c("gnl-min");
    const auto cls = classify(c.model, c.dec);

    const auto rh0 = rankine_hugoniot(c.model, c.dec, cls, 0.0);
    CHECK(rh0.u_minus.norm() == 0.0);
    CHECK(rh0.u_plus.norm() == 0.0);

    const double eps = 0.05;
    const auto rh = rankine_hugoniot(c.model, c.dec, cls, eps);
    CHECK((rh.u_minus - rh.u_plus).norm() > eps);
    // both endstates carry the same flux, equal to q, to 1e-12
    const Vec fm = flux(c.model, c.dec, rh.u_minus);
    const Vec fp = flux(c.model, c.dec, rh.u_plus);
    CHECK((fm - fp).norm() < 1e-12);
    CHECK((fm - rh.q).norm() < 1e-12);
    // Lax ordering
    CHECK(lambda_weak(c.model, c.dec, rh.u_minus) > lambda_weak(c.model, c.dec, rh.u_plus));

    // endstate error vs +-eps fits slope 2 (Richardson-free: direct fit)
    std::vector<double> es, err;
    for (double e : {0.1, 0.05, 0.025}) {
        const auto r = rankine_hugoniot(c.model, c.dec, cls, e);
        const double sm = cls.r_bar.dot(c.model.gram * r.u_minus);
        const double sp = cls.r_bar.dot(c.model.gram * r.u_plus);
        const double sgn = cls.Lambda > 0 ? 1.0 : -1.0;
        err.push_back(std::max(std::abs(sm - sgn * e), std::abs(sp + sgn * e)));
        es.push_back(e);
    }
    const double slope = loglog_slope(es, err);
    CHECK(slope > 1.7);
    CHECK(slope < 2.3);
}

TEST_CASE("equilibria coincide across the model hierarchy") {
    Ctx c("gnl-min");
    const auto cls = classify(c.model, c.dec);
    // zeros of f* - q (RH states) are equilibria of the CE2 field by
    // definition; check they are also zeros of the reduced flow by verifying
    // Q(u_bar + u + v*(u)) = 0 and f*(u) = q simultaneously at small eps
    for (double e : {0.01, 0.02}) {
        const auto rh = rankine_hugoniot(c.model, c.dec, cls, e);
        for (const Vec& u : {rh.u_minus, rh.u_plus}) {
            const Vec v = equilibrium_graph(c.model, c.dec, u);
            CHECK(c.model.norm(apply_Q(c.model, c.model.u_bar + u + v)) < 1e-9);
            CHECK((flux(c.model, c.dec, u) - rh.q).norm() < 1e-9);
        }
    }
}

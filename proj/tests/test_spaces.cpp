#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "km/spaces.hpp"

using namespace km;

namespace {

GridFunction scalar_sample(double L, int m, const std::function<double(double)>& f) {
    return GridFunction::sample(L, m, 1, [&f](double x) {
        Vec v(1);
        v(0) = f(x);
        return v;
    });
}

}  // namespace

TEST_CASE("derivative: exactness and analytic oracle") {
    const auto lin = scalar_sample(2.0, 41, [](double x) { return x; });
    const GridFunction d = derivative(lin);
    for (int i = 0; i < d.m(); ++i) CHECK(d.values(i, 0) == doctest::Approx(1.0).epsilon(1e-12));

    const auto sine = scalar_sample(M_PI, 201, [](double x) { return std::sin(x); });
    const GridFunction ds = derivative(sine);
    double worst_interior = 0.0, worst = 0.0;
    for (int i = 0; i < ds.m(); ++i) {
        const double err = std::abs(ds.values(i, 0) - std::cos(ds.x(i)));
        worst = std::max(worst, err);
        if (i >= 2 && i < ds.m() - 2) worst_interior = std::max(worst_interior, err);
    }
    CHECK(worst_interior < 1e-7);
    CHECK(worst < 2.2e-7);  // one-sided edge stencils carry the h^4/5 constant

    const auto c = scalar_sample(1.0, 21, [](double) { return 3.25; });
    CHECK(derivative(c).values.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("weighted L2 norm against the analytic integral of a constant") {
    // ||c||^2 -> c^2 / w as L -> infinity; within 1% at wL = 10
    const double w = 0.5, L = 20.0, c = 1.7;
    const auto f = scalar_sample(L, 4001, [c](double) { return c; });
    const double got = sq(norm_l2w(f, w));
    CHECK(std::abs(got - c * c / w) < 0.01 * c * c / w);

    const auto zero = scalar_sample(1.0, 11, [](double) { return 0.0; });
    CHECK(norm_l2w(zero, 0.3) == 0.0);
}

TEST_CASE("norm homogeneity and weight monotonicity") {
    Rng rng(3);
    const auto f = GridFunction::sample(5.0, 257, 3, [&rng](double x) {
        Vec v(3);
        v << std::sin(1.3 * x), std::cos(0.7 * x), std::exp(-x * x / 8.0);
        return v;
    });
    const WeightParams p{0.05, 0.2, 0.45};
    for (double s : {-1.0, 0.5, 4.0}) {
        GridFunction sf = f;
        sf.values *= s;
        CHECK(norm_l2w(sf, 0.3) == doctest::Approx(std::abs(s) * norm_l2w(f, 0.3)));
        CHECK(norm_z(sf, p) == doctest::Approx(std::abs(s) * norm_z(f, p)));
        CHECK(norm_h1w(sf, 0.3) == doctest::Approx(std::abs(s) * norm_h1w(f, 0.3)));
    }
    CHECK(norm_l2w(f, 0.1) >= norm_l2w(f, 0.2));
    CHECK(norm_l2w(f, p.gamma) <= norm_z(f, p));
    // derivative-norm consistency
    const double h1 = sq(norm_h1w(f, 0.3));
    const double parts = sq(norm_l2w(f, 0.3)) + sq(norm_l2w(derivative(f), 0.3));
    CHECK(h1 == doctest::Approx(parts).epsilon(1e-14));
    // norm_z with gamma == beta coincides with norm_h1w up to equivalence;
    // the Z integrand never exceeds the H1 one
    const double g = 0.3;
    const double zlike = std::sqrt(sq(norm_l2w(f, g)) + sq(norm_l2w(derivative(f), g)));
    CHECK(zlike <= norm_h1w(f, g) + 1e-14);
}

TEST_CASE("weight params validation") {
    const WeightParams bad_order{0.2, 0.1, 0.5};
    CHECK_THROWS_AS(bad_order.validate(), InputError);
    const WeightParams bad_gap{0.1, 0.2, 0.3};  // 2a > b-g
    CHECK_THROWS_AS(bad_gap.validate(), InputError);
    WeightParams ok{0.02, 0.1, 0.3};
    ok.validate();
    CHECK_THROWS_AS(ok.validate(0.5), InputError);  // beta >= nu/2
    ok.validate(1.0);
}

TEST_CASE("sobolev embedding constant stays below the proof bound") {
    const WeightParams p{0.02, 0.1, 0.3};
    const double proof_c = 2.0 * std::max(2.0 * p.beta + 1.0, 2.0);
    Rng rng(17);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const double a1 = rng.normal(), a2 = rng.normal(), a3 = rng.normal();
        const double k1 = rng.uniform(0.2, 2.0), k2 = rng.uniform(0.2, 2.0);
        const auto f = GridFunction::sample(30.0, 601, 2, [&](double x) {
            Vec v(2);
            v << a1 * std::sin(k1 * x) + a2 * std::cos(k2 * x),
                a3 * std::exp(-x * x / rng.uniform(4.0, 40.0));
            return v;
        });
        worst = std::max(worst, sobolev_embedding_check(f, p).constant);
    }
    CHECK(worst <= proof_c);

    const auto zero = GridFunction::sample(5.0, 33, 1, [](double) { return Vec::Zero(1); });
    CHECK(sobolev_embedding_check(zero, p).constant == 0.0);
}

TEST_CASE("embedding ratio stable under refinement for a spike") {
    const WeightParams p{0.02, 0.1, 0.3};
    double prev = -1.0;
    for (int m : {401, 801, 1601}) {
        const auto f = scalar_sample(10.0, m, [](double x) { return std::exp(-40.0 * x * x); });
        const double c = sobolev_embedding_check(f, p).constant;
        CHECK(std::isfinite(c));
        if (prev > 0) CHECK(std::abs(c - prev) < 0.05 * prev);
        prev = c;
    }
}

TEST_CASE("substitution check: linear map has zero residual") {
    Rng rng(5);
    const Mat M = rng.normal_mat(2, 2);
    SmoothMapSpec lin;
    lin.N = [&M](const Vec& h) { return Vec(M * h); };
    lin.dN = [&M](const Vec&, const Vec& g) { return Vec(M * g); };
    lin.d2N = [](const Vec&, const Vec&, const Vec&) { return Vec::Zero(2); };

    const auto f0 = GridFunction::sample(10.0, 201, 2, [](double x) {
        Vec v(2);
        v << std::exp(-x * x / 4.0), 0.5 * std::exp(-x * x / 6.0);
        return v;
    });
    auto f = f0;
    f.values *= 1.7;
    const WeightParams p{0.02, 0.1, 0.3};
    const auto rep = substitution_frechet_check(lin, f0, f, p, {0.5, 0.25, 0.125});
    for (const auto& pt : rep.points) CHECK(pt.residual < 1e-12);

    // f == f0 -> residual 0
    const auto rep0 = substitution_frechet_check(lin, f0, f0, p, {1.0});
    CHECK(rep0.points[0].residual == 0.0);
    CHECK(rep0.points[0].step == 0.0);
}

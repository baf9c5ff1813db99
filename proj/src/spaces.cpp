#include "km/spaces.hpp"

namespace km {

GridFunction derivative(const GridFunction& f) {
    f.check();
    const int m = f.m();
    const double h = f.h();
    GridFunction d(f.L, m, f.n());
    const Mat& v = f.values;
    // one-sided 4th order at the two nodes nearest each edge
    d.values.row(0) =
        (-25.0 * v.row(0) + 48.0 * v.row(1) - 36.0 * v.row(2) + 16.0 * v.row(3) - 3.0 * v.row(4)) /
        (12.0 * h);
    d.values.row(1) =
        (-3.0 * v.row(0) - 10.0 * v.row(1) + 18.0 * v.row(2) - 6.0 * v.row(3) + v.row(4)) /
        (12.0 * h);
    for (int i = 2; i < m - 2; ++i)
        d.values.row(i) =
            (v.row(i - 2) - 8.0 * v.row(i - 1) + 8.0 * v.row(i + 1) - v.row(i + 2)) / (12.0 * h);
    d.values.row(m - 2) = (3.0 * v.row(m - 1) + 10.0 * v.row(m - 2) - 18.0 * v.row(m - 3) +
                           6.0 * v.row(m - 4) - v.row(m - 5)) /
                          (12.0 * h);
    d.values.row(m - 1) = (25.0 * v.row(m - 1) - 48.0 * v.row(m - 2) + 36.0 * v.row(m - 3) -
                           16.0 * v.row(m - 4) + 3.0 * v.row(m - 5)) /
                          (12.0 * h);
    return d;
}

namespace {

// trapezoid of the weighted squared norm; |x| has its kink at a node
double weighted_sq(const GridFunction& f, double w) {
    const int m = f.m();
    const double h = f.h();
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const double t = std::exp(-2.0 * w * std::abs(f.x(i))) * f.values.row(i).squaredNorm();
        acc += (i == 0 || i == m - 1) ? 0.5 * t : t;
    }
    return acc * h;
}

double weighted_sq_diff(const GridFunction& a, const GridFunction& b, double w) {
    if (a.m() != b.m() || a.n() != b.n()) throw InputError("norm diff: grids differ");
    const int m = a.m();
    const double h = a.h();
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const double t = std::exp(-2.0 * w * std::abs(a.x(i))) *
                         (a.values.row(i) - b.values.row(i)).squaredNorm();
        acc += (i == 0 || i == m - 1) ? 0.5 * t : t;
    }
    return acc * h;
}

}  // namespace

double norm_l2w(const GridFunction& f, double w) { return std::sqrt(weighted_sq(f, w)); }

double norm_h1w(const GridFunction& f, double w) {
    return std::sqrt(weighted_sq(f, w) + weighted_sq(derivative(f), w));
}

double norm_z(const GridFunction& f, const WeightParams& p) {
    p.validate();
    return std::sqrt(weighted_sq(f, p.gamma) + weighted_sq(derivative(f), p.beta));
}

double norm_l2w_diff(const GridFunction& a, const GridFunction& b, double w) {
    return std::sqrt(weighted_sq_diff(a, b, w));
}

double norm_z_diff(const GridFunction& a, const GridFunction& b, const WeightParams& p) {
    p.validate();
    return std::sqrt(weighted_sq_diff(a, b, p.gamma) +
                     weighted_sq_diff(derivative(a), derivative(b), p.beta));
}

EmbeddingReport sobolev_embedding_check(const GridFunction& f, const WeightParams& p) {
    const double z2 = sq(norm_z(f, p));
    EmbeddingReport rep;
    if (z2 == 0.0) return rep;
    for (int i = 0; i < f.m(); ++i) {
        const double x = std::abs(f.x(i));
        const double lhs = std::exp(-2.0 * p.beta * x) * f.values.row(i).squaredNorm();
        const double ratio = lhs / (std::exp(-(p.beta - p.gamma) * x) * z2);
        if (ratio > rep.constant) {
            rep.constant = ratio;
            rep.argmax_node = i;
        }
    }
    return rep;
}

FrechetResidualReport substitution_frechet_check(const SmoothMapSpec& spec,
                                                 const GridFunction& f0, const GridFunction& f,
                                                 const WeightParams& p,
                                                 const std::vector<double>& t_values) {
    if (!spec.N || !spec.dN) throw InputError("substitution_frechet_check: N and N' required");
    if (f0.m() != f.m() || f0.n() != f.n())
        throw InputError("substitution_frechet_check: grids differ");
    p.validate();
    const WeightParams p2{p.alpha, 2.0 * p.gamma, 2.0 * p.beta};
    const int m = f0.m(), n = f0.n();

    GridFunction Nf0(f0.L, m, n);
    for (int i = 0; i < m; ++i) Nf0.values.row(i) = spec.N(f0.values.row(i).transpose()).transpose();

    FrechetResidualReport rep;
    for (double t : t_values) {
        GridFunction ft(f0.L, m, n), resid(f0.L, m, n);
        ft.values = f0.values + t * (f.values - f0.values);
        for (int i = 0; i < m; ++i) {
            const Vec h1 = ft.values.row(i).transpose();
            const Vec h0 = f0.values.row(i).transpose();
            resid.values.row(i) =
                (spec.N(h1) - Nf0.values.row(i).transpose() - spec.dN(h0, h1 - h0)).transpose();
        }
        GridFunction diff(f0.L, m, n);
        diff.values = ft.values - f0.values;
        rep.points.push_back({norm_z(diff, p), norm_z(resid, p2)});
    }
    std::vector<double> xs, ys;
    for (const auto& pt : rep.points)
        if (pt.residual > 1e-300) {
            xs.push_back(pt.step);
            ys.push_back(pt.residual);
        }
    rep.fitted_exponent = (xs.size() >= 2) ? loglog_slope(xs, ys) : 0.0;
    return rep;
}

}  // namespace km

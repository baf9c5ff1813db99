#pragma once

#include <functional>

#include "km/grid.hpp"

namespace km {

// Weights of the mixed-norm space Z_{gamma,beta}: 0 < alpha < gamma < beta,
// 2*alpha < beta - gamma, and beta < nu/2 for the decomposition in use.
struct WeightParams {
    double alpha = 0.0;
    double gamma = 0.0;
    double beta = 0.0;

    void validate() const {
        if (!(0 < alpha && alpha < gamma && gamma < beta))
            throw InputError("WeightParams: need 0 < alpha < gamma < beta");
        if (!(2.0 * alpha < beta - gamma))
            throw InputError("WeightParams: need 2*alpha < beta - gamma");
    }
    void validate(double nu) const {
        validate();
        if (!(beta < 0.5 * nu)) throw InputError("WeightParams: need beta < nu/2");
    }

    static WeightParams defaults_for(double nu) { return {0.05 * nu, 0.1 * nu, 0.25 * nu}; }
};

// 4th-order differences: centered interior, one-sided at the edges.
GridFunction derivative(const GridFunction& f);

// (int e^{-2w|x|} |f|^2 dx)^{1/2}, trapezoid rule.
double norm_l2w(const GridFunction& f, double w);

// (norm_l2w(f,w)^2 + norm_l2w(f',w)^2)^{1/2}
double norm_h1w(const GridFunction& f, double w);

// Z_{gamma,beta} norm: (||f||_{L2,-gamma}^2 + ||f'||_{L2,-beta}^2)^{1/2}
double norm_z(const GridFunction& f, const WeightParams& p);

double norm_l2w_diff(const GridFunction& a, const GridFunction& b, double w);
double norm_z_diff(const GridFunction& a, const GridFunction& b, const WeightParams& p);

struct EmbeddingReport {
    double constant = 0.0;  // max over nodes of the Sobolev-embedding ratio
    int argmax_node = 0;
};

// Empirical constant in e^{-2beta|x|}|f(x)|^2 <= c e^{-(beta-gamma)|x|} ||f||_Z^2.
EmbeddingReport sobolev_embedding_check(const GridFunction& f, const WeightParams& p);

// Smooth map descriptor for the substitution-operator checks. All maps act
// pointwise on state vectors.
struct SmoothMapSpec {
    std::function<Vec(const Vec&)> N;
    std::function<Vec(const Vec&, const Vec&)> dN;               // N'(h) g
    std::function<Vec(const Vec&, const Vec&, const Vec&)> d2N;  // N''(h)(g1,g2)
};

struct FrechetResidualPoint {
    double step = 0.0;      // ||f - f0||_{Z_{gamma,beta}}
    double residual = 0.0;  // ||N(f) - N(f0) - N'(f0)(f-f0)||_{Z_{2gamma,2beta}}
};

struct FrechetResidualReport {
    std::vector<FrechetResidualPoint> points;
    double fitted_exponent = 0.0;  // log-log slope of residual vs step
};

// Lemma A.1 residual over the shrinking family f0 + t*(f - f0).
FrechetResidualReport substitution_frechet_check(const SmoothMapSpec& spec,
                                                 const GridFunction& f0, const GridFunction& f,
                                                 const WeightParams& p,
                                                 const std::vector<double>& t_values);

}  // namespace km

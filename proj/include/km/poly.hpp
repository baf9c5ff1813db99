#pragma once

#include <vector>

#include "km/common.hpp"

namespace km {

// Dense multivariate polynomial maps R^d -> R^q, coefficients stored per
// total degree in graded-lexicographic monomial order.
struct MonomialTable {
    int nvars = 0;
    int degree = 0;
    std::vector<std::vector<int>> exps;  // exps[pos] has nvars entries

    int count() const { return static_cast<int>(exps.size()); }
    int find(const std::vector<int>& e) const;  // position, -1 if absent

    static const MonomialTable& get(int nvars, int degree);
};

class PolyMap {
  public:
    PolyMap() = default;
    PolyMap(int nvars, int ncomp, int max_deg);

    int nvars() const { return nvars_; }
    int ncomp() const { return ncomp_; }
    int max_deg() const { return max_deg_; }

    Mat& coeffs(int deg) { return C_[deg]; }
    const Mat& coeffs(int deg) const { return C_[deg]; }

    Vec eval(const Vec& x) const;
    double max_coeff_norm(int deg) const { return C_[deg].size() ? C_[deg].cwiseAbs().maxCoeff() : 0.0; }

    void add_scaled(const PolyMap& other, double s);
    PolyMap apply_linear(const Mat& M) const;             // x -> M * P(x)
    PolyMap truncated(int new_max_deg) const;

    // degree-1 identity map
    static PolyMap identity(int nvars, int max_deg);

  private:
    int nvars_ = 0, ncomp_ = 0, max_deg_ = 0;
    std::vector<Mat> C_;  // C_[d]: ncomp x count(d), d = 0..max_deg
};

// bilinear(P,Q)(x) = B(P(x), Q(x)) truncated at max_deg; B given as tensor
// slices: B[k](i,j) is the k-th output coordinate.
PolyMap bilinear_product(const std::vector<Mat>& B, const PolyMap& P, const PolyMap& Q,
                         int max_deg);

// sum_i dP/dx_i * (J x)_i  (degree preserving; J linear)
PolyMap deriv_contract_linear(const PolyMap& P, const Mat& J);

// sum_i dP/dx_i * G_i(x), truncated at max_deg
PolyMap deriv_contract(const PolyMap& P, const PolyMap& G, int max_deg);

}  // namespace km

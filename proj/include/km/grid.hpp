#pragma once

#include <string>

#include "km/common.hpp"

namespace km {

// Uniformly sampled trajectory on [-L, L] with values in R^n (one row per
// node). m is odd and >= 5 so that x = 0 is a node.
struct GridFunction {
    double L = 0.0;
    Mat values;  // m x n

    GridFunction() = default;
    GridFunction(double half_width, int m, int n) : L(half_width), values(Mat::Zero(m, n)) {
        check();
    }

    int m() const { return static_cast<int>(values.rows()); }
    int n() const { return static_cast<int>(values.cols()); }
    double h() const { return 2.0 * L / (m() - 1); }
    double x(int i) const { return -L + h() * i; }
    int center_index() const { return (m() - 1) / 2; }

    void check() const {
        if (m() < 5 || m() % 2 == 0) throw InputError("GridFunction: need odd m >= 5");
        if (L <= 0) throw InputError("GridFunction: need L > 0");
        if (!values.allFinite()) throw InputError("GridFunction: non-finite values");
    }

    template <typename F>
    static GridFunction sample(double L, int m, int n, F&& f) {
        GridFunction g(L, m, n);
        for (int i = 0; i < m; ++i) g.values.row(i) = f(g.x(i)).transpose();
        return g;
    }
};

// CSV with header "x, w_1, ..., w_n".
std::string grid_to_csv(const GridFunction& g);
GridFunction grid_from_csv(const std::string& csv);

// Binary cache: magic "KMGF", version u32, L f64, m u32, n u32, row-major f64.
std::string grid_to_binary(const GridFunction& g);
GridFunction grid_from_binary(const std::string& bytes);

}  // namespace km

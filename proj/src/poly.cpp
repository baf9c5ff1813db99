#include "km/poly.hpp"

#include <map>
#include <mutex>

namespace km {

namespace {

void enumerate(int nvars, int degree, int var, std::vector<int>& cur,
               std::vector<std::vector<int>>& out) {
    if (var == nvars - 1) {
        cur[var] = degree;
        out.push_back(cur);
        return;
    }
    for (int k = degree; k >= 0; --k) {
        cur[var] = k;
        enumerate(nvars, degree - k, var + 1, cur, out);
    }
}

}  // namespace

int MonomialTable::find(const std::vector<int>& e) const {
    // tables stay small (a few hundred entries); a linear scan is fine
    for (int i = 0; i < count(); ++i)
        if (exps[i] == e) return i;
    return -1;
}

const MonomialTable& MonomialTable::get(int nvars, int degree) {
    static std::map<std::pair<int, int>, MonomialTable> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(nvars, degree);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    MonomialTable t;
    t.nvars = nvars;
    t.degree = degree;
    if (nvars > 0) {
        std::vector<int> cur(nvars, 0);
        enumerate(nvars, degree, 0, cur, t.exps);
    } else if (degree == 0) {
        t.exps.push_back({});
    }
    return cache.emplace(key, std::move(t)).first->second;
}

PolyMap::PolyMap(int nvars, int ncomp, int max_deg)
    : nvars_(nvars), ncomp_(ncomp), max_deg_(max_deg) {
    C_.resize(max_deg + 1);
    for (int d = 0; d <= max_deg; ++d)
        C_[d] = Mat::Zero(ncomp, MonomialTable::get(nvars, d).count());
}

Vec PolyMap::eval(const Vec& x) const {
    Vec out = Vec::Zero(ncomp_);
    for (int d = 0; d <= max_deg_; ++d) {
        const auto& tab = MonomialTable::get(nvars_, d);
        if (C_[d].size() == 0) continue;
        for (int p = 0; p < tab.count(); ++p) {
            double mono = 1.0;
            for (int v = 0; v < nvars_; ++v)
                for (int e = 0; e < tab.exps[p][v]; ++e) mono *= x(v);
            out += C_[d].col(p) * mono;
        }
    }
    return out;
}

void PolyMap::add_scaled(const PolyMap& other, double s) {
    if (other.nvars_ != nvars_ || other.ncomp_ != ncomp_)
        throw InputError("PolyMap::add_scaled: shape mismatch");
    for (int d = 0; d <= std::min(max_deg_, other.max_deg_); ++d) C_[d] += s * other.C_[d];
}

PolyMap PolyMap::apply_linear(const Mat& M) const {
    PolyMap out(nvars_, static_cast<int>(M.rows()), max_deg_);
    for (int d = 0; d <= max_deg_; ++d) out.C_[d] = M * C_[d];
    return out;
}

PolyMap PolyMap::truncated(int new_max_deg) const {
    PolyMap out(nvars_, ncomp_, new_max_deg);
    for (int d = 0; d <= std::min(max_deg_, new_max_deg); ++d) out.C_[d] = C_[d];
    return out;
}

PolyMap PolyMap::identity(int nvars, int max_deg) {
    PolyMap out(nvars, nvars, max_deg);
    const auto& tab = MonomialTable::get(nvars, 1);
    for (int v = 0; v < nvars; ++v) {
        std::vector<int> e(nvars, 0);
        e[v] = 1;
        out.C_[1](v, tab.find(e)) = 1.0;
    }
    return out;
}

PolyMap bilinear_product(const std::vector<Mat>& B, const PolyMap& P, const PolyMap& Q,
                         int max_deg) {
    if (P.nvars() != Q.nvars()) throw InputError("bilinear_product: nvars mismatch");
    const int nout = static_cast<int>(B.size());
    PolyMap out(P.nvars(), nout, max_deg);
    std::vector<int> sum(P.nvars());
    for (int d1 = 0; d1 <= P.max_deg(); ++d1) {
        if (P.coeffs(d1).size() == 0) continue;
        const auto& t1 = MonomialTable::get(P.nvars(), d1);
        for (int d2 = 0; d2 + d1 <= max_deg && d2 <= Q.max_deg(); ++d2) {
            if (Q.coeffs(d2).size() == 0) continue;
            const auto& t2 = MonomialTable::get(P.nvars(), d2);
            const auto& tsum = MonomialTable::get(P.nvars(), d1 + d2);
            for (int p1 = 0; p1 < t1.count(); ++p1) {
                const Vec a = P.coeffs(d1).col(p1);
                if (a.norm() == 0.0) continue;
                for (int p2 = 0; p2 < t2.count(); ++p2) {
                    const Vec b = Q.coeffs(d2).col(p2);
                    if (b.norm() == 0.0) continue;
                    for (int v = 0; v < P.nvars(); ++v)
                        sum[v] = t1.exps[p1][v] + t2.exps[p2][v];
                    const int pos = tsum.find(sum);
                    Vec val(nout);
                    for (int k = 0; k < nout; ++k) val(k) = a.dot(B[k] * b);
                    out.coeffs(d1 + d2).col(pos) += val;
                }
            }
        }
    }
    return out;
}

PolyMap deriv_contract_linear(const PolyMap& P, const Mat& J) {
    // monomial alpha of dP/dx_i times (Jx)_i lands at alpha - e_i + e_j with
    // factor alpha_i J(i,j); degree preserved
    PolyMap out(P.nvars(), P.ncomp(), P.max_deg());
    std::vector<int> e(P.nvars());
    for (int d = 1; d <= P.max_deg(); ++d) {
        const auto& tab = MonomialTable::get(P.nvars(), d);
        for (int p = 0; p < tab.count(); ++p) {
            const Vec a = P.coeffs(d).col(p);
            if (a.norm() == 0.0) continue;
            for (int i = 0; i < P.nvars(); ++i) {
                const int ai = tab.exps[p][i];
                if (ai == 0) continue;
                for (int j = 0; j < P.nvars(); ++j) {
                    if (J(i, j) == 0.0) continue;
                    e = tab.exps[p];
                    e[i] -= 1;
                    e[j] += 1;
                    out.coeffs(d).col(tab.find(e)) += (ai * J(i, j)) * a;
                }
            }
        }
    }
    return out;
}

PolyMap deriv_contract(const PolyMap& P, const PolyMap& G, int max_deg) {
    if (G.ncomp() != P.nvars()) throw InputError("deriv_contract: G must be a vector field");
    PolyMap out(P.nvars(), P.ncomp(), max_deg);
    std::vector<int> sum(P.nvars());
    for (int d = 1; d <= P.max_deg(); ++d) {
        const auto& tab = MonomialTable::get(P.nvars(), d);
        for (int p = 0; p < tab.count(); ++p) {
            const Vec a = P.coeffs(d).col(p);
            if (a.norm() == 0.0) continue;
            for (int i = 0; i < P.nvars(); ++i) {
                const int ai = tab.exps[p][i];
                if (ai == 0) continue;
                for (int dg = 0; dg <= G.max_deg() && dg + d - 1 <= max_deg; ++dg) {
                    if (G.coeffs(dg).size() == 0) continue;
                    const auto& tg = MonomialTable::get(P.nvars(), dg);
                    const auto& tsum = MonomialTable::get(P.nvars(), d - 1 + dg);
                    for (int pg = 0; pg < tg.count(); ++pg) {
                        const double gi = G.coeffs(dg)(i, pg);
                        if (gi == 0.0) continue;
                        for (int v = 0; v < P.nvars(); ++v)
                            sum[v] = tab.exps[p][v] + tg.exps[pg][v];
                        sum[i] -= 1;
                        out.coeffs(d - 1 + dg).col(tsum.find(sum)) += (ai * gi) * a;
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace km

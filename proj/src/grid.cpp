#include "km/grid.hpp"

#include <cstring>
#include <sstream>

namespace km {

std::string grid_to_csv(const GridFunction& g) {
    std::ostringstream os;
    os << "x";
    for (int j = 0; j < g.n(); ++j) os << ", w_" << (j + 1);
    os << "\n";
    char buf[32];
    for (int i = 0; i < g.m(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", g.x(i));
        os << buf;
        for (int j = 0; j < g.n(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", g.values(i, j));
            os << ", " << buf;
        }
        os << "\n";
    }
    return os.str();
}

GridFunction grid_from_csv(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line)) throw InputError("grid csv: empty");
    std::vector<std::vector<double>> rows;
    std::vector<double> xs;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<double> row;
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2) throw InputError("grid csv: short row");
        xs.push_back(row[0]);
        rows.push_back(std::vector<double>(row.begin() + 1, row.end()));
    }
    const int m = static_cast<int>(rows.size());
    if (m < 5) throw InputError("grid csv: need >= 5 rows");
    const int n = static_cast<int>(rows[0].size());
    GridFunction g(std::abs(xs.back()), m, n);
    for (int i = 0; i < m; ++i) {
        if (static_cast<int>(rows[i].size()) != n) throw InputError("grid csv: ragged rows");
        for (int j = 0; j < n; ++j) g.values(i, j) = rows[i][j];
    }
    g.check();
    return g;
}

std::string grid_to_binary(const GridFunction& g) {
    std::string out;
    out.reserve(24 + sizeof(double) * g.m() * g.n());
    out.append("KMGF", 4);
    auto push32 = [&out](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
    auto push64 = [&out](double v) { out.append(reinterpret_cast<const char*>(&v), 8); };
    push32(1u);  // version
    push64(g.L);
    push32(static_cast<std::uint32_t>(g.m()));
    push32(static_cast<std::uint32_t>(g.n()));
    for (int i = 0; i < g.m(); ++i)
        for (int j = 0; j < g.n(); ++j) push64(g.values(i, j));
    return out;
}

GridFunction grid_from_binary(const std::string& bytes) {
    if (bytes.size() < 24 || bytes.compare(0, 4, "KMGF") != 0)
        throw InputError("grid binary: bad magic");
    const char* p = bytes.data() + 4;
    auto read32 = [&p]() {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        p += 4;
        return v;
    };
    auto read64 = [&p]() {
        double v;
        std::memcpy(&v, p, 8);
        p += 8;
        return v;
    };
    const std::uint32_t version = read32();
    if (version != 1u) throw InputError("grid binary: unsupported version");
    const double L = read64();
    const int m = static_cast<int>(read32());
    const int n = static_cast<int>(read32());
    if (bytes.size() != 24u + 8u * static_cast<std::size_t>(m) * n)
        throw InputError("grid binary: truncated");
    GridFunction g(L, m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) g.values(i, j) = read64();
    g.check();
    return g;
}

}  // namespace km

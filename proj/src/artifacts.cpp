#include "km/artifacts.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace km {

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw InputError("cannot open for writing: " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw InputError("short write: " + tmp.string());
    }
    fs::rename(tmp, target);
}

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

std::string profile_to_csv(const Profile& p) {
    std::ostringstream os;
    os << "x, u1";
    if (p.lambda_path.size() > 0) os << ", lambda";
    for (int j = 0; j < p.grid.n(); ++j) os << ", w_" << (j + 1);
    os << "\n";
    for (int i = 0; i < p.grid.m(); ++i) {
        os << fmt(p.grid.x(i)) << ", " << fmt(p.u1(i));
        if (p.lambda_path.size() > 0) os << ", " << fmt(p.lambda_path(i));
        for (int j = 0; j < p.grid.n(); ++j) os << ", " << fmt(p.grid.values(i, j));
        os << "\n";
    }
    return os.str();
}

std::string sweep_to_csv(const SweepTable& t) {
    std::ostringstream os;
    os << "eps, sup_u_diff, sup_du_diff, sup_v_diff, endstate_err, tail_sup, burgers_sup, "
          "monotone, monotone_margin\n";
    for (const auto& r : t.rows) {
        os << fmt(r.eps) << ", " << fmt(r.sup_u_diff) << ", " << fmt(r.sup_du_diff) << ", "
           << fmt(r.sup_v_diff) << ", " << fmt(r.endstate_err) << ", " << fmt(r.tail_sup) << ", "
           << fmt(r.burgers_sup) << ", " << (r.monotone ? 1 : 0) << ", "
           << fmt(r.monotone_margin) << "\n";
    }
    return os.str();
}

std::string render_svg(const std::string& title, const std::vector<SvgCurve>& curves, bool logx,
                       bool logy) {
    const int W = 720, H = 480, ML = 70, MR = 20, MT = 40, MB = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto tx = [logx](double v) { return logx ? std::log10(std::max(v, 1e-300)) : v; };
    auto ty = [logy](double v) { return logy ? std::log10(std::max(v, 1e-300)) : v; };
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            xmin = std::min(xmin, tx(c.x[i]));
            xmax = std::max(xmax, tx(c.x[i]));
            ymin = std::min(ymin, ty(c.y[i]));
            ymax = std::max(ymax, ty(c.y[i]));
        }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) ymax = ymin + 1;
    const double yr = ymax - ymin;
    ymin -= 0.05 * yr;
    ymax += 0.05 * yr;
    auto px = [&](double v) { return ML + (tx(v) - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto py = [&](double v) { return H - MB - (ty(v) - ymin) / (ymax - ymin) * (H - MT - MB); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
       << title << "</text>\n";
    // axes
    os << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
       << H - MB << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
       << "\" stroke=\"black\"/>\n";
    // ticks
    char buf[48];
    for (int k = 0; k <= 4; ++k) {
        const double fx = xmin + (xmax - xmin) * k / 4.0;
        const double fy = ymin + (ymax - ymin) * k / 4.0;
        const double xpix = ML + (W - ML - MR) * k / 4.0;
        const double ypix = H - MB - (H - MT - MB) * k / 4.0;
        std::snprintf(buf, sizeof buf, "%.3g", logx ? std::pow(10.0, fx) : fx);
        os << "<text x=\"" << xpix << "\" y=\"" << H - MB + 18
           << "\" text-anchor=\"middle\" font-size=\"11\">" << buf << "</text>\n";
        std::snprintf(buf, sizeof buf, "%.3g", logy ? std::pow(10.0, fy) : fy);
        os << "<text x=\"" << ML - 6 << "\" y=\"" << ypix + 4
           << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
    }
    // curves
    int li = 0;
    for (const auto& c : curves) {
        os << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < c.x.size(); ++i)
            os << px(c.x[i]) << "," << py(c.y[i]) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << W - MR - 10 << "\" y=\"" << MT + 16 * (li + 1)
           << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << c.color << "\">" << c.label
           << "</text>\n";
        ++li;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace km

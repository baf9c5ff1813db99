#pragma once

#include <string>
#include <vector>

#include "km/profiles.hpp"

namespace km {

// Atomic file write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& content);

std::string profile_to_csv(const Profile& p);
std::string sweep_to_csv(const SweepTable& t);

struct SvgCurve {
    std::string label;
    std::string color;
    std::vector<double> x, y;
};

// Minimal line plot with axes, ticks and a legend; no timestamps, so output
// is byte-stable across runs.
std::string render_svg(const std::string& title, const std::vector<SvgCurve>& curves,
                       bool logx = false, bool logy = false);

}  // namespace km

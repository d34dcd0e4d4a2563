#include "admissible/svg.hpp"

#include <iomanip>
#include <sstream>

namespace admissible {

namespace {

constexpr double kSize = 480.0;
constexpr double kMargin = 60.0;

double px(double u) { return kMargin + u * kSize; }
double py(double v) { return kMargin + (1.0 - v) * kSize; }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string infogram_svg(const Infogram& ig) {
    const double tx = ig.config.threshold_x, ty = ig.config.threshold_y;
    const double w = kSize + 2 * kMargin;
    std::ostringstream o;
    o << std::fixed << std::setprecision(2);
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << w
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << w << "\" fill=\"white\"/>\n";
    // L-zone: a vertical strip of low relevance plus a horizontal strip of low net information.
    o << "<rect class=\"l-zone\" x=\"" << px(0) << "\" y=\"" << py(1) << "\" width=\"" << tx * kSize
      << "\" height=\"" << kSize << "\" fill=\"#f4c7c3\" fill-opacity=\"0.6\"/>\n";
    o << "<rect class=\"l-zone\" x=\"" << px(tx) << "\" y=\"" << py(ty) << "\" width=\"" << (1 - tx) * kSize
      << "\" height=\"" << ty * kSize << "\" fill=\"#f4c7c3\" fill-opacity=\"0.6\"/>\n";
    o << "<rect x=\"" << px(0) << "\" y=\"" << py(1) << "\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 10; t += 2) {
        const double v = t / 10.0;
        o << "<text x=\"" << px(v) << "\" y=\"" << py(0) + 18 << "\" text-anchor=\"middle\">" << v << "</text>\n";
        o << "<text x=\"" << px(0) - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    }
    const char* ylabel = ig.mode == InfogramMode::Core ? "Net-predictive information" : "Safety index";
    o << "<text x=\"" << px(0.5) << "\" y=\"" << w - 15 << "\" text-anchor=\"middle\">Total information (relevance)</text>\n";
    o << "<text transform=\"translate(18," << py(0.5) << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel
      << "</text>\n";
    for (const auto& pt : ig.points) {
        const char* colour = pt.admissible ? "#1a73e8" : "#888888";
        o << "<circle cx=\"" << px(pt.relevance) << "\" cy=\"" << py(pt.net_info) << "\" r=\"4\" fill=\"" << colour
          << "\"><title>" << escape(pt.feature) << "</title></circle>\n";
        if (pt.admissible)
            o << "<text x=\"" << px(pt.relevance) + 6 << "\" y=\"" << py(pt.net_info) - 6 << "\">"
              << escape(pt.feature) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace admissible

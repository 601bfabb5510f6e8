#include "wisppn/render.hpp"

#include <sstream>

namespace wisppn::render {

std::string skeleton_svg(const std::array<Point, kNumKeypoints>& pts, int width, int height) {
    std::ostringstream out;
    out.precision(2);
    out << std::fixed;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
        << "\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (const auto& limb : kLimbPairs) {
        const Point& a = pts[static_cast<std::size_t>(limb[0])];
        const Point& b = pts[static_cast<std::size_t>(limb[1])];
        out << "  <line x1=\"" << a.x << "\" y1=\"" << a.y << "\" x2=\"" << b.x << "\" y2=\""
            << b.y << "\" stroke=\"#3572b0\" stroke-width=\"3\"/>\n";
    }
    for (const Point& p : pts)
        out << "  <circle cx=\"" << p.x << "\" cy=\"" << p.y
            << "\" r=\"4\" fill=\"#d94141\"/>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace wisppn::render

#pragma once

#include <array>
#include <string>

#include "wisppn/pam.hpp"
#include "wisppn/pose.hpp"

namespace wisppn::render {

// One SVG skeleton: 17 limb lines plus a circle per keypoint.
std::string skeleton_svg(const std::array<Point, kNumKeypoints>& pts, int width, int height);

}  // namespace wisppn::render

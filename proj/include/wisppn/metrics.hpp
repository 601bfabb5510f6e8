#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "wisppn/pam.hpp"
#include "wisppn/pose.hpp"

namespace wisppn::metrics {

inline constexpr std::array<int, 6> kPckThresholds = {5, 10, 20, 30, 40, 50};

// Keypoints below this ground-truth confidence are skipped per keypoint.
inline constexpr double kMinGtConfidence = 0.05;

// Torso normalizer: right-shoulder to left-hip distance. Empty when either
// keypoint is missing (zero confidence) or the two coincide; such frames are
// excluded from PCK and counted.
std::optional<double> torso_norm(const Keypoints& gt);

struct PckResult {
    // pck[keypoint] per threshold; keypoints with no counted frame hold 0.
    std::array<std::array<double, 6>, kNumKeypoints> pck{};
    std::array<double, 6> average{};
    std::array<std::size_t, kNumKeypoints> counted{};  // per-keypoint N_i
    std::size_t frames_total = 0;
    std::size_t frames_excluded = 0;  // degenerate torso normalizer
};

// The canonical correctness rule: ||pd - gt|| * 100 <= a * torso (the
// inclusive boundary evaluated without division).
bool pck_hit(const Point& pred, const Keypoint& gt, double torso, int threshold);

PckResult pck(const std::vector<std::array<Point, kNumKeypoints>>& preds,
              const std::vector<Keypoints>& gts);

// Single-threshold view matching the per-operation contract.
std::array<double, kNumKeypoints + 1> pck_at(
    const std::vector<std::array<Point, kNumKeypoints>>& preds,
    const std::vector<Keypoints>& gts, int threshold);

std::string render_report(const PckResult& r);  // aligned text table
std::string report_jsonl(const PckResult& r);   // one record per keypoint + average

}  // namespace wisppn::metrics

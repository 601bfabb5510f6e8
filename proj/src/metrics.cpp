#include "wisppn/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "wisppn/common.hpp"

namespace wisppn::metrics {

std::optional<double> torso_norm(const Keypoints& gt) {
    const Keypoint& rs = gt[kRShoulder];
    const Keypoint& lh = gt[kLHip];
    if (rs.c <= 0.0 || lh.c <= 0.0) return std::nullopt;
    const double dx = rs.x - lh.x;
    const double dy = rs.y - lh.y;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d <= 0.0) return std::nullopt;
    return d;
}

bool pck_hit(const Point& pred, const Keypoint& gt, double torso, int threshold) {
    const double dx = pred.x - gt.x;
    const double dy = pred.y - gt.y;
    const double dist = std::sqrt(dx * dx + dy * dy);
    return dist * 100.0 <= static_cast<double>(threshold) * torso;
}

PckResult pck(const std::vector<std::array<Point, kNumKeypoints>>& preds,
              const std::vector<Keypoints>& gts) {
    if (preds.size() != gts.size())
        throw DimensionError("pck: " + std::to_string(preds.size()) + " predictions vs " +
                             std::to_string(gts.size()) + " ground-truth frames");
    if (preds.empty()) throw DimensionError("pck: empty sequences");

    PckResult r;
    r.frames_total = preds.size();
    std::array<std::array<std::size_t, 6>, kNumKeypoints> hits{};
    for (std::size_t f = 0; f < preds.size(); ++f) {
        const std::optional<double> torso = torso_norm(gts[f]);
        if (!torso) {
            ++r.frames_excluded;
            continue;
        }
        for (int k = 0; k < kNumKeypoints; ++k) {
            if (gts[f][k].c < kMinGtConfidence) continue;
            ++r.counted[static_cast<std::size_t>(k)];
            for (std::size_t a = 0; a < kPckThresholds.size(); ++a)
                if (pck_hit(preds[f][static_cast<std::size_t>(k)], gts[f][k], *torso,
                            kPckThresholds[a]))
                    ++hits[static_cast<std::size_t>(k)][a];
        }
    }
    for (int k = 0; k < kNumKeypoints; ++k) {
        const std::size_t n = r.counted[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < kPckThresholds.size(); ++a)
            r.pck[static_cast<std::size_t>(k)][a] =
                n ? static_cast<double>(hits[static_cast<std::size_t>(k)][a]) /
                        static_cast<double>(n)
                  : 0.0;
    }
    for (std::size_t a = 0; a < kPckThresholds.size(); ++a) {
        double s = 0.0;
        for (int k = 0; k < kNumKeypoints; ++k) s += r.pck[static_cast<std::size_t>(k)][a];
        r.average[a] = s / static_cast<double>(kNumKeypoints);
    }
    return r;
}

std::array<double, kNumKeypoints + 1> pck_at(
    const std::vector<std::array<Point, kNumKeypoints>>& preds,
    const std::vector<Keypoints>& gts, int threshold) {
    if (preds.size() != gts.size())
        throw DimensionError("pck: prediction/ground-truth length mismatch");
    if (preds.empty()) throw DimensionError("pck: empty sequences");
    std::array<double, kNumKeypoints + 1> out{};
    std::array<std::size_t, kNumKeypoints> hits{}, counted{};
    for (std::size_t f = 0; f < preds.size(); ++f) {
        const std::optional<double> torso = torso_norm(gts[f]);
        if (!torso) continue;
        for (int k = 0; k < kNumKeypoints; ++k) {
            if (gts[f][k].c < kMinGtConfidence) continue;
            ++counted[static_cast<std::size_t>(k)];
            if (pck_hit(preds[f][static_cast<std::size_t>(k)], gts[f][k], *torso, threshold))
                ++hits[static_cast<std::size_t>(k)];
        }
    }
    double sum = 0.0;
    for (int k = 0; k < kNumKeypoints; ++k) {
        const std::size_t n = counted[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(k)] =
            n ? static_cast<double>(hits[static_cast<std::size_t>(k)]) / static_cast<double>(n)
              : 0.0;
        sum += out[static_cast<std::size_t>(k)];
    }
    out[kNumKeypoints] = sum / static_cast<double>(kNumKeypoints);
    return out;
}

std::string render_report(const PckResult& r) {
    std::ostringstream out;
    out << std::left << std::setw(6) << "Order" << std::setw(14) << "Keypoint";
    for (int a : kPckThresholds) out << std::right << std::setw(9) << ("PCK@" + std::to_string(a));
    out << "\n";
    out << std::fixed << std::setprecision(4);
    for (int k = 0; k < kNumKeypoints; ++k) {
        out << std::left << std::setw(6) << (k + 1) << std::setw(14)
            << kKeypointNames[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < kPckThresholds.size(); ++a)
            out << std::right << std::setw(9) << r.pck[static_cast<std::size_t>(k)][a];
        out << "\n";
    }
    out << std::left << std::setw(6) << "" << std::setw(14) << "Average";
    for (std::size_t a = 0; a < kPckThresholds.size(); ++a)
        out << std::right << std::setw(9) << r.average[a];
    out << "\n";
    out << "frames: " << r.frames_total << " evaluated, " << r.frames_excluded
        << " excluded (degenerate torso)\n";
    return out.str();
}

std::string report_jsonl(const PckResult& r) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (int k = 0; k < kNumKeypoints; ++k) {
        out << "{\"keypoint\":\"" << kKeypointNames[static_cast<std::size_t>(k)]
            << "\",\"order\":" << (k + 1) << ",\"n\":" << r.counted[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < kPckThresholds.size(); ++a)
            out << ",\"pck@" << kPckThresholds[a]
                << "\":" << r.pck[static_cast<std::size_t>(k)][a];
        out << "}\n";
    }
    out << "{\"keypoint\":\"Average\",\"frames_total\":" << r.frames_total
        << ",\"frames_excluded\":" << r.frames_excluded;
    for (std::size_t a = 0; a < kPckThresholds.size(); ++a)
        out << ",\"pck@" << kPckThresholds[a] << "\":" << r.average[a];
    out << "}\n";
    return out.str();
}

}  // namespace wisppn::metrics

#include "wisppn/pose.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "wisppn/common.hpp"

namespace wisppn {

const std::array<const char*, kNumKeypoints> kKeypointNames = {
    "Nose",       "Neck",    "R. Shoulder", "R. Elbow", "R. Wrist", "L. Shoulder",
    "L. Elbow",   "L. Wrist", "R. Hip",     "R. Knee",  "R. Ankle", "L. Hip",
    "L. Knee",    "L. Ankle", "R. Eye",     "L. Eye",   "R. Ear",   "L. Ear",
};

const std::array<std::array<int, 2>, 17> kLimbPairs = {{
    {kNose, kNeck},
    {kNeck, kRShoulder},
    {kRShoulder, kRElbow},
    {kRElbow, kRWrist},
    {kNeck, kLShoulder},
    {kLShoulder, kLElbow},
    {kLElbow, kLWrist},
    {kNeck, kRHip},
    {kRHip, kRKnee},
    {kRKnee, kRAnkle},
    {kNeck, kLHip},
    {kLHip, kLKnee},
    {kLKnee, kLAnkle},
    {kNose, kREye},
    {kREye, kREar},
    {kNose, kLEye},
    {kLEye, kLEar},
}};

double Keypoints::mean_confidence() const {
    double s = 0.0;
    for (const auto& p : pts) s += p.c;
    return s / static_cast<double>(kNumKeypoints);
}

void Keypoints::validate() const {
    for (int i = 0; i < kNumKeypoints; ++i) {
        const Keypoint& p = pts[static_cast<std::size_t>(i)];
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw FormatError(std::string("non-finite coordinate for keypoint ") +
                              kKeypointNames[static_cast<std::size_t>(i)]);
        if (!(p.c >= 0.0 && p.c <= 1.0))
            throw FormatError(std::string("confidence outside [0,1] for keypoint ") +
                              kKeypointNames[static_cast<std::size_t>(i)]);
    }
}

std::vector<FrameAnnotation> parse_annotations(const std::string& text) {
    std::vector<FrameAnnotation> frames;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("annotation line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            FrameAnnotation fa;
            fa.timestamp_us = j.at("timestamp_us").get<std::uint64_t>();
            for (const auto& pj : j.at("persons")) {
                PersonDetection pd;
                const auto& kps = pj.at("keypoints");
                if (kps.size() != static_cast<std::size_t>(kNumKeypoints))
                    throw FormatError("expected " + std::to_string(kNumKeypoints) +
                                      " keypoints, got " + std::to_string(kps.size()));
                for (int i = 0; i < kNumKeypoints; ++i) {
                    const auto& t = kps[static_cast<std::size_t>(i)];
                    if (t.size() != 3) throw FormatError("keypoint entries must be [x, y, c]");
                    pd.keypoints[i] = {t[0].get<double>(), t[1].get<double>(),
                                       t[2].get<double>()};
                }
                pd.keypoints.validate();
                pd.score = pj.at("score").get<double>();
                fa.persons.push_back(std::move(pd));
            }
            if (!frames.empty() && fa.timestamp_us <= frames.back().timestamp_us)
                throw FormatError("timestamps must be strictly increasing");
            frames.push_back(std::move(fa));
        } catch (const FormatError& e) {
            throw FormatError("annotation line " + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("annotation line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return frames;
}

std::string write_annotations(const std::vector<FrameAnnotation>& frames) {
    std::string out;
    for (const auto& fa : frames) {
        nlohmann::json persons = nlohmann::json::array();
        for (const auto& pd : fa.persons) {
            nlohmann::json kps = nlohmann::json::array();
            for (const auto& p : pd.keypoints.pts) kps.push_back({p.x, p.y, p.c});
            persons.push_back({{"keypoints", kps}, {"score", pd.score}});
        }
        nlohmann::json j{{"timestamp_us", fa.timestamp_us}, {"persons", persons}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::optional<Keypoints> select_person(const FrameAnnotation& frame) {
    if (frame.persons.empty()) return std::nullopt;
    std::size_t best = 0;
    double best_conf = frame.persons[0].keypoints.mean_confidence();
    for (std::size_t i = 1; i < frame.persons.size(); ++i) {
        const double c = frame.persons[i].keypoints.mean_confidence();
        if (c > best_conf) {
            best_conf = c;
            best = i;
        }
    }
    return frame.persons[best].keypoints;
}

}  // namespace wisppn

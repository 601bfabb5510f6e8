#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wisppn {

inline constexpr int kNumKeypoints = 18;

// CMU 18-keypoint body layout; index order is fixed and shared by
// annotations, PAM encoding and reporting.
extern const std::array<const char*, kNumKeypoints> kKeypointNames;

enum KeypointIndex : int {
    kNose = 0,
    kNeck = 1,
    kRShoulder = 2,
    kRElbow = 3,
    kRWrist = 4,
    kLShoulder = 5,
    kLElbow = 6,
    kLWrist = 7,
    kRHip = 8,
    kRKnee = 9,
    kRAnkle = 10,
    kLHip = 11,
    kLKnee = 12,
    kLAnkle = 13,
    kREye = 14,
    kLEye = 15,
    kREar = 16,
    kLEar = 17,
};

// The 17 limb segments drawn between keypoints when rendering a skeleton.
extern const std::array<std::array<int, 2>, 17> kLimbPairs;

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double c = 0.0;
};

struct Keypoints {
    std::array<Keypoint, kNumKeypoints> pts{};

    Keypoint& operator[](int i) { return pts[static_cast<std::size_t>(i)]; }
    const Keypoint& operator[](int i) const { return pts[static_cast<std::size_t>(i)]; }

    double mean_confidence() const;
    void validate() const;  // throws FormatError on out-of-range fields
};

struct PersonDetection {
    Keypoints keypoints;
    double score = 0.0;  // detector score; metadata only
};

struct FrameAnnotation {
    std::uint64_t timestamp_us = 0;
    std::vector<PersonDetection> persons;
};

// One JSON object per line:
//   {"timestamp_us": <int>, "persons": [{"keypoints": [[x,y,c] x18], "score": <real>}]}
std::vector<FrameAnnotation> parse_annotations(const std::string& text);
std::string write_annotations(const std::vector<FrameAnnotation>& frames);

// Person with the highest mean keypoint confidence; ties keep the first.
std::optional<Keypoints> select_person(const FrameAnnotation& frame);

}  // namespace wisppn

#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wisppn/pose.hpp"
#include "wisppn/tensor.hpp"

namespace wisppn {

inline constexpr int kSubcarriers = 30;
inline constexpr int kTxAntennas = 3;
inline constexpr int kRxAntennas = 3;
inline constexpr int kCsiEntries = kSubcarriers * kTxAntennas * kRxAntennas;  // 270
inline constexpr int kSamplesPerWindow = 5;
inline constexpr int kWindowChannels = kSamplesPerWindow * kSubcarriers;  // 150

// Binary container layout: magic "WCSI", version 0x01, then fixed-size
// records of u64-LE timestamp followed by 270 (re, im) f32-LE pairs in
// (subcarrier, tx, rx) row-major order.
inline constexpr std::array<std::uint8_t, 4> kCsiMagic = {0x57, 0x43, 0x53, 0x49};
inline constexpr std::uint8_t kCsiVersion = 0x01;
inline constexpr std::size_t kCsiHeaderBytes = 5;
inline constexpr std::size_t kCsiRecordBytes = 8 + kCsiEntries * 2 * 4;  // 2168

// One timestamped 30x3x3 complex channel measurement.
struct CsiSample {
    std::uint64_t timestamp_us = 0;
    std::array<std::complex<double>, kCsiEntries> csi{};

    static std::size_t index(int subcarrier, int tx, int rx) {
        return (static_cast<std::size_t>(subcarrier) * kTxAntennas + tx) * kRxAntennas + rx;
    }

    std::complex<double>& at(int subcarrier, int tx, int rx) { return csi[index(subcarrier, tx, rx)]; }
    const std::complex<double>& at(int subcarrier, int tx, int rx) const {
        return csi[index(subcarrier, tx, rx)];
    }
};

// Five consecutive samples as amplitudes: a 150x3x3 tensor whose channel
// axis concatenates the 30 subcarriers of each time step in order
// (channel = 30 * step + subcarrier).
struct CsiWindow {
    std::uint64_t frame_timestamp_us = 0;
    Tensor data;  // [150, 3, 3]
};

struct PairedSample {
    CsiWindow window;
    Keypoints keypoints;
};

std::string write_csi_stream(std::span<const CsiSample> samples);
std::vector<CsiSample> parse_csi_stream(const std::string& bytes);

CsiWindow amplitude_window(std::span<const CsiSample> samples, std::uint64_t frame_timestamp_us);

struct PairingResult {
    std::vector<PairedSample> pairs;
    std::size_t skipped_no_csi = 0;     // frames without 5 in-range samples
    std::size_t skipped_no_person = 0;  // frames whose annotation has no person
};

// For each frame, takes the 5 latest CSI samples at or before the frame
// timestamp, all within 100 ms of it, and the frame's best person.
PairingResult pair_frames(const std::vector<CsiSample>& csi,
                          const std::vector<FrameAnnotation>& frames);

inline constexpr std::uint64_t kPairingWindowUs = 100000;

// Text form used by csi-pack / csi-dump:
//   {"timestamp_us": <int>, "csi": [[re, im] x 270]}
std::vector<CsiSample> parse_csi_jsonl(const std::string& text);
std::string write_csi_jsonl(const std::vector<CsiSample>& samples);

}  // namespace wisppn

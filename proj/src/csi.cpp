#include "wisppn/csi.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "wisppn/common.hpp"

namespace wisppn {

std::string write_csi_stream(std::span<const CsiSample> samples) {
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].timestamp_us <= samples[i - 1].timestamp_us)
            throw FormatError("non-monotonic timestamps: sample " + std::to_string(i) + " at " +
                              std::to_string(samples[i].timestamp_us) + " us follows " +
                              std::to_string(samples[i - 1].timestamp_us) + " us");
    std::string out;
    out.reserve(kCsiHeaderBytes + samples.size() * kCsiRecordBytes);
    for (std::uint8_t b : kCsiMagic) le::put_u8(out, b);
    le::put_u8(out, kCsiVersion);
    for (const CsiSample& s : samples) {
        le::put_u64(out, s.timestamp_us);
        for (const auto& h : s.csi) {
            le::put_f32(out, static_cast<float>(h.real()));
            le::put_f32(out, static_cast<float>(h.imag()));
        }
    }
    return out;
}

std::vector<CsiSample> parse_csi_stream(const std::string& bytes) {
    if (bytes.size() < kCsiHeaderBytes)
        throw FormatError("CSI stream shorter than the 5-byte header");
    le::Reader r(bytes.data(), bytes.size());
    for (std::size_t i = 0; i < kCsiMagic.size(); ++i)
        if (r.u8() != kCsiMagic[i]) throw FormatError("bad CSI container magic (expected \"WCSI\")");
    const std::uint8_t version = r.u8();
    if (version != kCsiVersion)
        throw FormatError("unsupported CSI container version " + std::to_string(version));

    const std::size_t payload = bytes.size() - kCsiHeaderBytes;
    if (payload % kCsiRecordBytes != 0)
        throw TruncationError("CSI stream truncated at byte offset " + std::to_string(bytes.size()) +
                              ": last record starts at offset " +
                              std::to_string(kCsiHeaderBytes + (payload / kCsiRecordBytes) * kCsiRecordBytes) +
                              " and is incomplete");

    std::vector<CsiSample> samples(payload / kCsiRecordBytes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CsiSample& s = samples[i];
        s.timestamp_us = r.u64();
        for (auto& h : s.csi) {
            const double re = r.f32();
            const double im = r.f32();
            h = {re, im};
        }
        if (i > 0 && s.timestamp_us <= samples[i - 1].timestamp_us)
            throw FormatError("non-monotonic timestamps in CSI stream at record " +
                              std::to_string(i));
    }
    return samples;
}

CsiWindow amplitude_window(std::span<const CsiSample> samples,
                           std::uint64_t frame_timestamp_us) {
    if (samples.size() != static_cast<std::size_t>(kSamplesPerWindow))
        throw DimensionError("amplitude_window needs exactly " +
                             std::to_string(kSamplesPerWindow) + " samples, got " +
                             std::to_string(samples.size()));
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].timestamp_us <= samples[i - 1].timestamp_us)
            throw FormatError("amplitude_window samples must be time-ordered");

    CsiWindow w;
    w.frame_timestamp_us = frame_timestamp_us;
    w.data = Tensor({kWindowChannels, kTxAntennas, kRxAntennas});
    double* out = w.data.data();
    for (int t = 0; t < kSamplesPerWindow; ++t) {
        const CsiSample& s = samples[static_cast<std::size_t>(t)];
        for (int k = 0; k < kSubcarriers; ++k) {
            for (int i = 0; i < kTxAntennas; ++i) {
                for (int j = 0; j < kRxAntennas; ++j) {
                    const std::complex<double>& h = s.at(k, i, j);
                    const double re = h.real();
                    const double im = h.imag();
                    out[((static_cast<std::size_t>(kSubcarriers) * t + k) * kTxAntennas + i) *
                            kRxAntennas +
                        j] = std::sqrt(re * re + im * im);
                }
            }
        }
    }
    return w;
}

PairingResult pair_frames(const std::vector<CsiSample>& csi,
                          const std::vector<FrameAnnotation>& frames) {
    PairingResult result;
    std::size_t hi = 0;  // one past the last sample with timestamp <= frame time
    for (const FrameAnnotation& frame : frames) {
        while (hi < csi.size() && csi[hi].timestamp_us <= frame.timestamp_us) ++hi;
        if (hi < static_cast<std::size_t>(kSamplesPerWindow)) {
            ++result.skipped_no_csi;
            continue;
        }
        const std::size_t lo = hi - kSamplesPerWindow;
        if (frame.timestamp_us - csi[lo].timestamp_us > kPairingWindowUs) {
            ++result.skipped_no_csi;
            continue;
        }
        std::optional<Keypoints> kp = select_person(frame);
        if (!kp) {
            ++result.skipped_no_person;
            continue;
        }
        PairedSample ps;
        ps.window = amplitude_window(std::span<const CsiSample>(csi.data() + lo, kSamplesPerWindow),
                                     frame.timestamp_us);
        ps.keypoints = *kp;
        result.pairs.push_back(std::move(ps));
    }
    return result;
}

std::vector<CsiSample> parse_csi_jsonl(const std::string& text) {
    std::vector<CsiSample> samples;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            CsiSample s;
            s.timestamp_us = j.at("timestamp_us").get<std::uint64_t>();
            const auto& arr = j.at("csi");
            if (arr.size() != static_cast<std::size_t>(kCsiEntries))
                throw FormatError("expected " + std::to_string(kCsiEntries) +
                                  " csi entries, got " + std::to_string(arr.size()));
            for (int i = 0; i < kCsiEntries; ++i) {
                const auto& pair = arr[static_cast<std::size_t>(i)];
                if (pair.size() != 2) throw FormatError("csi entries must be [re, im]");
                s.csi[static_cast<std::size_t>(i)] = {pair[0].get<double>(),
                                                      pair[1].get<double>()};
            }
            samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("csi line " + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("csi line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return samples;
}

std::string write_csi_jsonl(const std::vector<CsiSample>& samples) {
    std::string out;
    for (const CsiSample& s : samples) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& h : s.csi) arr.push_back({h.real(), h.imag()});
        nlohmann::json j{{"timestamp_us", s.timestamp_us}, {"csi", arr}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace wisppn

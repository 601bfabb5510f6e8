#pragma once

#include <cstdint>
#include <cstring>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace wisppn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input: bad magic bytes, unparseable text, invalid field values.
struct FormatError : Error {
    using Error::Error;
};

// A stream that ends mid-record. Message names the byte offset.
struct TruncationError : FormatError {
    using FormatError::FormatError;
};

// Shape, arity or alignment violations between tensors/sequences.
struct DimensionError : Error {
    using Error::Error;
};

// Checkpoint/container contents that fail structural validation.
struct IntegrityError : Error {
    using Error::Error;
};

// Training produced a non-finite loss or gradient.
struct DivergenceError : Error {
    using Error::Error;
};

// Deterministic PRNG (xoshiro256** seeded via splitmix64). We never use
// std:: distributions: their output is implementation-defined, and seeds
// here must reproduce data and weights exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = r * std::sin(two_pi * u2);
        has_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Little-endian byte IO, independent of host endianness.
namespace le {

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u16(std::string& out, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

class Reader {
public:
    Reader(const void* data, std::size_t size)
        : p_(static_cast<const unsigned char*>(data)), size_(size) {}

    std::size_t offset() const { return off_; }
    std::size_t remaining() const { return size_ - off_; }

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        const unsigned char* b = take(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32() {
        const unsigned char* b = take(4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | (hi << 32);
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string bytes(std::size_t n) {
        const unsigned char* b = take(n);
        return std::string(reinterpret_cast<const char*>(b), n);
    }

private:
    const unsigned char* take(std::size_t n) {
        if (off_ + n > size_)
            throw TruncationError("input truncated at byte offset " + std::to_string(size_) +
                                  " (needed " + std::to_string(n) + " more bytes at offset " +
                                  std::to_string(off_) + ")");
        const unsigned char* b = p_ + off_;
        off_ += n;
        return b;
    }

    const unsigned char* p_;
    std::size_t size_;
    std::size_t off_ = 0;
};

}  // namespace le

// Verbosity from WISPPN_LOG (0 = quiet, 1 = progress, 2 = debug).
int log_level();
void log_line(int level, const std::string& msg);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace wisppn

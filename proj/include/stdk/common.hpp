#pragma once

// Shared plumbing: error types, missing-value encoding, deterministic RNG,
// hashing and little-endian binary IO used by the file formats.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stdk {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (see tools/stdk.cpp).

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : error { using error::error; };                // missing/unreadable file
struct parse_error : error { using error::error; };             // malformed input, names line numbers
struct conflict_error : error { using error::error; };          // duplicate keys
struct empty_input_error : error { using error::error; };
struct invalid_argument_error : error { using error::error; };
struct degenerate_data_error : error { using error::error; };
struct insufficient_data_error : error { using error::error; };
struct shape_error : error { using error::error; };             // tensor/grid shape or index mismatch
struct provenance_error : error { using error::error; };        // config-hash mismatch
struct numeric_error : error { using error::error; };           // NaN/Inf where finite required

// ---------------------------------------------------------------------------
// Missing values are quiet NaNs throughout.

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double x) { return std::isnan(x); }

// ---------------------------------------------------------------------------
// printf-style helpers (libstdc++ 11 has no std::format).

template <typename... Args>
std::string strf(const char* fmt, Args... args) {
    int n = std::snprintf(nullptr, 0, fmt, args...);
    std::string s(static_cast<size_t>(n), '\0');
    std::snprintf(s.data(), s.size() + 1, fmt, args...);
    return s;
}

// Shortest text form that round-trips a double exactly.
inline std::string fmt_double(double x) {
    for (int prec = 1; prec <= 17; ++prec) {
        std::string s = strf("%.*g", prec, x);
        double back = std::strtod(s.c_str(), nullptr);
        if (back == x || (std::isnan(back) && std::isnan(x))) return s;
    }
    return strf("%.17g", x);
}

// ---------------------------------------------------------------------------
// Deterministic RNG: xoshiro256++ seeded via splitmix64. All stochastic
// behaviour in the library (init, shuffles, synthetic noise) goes through
// this so results are bit-reproducible across platforms and compilers.

class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = 1.0 - uniform();  // (0,1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Unbiased integer in [0, bound) by rejection.
    uint64_t below(uint64_t bound) {
        uint64_t threshold = (0ULL - bound) % bound;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    uint64_t s_[4];
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit. Single-byte substitution always changes the digest (xor and
// multiply-by-odd-prime are both bijections on 2^64), which is what the
// provenance check relies on.

inline uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) { return strf("%016llx", static_cast<unsigned long long>(v)); }

// ---------------------------------------------------------------------------
// Little-endian binary IO.

inline void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& os, double x) {
    uint64_t v;
    std::memcpy(&v, &x, 8);
    write_u64(os, v);
}

inline uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw io_error("unexpected end of file while reading u32");
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw io_error("unexpected end of file while reading u64");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& is) {
    uint64_t v = read_u64(is);
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}

}  // namespace stdk

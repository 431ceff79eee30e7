#pragma once

#include <cmath>
#include <cstdint>
#include <array>
#include <stdexcept>
#include <string>

namespace pqml {

// Scores and reward amounts are stored as signed micro-units: 6 fractional
// decimal digits, i.e. 1.5 == 1'500'000. All rounding is half-to-even.
constexpr int64_t kMicroScale = 1'000'000;

inline double micros_to_double(int64_t micros) {
    return static_cast<double>(micros) / static_cast<double>(kMicroScale);
}

// Half-to-even rounding of a real value to micro-units.
inline int64_t micros_from_double(double value) {
    if (!std::isfinite(value)) {
        throw std::domain_error("micros_from_double: non-finite value");
    }
    double scaled = value * static_cast<double>(kMicroScale);
    // nearbyint honours the default FE_TONEAREST mode (ties to even).
    return static_cast<int64_t>(std::nearbyint(scaled));
}

// Banker's integer division: round num/den half-to-even, den > 0.
inline int64_t div_half_even(int64_t num, int64_t den) {
    if (den <= 0) {
        throw std::domain_error("div_half_even: denominator must be positive");
    }
    int64_t q = num / den;
    int64_t r = num % den;
    if (r < 0) {  // floor division
        q -= 1;
        r += den;
    }
    int64_t twice = 2 * r;
    if (twice > den || (twice == den && (q & 1) != 0)) {
        q += 1;
    }
    return q;
}

// Half-to-even product of a micro-unit amount and a real factor.
inline int64_t scale_micros(int64_t micros, double factor) {
    return static_cast<int64_t>(
        std::nearbyint(static_cast<double>(micros) * factor));
}

// Canonical byte encoding: 64-bit big-endian two's complement.
inline std::array<uint8_t, 8> micros_to_bytes(int64_t micros) {
    std::array<uint8_t, 8> out{};
    auto u = static_cast<uint64_t>(micros);
    for (int i = 0; i < 8; ++i) {
        out[static_cast<size_t>(i)] = static_cast<uint8_t>(u >> (56 - 8 * i));
    }
    return out;
}

inline int64_t micros_from_bytes(const std::array<uint8_t, 8>& bytes) {
    uint64_t u = 0;
    for (uint8_t b : bytes) {
        u = (u << 8) | b;
    }
    return static_cast<int64_t>(u);
}

// Parses a decimal literal with at most 6 fractional digits ("7", "-0.25",
// "9.999999"). More digits or malformed input is an error.
int64_t parse_micros(const std::string& text);

// Formats micro-units as a decimal with exactly 6 fractional digits.
std::string format_micros(int64_t micros);

}  // namespace pqml

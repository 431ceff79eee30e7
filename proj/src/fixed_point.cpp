#include "pqml/fixed_point.hpp"

#include <cctype>
#include <cstdlib>

namespace pqml {

int64_t parse_micros(const std::string& text) {
    if (text.empty()) {
        throw std::invalid_argument("parse_micros: empty string");
    }
    size_t pos = 0;
    bool negative = false;
    if (text[pos] == '+' || text[pos] == '-') {
        negative = text[pos] == '-';
        ++pos;
    }
    if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
        throw std::invalid_argument("parse_micros: malformed number '" + text + "'");
    }
    int64_t whole = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        whole = whole * 10 + (text[pos] - '0');
        if (whole > (int64_t{1} << 52)) {
            throw std::invalid_argument("parse_micros: magnitude too large '" + text + "'");
        }
        ++pos;
    }
    int64_t frac = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (++digits > 6) {
                throw std::invalid_argument(
                    "parse_micros: more than 6 fractional digits '" + text + "'");
            }
            frac = frac * 10 + (text[pos] - '0');
            ++pos;
        }
        if (digits == 0) {
            throw std::invalid_argument("parse_micros: trailing dot '" + text + "'");
        }
        for (; digits < 6; ++digits) {
            frac *= 10;
        }
    }
    if (pos != text.size()) {
        throw std::invalid_argument("parse_micros: trailing garbage '" + text + "'");
    }
    int64_t micros = whole * kMicroScale + frac;
    return negative ? -micros : micros;
}

std::string format_micros(int64_t micros) {
    bool negative = micros < 0;
    uint64_t mag = negative ? static_cast<uint64_t>(-(micros + 1)) + 1
                            : static_cast<uint64_t>(micros);
    uint64_t whole = mag / kMicroScale;
    uint64_t frac = mag % kMicroScale;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%llu.%06llu", negative ? "-" : "",
                  static_cast<unsigned long long>(whole),
                  static_cast<unsigned long long>(frac));
    return buf;
}

}  // namespace pqml

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cloudalloc {

/* Money is stored in micro-units (1e-6) of the price unit per instance-hour.
 * All cost accumulation stays in integers so runs are bit-reproducible;
 * conversion to double happens only when reporting. */
using Money = std::int64_t;

inline constexpr Money kMoneyOne = 1'000'000;

inline double money_to_double(Money m) { return static_cast<double>(m) / kMoneyOne; }

inline Money money_from_double(double v) {
    if (!(v == v) || v > 9.0e12 || v < -9.0e12)
        throw std::invalid_argument("money value out of range: " + std::to_string(v));
    double scaled = v * kMoneyOne;
    return static_cast<Money>(scaled >= 0 ? scaled + 0.5 : scaled - 0.5);
}

/* Parses a plain decimal like "0.25" or "-1.5"; fractional digits beyond
 * micro precision are rounded half away from zero. */
inline Money money_parse(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty money literal");
    std::size_t pos = 0;
    bool neg = false;
    if (text[pos] == '+' || text[pos] == '-') {
        neg = text[pos] == '-';
        ++pos;
    }
    if (pos == text.size()) throw std::invalid_argument("bad money literal: " + text);
    std::int64_t units = 0;
    bool any_digit = false;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
        any_digit = true;
        units = units * 10 + (text[pos] - '0');
        if (units > 9'000'000'000'000LL) throw std::invalid_argument("money literal too large: " + text);
        ++pos;
    }
    std::int64_t frac = 0;
    int frac_digits = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            any_digit = true;
            if (frac_digits < 6) {
                frac = frac * 10 + (text[pos] - '0');
                ++frac_digits;
            } else if (frac_digits == 6) {
                if (text[pos] >= '5') ++frac;  // round the 7th digit
                ++frac_digits;
            }
            ++pos;
        }
    }
    if (!any_digit || pos != text.size())
        throw std::invalid_argument("bad money literal: " + text);
    while (frac_digits < 6) {
        frac *= 10;
        ++frac_digits;
    }
    Money value = units * kMoneyOne + frac;
    return neg ? -value : value;
}

/* Emits the shortest decimal that parses back to the same micro value. */
inline std::string money_format(Money m) {
    std::string out;
    std::uint64_t mag = m < 0 ? static_cast<std::uint64_t>(-(m + 1)) + 1 : static_cast<std::uint64_t>(m);
    std::uint64_t units = mag / kMoneyOne;
    std::uint64_t frac = mag % kMoneyOne;
    out = std::to_string(units);
    if (frac != 0) {
        std::string digits = std::to_string(frac);
        digits.insert(digits.begin(), 6 - digits.size(), '0');
        while (!digits.empty() && digits.back() == '0') digits.pop_back();
        out += "." + digits;
    }
    if (m < 0) out.insert(out.begin(), '-');
    return out;
}

}  // namespace cloudalloc

#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cloudalloc {

/* Exact rational on int64 with normalized positive denominator.
 * Slackness checks and the beta grid live in small integers, so comparisons
 * via 128-bit cross products are always exact and never overflow. */
struct Ratio {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Ratio() = default;
    Ratio(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
        if (den == 0) throw std::domain_error("rational with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    /* Largest integer <= num/den. */
    std::int64_t floor() const {
        std::int64_t q = num / den;
        if (num % den != 0 && num < 0) --q;
        return q;
    }

    /* Smallest integer >= num/den. */
    std::int64_t ceil() const {
        std::int64_t q = num / den;
        if (num % den != 0 && num > 0) ++q;
        return q;
    }

    friend Ratio operator+(Ratio a, Ratio b) { return Ratio(a.num * b.den + b.num * a.den, a.den * b.den); }
    friend Ratio operator-(Ratio a, Ratio b) { return Ratio(a.num * b.den - b.num * a.den, a.den * b.den); }
    friend Ratio operator*(Ratio a, Ratio b) { return Ratio(a.num * b.num, a.den * b.den); }
    friend Ratio operator/(Ratio a, Ratio b) {
        if (b.num == 0) throw std::domain_error("rational division by zero");
        return Ratio(a.num * b.den, a.den * b.num);
    }

    friend bool operator==(Ratio a, Ratio b) { return a.num == b.num && a.den == b.den; }
    friend bool operator!=(Ratio a, Ratio b) { return !(a == b); }
    friend bool operator<(Ratio a, Ratio b) {
        return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
    }
    friend bool operator>(Ratio a, Ratio b) { return b < a; }
    friend bool operator<=(Ratio a, Ratio b) { return !(b < a); }
    friend bool operator>=(Ratio a, Ratio b) { return !(a < b); }
};

inline std::string ratio_format(Ratio r) {
    if (r.den == 1) return std::to_string(r.num);
    return std::to_string(r.num) + "/" + std::to_string(r.den);
}

}  // namespace cloudalloc

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "errors.hpp"

namespace constlab {

using Count = unsigned __int128;

inline std::string to_string(Count v)
{
    if (v == 0)
        return "0";
    std::string s;
    while (v > 0) {
        s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    return s;
}

// Neumaier's variant of Kahan summation; robust when addends exceed the running sum.
class KahanSum {
public:
    void add(double x)
    {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    void add(const KahanSum& other)
    {
        add(other.sum_);
        add(other.comp_);
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline bool checked_mul(std::uint64_t a, std::uint64_t b, std::uint64_t& out)
{
    return !__builtin_mul_overflow(a, b, &out);
}

// Saturating product used for term counts that are reported, never iterated.
inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t out = 0;
    return checked_mul(a, b, out) ? out : UINT64_MAX;
}

// A nonnegative rational num/den, kept reduced.
struct Ratio {
    std::uint64_t num = 1;
    std::uint64_t den = 2;

    static Ratio make(std::uint64_t n, std::uint64_t d)
    {
        require(d != 0, "ratio denominator must be nonzero");
        const std::uint64_t g = std::gcd(n, d);
        return g == 0 ? Ratio{0, 1} : Ratio{n / g, d / g};
    }

    // Accepts "p/q" or a plain decimal such as "0.25".
    static Ratio parse(const std::string& text)
    {
        const auto slash = text.find('/');
        try {
            if (slash != std::string::npos) {
                return make(std::stoull(text.substr(0, slash)), std::stoull(text.substr(slash + 1)));
            }
            const auto dot = text.find('.');
            if (dot == std::string::npos)
                return make(std::stoull(text), 1);
            const std::string whole = text.substr(0, dot);
            const std::string frac = text.substr(dot + 1);
            require(frac.size() <= 12, "too many decimal places in '" + text + "'");
            std::uint64_t den = 1;
            for (std::size_t i = 0; i < frac.size(); ++i)
                den *= 10;
            const std::uint64_t w = whole.empty() ? 0 : std::stoull(whole);
            const std::uint64_t f = frac.empty() ? 0 : std::stoull(frac);
            return make(w * den + f, den);
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse rational '" + text + "'");
        }
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

    // floor(this * n / d) in 128-bit arithmetic.
    std::uint64_t floor_times(std::uint64_t n, std::uint64_t d = 1) const
    {
        const unsigned __int128 top = static_cast<unsigned __int128>(num) * n;
        const unsigned __int128 bottom = static_cast<unsigned __int128>(den) * d;
        return static_cast<std::uint64_t>(top / bottom);
    }
};

} // namespace constlab

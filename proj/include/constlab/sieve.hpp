#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"
#include "parallel.hpp"

namespace constlab {

struct SieveOptions {
    std::uint64_t segment_size = std::uint64_t{1} << 16;
    std::uint64_t max_limit = std::uint64_t{1} << 32;
    unsigned threads = 1;
};

// Exact prime membership on [1, limit]. Bit (n - 1) of the word array is set iff n is
// prime; the sorted list of primes is kept alongside for ordered walks.
class PrimeTable {
public:
    PrimeTable() = default;

    PrimeTable(std::uint64_t limit, std::vector<std::uint64_t> words)
        : limit_(limit), words_(std::move(words))
    {
        if (words_.size() != word_count(limit_))
            throw ConfigError("prime table word count does not match limit");
        primes_.reserve(static_cast<std::size_t>(1.1 * static_cast<double>(limit_) / std::max(1.0, std::log(static_cast<double>(limit_)) - 1.1)) + 16);
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits) {
                const int b = std::countr_zero(bits);
                primes_.push_back(w * 64 + static_cast<std::uint64_t>(b) + 1);
                bits &= bits - 1;
            }
        }
    }

    std::uint64_t limit() const { return limit_; }
    std::size_t count() const { return primes_.size(); }
    std::span<const std::uint64_t> primes() const { return primes_; }
    std::span<const std::uint64_t> words() const { return words_; }

    bool is_prime(std::int64_t n) const
    {
        if (n < 2)
            return false;
        const auto u = static_cast<std::uint64_t>(n);
        if (u > limit_)
            throw std::out_of_range("prime query " + std::to_string(n) + " beyond table limit " + std::to_string(limit_));
        return (words_[(u - 1) >> 6] >> ((u - 1) & 63)) & 1u;
    }

    // Number of primes <= x.
    std::size_t pi(std::uint64_t x) const
    {
        return static_cast<std::size_t>(std::upper_bound(primes_.begin(), primes_.end(), x) - primes_.begin());
    }

    static std::size_t word_count(std::uint64_t limit) { return static_cast<std::size_t>((limit + 63) / 64); }

    friend bool operator==(const PrimeTable& a, const PrimeTable& b)
    {
        return a.limit_ == b.limit_ && a.words_ == b.words_;
    }

private:
    std::uint64_t limit_ = 0;
    std::vector<std::uint64_t> words_;
    std::vector<std::uint64_t> primes_;
};

namespace detail {

inline std::vector<std::uint32_t> small_primes(std::uint64_t bound)
{
    std::vector<char> composite(bound + 1, 0);
    std::vector<std::uint32_t> out;
    for (std::uint64_t i = 2; i <= bound; ++i) {
        if (composite[i])
            continue;
        out.push_back(static_cast<std::uint32_t>(i));
        for (std::uint64_t j = i * i; j <= bound; j += i)
            composite[j] = 1;
    }
    return out;
}

inline std::uint64_t isqrt(std::uint64_t n)
{
    auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n)
        --r;
    while ((r + 1) * (r + 1) <= n)
        ++r;
    return r;
}

inline void check_limit(std::uint64_t limit, const SieveOptions& opt)
{
    if (limit < 2)
        throw ConfigError("sieve limit must be at least 2 (got " + std::to_string(limit) + ")");
    if (limit > opt.max_limit)
        throw ConfigError("sieve limit " + std::to_string(limit) + " exceeds the configured budget of " + std::to_string(opt.max_limit));
}

} // namespace detail

// Segmented sieve of Eratosthenes. Memory beyond the output is O(sqrt(limit) + segment).
inline PrimeTable sieve_primes(std::uint64_t limit, const SieveOptions& opt = {})
{
    detail::check_limit(limit, opt);
    // Segments start on word boundaries so parallel segments never share a word.
    const std::uint64_t seg = std::max<std::uint64_t>(64, (opt.segment_size + 63) / 64 * 64);
    const auto base = detail::small_primes(detail::isqrt(limit));
    std::vector<std::uint64_t> words(PrimeTable::word_count(limit), 0);
    const std::size_t segments = static_cast<std::size_t>((limit + seg - 1) / seg);

    run_chunks<char>(segments, opt.threads, [&](std::size_t s) {
        const std::uint64_t lo = 1 + s * seg;                // first integer in the segment
        const std::uint64_t hi = std::min(limit, lo + seg - 1); // last integer, inclusive
        std::vector<char> mark(hi - lo + 1, 1);
        for (std::uint32_t p32 : base) {
            const std::uint64_t p = p32;
            if (p * p > hi)
                break;
            std::uint64_t start = std::max(p * p, (lo + p - 1) / p * p);
            for (std::uint64_t m = start; m <= hi; m += p)
                mark[m - lo] = 0;
        }
        if (lo == 1)
            mark[0] = 0;
        for (std::uint64_t n = lo; n <= hi; ++n)
            if (mark[n - lo])
                words[(n - 1) >> 6] |= std::uint64_t{1} << ((n - 1) & 63);
        return char{0};
    });
    return PrimeTable(limit, std::move(words));
}

// Plain one-pass sieve; kept as a cross-check for the segmented path.
inline PrimeTable sieve_primes_unsegmented(std::uint64_t limit, const SieveOptions& opt = {})
{
    detail::check_limit(limit, opt);
    std::vector<char> composite(limit + 1, 0);
    std::vector<std::uint64_t> words(PrimeTable::word_count(limit), 0);
    for (std::uint64_t i = 2; i <= limit; ++i) {
        if (composite[i])
            continue;
        words[(i - 1) >> 6] |= std::uint64_t{1} << ((i - 1) & 63);
        if (i <= limit / i)
            for (std::uint64_t j = i * i; j <= limit; j += i)
                composite[j] = 1;
    }
    return PrimeTable(limit, std::move(words));
}

struct Primorial {
    std::uint64_t w = 0;
    std::uint64_t W = 1;
    std::uint64_t totient = 1;
    std::vector<std::uint64_t> primes; // the primes <= w
};

inline Primorial primorial(std::uint64_t w)
{
    if (w < 2)
        throw ConfigError("primorial requires w >= 2 (got " + std::to_string(w) + ")");
    Primorial out;
    out.w = w;
    for (std::uint64_t p = 2; p <= w; ++p) {
        bool prime = true;
        for (std::uint64_t q = 2; q * q <= p; ++q)
            if (p % q == 0) {
                prime = false;
                break;
            }
        if (!prime)
            continue;
        std::uint64_t next = 0;
        if (!checked_mul(out.W, p, next))
            throw ConfigError("primorial overflow: the product of primes <= " + std::to_string(w) +
                              " does not fit in 64 bits; the largest admissible w is " + std::to_string(p - 1));
        out.W = next;
        out.totient *= (p - 1);
        out.primes.push_back(p);
    }
    return out;
}

// Binary dump: "PTBL", u32 version, u64 limit, then ceil(limit/8) bytes where bit
// (n - 1) marks n prime, least significant bit first. All fields little-endian.
inline constexpr std::uint32_t kPrimeTableVersion = 1;

inline void write_prime_table(std::ostream& os, const PrimeTable& t)
{
    auto put_le = [&](std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i)
            os.put(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    os.write("PTBL", 4);
    put_le(kPrimeTableVersion, 4);
    put_le(t.limit(), 8);
    const std::uint64_t nbytes = (t.limit() + 7) / 8;
    const auto words = t.words();
    for (std::uint64_t b = 0; b < nbytes; ++b)
        os.put(static_cast<char>((words[b / 8] >> (8 * (b % 8))) & 0xff));
}

inline PrimeTable read_prime_table(std::istream& is)
{
    char header[16];
    if (!is.read(header, 16) || std::memcmp(header, "PTBL", 4) != 0)
        throw ConfigError("not a prime table dump (bad magic)");
    auto get_le = [&](int off, int bytes) {
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(header[off + i])) << (8 * i);
        return v;
    };
    if (get_le(4, 4) != kPrimeTableVersion)
        throw ConfigError("unsupported prime table version " + std::to_string(get_le(4, 4)));
    const std::uint64_t limit = get_le(8, 8);
    const std::uint64_t nbytes = (limit + 7) / 8;
    std::vector<std::uint64_t> words(PrimeTable::word_count(limit), 0);
    for (std::uint64_t b = 0; b < nbytes; ++b) {
        const int c = is.get();
        if (c == EOF)
            throw ConfigError("prime table dump truncated");
        words[b / 8] |= static_cast<std::uint64_t>(c) << (8 * (b % 8));
    }
    return PrimeTable(limit, std::move(words));
}

} // namespace constlab

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "numeric.hpp"
#include "sieve.hpp"
#include "weights.hpp"

namespace constlab {

// Parameters of the residue-class rescaling a -> W (a + offset) + b_i.
struct WTrickContext {
    std::uint64_t w = 2;
    std::uint64_t W = 2;
    std::uint64_t totient = 1;
    Ratio delta_prime = Ratio::make(1, 2);
    std::uint64_t N = 0;
    std::uint64_t NPrime = 0;
    std::uint64_t offset = 0; // floor(delta' N / W)
    std::vector<std::uint64_t> residues;

    std::size_t dim() const { return residues.size(); }

    std::int64_t original(std::size_t i, std::int64_t a) const
    {
        return static_cast<std::int64_t>(W) * (a + static_cast<std::int64_t>(offset)) + static_cast<std::int64_t>(residues[i]);
    }

    // Largest integer any a in [1, N'] maps to; the prime table must reach it.
    std::uint64_t required_limit() const
    {
        const std::uint64_t top = residues.empty() ? W - 1 : *std::max_element(residues.begin(), residues.end());
        return W * (NPrime + offset) + top;
    }
};

inline WTrickContext make_context(std::uint64_t w, Ratio delta_prime, std::uint64_t N, std::vector<std::uint64_t> residues)
{
    const Primorial pr = primorial(w);
    require(delta_prime.num > 0 && 2 * delta_prime.num <= delta_prime.den,
            "delta' must lie in (0, 1/2] (got " + delta_prime.str() + ")");
    require(N >= 1, "N must be positive");
    WTrickContext ctx;
    ctx.w = w;
    ctx.W = pr.W;
    ctx.totient = pr.totient;
    ctx.delta_prime = delta_prime;
    ctx.N = N;
    const Ratio keep = Ratio::make(delta_prime.den - delta_prime.num, delta_prime.den);
    ctx.NPrime = keep.floor_times(N, pr.W);
    ctx.offset = delta_prime.floor_times(N, pr.W);
    require(ctx.NPrime >= 1, "N' = floor((1 - delta') N / W) is zero; increase N or decrease w");
    for (std::uint64_t b : residues) {
        require(b >= 1 && b < pr.W, "residue " + std::to_string(b) + " outside [1, W)");
        require(std::gcd(b, pr.W) == 1, "residue " + std::to_string(b) + " is not coprime to W = " + std::to_string(pr.W));
    }
    ctx.residues = std::move(residues);
    return ctx;
}

struct ResidueSelection {
    WTrickContext context;
    std::uint64_t attained = 0;      // points of A in the window congruent to the chosen tuple
    std::uint64_t window_count = 0;  // |A intersect [delta' N, N]^d|
    double average_bound = 0.0;      // window_count / phi(W)^d
    bool joint = true;               // false when residues were chosen per coordinate
    std::vector<std::uint64_t> marginal_counts;
};

namespace detail {

inline bool tuple_index_fits(std::uint64_t W, std::size_t d)
{
    unsigned __int128 cells = 1;
    for (std::size_t i = 0; i < d; ++i) {
        cells *= W;
        if (cells > (static_cast<unsigned __int128>(1) << 63))
            return false;
    }
    return true;
}

// Argmax over a tally, ties broken towards the smallest key.
template <class Map>
std::pair<std::uint64_t, std::uint64_t> argmax_smallest(const Map& tally)
{
    std::uint64_t best_key = 0, best = 0;
    bool have = false;
    for (const auto& [key, count] : tally)
        if (!have || count > best || (count == best && key < best_key)) {
            best_key = key;
            best = count;
            have = true;
        }
    return {best_key, best};
}

} // namespace detail

// Picks residues b_i coprime to W maximizing the number of points of A in the window
// [delta' N, N]^d with a_i = b_i mod W for every i.
inline ResidueSelection select_residues(const PrimeTable& table, const DenseSubset& A, std::uint64_t w, Ratio delta_prime, std::uint64_t N)
{
    const std::size_t d = A.dim();
    WTrickContext base = make_context(w, delta_prime, N, {});
    const std::uint64_t W = base.W;
    // ceil(delta' N)
    const std::uint64_t window_lo = std::max<std::uint64_t>(1, (static_cast<unsigned __int128>(delta_prime.num) * N + delta_prime.den - 1) / delta_prime.den);
    require(table.limit() >= N, "prime table limit " + std::to_string(table.limit()) + " is below N = " + std::to_string(N));
    {
        const auto primes = table.primes();
        const auto it = std::lower_bound(primes.begin(), primes.end(), window_lo);
        require(it == primes.end() || *it > N || *it > w,
                "w = " + std::to_string(w) + " must be below every prime in [delta' N, N]");
    }
    auto in_window = [&](std::int64_t x) { return x >= static_cast<std::int64_t>(window_lo) && x <= static_cast<std::int64_t>(N); };
    auto coprime_residue = [&](std::int64_t x) {
        const std::uint64_t r = static_cast<std::uint64_t>(x) % W;
        if (std::gcd(r, W) != 1)
            throw ConfigError("point coordinate " + std::to_string(x) + " in the window shares a factor with W = " + std::to_string(W));
        return r;
    };

    ResidueSelection out;
    const double phi_d = std::pow(static_cast<double>(base.totient), static_cast<double>(d));
    std::vector<std::map<std::uint64_t, std::uint64_t>> marginal(d);

    if (A.is_product()) {
        // The joint tally of a product set is the product of its marginal tallies.
        std::uint64_t window = 1, attained = 1;
        std::vector<std::uint64_t> chosen(d);
        for (std::size_t i = 0; i < d; ++i) {
            std::uint64_t in = 0;
            for (std::int64_t x : A.factors()[i])
                if (in_window(x)) {
                    ++marginal[i][coprime_residue(x)];
                    ++in;
                }
            window *= in;
            const auto [key, count] = detail::argmax_smallest(marginal[i]);
            chosen[i] = key;
            attained *= count;
            out.marginal_counts.push_back(count);
        }
        out.window_count = window;
        out.attained = attained;
        out.joint = true;
        if (window == 0)
            throw ConfigError("degenerate input: no admissible residue tuple has a nonzero count");
        out.context = make_context(w, delta_prime, N, chosen);
    } else if (detail::tuple_index_fits(W, d)) {
        std::unordered_map<std::uint64_t, std::uint64_t> tally;
        A.for_each([&](std::span<const std::int64_t> p) {
            for (std::int64_t x : p)
                if (!in_window(x))
                    return;
            std::uint64_t key = 0;
            for (std::int64_t x : p)
                key = key * W + coprime_residue(x);
            ++tally[key];
            ++out.window_count;
        });
        if (out.window_count == 0)
            throw ConfigError("degenerate input: no admissible residue tuple has a nonzero count");
        auto [key, count] = detail::argmax_smallest(tally);
        std::vector<std::uint64_t> chosen(d);
        for (std::size_t i = d; i > 0; --i) {
            chosen[i - 1] = key % W;
            key /= W;
        }
        out.attained = count;
        out.joint = true;
        out.context = make_context(w, delta_prime, N, chosen);
    } else {
        // Residue tuples cannot be indexed in one word: choose each coordinate's class
        // from its marginal tally instead of the joint one.
        A.for_each([&](std::span<const std::int64_t> p) {
            for (std::int64_t x : p)
                if (!in_window(x))
                    return;
            for (std::size_t i = 0; i < d; ++i)
                ++marginal[i][coprime_residue(p[i])];
            ++out.window_count;
        });
        if (out.window_count == 0)
            throw ConfigError("degenerate input: no admissible residue tuple has a nonzero count");
        std::vector<std::uint64_t> chosen(d);
        for (std::size_t i = 0; i < d; ++i) {
            const auto [key, count] = detail::argmax_smallest(marginal[i]);
            chosen[i] = key;
            out.marginal_counts.push_back(count);
            if (static_cast<unsigned __int128>(count) * base.totient < out.window_count)
                throw IntegrityError("marginal pigeonhole bound violated in coordinate " + std::to_string(i + 1));
        }
        out.joint = false;
        A.for_each([&](std::span<const std::int64_t> p) {
            for (std::size_t i = 0; i < d; ++i)
                if (!in_window(p[i]) || static_cast<std::uint64_t>(p[i]) % W != chosen[i])
                    return;
            ++out.attained;
        });
        out.context = make_context(w, delta_prime, N, chosen);
    }
    out.average_bound = static_cast<double>(out.window_count) / phi_d;
    if (out.joint) {
        unsigned __int128 lhs = out.attained;
        for (std::size_t i = 0; i < d; ++i)
            lhs *= base.totient;
        if (lhs < out.window_count)
            throw IntegrityError("pigeonhole bound violated: attained " + std::to_string(out.attained) + " < " +
                                 std::to_string(out.window_count) + " / phi(W)^d");
    }
    return out;
}

inline DenseSubset rescale_subset(const DenseSubset& A, const WTrickContext& ctx)
{
    require(ctx.dim() == A.dim(), "context dimension does not match the subset");
    const auto W = static_cast<std::int64_t>(ctx.W);
    const auto extent = static_cast<std::int64_t>(ctx.NPrime);
    auto pull_back = [&](std::size_t i, std::int64_t x, std::int64_t& a) {
        const std::int64_t shifted = x - static_cast<std::int64_t>(ctx.residues[i]);
        if (shifted < 0 || shifted % W != 0)
            return false;
        a = shifted / W - static_cast<std::int64_t>(ctx.offset);
        return a >= 1 && a <= extent;
    };
    if (A.is_product()) {
        std::vector<std::vector<std::int64_t>> factors(A.dim());
        for (std::size_t i = 0; i < A.dim(); ++i)
            for (std::int64_t x : A.factors()[i]) {
                std::int64_t a = 0;
                if (pull_back(i, x, a))
                    factors[i].push_back(a);
            }
        return DenseSubset::product(std::move(factors), extent, A.source() + "/rescaled");
    }
    std::vector<std::int64_t> flat;
    Point q(A.dim());
    A.for_each([&](std::span<const std::int64_t> p) {
        for (std::size_t i = 0; i < A.dim(); ++i)
            if (!pull_back(i, p[i], q[i]))
                return;
        flat.insert(flat.end(), q.begin(), q.end());
    });
    return DenseSubset::from_points(A.dim(), extent, flat, A.source() + "/rescaled");
}

inline Point unrescale_point(std::span<const std::int64_t> a, const WTrickContext& ctx)
{
    Point out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = ctx.original(i, a[i]);
    return out;
}

struct PrimeWeight {
    WeightField field;
    std::size_t coordinate = 0; // zero-based
    double nonzero_value = 0.0; // (phi(W)/W) log N
    double mean = 0.0;
    std::uint64_t support_size = 0;
};

// nu_i(a) = (phi(W)/W) log N when W (a + offset) + b_i is prime, else 0, for a in [1, N'].
inline PrimeWeight build_weight(const PrimeTable& table, const WTrickContext& ctx, std::size_t i)
{
    require(i < ctx.dim(), "coordinate index out of range");
    require(std::gcd(ctx.residues[i], ctx.W) == 1, "residue b_" + std::to_string(i + 1) + " is not coprime to W");
    require(table.limit() >= ctx.required_limit(),
            "prime table limit " + std::to_string(table.limit()) + " below the largest rescaled value " + std::to_string(ctx.required_limit()));
    PrimeWeight out;
    out.coordinate = i;
    out.nonzero_value = static_cast<double>(ctx.totient) / static_cast<double>(ctx.W) * std::log(static_cast<double>(ctx.N));
    std::vector<double> values(ctx.NPrime, 0.0);
    for (std::uint64_t a = 1; a <= ctx.NPrime; ++a)
        if (table.is_prime(ctx.original(i, static_cast<std::int64_t>(a)))) {
            values[a - 1] = out.nonzero_value;
            ++out.support_size;
        }
    out.field = WeightField::from_values(std::move(values));
    out.mean = out.field.mean();
    return out;
}

inline std::vector<PrimeWeight> build_weights(const PrimeTable& table, const WTrickContext& ctx)
{
    std::vector<PrimeWeight> out;
    for (std::size_t i = 0; i < ctx.dim(); ++i)
        out.push_back(build_weight(table, ctx, i));
    return out;
}

// (P intersect [N])^d as a product subset.
inline DenseSubset prime_grid(const PrimeTable& table, std::uint64_t N, std::size_t d)
{
    require(table.limit() >= N, "prime table does not reach N");
    std::vector<std::int64_t> primes;
    for (std::uint64_t p : table.primes()) {
        if (p > N)
            break;
        primes.push_back(static_cast<std::int64_t>(p));
    }
    return DenseSubset::product(std::vector<std::vector<std::int64_t>>(d, primes), static_cast<std::int64_t>(N), "primes");
}

} // namespace constlab

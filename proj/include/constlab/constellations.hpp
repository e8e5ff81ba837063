#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "sieve.hpp"
#include "wtrick.hpp"

namespace constlab {

// The template v_1..v_k of a constellation a + r v_1, ..., a + r v_k in Z^d.
struct Shape {
    std::size_t d = 1;
    std::vector<Point> vectors;
    std::vector<std::vector<std::int64_t>> projections; // Omega_i, sorted and distinct

    static Shape make(std::size_t d, std::vector<Point> vectors)
    {
        require(d >= 1, "shape dimension must be at least 1");
        require(!vectors.empty(), "shape needs at least one vector");
        for (std::size_t j = 0; j < vectors.size(); ++j)
            require(vectors[j].size() == d, "shape vector " + std::to_string(j + 1) + " does not have " + std::to_string(d) + " coordinates");
        auto sorted = vectors;
        std::sort(sorted.begin(), sorted.end());
        require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "shape vectors must be pairwise distinct");
        Shape s;
        s.d = d;
        s.vectors = std::move(vectors);
        s.projections.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            for (const auto& v : s.vectors)
                s.projections[i].push_back(v[i]);
            auto& p = s.projections[i];
            std::sort(p.begin(), p.end());
            p.erase(std::unique(p.begin(), p.end()), p.end());
        }
        return s;
    }

    std::size_t k() const { return vectors.size(); }

    std::size_t omega_size_sum() const
    {
        std::size_t n = 0;
        for (const auto& p : projections)
            n += p.size();
        return n;
    }

    Shape dilated(std::int64_t s) const
    {
        auto v = vectors;
        for (auto& p : v)
            for (auto& x : p)
                x *= s;
        return make(d, std::move(v));
    }

    // Coordinate i of the result is coordinate perm[i] of this shape.
    Shape permuted(std::span<const std::size_t> perm) const
    {
        auto v = vectors;
        for (std::size_t j = 0; j < v.size(); ++j)
            for (std::size_t i = 0; i < d; ++i)
                v[j][i] = vectors[j][perm[i]];
        return make(d, std::move(v));
    }
};

struct ConstellationHit {
    Point a;
    std::int64_t r = 0;
};

enum class CountStrategy { Auto, ProductFactorized, HashProbe };

struct CountOptions {
    unsigned threads = 1;
    CountStrategy strategy = CountStrategy::Auto;
    std::uint64_t brute_budget = 1'000'000'000; // cap on N^d (N - 1)
};

namespace detail {

inline bool in_box(std::span<const std::int64_t> p, std::int64_t N)
{
    for (auto x : p)
        if (x < 1 || x > N)
            return false;
    return true;
}

// #{a : a + r c in A_i and in [1, N] for every c in omega}, walking A_i at the smallest c.
inline std::uint64_t factor_count(std::span<const std::int64_t> factor, const BitSet1D& bits, std::span<const std::int64_t> omega,
                                  std::int64_t N, std::int64_t r)
{
    const std::int64_t base = omega.front() * r;
    const std::int64_t span_len = (omega.back() - omega.front()) * r;
    const std::int64_t hi = N - span_len;
    std::uint64_t count = 0;
    for (std::int64_t x : factor) {
        if (x > hi)
            break;
        const std::int64_t a = x - base;
        bool ok = true;
        for (std::size_t j = 1; j < omega.size() && ok; ++j) {
            const std::int64_t y = a + omega[j] * r;
            ok = y <= N && bits.test(y);
        }
        count += ok;
    }
    return count;
}

} // namespace detail

// Exhaustive count: every anchor x = a + r v_1 in [N]^d and every r in [1, N - 1].
template <class OnHit>
Count count_bruteforce(const Shape& shape, const DenseSubset& A, std::int64_t N, OnHit&& on_hit, const CountOptions& opt = {})
{
    require(A.dim() == shape.d, "subset dimension does not match the shape");
    require(N >= 1, "N must be positive");
    std::uint64_t cells = static_cast<std::uint64_t>(std::max<std::int64_t>(N - 1, 0));
    for (std::size_t i = 0; i < shape.d; ++i)
        cells = saturating_mul(cells, static_cast<std::uint64_t>(N));
    if (cells > opt.brute_budget)
        throw BudgetError("brute-force count needs " + std::to_string(cells) + " steps, above the budget of " + std::to_string(opt.brute_budget));
    const std::size_t d = shape.d;
    Count count = 0;
    Point x(d), a(d), y(d);
    for (std::int64_t r = 1; r < N; ++r) {
        std::fill(x.begin(), x.end(), 1);
        for (;;) {
            for (std::size_t i = 0; i < d; ++i)
                a[i] = x[i] - r * shape.vectors[0][i];
            bool hit = true;
            for (const auto& v : shape.vectors) {
                for (std::size_t i = 0; i < d; ++i)
                    y[i] = a[i] + r * v[i];
                if (!detail::in_box(y, N) || !A.contains(y)) {
                    hit = false;
                    break;
                }
            }
            if (hit) {
                ++count;
                on_hit(ConstellationHit{a, r});
            }
            std::size_t i = d;
            bool done = true;
            while (i > 0) {
                --i;
                if (++x[i] <= N) {
                    done = false;
                    break;
                }
                x[i] = 1;
            }
            if (done)
                break;
        }
    }
    return count;
}

inline Count count_bruteforce(const Shape& shape, const DenseSubset& A, std::int64_t N, const CountOptions& opt = {})
{
    return count_bruteforce(shape, A, N, [](const ConstellationHit&) {}, opt);
}

// Streams the hits at one r in lexicographic order of a, probing A at each anchor.
template <class OnHit>
void hits_at(const Shape& shape, const DenseSubset& A, std::int64_t N, std::int64_t r, OnHit&& on_hit)
{
    const std::size_t d = shape.d;
    Point a(d), y(d);
    A.for_each([&](std::span<const std::int64_t> x) {
        if (!detail::in_box(x, N))
            return;
        for (std::size_t i = 0; i < d; ++i)
            a[i] = x[i] - r * shape.vectors[0][i];
        for (std::size_t j = 1; j < shape.k(); ++j) {
            for (std::size_t i = 0; i < d; ++i)
                y[i] = a[i] + r * shape.vectors[j][i];
            if (!detail::in_box(y, N) || !A.contains(y))
                return;
        }
        on_hit(ConstellationHit{a, r});
    });
}

// Number of a with a + r v_j in A (inside [N]^d) for all j, at a single r >= 1.
inline Count count_at(const Shape& shape, const DenseSubset& A, std::int64_t N, std::int64_t r, CountStrategy strategy = CountStrategy::Auto)
{
    require(A.dim() == shape.d, "subset dimension does not match the shape");
    if (strategy == CountStrategy::ProductFactorized)
        require(A.is_product(), "product-factorized counting needs a product subset");
    const bool product = strategy == CountStrategy::ProductFactorized || (strategy == CountStrategy::Auto && A.is_product());
    if (product) {
        // a + r v_j in prod A_i for all j iff a_i + r c in A_i for all c in Omega_i.
        Count c = 1;
        for (std::size_t i = 0; i < shape.d && c != 0; ++i)
            c *= detail::factor_count(A.factors()[i], A.factor_bits(i), shape.projections[i], N, r);
        return c;
    }
    Count c = 0;
    hits_at(shape, A, N, r, [&](const ConstellationHit&) { ++c; });
    return c;
}

// Sum over r in [1, N - 1] of count_at, parallel over fixed blocks of r.
inline Count count_fast(const Shape& shape, const DenseSubset& A, std::int64_t N, const CountOptions& opt = {})
{
    require(A.dim() == shape.d, "subset dimension does not match the shape");
    if (N < 2)
        return 0;
    const auto plan = ChunkPlan::for_total(static_cast<std::uint64_t>(N - 1));
    const auto partial = run_chunks<Count>(plan.chunks(), opt.threads, [&](std::size_t c) {
        Count sum = 0;
        for (std::uint64_t ri = plan.begin(c); ri < plan.end(c); ++ri)
            sum += count_at(shape, A, N, static_cast<std::int64_t>(ri) + 1, opt.strategy);
        return sum;
    });
    Count total = 0;
    for (auto p : partial)
        total += p;
    return total;
}

// All hits, lexicographic in (r, a).
template <class OnHit>
void enumerate_hits(const Shape& shape, const DenseSubset& A, std::int64_t N, OnHit&& on_hit)
{
    require(A.dim() == shape.d, "subset dimension does not match the shape");
    for (std::int64_t r = 1; r < N; ++r)
        hits_at(shape, A, N, r, on_hit);
}

struct DilationResult {
    Count lhs = 0; // hits of s v with r' in [1, N - 1]
    Count rhs = 0; // hits of v with r = s r', r' in [1, N - 1]
    bool equal = false;
};

inline DilationResult dilation_check(const Shape& shape, std::int64_t s, const DenseSubset& A, std::int64_t N, const CountOptions& opt = {})
{
    require(s >= 1, "dilation factor must be positive");
    DilationResult res;
    res.lhs = count_fast(shape.dilated(s), A, N, opt);
    for (std::int64_t rp = 1; rp < N; ++rp)
        res.rhs += count_at(shape, A, N, s * rp, opt.strategy);
    res.equal = res.lhs == res.rhs;
    return res;
}

struct ScalingRow {
    std::int64_t N = 0;
    Count count = 0;
    double normalized = 0.0; // count log^{sum |Omega_i|} N / N^{d+1}
    double seconds = 0.0;
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    // max / min of the normalized counts; unset for an empty grid or a zero row.
    std::optional<double> flatness;
};

inline double normalized_count(Count count, std::int64_t N, std::size_t d, std::size_t omega_sum)
{
    const long double logN = std::log(static_cast<long double>(N));
    return static_cast<double>(static_cast<long double>(count) * std::pow(logN, static_cast<long double>(omega_sum)) /
                               std::pow(static_cast<long double>(N), static_cast<long double>(d + 1)));
}

// Counts on the full prime grid (P intersect [N])^d for each N of the grid.
inline ScalingReport scaling_report(const Shape& shape, std::span<const std::int64_t> grid, const CountOptions& opt = {})
{
    ScalingReport rep;
    if (grid.empty())
        return rep;
    for (auto N : grid)
        require(N >= 2, "scaling grid values must be at least 2");
    const auto top = *std::max_element(grid.begin(), grid.end());
    const PrimeTable table = sieve_primes(static_cast<std::uint64_t>(top), SieveOptions{.threads = opt.threads});
    for (auto N : grid) {
        const auto t0 = std::chrono::steady_clock::now();
        const DenseSubset A = prime_grid(table, static_cast<std::uint64_t>(N), shape.d);
        ScalingRow row;
        row.N = N;
        row.count = count_fast(shape, A, N, opt);
        row.normalized = normalized_count(row.count, N, shape.d, shape.omega_size_sum());
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rep.rows.push_back(row);
    }
    double lo = rep.rows.front().normalized, hi = lo;
    for (const auto& r : rep.rows) {
        lo = std::min(lo, r.normalized);
        hi = std::max(hi, r.normalized);
    }
    if (lo > 0.0)
        rep.flatness = hi / lo;
    return rep;
}

} // namespace constlab

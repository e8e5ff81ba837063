#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "constlab/constellations.hpp"
#include "constlab/sieve.hpp"
#include "constlab/wtrick.hpp"
#include "oracles.hpp"

using namespace constlab;

namespace {

Shape random_shape(std::mt19937_64& rng, std::size_t d, std::size_t max_k, std::int64_t lo, std::int64_t hi)
{
    const auto k = std::uniform_int_distribution<std::size_t>(1, max_k)(rng);
    std::uniform_int_distribution<std::int64_t> c(lo, hi);
    std::vector<Point> v;
    while (v.size() < k) {
        Point p(d);
        for (auto& x : p)
            x = c(rng);
        if (std::find(v.begin(), v.end(), p) == v.end())
            v.push_back(p);
    }
    return Shape::make(d, v);
}

DenseSubset primes_up_to(std::int64_t N, std::size_t d)
{
    const auto t = sieve_primes(static_cast<std::uint64_t>(std::max<std::int64_t>(N, 2)));
    return prime_grid(t, static_cast<std::uint64_t>(N), d);
}

} // namespace

TEST(Shape, Validation)
{
    EXPECT_THROW(Shape::make(1, {{0}, {0}}), ConfigError);
    EXPECT_THROW(Shape::make(2, {{0, 0}, {1}}), ConfigError);
    EXPECT_THROW(Shape::make(1, {}), ConfigError);
    const auto s = Shape::make(2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    EXPECT_EQ(s.omega_size_sum(), 4u);
    EXPECT_EQ(s.projections[0], (std::vector<std::int64_t>{0, 1}));
}

TEST(Constellations, ThreeTermProgressionInFirstPrimes)
{
    const auto shape = Shape::make(1, {{0}, {1}, {2}});
    const auto A = primes_up_to(10, 1);
    std::vector<ConstellationHit> hits;
    EXPECT_EQ(count_bruteforce(shape, A, 10, [&](const ConstellationHit& h) { hits.push_back(h); }), Count{1});
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].a, (Point{3}));
    EXPECT_EQ(hits[0].r, 2);
    EXPECT_EQ(count_fast(shape, A, 10), Count{1});
}

TEST(Constellations, SquaresInPrimeGrid)
{
    // r=1 at (2,2); r=2 at a in {3,5}^2; r=3 at (2,2) via {2,5}^2; r=4 at (3,3); r=5 at (2,2) via {2,7}^2.
    const auto shape = Shape::make(2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    const auto A = primes_up_to(7, 2);
    std::vector<std::pair<Point, std::int64_t>> hits;
    enumerate_hits(shape, A, 7, [&](const ConstellationHit& h) { hits.emplace_back(h.a, h.r); });
    const std::vector<std::pair<Point, std::int64_t>> expected{{{2, 2}, 1}, {{3, 3}, 2}, {{3, 5}, 2}, {{5, 3}, 2},
                                                               {{5, 5}, 2}, {{2, 2}, 3}, {{3, 3}, 4}, {{2, 2}, 5}};
    EXPECT_EQ(hits, expected);
    EXPECT_EQ(count_bruteforce(shape, A, 7), Count{8});
    EXPECT_EQ(count_fast(shape, A, 7), Count{8});
    EXPECT_EQ(oracle::count_constellations(shape, oracle::point_set(A), 7), 8u);
}

TEST(Constellations, EmptySubset)
{
    const auto shape = Shape::make(2, {{0, 0}, {1, 2}});
    const auto A = DenseSubset::from_points(2, 50, std::vector<std::int64_t>{});
    EXPECT_EQ(count_bruteforce(shape, A, 50), Count{0});
    EXPECT_EQ(count_fast(shape, A, 50), Count{0});
}

TEST(Constellations, FastMatchesBruteForce)
{
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t d = 1 + trial % 3;
        const std::int64_t N = std::uniform_int_distribution<std::int64_t>(2, d == 1 ? 500 : (d == 2 ? 60 : 15))(rng);
        const auto shape = random_shape(rng, d, 6, -2, 3);
        const double density = std::uniform_real_distribution<double>(0.2, 0.9)(rng);
        const auto A = oracle::random_subset(rng, d, N, density);
        const auto brute = count_bruteforce(shape, A, N);
        ASSERT_EQ(count_fast(shape, A, N, CountOptions{.threads = 3}), brute) << "trial " << trial;
        if (d <= 2 && N <= 40) {
            ASSERT_EQ(Count{oracle::count_constellations(shape, oracle::point_set(A), N)}, brute) << "trial " << trial;
        }
    }
}

TEST(Constellations, ProductMatchesHashProbe)
{
    const auto A = primes_up_to(300, 2);
    ASSERT_TRUE(A.is_product());
    std::vector<std::int64_t> flat;
    A.for_each([&](std::span<const std::int64_t> p) { flat.insert(flat.end(), p.begin(), p.end()); });
    const auto general = DenseSubset::from_points(2, 300, flat);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const auto shape = random_shape(rng, 2, 4, -1, 2);
        const auto product = count_fast(shape, A, 300, CountOptions{.strategy = CountStrategy::ProductFactorized});
        EXPECT_EQ(count_fast(shape, A, 300, CountOptions{.strategy = CountStrategy::HashProbe}), product);
        EXPECT_EQ(count_fast(shape, general, 300), product);
    }
}

TEST(Constellations, ProductFactorization)
{
    // For A = A_1 x A_2 the count is the r-sum of the per-coordinate pattern counts.
    std::mt19937_64 rng(13);
    const std::int64_t N = 80;
    std::vector<std::vector<std::int64_t>> factors(2);
    for (auto& f : factors)
        for (std::int64_t x = 1; x <= N; ++x)
            if (std::bernoulli_distribution(0.4)(rng))
                f.push_back(x);
    const auto A = DenseSubset::product(factors, N);
    const auto shape = Shape::make(2, {{0, 0}, {1, 0}, {0, 2}});
    Count expected = 0;
    for (std::int64_t r = 1; r < N; ++r) {
        Count per = 1;
        for (std::size_t i = 0; i < 2; ++i) {
            Count c = 0;
            for (std::int64_t a = 1; a <= N; ++a) {
                bool ok = true;
                for (auto w : shape.projections[i]) {
                    const auto y = a + w * r;
                    ok = ok && y >= 1 && y <= N && std::binary_search(factors[i].begin(), factors[i].end(), y);
                }
                c += ok;
            }
            per *= c;
        }
        expected += per;
    }
    EXPECT_EQ(count_fast(shape, A, N), expected);
    EXPECT_EQ(count_bruteforce(shape, A, N), expected);
}

TEST(Constellations, CountIncreasesWithN)
{
    const auto shape = Shape::make(1, {{0}, {1}, {2}});
    Count previous = 0;
    for (std::int64_t N : {100, 1000, 10000}) {
        const auto c = count_fast(shape, primes_up_to(N, 1), N);
        EXPECT_GT(c, previous);
        previous = c;
    }
}

TEST(Constellations, DilationIdentity)
{
    const auto A = primes_up_to(50, 1);
    const auto pair = Shape::make(1, {{0}, {1}});
    for (std::int64_t s : {1, 2, 3}) {
        const auto res = dilation_check(pair, s, A, 50);
        EXPECT_TRUE(res.equal);
        Count direct = 0;
        count_bruteforce(pair, A, 50, [&](const ConstellationHit& h) { direct += h.r % s == 0; });
        EXPECT_EQ(res.rhs, direct);
        EXPECT_EQ(res.lhs, count_bruteforce(pair.dilated(s), A, 50));
    }
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + trial % 2;
        const std::int64_t N = d == 1 ? 400 : 40;
        const auto A2 = oracle::random_subset(rng, d, N, 0.5);
        const auto shape = random_shape(rng, d, 4, -2, 2);
        EXPECT_TRUE(dilation_check(shape, 2 + trial % 2, A2, N).equal);
    }
}

TEST(Constellations, PermutationInvariance)
{
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + trial % 2;
        const std::int64_t N = d == 2 ? 40 : 12;
        const auto shape = random_shape(rng, d, 4, -1, 2);
        const auto A = oracle::random_subset(rng, d, N, 0.5);
        std::vector<std::size_t> perm(d);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::int64_t> flat;
        A.for_each([&](std::span<const std::int64_t> p) {
            for (std::size_t i = 0; i < d; ++i)
                flat.push_back(p[perm[i]]);
        });
        const auto B = DenseSubset::from_points(d, N, flat);
        EXPECT_EQ(count_fast(shape.permuted(perm), B, N), count_fast(shape, A, N));
    }
}

TEST(Constellations, SinglePointShapeClosedForm)
{
    const auto shape = Shape::make(1, {{0}});
    for (std::int64_t N : {10, 1000, 20000}) {
        const auto t = sieve_primes(static_cast<std::uint64_t>(N));
        const auto expected = Count{t.pi(static_cast<std::uint64_t>(N))} * Count(N - 1);
        EXPECT_EQ(count_fast(shape, prime_grid(t, static_cast<std::uint64_t>(N), 1), N), expected);
    }
}

TEST(Constellations, BruteForceBudget)
{
    const auto shape = Shape::make(2, {{0, 0}, {1, 1}});
    const auto A = primes_up_to(2000, 2);
    EXPECT_THROW(count_bruteforce(shape, A, 2000), BudgetError);
}

TEST(Scaling, NormalizationAndFlatness)
{
    const auto shape = Shape::make(1, {{0}, {1}, {2}});
    const std::vector<std::int64_t> grid{10'000, 30'000};
    const auto rep = scaling_report(shape, grid);
    ASSERT_EQ(rep.rows.size(), 2u);
    for (const auto& row : rep.rows) {
        const double expected = static_cast<double>(row.count) * std::pow(std::log(static_cast<double>(row.N)), 3) /
                                std::pow(static_cast<double>(row.N), 2);
        EXPECT_NEAR(row.normalized, expected, 1e-12 * expected);
    }
    ASSERT_TRUE(rep.flatness.has_value());
    EXPECT_GE(*rep.flatness, 1.0);
    EXPECT_TRUE(scaling_report(shape, std::vector<std::int64_t>{}).rows.empty());
}

TEST(Count, WideCountsFormat)
{
    EXPECT_EQ(to_string(Count{0}), "0");
    Count big = Count{1} << 100;
    EXPECT_EQ(to_string(big), "1267650600228229401496703205376");
}

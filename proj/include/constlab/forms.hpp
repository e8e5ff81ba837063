#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "weights.hpp"

namespace constlab {

// Integer linear forms phi_{i,j}: Z^m -> Z grouped by coordinate i; forms[i][j] is the
// coefficient row of phi_{i,j}. Forms are homogeneous; offsets go in extra variables.
struct LinearFormSystem {
    std::size_t d = 1;
    std::size_t m = 1;
    std::vector<std::vector<std::vector<std::int64_t>>> forms;

    std::size_t k(std::size_t i) const { return forms[i].size(); }
};

struct FormValidation {
    bool ok = true;
    std::string message;
    // One-based (i, j, j') of the first duplicated pair, when any.
    std::optional<std::array<std::size_t, 3>> duplicate;
    // No two of (a, r) -> a_i + phi_{i,j}(r) are linearly dependent.
    bool pairwise_independent = true;
};

inline constexpr std::int64_t kDefaultCoefficientBound = std::int64_t{1} << 20;

inline FormValidation validate(const LinearFormSystem& sys, std::int64_t coefficient_bound = kDefaultCoefficientBound)
{
    FormValidation v;
    auto fail = [&](std::string msg) {
        v.ok = false;
        if (v.message.empty())
            v.message = std::move(msg);
    };
    if (sys.d == 0)
        fail("d must be at least 1");
    if (sys.forms.size() != sys.d)
        fail("expected " + std::to_string(sys.d) + " coordinate families, got " + std::to_string(sys.forms.size()));
    for (std::size_t i = 0; i < sys.forms.size(); ++i)
        for (std::size_t j = 0; j < sys.forms[i].size(); ++j) {
            const auto& row = sys.forms[i][j];
            if (row.size() != sys.m)
                fail("form (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") has " + std::to_string(row.size()) +
                     " coefficients, expected m = " + std::to_string(sys.m));
            for (std::int64_t c : row)
                if (c > coefficient_bound || c < -coefficient_bound)
                    fail("coefficient " + std::to_string(c) + " in form (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                         ") exceeds the bound " + std::to_string(coefficient_bound));
        }
    if (!v.ok)
        return v;

    for (std::size_t i = 0; i < sys.d && !v.duplicate; ++i)
        for (std::size_t j = 0; j < sys.k(i) && !v.duplicate; ++j)
            for (std::size_t jj = j + 1; jj < sys.k(i); ++jj)
                if (sys.forms[i][j] == sys.forms[i][jj]) {
                    v.duplicate = std::array<std::size_t, 3>{i + 1, j + 1, jj + 1};
                    fail("forms (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") and (" + std::to_string(i + 1) + "," +
                         std::to_string(jj + 1) + ") are identical");
                    break;
                }

    // (a, r) -> a_i + phi(r) as a vector e_i (+) phi in Z^{d+m}; test proportionality pairwise.
    auto full = [&](std::size_t i, std::size_t j) {
        std::vector<std::int64_t> vec(sys.d + sys.m, 0);
        vec[i] = 1;
        std::copy(sys.forms[i][j].begin(), sys.forms[i][j].end(), vec.begin() + static_cast<std::ptrdiff_t>(sys.d));
        return vec;
    };
    std::vector<std::vector<std::int64_t>> all;
    for (std::size_t i = 0; i < sys.d; ++i)
        for (std::size_t j = 0; j < sys.k(i); ++j)
            all.push_back(full(i, j));
    for (std::size_t x = 0; x < all.size() && v.pairwise_independent; ++x)
        for (std::size_t y = x + 1; y < all.size(); ++y) {
            bool dependent = true;
            for (std::size_t s = 0; s < all[x].size() && dependent; ++s)
                for (std::size_t t = s + 1; t < all[x].size(); ++t)
                    if (static_cast<__int128>(all[x][s]) * all[y][t] != static_cast<__int128>(all[x][t]) * all[y][s]) {
                        dependent = false;
                        break;
                    }
            if (dependent) {
                v.pairwise_independent = false;
                break;
            }
        }
    return v;
}

// Box lengths L_1..L_m for the r-average and the a-range [1, N'].
struct AverageRunConfig {
    std::vector<std::int64_t> box_lengths;
    std::int64_t NPrime = 1;
    double kappa = 1.0;
    double lambda = 1.0;

    // L_l = floor(kappa N') for every l, checked against lambda kappa N' <= L <= kappa N'.
    static AverageRunConfig from_window(std::size_t m, std::int64_t NPrime, double kappa, double lambda)
    {
        require(NPrime >= 1, "N' must be positive");
        require(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0, 1]");
        require(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0, 1]");
        AverageRunConfig cfg;
        cfg.NPrime = NPrime;
        cfg.kappa = kappa;
        cfg.lambda = lambda;
        const auto L = static_cast<std::int64_t>(std::floor(kappa * static_cast<double>(NPrime)));
        cfg.box_lengths.assign(m, L);
        cfg.check_window();
        return cfg;
    }

    static AverageRunConfig with_lengths(std::vector<std::int64_t> lengths, std::int64_t NPrime)
    {
        require(NPrime >= 1, "N' must be positive");
        AverageRunConfig cfg;
        cfg.NPrime = NPrime;
        cfg.box_lengths = std::move(lengths);
        for (auto L : cfg.box_lengths)
            require(L >= 1, "box lengths must be positive");
        if (!cfg.box_lengths.empty()) {
            const auto [lo, hi] = std::minmax_element(cfg.box_lengths.begin(), cfg.box_lengths.end());
            cfg.kappa = static_cast<double>(*hi) / static_cast<double>(NPrime);
            cfg.lambda = static_cast<double>(*lo) / static_cast<double>(*hi);
        }
        return cfg;
    }

    void check_window() const
    {
        const double top = kappa * static_cast<double>(NPrime);
        const double bottom = lambda * top;
        for (auto L : box_lengths) {
            if (L < 1 || static_cast<double>(L) < bottom - 1e-9 || static_cast<double>(L) > top + 1e-9)
                throw ConfigError("box length " + std::to_string(L) + " outside [lambda kappa N', kappa N'] = [" + std::to_string(bottom) +
                                  ", " + std::to_string(top) + "]");
        }
    }

    std::uint64_t r_count() const
    {
        std::uint64_t n = 1;
        for (auto L : box_lengths)
            n = saturating_mul(n, static_cast<std::uint64_t>(L));
        return n;
    }
};

struct AverageReport {
    double value = 0.0;
    std::uint64_t term_count = 0;
    double deviation = 0.0;
    double elapsed = 0.0;
};

struct EvalOptions {
    unsigned threads = 1;
    std::uint64_t naive_budget = 1'000'000'000;
};

namespace detail {

inline void check_inputs(const LinearFormSystem& sys, std::span<const WeightField> weights)
{
    const auto v = validate(sys);
    if (!v.ok)
        throw ConfigError("invalid linear form system: " + v.message);
    require(weights.size() == sys.d, "expected " + std::to_string(sys.d) + " weight fields, got " + std::to_string(weights.size()));
}

inline std::int64_t apply_form(std::span<const std::int64_t> row, std::span<const std::int64_t> r)
{
    std::int64_t s = 0;
    for (std::size_t l = 0; l < row.size(); ++l)
        s += row[l] * r[l];
    return s;
}

// Decodes a linear index into r in prod [1, L_l], last variable fastest.
inline void decode_r(std::uint64_t index, std::span<const std::int64_t> lengths, std::vector<std::int64_t>& r)
{
    for (std::size_t l = lengths.size(); l > 0; --l) {
        const auto L = static_cast<std::uint64_t>(lengths[l - 1]);
        r[l - 1] = static_cast<std::int64_t>(index % L) + 1;
        index /= L;
    }
}

inline bool advance_r(std::span<const std::int64_t> lengths, std::vector<std::int64_t>& r)
{
    for (std::size_t l = lengths.size(); l > 0; --l) {
        if (++r[l - 1] <= lengths[l - 1])
            return true;
        r[l - 1] = 1;
    }
    return false;
}

// E_{a in [1, N']} prod_j nu(a + s_j), walking the support of nu at the first shift.
inline double coordinate_average(const WeightField& nu, std::span<const std::int64_t> shifts, std::int64_t NPrime)
{
    if (shifts.empty() || nu.unbounded())
        return 1.0;
    KahanSum sum;
    for (std::int64_t x : nu.support()) {
        const std::int64_t a = x - shifts[0];
        if (a < 1 || a > NPrime)
            continue;
        double prod = nu(x);
        for (std::size_t j = 1; j < shifts.size() && prod != 0.0; ++j)
            prod *= nu(a + shifts[j]);
        if (prod != 0.0)
            sum.add(prod);
    }
    return sum.value() / static_cast<double>(NPrime);
}

struct VectorHash {
    std::size_t operator()(const std::vector<std::int64_t>& v) const
    {
        std::size_t h = 1469598103934665603ull;
        for (auto x : v)
            h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
        return h;
    }
};

} // namespace detail

// The a-average of prod_i prod_j nu_i(a_i + phi_{i,j}(r)) at one fixed r, by direct loops
// over a in [N']^d.
inline double evaluate_naive_at(const LinearFormSystem& sys, std::span<const WeightField> weights, std::int64_t NPrime,
                                std::span<const std::int64_t> r)
{
    std::vector<std::vector<std::int64_t>> shift(sys.d);
    for (std::size_t i = 0; i < sys.d; ++i)
        for (const auto& row : sys.forms[i])
            shift[i].push_back(detail::apply_form(row, r));
    std::vector<std::int64_t> a(sys.d, 1);
    KahanSum sum;
    for (;;) {
        double prod = 1.0;
        for (std::size_t i = 0; i < sys.d; ++i)
            for (std::int64_t s : shift[i])
                prod *= weights[i](a[i] + s);
        sum.add(prod);
        std::size_t i = sys.d;
        bool done = true;
        while (i > 0) {
            --i;
            if (++a[i] <= NPrime) {
                done = false;
                break;
            }
            a[i] = 1;
        }
        if (done)
            break;
    }
    double cells = 1.0;
    for (std::size_t i = 0; i < sys.d; ++i)
        cells *= static_cast<double>(NPrime);
    return sum.value() / cells;
}

// Same quantity, factorized over coordinates.
inline double evaluate_fast_at(const LinearFormSystem& sys, std::span<const WeightField> weights, std::int64_t NPrime,
                               std::span<const std::int64_t> r)
{
    double prod = 1.0;
    std::vector<std::int64_t> shifts;
    for (std::size_t i = 0; i < sys.d && prod != 0.0; ++i) {
        shifts.clear();
        for (const auto& row : sys.forms[i])
            shifts.push_back(detail::apply_form(row, r));
        prod *= detail::coordinate_average(weights[i], shifts, NPrime);
    }
    return prod;
}

// Exact average over a in [N']^d and r in prod [L_l], by direct enumeration.
inline AverageReport evaluate_naive(const LinearFormSystem& sys, std::span<const WeightField> weights, const AverageRunConfig& cfg,
                                    const EvalOptions& opt = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    detail::check_inputs(sys, weights);
    require(cfg.box_lengths.size() == sys.m, "box length count does not match m");
    std::uint64_t terms = cfg.r_count();
    for (std::size_t i = 0; i < sys.d; ++i)
        terms = saturating_mul(terms, static_cast<std::uint64_t>(cfg.NPrime));
    if (terms > opt.naive_budget)
        throw BudgetError("naive evaluation needs " + std::to_string(terms) + " terms, above the budget of " +
                          std::to_string(opt.naive_budget) + "; use the fast evaluator");
    KahanSum total;
    std::vector<std::int64_t> r(sys.m, 1);
    do {
        total.add(evaluate_naive_at(sys, weights, cfg.NPrime, r));
    } while (detail::advance_r(cfg.box_lengths, r));
    AverageReport rep;
    rep.value = total.value() / static_cast<double>(cfg.r_count());
    rep.term_count = terms;
    rep.deviation = std::fabs(rep.value - 1.0);
    rep.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// Factorized evaluation: for each r the a-average splits into a product of one-dimensional
// correlations. Parallel over fixed blocks of r so the reduction order never changes.
inline AverageReport evaluate_fast(const LinearFormSystem& sys, std::span<const WeightField> weights, const AverageRunConfig& cfg,
                                   const EvalOptions& opt = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    detail::check_inputs(sys, weights);
    require(cfg.box_lengths.size() == sys.m, "box length count does not match m");
    const std::uint64_t rcount = cfg.r_count();
    require(rcount < UINT64_MAX, "r-box too large");
    const auto plan = ChunkPlan::for_total(rcount);
    // Memoize per-coordinate factors when forms can repeat their shift tuples across r.
    const bool memo = sys.m >= 2;

    auto partial = run_chunks<KahanSum>(plan.chunks(), opt.threads, [&](std::size_t c) {
        KahanSum sum;
        std::vector<std::int64_t> r(sys.m, 1);
        if (sys.m > 0)
            detail::decode_r(plan.begin(c), cfg.box_lengths, r);
        std::vector<std::unordered_map<std::vector<std::int64_t>, double, detail::VectorHash>> cache(memo ? sys.d : 0);
        std::vector<std::int64_t> shifts;
        for (std::uint64_t idx = plan.begin(c); idx < plan.end(c); ++idx) {
            double prod = 1.0;
            for (std::size_t i = 0; i < sys.d && prod != 0.0; ++i) {
                shifts.clear();
                for (const auto& row : sys.forms[i])
                    shifts.push_back(detail::apply_form(row, r));
                if (memo) {
                    auto it = cache[i].find(shifts);
                    if (it == cache[i].end())
                        it = cache[i].emplace(shifts, detail::coordinate_average(weights[i], shifts, cfg.NPrime)).first;
                    prod *= it->second;
                } else {
                    prod *= detail::coordinate_average(weights[i], shifts, cfg.NPrime);
                }
            }
            sum.add(prod);
            if (sys.m > 0)
                detail::advance_r(cfg.box_lengths, r);
        }
        return sum;
    });
    KahanSum total;
    for (const auto& p : partial)
        total.add(p);
    AverageReport rep;
    rep.value = total.value() / static_cast<double>(rcount);
    rep.term_count = rcount;
    for (std::size_t i = 0; i < sys.d; ++i)
        rep.term_count = saturating_mul(rep.term_count, static_cast<std::uint64_t>(cfg.NPrime));
    rep.deviation = std::fabs(rep.value - 1.0);
    rep.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

struct ScanRow {
    double kappa = 0.0;
    std::vector<std::int64_t> box_lengths;
    AverageReport report;
    bool within = false; // |value - 1| <= eps
};

inline std::vector<ScanRow> lf_condition_scan(const LinearFormSystem& sys, std::span<const WeightField> weights, std::int64_t NPrime,
                                              std::span<const double> kappa_grid, double lambda, double eps, const EvalOptions& opt = {})
{
    std::vector<ScanRow> rows;
    for (double kappa : kappa_grid) {
        const auto cfg = AverageRunConfig::from_window(sys.m, NPrime, kappa, lambda);
        ScanRow row;
        row.kappa = kappa;
        row.box_lengths = cfg.box_lengths;
        row.report = evaluate_fast(sys, weights, cfg, opt);
        row.within = row.report.deviation <= eps;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace constlab

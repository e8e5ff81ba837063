#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"

namespace constlab {

// Functions and weights on [H]^{B'} for every subset B' of a small index set B.
// Subsets are bitmasks over the elements 0..|B|-1 of B. The array for B' lists values in
// mixed radix H over the elements of B' in ascending order, first element fastest; h is
// zero-based inside arrays.
struct BoxInstance {
    std::size_t size = 1;
    std::int64_t H = 1;
    std::vector<std::vector<std::int64_t>> labels; // optional integer attributes b_i per element
    std::vector<std::vector<double>> nu;
    std::vector<std::vector<double>> f;

    std::uint32_t full_mask() const { return (std::uint32_t{1} << size) - 1; }
    std::size_t cells(std::uint32_t mask) const
    {
        std::size_t n = 1;
        for (int i = 0; i < std::popcount(mask); ++i)
            n *= static_cast<std::size_t>(H);
        return n;
    }
};

inline constexpr std::size_t kMaxBoxSize = 4;
inline constexpr std::int64_t kMaxBoxSide = 16;

inline void validate(const BoxInstance& inst, bool require_dominance = true)
{
    require(inst.size >= 1 && inst.size <= kMaxBoxSize, "|B| must lie in [1, " + std::to_string(kMaxBoxSize) + "]");
    require(inst.H >= 1 && inst.H <= kMaxBoxSide, "H must lie in [1, " + std::to_string(kMaxBoxSide) + "]");
    const std::size_t subsets = std::size_t{1} << inst.size;
    require(inst.nu.size() == subsets, "expected " + std::to_string(subsets) + " weight arrays");
    require(inst.f.size() == subsets, "expected " + std::to_string(subsets) + " function arrays");
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        require(inst.nu[mask].size() == inst.cells(mask), "weight array for subset " + std::to_string(mask) + " has the wrong size");
        require(inst.f[mask].size() == inst.cells(mask), "function array for subset " + std::to_string(mask) + " has the wrong size");
        for (double v : inst.nu[mask])
            require(v >= 0.0, "weights must be nonnegative (subset " + std::to_string(mask) + ")");
        if (require_dominance && mask != inst.full_mask())
            for (std::size_t c = 0; c < inst.cells(mask); ++c)
                if (std::fabs(inst.f[mask][c]) > inst.nu[mask][c])
                    throw ConfigError("dominance |f| <= nu violated for subset " + std::to_string(mask) + " at cell " + std::to_string(c));
    }
}

// One factor of the cube product: array `values` read at the h-copies listed per element.
struct CubeFactor {
    std::uint32_t subset = 0; // B'' (for the f term, B' itself)
    std::uint32_t omega = 0;  // bit t selects copy h^(1) for the t-th element of B''
    bool is_function = false;
};

// Every factor of the box-norm integrand over B', in the order the product is formed.
inline std::vector<CubeFactor> cube_factors(std::uint32_t bprime)
{
    std::vector<CubeFactor> out;
    const int n = std::popcount(bprime);
    for (std::uint32_t w = 0; w < (std::uint32_t{1} << n); ++w)
        out.push_back({bprime, w, true});
    // Proper submasks of bprime, including the empty set.
    for (std::uint32_t sub = bprime;; sub = (sub - 1) & bprime) {
        if (sub != bprime) {
            const int k = std::popcount(sub);
            for (std::uint32_t w = 0; w < (std::uint32_t{1} << k); ++w)
                out.push_back({sub, w, false});
        }
        if (sub == 0)
            break;
    }
    return out;
}

struct IndexMapRow {
    std::string term;                               // "f" or "nu[B'']"
    std::vector<std::pair<std::size_t, int>> reads; // (element b, copy 0/1)
};

// Human-readable table of which h-copy feeds each coordinate of each factor.
inline std::vector<IndexMapRow> index_map(std::uint32_t bprime)
{
    std::vector<IndexMapRow> rows;
    for (const auto& fac : cube_factors(bprime)) {
        IndexMapRow row;
        row.term = fac.is_function ? "f" : "nu[" + std::to_string(fac.subset) + "]";
        int t = 0;
        for (std::size_t b = 0; b < 32; ++b)
            if (fac.subset >> b & 1u)
                row.reads.emplace_back(b, static_cast<int>((fac.omega >> t++) & 1u));
        rows.push_back(std::move(row));
    }
    return rows;
}

struct BoxNormOptions {
    std::uint64_t budget = 50'000'000; // cap on H^{2|B'|}
    double negative_tolerance = 1e-9;
};

// The weighted box norm of g over the subset bprime:
// ( E_{h0,h1 in [H]^{B'}} prod_w g(h^(w)) prod_{B'' < B'} prod_w nu_{B''}(h^(w)) )^{1/2^{|B'|}}.
inline double box_norm(const BoxInstance& inst, std::uint32_t bprime, std::span<const double> g, const BoxNormOptions& opt = {})
{
    require((bprime & ~inst.full_mask()) == 0, "B' is not a subset of B");
    require(g.size() == inst.cells(bprime), "function array has the wrong size for B'");
    const int n = std::popcount(bprime);
    if (n == 0)
        return std::fabs(g[0]);
    std::uint64_t combos = 1;
    for (int i = 0; i < 2 * n; ++i)
        combos = saturating_mul(combos, static_cast<std::uint64_t>(inst.H));
    if (combos > opt.budget)
        throw BudgetError("box norm needs " + std::to_string(combos) + " evaluations, above the budget of " + std::to_string(opt.budget));

    // Position of each element of B within B' (digit slot), or -1.
    std::vector<int> slot(inst.size, -1);
    {
        int t = 0;
        for (std::size_t b = 0; b < inst.size; ++b)
            if (bprime >> b & 1u)
                slot[b] = t++;
    }
    struct Plan {
        std::span<const double> values;
        std::vector<std::pair<int, std::int64_t>> reads; // (digit index into h0/h1 vector, stride)
    };
    std::vector<Plan> plans;
    for (const auto& fac : cube_factors(bprime)) {
        Plan p;
        p.values = fac.is_function ? g : std::span<const double>(inst.nu[fac.subset]);
        std::int64_t stride = 1;
        int t = 0;
        for (std::size_t b = 0; b < inst.size; ++b)
            if (fac.subset >> b & 1u) {
                const int copy = static_cast<int>((fac.omega >> t++) & 1u);
                p.reads.emplace_back(2 * slot[b] + copy, stride);
                stride *= inst.H;
            }
        plans.push_back(std::move(p));
    }

    std::vector<std::int64_t> digits(static_cast<std::size_t>(2 * n), 0);
    KahanSum sum;
    for (std::uint64_t it = 0; it < combos; ++it) {
        double prod = 1.0;
        for (const auto& p : plans) {
            std::int64_t idx = 0;
            for (const auto& [digit, stride] : p.reads)
                idx += digits[static_cast<std::size_t>(digit)] * stride;
            prod *= p.values[static_cast<std::size_t>(idx)];
            if (prod == 0.0)
                break;
        }
        sum.add(prod);
        for (std::size_t k = 0; k < digits.size(); ++k) {
            if (++digits[k] < inst.H)
                break;
            digits[k] = 0;
        }
    }
    double inner = sum.value() / static_cast<double>(combos);
    if (inner < -opt.negative_tolerance)
        throw IntegrityError("box norm inner average " + std::to_string(inner) + " is negative beyond tolerance");
    inner = std::max(inner, 0.0);
    return std::pow(inner, 1.0 / static_cast<double>(std::uint64_t{1} << n));
}

inline double box_norm_of_f(const BoxInstance& inst, std::uint32_t bprime, const BoxNormOptions& opt = {})
{
    return box_norm(inst, bprime, inst.f[bprime], opt);
}

inline double box_norm_of_nu(const BoxInstance& inst, std::uint32_t bprime, const BoxNormOptions& opt = {})
{
    return box_norm(inst, bprime, inst.nu[bprime], opt);
}

struct VonNeumannResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    double slack() const { return rhs - lhs; }
};

// lhs = |E_{h in [H]^B} prod_{B' subset B} f_{B'}(h_{B'})|,
// rhs = ||f_B|| prod_{B' < B} ||nu_{B'}||^{1/2^{|B|-|B'|}}.
inline VonNeumannResult von_neumann_check(const BoxInstance& inst, const BoxNormOptions& opt = {})
{
    validate(inst, true);
    const std::uint32_t full = inst.full_mask();
    std::uint64_t cells = inst.cells(full);
    std::vector<std::int64_t> h(inst.size, 0);
    KahanSum sum;
    for (std::uint64_t it = 0; it < cells; ++it) {
        double prod = 1.0;
        for (std::uint32_t mask = 0; mask <= full && prod != 0.0; ++mask) {
            std::int64_t idx = 0, stride = 1;
            for (std::size_t b = 0; b < inst.size; ++b)
                if (mask >> b & 1u) {
                    idx += h[b] * stride;
                    stride *= inst.H;
                }
            prod *= inst.f[mask][static_cast<std::size_t>(idx)];
        }
        sum.add(prod);
        for (std::size_t b = 0; b < inst.size; ++b) {
            if (++h[b] < inst.H)
                break;
            h[b] = 0;
        }
    }
    VonNeumannResult res;
    res.lhs = std::fabs(sum.value() / static_cast<double>(cells));
    res.rhs = box_norm_of_f(inst, full, opt);
    for (std::uint32_t mask = 0; mask < full; ++mask) {
        const int gap = static_cast<int>(inst.size) - std::popcount(mask);
        res.rhs *= std::pow(box_norm_of_nu(inst, mask, opt), 1.0 / static_cast<double>(std::uint64_t{1} << gap));
    }
    res.holds = res.lhs <= res.rhs + 1e-9;
    return res;
}

// Random dominated instance: |B| in [1, max_size], H in [1, max_side], weights drawn from
// {0, 0.5, 1, 2}, and f_{B'} = +-nu_{B'} with independent signs.
inline BoxInstance random_box_instance(std::mt19937_64& rng, std::size_t max_size = 3, std::int64_t max_side = 6)
{
    static constexpr double kLevels[] = {0.0, 0.5, 1.0, 2.0};
    BoxInstance inst;
    inst.size = std::uniform_int_distribution<std::size_t>(1, max_size)(rng);
    inst.H = std::uniform_int_distribution<std::int64_t>(1, max_side)(rng);
    std::uniform_int_distribution<int> level(0, 3), coin(0, 1);
    const std::size_t subsets = std::size_t{1} << inst.size;
    inst.nu.resize(subsets);
    inst.f.resize(subsets);
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        for (std::size_t c = 0; c < inst.cells(mask); ++c) {
            const double v = kLevels[level(rng)];
            inst.nu[mask].push_back(v);
            inst.f[mask].push_back(coin(rng) ? v : -v);
        }
    }
    return inst;
}

struct FuzzSummary {
    std::size_t count = 0;
    std::size_t passed = 0;
    double min_slack = 0.0;
    std::optional<BoxInstance> counterexample;
    std::optional<VonNeumannResult> counterexample_result;
};

inline FuzzSummary von_neumann_fuzz(std::size_t count, std::uint64_t seed, std::size_t max_size = 3, std::int64_t max_side = 6)
{
    std::mt19937_64 rng(seed);
    FuzzSummary s;
    s.count = count;
    bool first = true;
    for (std::size_t n = 0; n < count; ++n) {
        BoxInstance inst = random_box_instance(rng, max_size, max_side);
        const auto res = von_neumann_check(inst);
        if (first || res.slack() < s.min_slack)
            s.min_slack = res.slack();
        first = false;
        if (res.holds) {
            ++s.passed;
        } else if (!s.counterexample) {
            s.counterexample = std::move(inst);
            s.counterexample_result = res;
        }
    }
    return s;
}

} // namespace constlab

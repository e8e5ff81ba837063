#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "constlab/boxnorm.hpp"
#include "constlab/constellations.hpp"
#include "constlab/forms.hpp"
#include "constlab/measures.hpp"
#include "constlab/parallel.hpp"
#include "constlab/sieve.hpp"
#include "constlab/wtrick.hpp"
#include "oracles.hpp"

using namespace constlab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

unsigned g_threads = 1;

std::string fmt(double v, int precision = 6)
{
    std::ostringstream ss;
    ss.precision(precision);
    ss << v;
    return ss.str();
}

Shape random_shape(std::mt19937_64& rng, std::size_t d, std::size_t k, std::int64_t lo, std::int64_t hi)
{
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

DenseSubset random_product(std::mt19937_64& rng, std::size_t d, std::int64_t N, double density)
{
    std::vector<std::vector<std::int64_t>> factors(d);
    std::bernoulli_distribution keep(density);
    for (auto& f : factors)
        for (std::int64_t x = 1; x <= N; ++x)
            if (keep(rng))
                f.push_back(x);
    return DenseSubset::product(factors, N);
}

LinearFormSystem random_system(std::mt19937_64& rng)
{
    LinearFormSystem sys;
    sys.d = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    sys.m = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    std::uniform_int_distribution<std::int64_t> c(-3, 3);
    sys.forms.resize(sys.d);
    for (auto& fam : sys.forms) {
        const auto k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
        while (fam.size() < k) {
            std::vector<std::int64_t> row(sys.m);
            for (auto& x : row)
                x = c(rng);
            if (std::find(fam.begin(), fam.end(), row) == fam.end())
                fam.push_back(row);
        }
    }
    return sys;
}

Outcome sieve_exactness()
{
    const auto big = sieve_primes(1'000'000, SieveOptions{.threads = g_threads});
    const auto small = sieve_primes(100'000, SieveOptions{.threads = g_threads});
    std::uint64_t mismatches = 0;
    for (std::int64_t n = 1; n <= 100'000; ++n)
        mismatches += small.is_prime(n) != oracle::trial_division(n);
    for (std::int64_t n = 1; n <= 100'000; ++n)
        mismatches += big.is_prime(n) != small.is_prime(n);
    return {big.count() == 78498 && mismatches == 0,
            "pi(10^6) = " + std::to_string(big.count()) + ", trial-division mismatches up to 10^5: " + std::to_string(mismatches)};
}

Outcome counting_oracle()
{
    std::mt19937_64 rng(20240601);
    int instances = 0, agree = 0, negative = 0, k6 = 0;
    int per_dim[4] = {0, 0, 0, 0};
    for (int trial = 0; trial < 240; ++trial) {
        const std::size_t d = 1 + trial % 3;
        const std::int64_t N = std::uniform_int_distribution<std::int64_t>(2, d == 1 ? 500 : (d == 2 ? 80 : 20))(rng);
        const std::size_t k = 1 + trial % 6;
        const auto shape = random_shape(rng, d, k, -3, 3);
        const double density = std::uniform_real_distribution<double>(0.3, 0.95)(rng);
        const auto A = trial % 4 == 0 ? random_product(rng, d, N, density) : oracle::random_subset(rng, d, N, density);
        const auto brute = count_bruteforce(shape, A, N);
        const auto fast = count_fast(shape, A, N, CountOptions{.threads = g_threads});
        ++instances;
        ++per_dim[d];
        agree += brute == fast;
        bool neg = false;
        for (const auto& v : shape.vectors)
            for (auto x : v)
                neg = neg || x < 0;
        negative += neg;
        k6 += k == 6;
    }
    const bool coverage = per_dim[1] > 0 && per_dim[2] > 0 && per_dim[3] > 0 && negative > 0 && k6 > 0;
    return {instances >= 200 && agree == instances && coverage,
            std::to_string(agree) + "/" + std::to_string(instances) + " exact agreements (d=1/2/3: " + std::to_string(per_dim[1]) + "/" +
                std::to_string(per_dim[2]) + "/" + std::to_string(per_dim[3]) + ", with negative coordinates: " + std::to_string(negative) +
                ", k=6: " + std::to_string(k6) + ")"};
}

Outcome dilation_identity()
{
    std::mt19937_64 rng(77);
    int instances = 0, equal = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t d = 1 + trial % 2;
        const std::int64_t N = std::uniform_int_distribution<std::int64_t>(10, d == 1 ? 400 : 50)(rng);
        const auto shape = random_shape(rng, d, std::uniform_int_distribution<std::size_t>(2, 4)(rng), -2, 2);
        const auto A = oracle::random_subset(rng, d, N, 0.6);
        const std::int64_t s = std::uniform_int_distribution<std::int64_t>(1, 3)(rng);
        const auto res = dilation_check(shape, s, A, N, CountOptions{.threads = g_threads});
        // Independent right-hand side: brute-force hits of the base shape with s | r.
        Count rhs = 0;
        count_bruteforce(shape, A, N, [&](const ConstellationHit& h) { rhs += h.r % s == 0; });
        ++instances;
        equal += res.equal && res.rhs == rhs && res.lhs == count_bruteforce(shape.dilated(s), A, N);
    }
    return {instances >= 100 && equal == instances, std::to_string(equal) + "/" + std::to_string(instances) + " instances exact"};
}

Outcome forms_factorization()
{
    std::mt19937_64 rng(4242);
    int instances = 0, agree = 0;
    double worst = 0.0;
    while (instances < 220) {
        const auto sys = random_system(rng);
        const std::int64_t NPrime = std::uniform_int_distribution<std::int64_t>(5, sys.d == 1 ? 300 : (sys.d == 2 ? 60 : 15))(rng);
        std::vector<WeightField> w;
        for (std::size_t i = 0; i < sys.d; ++i)
            w.push_back(oracle::random_field(rng, NPrime, 0.6, std::uniform_real_distribution<double>(0.5, 3.0)(rng)));
        std::vector<std::int64_t> L(sys.m);
        for (auto& x : L)
            x = std::uniform_int_distribution<std::int64_t>(1, sys.m == 1 ? 10 : 5)(rng);
        const auto cfg = AverageRunConfig::with_lengths(L, NPrime);
        const double naive = evaluate_naive(sys, w, cfg).value;
        const double fast = evaluate_fast(sys, w, cfg, EvalOptions{.threads = g_threads}).value;
        const double rel = std::fabs(naive - fast) / std::max(std::fabs(naive), 1e-300);
        const double err = naive == 0.0 ? std::fabs(fast) : rel;
        worst = std::max(worst, err);
        agree += err <= 1e-9;
        ++instances;
    }
    return {agree == instances, std::to_string(agree) + "/" + std::to_string(instances) + " within 1e-9 relative, worst " + fmt(worst, 3)};
}

Outcome identity_normalization()
{
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto sys = random_system(rng);
        std::vector<WeightField> ones(sys.d, WeightField::unbounded_identity(40));
        const auto cfg = AverageRunConfig::with_lengths(std::vector<std::int64_t>(sys.m, 4), 40);
        worst = std::max(worst, std::fabs(evaluate_fast(sys, ones, cfg).value - 1.0));
        worst = std::max(worst, std::fabs(evaluate_naive(sys, ones, cfg).value - 1.0));
    }
    for (std::size_t size = 1; size <= 3; ++size) {
        BoxInstance inst;
        inst.size = size;
        inst.H = 3;
        for (std::uint32_t mask = 0; mask < (1u << size); ++mask) {
            inst.nu.emplace_back(inst.cells(mask), 1.0);
            inst.f.emplace_back(inst.cells(mask), 1.0);
        }
        for (std::uint32_t mask = 0; mask <= inst.full_mask(); ++mask) {
            worst = std::max(worst, std::fabs(box_norm_of_f(inst, mask) - 1.0));
            worst = std::max(worst, std::fabs(box_norm_of_nu(inst, mask) - 1.0));
        }
    }
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 1 + trial % 3;
        std::vector<std::vector<std::int64_t>> omega(d);
        for (auto& o : omega)
            o = {0, trial % 4, -(trial % 3)};
        const auto spec = CylinderSpec::make(omega);
        std::vector<WeightField> ones(d, WeightField::unbounded_identity(12));
        const auto A = oracle::random_subset(rng, d, 12, 0.5);
        worst = std::max(worst, std::fabs(total_mass(spec, A, ones, 12, 3).value - 1.0));
    }
    return {worst <= 1e-12, "max |value - 1| = " + fmt(worst, 3)};
}

Outcome von_neumann()
{
    const auto s = von_neumann_fuzz(500, 0, 3, 6);
    bool oracle_ok = true;
    std::mt19937_64 rng(0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = random_box_instance(rng, 3, 4);
        const double rhs_f = oracle::box_norm(inst, inst.full_mask(), inst.f[inst.full_mask()]);
        oracle_ok = oracle_ok && std::fabs(rhs_f - box_norm_of_f(inst, inst.full_mask())) <= 1e-10;
    }
    return {s.passed == s.count && s.count == 500 && s.min_slack >= -1e-9 && oracle_ok,
            std::to_string(s.passed) + "/" + std::to_string(s.count) + " hold, min slack " + fmt(s.min_slack, 3) +
                (oracle_ok ? ", norms agree with nested-loop oracle" : ", ORACLE MISMATCH")};
}

Outcome forms_trend()
{
    const LinearFormSystem sys{1, 1, {{{0}, {1}}}};
    const std::vector<std::uint64_t> grid{1'000'000, 10'000'000, 100'000'000};
    std::vector<double> dev;
    std::string detail;
    for (auto N : grid) {
        const auto table = sieve_primes(N + 210, SieveOptions{.threads = g_threads});
        const auto sel = select_residues(table, prime_grid(table, N, 1), 7, Ratio::make(1, 2), N);
        const auto pw = build_weights(table, sel.context);
        const std::vector<WeightField> w{pw[0].field};
        const auto cfg = AverageRunConfig::from_window(1, static_cast<std::int64_t>(sel.context.NPrime), 0.01, 0.5);
        const auto rep = evaluate_fast(sys, w, cfg, EvalOptions{.threads = g_threads});
        dev.push_back(rep.deviation);
        detail += "N=" + fmt(static_cast<double>(N), 3) + " b=" + std::to_string(sel.context.residues[0]) + " dev=" + fmt(rep.deviation, 4) + "; ";
    }
    int non_increasing = 0;
    for (std::size_t i = 1; i < dev.size(); ++i)
        non_increasing += dev[i] <= dev[i - 1];
    detail += "non-increasing steps " + std::to_string(non_increasing) + "/" + std::to_string(dev.size() - 1);
    return {dev.back() <= 0.25 && non_increasing == static_cast<int>(dev.size()) - 1, detail};
}

Outcome compatibility()
{
    const double p = 0.25;
    const std::int64_t NPrime = 100'000, M = 1000;
    const auto small = CylinderSpec::make({{0}});
    const auto large = CylinderSpec::make({{0, 1}});
    int passing = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::vector<WeightField> nu{oracle::random_field(rng, NPrime, p, 1.0 / p)};
        const std::vector<std::int64_t> support(nu[0].support().begin(), nu[0].support().end());
        const auto A = DenseSubset::from_points(1, NPrime, support);
        const auto rep = compatibility_gap(small, large, CylinderEvent{small, {{0}}, EventMode::Superset}, A, nu, NPrime, M,
                                           MeasureOptions{.threads = g_threads});
        passing += rep.gap <= 0.05;
        worst = std::max(worst, rep.gap);
    }
    return {passing >= 18, std::to_string(passing) + "/20 seeds with gap <= 0.05, worst gap " + fmt(worst, 4)};
}

Outcome shift_invariance()
{
    std::mt19937_64 rng(99);
    int instances = 0, bounded = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + trial % 2;
        const std::int64_t NPrime = std::uniform_int_distribution<std::int64_t>(10, d == 1 ? 200 : 30)(rng);
        const std::int64_t M = std::uniform_int_distribution<std::int64_t>(1, 8)(rng);
        std::vector<std::vector<std::int64_t>> omega(d);
        for (auto& o : omega) {
            o.push_back(std::uniform_int_distribution<std::int64_t>(-1, 1)(rng));
            o.push_back(o[0] + std::uniform_int_distribution<std::int64_t>(1, 2)(rng));
        }
        const auto spec = CylinderSpec::make(omega);
        std::vector<Point> b0;
        for (const auto& g : spec.grid())
            if (std::bernoulli_distribution(0.4)(rng))
                b0.push_back(g);
        std::vector<WeightField> nu;
        for (std::size_t i = 0; i < d; ++i)
            nu.push_back(oracle::random_field(rng, NPrime, 0.7, 1.5));
        const auto A = oracle::random_subset(rng, d, NPrime, 0.5);
        Point h(d);
        for (auto& x : h)
            x = std::uniform_int_distribution<std::int64_t>(-2, 2)(rng);
        const auto ev = CylinderEvent{spec, b0, trial % 2 ? EventMode::Exact : EventMode::Superset};
        const auto rep = shift_gap(ev, h, A, nu, NPrime, M, MeasureOptions{.threads = g_threads});
        ++instances;
        bounded += rep.gap <= rep.boundary_mass + 1e-12;
    }

    const std::uint64_t N = 1'000'000;
    const auto table = sieve_primes(N + 6, SieveOptions{.threads = g_threads});
    const auto grid = prime_grid(table, N, 1);
    const auto sel = select_residues(table, grid, 3, Ratio::make(1, 2), N);
    const auto A = rescale_subset(grid, sel.context);
    const auto pw = build_weights(table, sel.context);
    const std::vector<WeightField> nu{pw[0].field};
    const auto E = CylinderEvent{CylinderSpec::make({{0}}), {{0}}, EventMode::Superset};
    const auto rep = shift_gap(E, Point{1}, A, nu, static_cast<std::int64_t>(sel.context.NPrime), 1000, MeasureOptions{.threads = g_threads});
    const bool prime_ok = rep.gap <= 0.05 && rep.gap <= rep.boundary_mass + 1e-12;
    ++instances;
    bounded += rep.gap <= rep.boundary_mass + 1e-12;
    return {bounded == instances && prime_ok, std::to_string(bounded) + "/" + std::to_string(instances) +
                                                  " within boundary mass; primes (w=3, N'=" + std::to_string(sel.context.NPrime) +
                                                  "): gap " + fmt(rep.gap, 4) + ", boundary mass " + fmt(rep.boundary_mass, 4)};
}

Outcome scaling_flatness()
{
    const auto ap = Shape::make(1, {{0}, {1}, {2}});
    const auto square = Shape::make(2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    const std::vector<std::int64_t> g1{10'000, 30'000, 100'000};
    const std::vector<std::int64_t> g2{200, 500, 1000};
    const auto r1 = scaling_report(ap, g1, CountOptions{.threads = g_threads});
    const auto r2 = scaling_report(square, g2, CountOptions{.threads = g_threads});
    const double f1 = r1.flatness.value_or(INFINITY), f2 = r2.flatness.value_or(INFINITY);
    std::string detail = "3-AP normalized:";
    for (const auto& row : r1.rows)
        detail += " " + fmt(row.normalized, 4);
    detail += " (ratio " + fmt(f1, 4) + "); square normalized:";
    for (const auto& row : r2.rows)
        detail += " " + fmt(row.normalized, 4);
    detail += " (ratio " + fmt(f2, 4) + ")";
    return {f1 <= 3.0 && f2 <= 4.0, detail};
}

Outcome partition_of_unity()
{
    std::mt19937_64 rng(1234);
    int instances = 0, ok = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t d = 1 + trial % 2;
        const std::int64_t NPrime = std::uniform_int_distribution<std::int64_t>(10, d == 1 ? 80 : 25)(rng);
        const std::int64_t M = std::uniform_int_distribution<std::int64_t>(1, 6)(rng);
        std::vector<std::vector<std::int64_t>> omega(d);
        for (auto& o : omega) {
            const auto size = std::uniform_int_distribution<std::size_t>(1, d == 1 ? 4 : 2)(rng);
            for (std::int64_t c = -1; o.size() < size; ++c)
                if (std::bernoulli_distribution(0.7)(rng))
                    o.push_back(c);
        }
        const auto spec = CylinderSpec::make(omega);
        std::vector<WeightField> nu;
        for (std::size_t i = 0; i < d; ++i)
            nu.push_back(oracle::random_field(rng, NPrime, 0.8, 1.25));
        const auto A = oracle::random_subset(rng, d, NPrime, 0.5);
        const auto grid = spec.grid();
        const MeasureOptions opt{.threads = g_threads};
        const double mass = total_mass(spec, A, nu, NPrime, M, opt).value;
        KahanSum sum;
        for (std::uint32_t bits = 0; bits < (1u << grid.size()); ++bits) {
            std::vector<Point> b0;
            for (std::size_t t = 0; t < grid.size(); ++t)
                if (bits >> t & 1u)
                    b0.push_back(grid[t]);
            sum.add(measure(CylinderEvent{spec, b0, EventMode::Exact}, A, nu, NPrime, M, opt).value);
        }
        const double err = std::fabs(sum.value() - mass);
        worst = std::max(worst, err);
        ++instances;
        ok += err <= 1e-9;
    }
    return {instances >= 50 && ok == instances, std::to_string(ok) + "/" + std::to_string(instances) + " within 1e-9, worst " + fmt(worst, 3)};
}

} // namespace

int main()
{
    g_threads = default_threads();
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"sieve exactness", sieve_exactness},
        {"counting oracle equivalence", counting_oracle},
        {"dilation identity", dilation_identity},
        {"forms factorization", forms_factorization},
        {"identity normalization", identity_normalization},
        {"weighted von Neumann inequality", von_neumann},
        {"linear-forms trend (w=7, kappa=0.01)", forms_trend},
        {"compatibility gap", compatibility},
        {"shift-invariance gap", shift_invariance},
        {"scaling flatness", scaling_flatness},
        {"measure partition of unity", partition_of_unity},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %zu %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}

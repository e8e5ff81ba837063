#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "weights.hpp"

namespace constlab {

// The tuple (Omega_1, ..., Omega_d) of finite coordinate sets; the grid is their product.
struct CylinderSpec {
    std::vector<std::vector<std::int64_t>> omega;

    static constexpr std::size_t kMaxPerCoordinate = 6;

    static CylinderSpec make(std::vector<std::vector<std::int64_t>> omega)
    {
        require(!omega.empty(), "Omega needs at least one coordinate");
        for (std::size_t i = 0; i < omega.size(); ++i) {
            auto& o = omega[i];
            std::sort(o.begin(), o.end());
            o.erase(std::unique(o.begin(), o.end()), o.end());
            require(!o.empty(), "Omega_" + std::to_string(i + 1) + " is empty");
            require(o.size() <= kMaxPerCoordinate,
                    "Omega_" + std::to_string(i + 1) + " has more than " + std::to_string(kMaxPerCoordinate) + " elements");
        }
        return CylinderSpec{std::move(omega)};
    }

    std::size_t dim() const { return omega.size(); }

    std::size_t weight_factor_count() const
    {
        std::size_t n = 0;
        for (const auto& o : omega)
            n += o.size();
        return n;
    }

    // Grid points of prod Omega_i in lexicographic order.
    std::vector<Point> grid() const
    {
        std::vector<Point> out;
        Point p(dim());
        std::vector<std::size_t> idx(dim(), 0);
        for (;;) {
            for (std::size_t i = 0; i < dim(); ++i)
                p[i] = omega[i][idx[i]];
            out.push_back(p);
            std::size_t i = dim();
            while (i > 0) {
                --i;
                if (++idx[i] < omega[i].size())
                    break;
                idx[i] = 0;
                if (i == 0)
                    return out;
            }
        }
    }

    bool contains(std::span<const std::int64_t> b) const
    {
        if (b.size() != dim())
            return false;
        for (std::size_t i = 0; i < dim(); ++i)
            if (!std::binary_search(omega[i].begin(), omega[i].end(), b[i]))
                return false;
        return true;
    }

    bool subset_of(const CylinderSpec& other) const
    {
        if (other.dim() != dim())
            return false;
        for (std::size_t i = 0; i < dim(); ++i)
            if (!std::includes(other.omega[i].begin(), other.omega[i].end(), omega[i].begin(), omega[i].end()))
                return false;
        return true;
    }

    CylinderSpec shifted(std::span<const std::int64_t> h) const
    {
        CylinderSpec s = *this;
        for (std::size_t i = 0; i < dim(); ++i)
            for (auto& c : s.omega[i])
                c += h[i];
        return s;
    }

    friend bool operator==(const CylinderSpec&, const CylinderSpec&) = default;
};

enum class EventMode { Superset, Exact };

// Superset: {B : B0 subset of B}. Exact: {B : B intersect prod Omega_i = B0}.
struct CylinderEvent {
    CylinderSpec spec;
    std::vector<Point> B0;
    EventMode mode = EventMode::Superset;

    CylinderEvent shifted(std::span<const std::int64_t> h) const
    {
        CylinderEvent e{spec.shifted(h), B0, mode};
        for (auto& b : e.B0)
            for (std::size_t i = 0; i < b.size(); ++i)
                b[i] += h[i];
        return e;
    }
};

struct MeasureReport {
    double value = 0.0;
    double total_mass = 0.0;
    std::uint64_t terms = 0;
    double conditional = 0.0; // value / total_mass when the mass is positive
};

struct MeasureOptions {
    unsigned threads = 1;
    std::size_t max_weight_factors = 24;
    std::size_t max_free_points = 16;
};

namespace detail {

struct CoordinateList {
    std::vector<std::int64_t> a;
    std::vector<double> w;
};

// All a in [lo, hi] with prod_{c in omega} nu(a + c r) != 0, together with that product.
inline CoordinateList nonzero_list(const WeightField& nu, std::span<const std::int64_t> omega, std::int64_t r, std::int64_t lo, std::int64_t hi)
{
    CoordinateList out;
    if (nu.unbounded()) {
        for (std::int64_t a = lo; a <= hi; ++a) {
            out.a.push_back(a);
            out.w.push_back(1.0);
        }
        return out;
    }
    const std::int64_t anchor = omega[0] * r;
    for (std::int64_t x : nu.support()) {
        const std::int64_t a = x - anchor;
        if (a < lo)
            continue;
        if (a > hi)
            break;
        double prod = nu(x);
        for (std::size_t j = 1; j < omega.size() && prod != 0.0; ++j)
            prod *= nu(a + omega[j] * r);
        if (prod != 0.0) {
            out.a.push_back(a);
            out.w.push_back(prod);
        }
    }
    return out;
}

// Visits every a in the product of the lists with its weight product.
template <class F>
void for_each_weighted(const std::vector<CoordinateList>& lists, F&& f)
{
    for (const auto& l : lists)
        if (l.a.empty())
            return;
    const std::size_t d = lists.size();
    std::vector<std::size_t> idx(d, 0);
    Point a(d);
    for (;;) {
        double w = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            a[i] = lists[i].a[idx[i]];
            w *= lists[i].w[idx[i]];
        }
        f(a, w);
        std::size_t i = d;
        while (i > 0) {
            --i;
            if (++idx[i] < lists[i].a.size())
                break;
            idx[i] = 0;
            if (i == 0)
                return;
        }
    }
}

inline bool member_at(const DenseSubset& A, std::span<const std::int64_t> a, std::int64_t r, std::span<const std::int64_t> b, Point& scratch)
{
    for (std::size_t i = 0; i < a.size(); ++i)
        scratch[i] = a[i] + r * b[i];
    return A.contains(scratch);
}

struct EventPlan {
    std::vector<Point> required; // B0
    std::vector<Point> free;     // grid minus B0 (exact mode only)
};

inline EventPlan plan_event(const CylinderEvent& ev, const MeasureOptions& opt)
{
    EventPlan plan;
    for (const auto& b : ev.B0)
        require(ev.spec.contains(b), "B0 point is not in the grid prod Omega_i (event is not Omega-measurable)");
    plan.required = ev.B0;
    std::sort(plan.required.begin(), plan.required.end());
    plan.required.erase(std::unique(plan.required.begin(), plan.required.end()), plan.required.end());
    if (ev.mode == EventMode::Exact) {
        for (auto& g : ev.spec.grid())
            if (!std::binary_search(plan.required.begin(), plan.required.end(), g))
                plan.free.push_back(std::move(g));
        if (plan.free.size() > opt.max_free_points)
            throw BudgetError("exact-mode event has " + std::to_string(plan.free.size()) + " unconstrained grid points, above the cap of " +
                              std::to_string(opt.max_free_points));
    }
    return plan;
}

inline void check_measure_inputs(const CylinderSpec& weight_spec, const DenseSubset& A, std::span<const WeightField> weights,
                                 std::int64_t NPrime, std::int64_t M, const MeasureOptions& opt)
{
    require(weights.size() == weight_spec.dim(), "expected one weight field per coordinate");
    require(A.dim() == weight_spec.dim(), "subset dimension does not match Omega");
    require(NPrime >= 1 && M >= 1, "N' and M must be positive");
    if (weight_spec.weight_factor_count() > opt.max_weight_factors)
        throw BudgetError("sum of |Omega_i| = " + std::to_string(weight_spec.weight_factor_count()) + " exceeds the cap of " +
                          std::to_string(opt.max_weight_factors));
}

} // namespace detail

// mu_{Omega,n}(F) = E_{a in [N']^d} E_{r in [M]} 1_F(B_{a,r}) prod_i prod_{c in Omega_i} nu_i(a_i + c r),
// with b in B_{a,r} iff a + r b in A. The weight product uses `weight_spec` when given,
// otherwise the event's own Omega. Exact events go through inclusion-exclusion over the
// superset events containing B0.
inline MeasureReport measure(const CylinderEvent& ev, const DenseSubset& A, std::span<const WeightField> weights, std::int64_t NPrime,
                             std::int64_t M, const MeasureOptions& opt = {}, const CylinderSpec* weight_spec = nullptr)
{
    const CylinderSpec& ws = weight_spec ? *weight_spec : ev.spec;
    require(ev.spec.dim() == ws.dim(), "event and weight Omega have different dimensions");
    detail::check_measure_inputs(ws, A, weights, NPrime, M, opt);
    const auto plan = detail::plan_event(ev, opt);
    const std::size_t d = ws.dim();
    const bool exact = ev.mode == EventMode::Exact;
    const std::size_t hist_size = exact ? (std::size_t{1} << plan.free.size()) : 1;
    const bool mass_only = !exact && plan.required.empty();

    struct Partial {
        KahanSum mass;
        std::vector<KahanSum> hist;
    };
    const auto chunks = ChunkPlan::for_total(static_cast<std::uint64_t>(M), 64);
    auto partial = run_chunks<Partial>(chunks.chunks(), opt.threads, [&](std::size_t c) {
        Partial p;
        p.hist.resize(hist_size);
        Point scratch(d);
        std::vector<detail::CoordinateList> lists(d);
        for (std::uint64_t ri = chunks.begin(c); ri < chunks.end(c); ++ri) {
            const auto r = static_cast<std::int64_t>(ri) + 1;
            double mass = 1.0;
            for (std::size_t i = 0; i < d; ++i) {
                lists[i] = detail::nonzero_list(weights[i], ws.omega[i], r, 1, NPrime);
                KahanSum s;
                for (double w : lists[i].w)
                    s.add(w);
                mass *= s.value();
            }
            p.mass.add(mass);
            if (mass_only || mass == 0.0)
                continue;
            detail::for_each_weighted(lists, [&](const Point& a, double w) {
                for (const auto& b : plan.required)
                    if (!detail::member_at(A, a, r, b, scratch))
                        return;
                std::size_t mask = 0;
                for (std::size_t t = 0; t < plan.free.size(); ++t)
                    if (detail::member_at(A, a, r, plan.free[t], scratch))
                        mask |= std::size_t{1} << t;
                p.hist[mask].add(w);
            });
        }
        return p;
    });

    KahanSum mass;
    std::vector<KahanSum> hist(hist_size);
    for (const auto& p : partial) {
        mass.add(p.mass);
        for (std::size_t k = 0; k < hist_size; ++k)
            hist[k].add(p.hist[k]);
    }
    double cells = static_cast<double>(M);
    std::uint64_t terms = static_cast<std::uint64_t>(M);
    for (std::size_t i = 0; i < d; ++i) {
        cells *= static_cast<double>(NPrime);
        terms = saturating_mul(terms, static_cast<std::uint64_t>(NPrime));
    }

    MeasureReport rep;
    rep.total_mass = mass.value() / cells;
    rep.terms = terms;
    if (mass_only) {
        rep.value = rep.total_mass;
    } else if (!exact) {
        rep.value = hist[0].value() / cells;
    } else {
        // superset[T] = mu({B : B0 + T subset of B}) for T among the free points.
        std::vector<double> superset(hist_size);
        for (std::size_t k = 0; k < hist_size; ++k)
            superset[k] = hist[k].value();
        for (std::size_t bit = 0; bit < plan.free.size(); ++bit)
            for (std::size_t k = 0; k < hist_size; ++k)
                if (!(k >> bit & 1u))
                    superset[k] += superset[k | (std::size_t{1} << bit)];
        KahanSum alt;
        for (std::size_t k = 0; k < hist_size; ++k)
            alt.add((std::popcount(k) % 2 == 0 ? 1.0 : -1.0) * superset[k]);
        rep.value = std::max(0.0, alt.value()) / cells;
    }
    rep.conditional = rep.total_mass > 0.0 ? rep.value / rep.total_mass : 0.0;
    return rep;
}

// Total mass mu_{Omega,n}(X).
inline MeasureReport total_mass(const CylinderSpec& spec, const DenseSubset& A, std::span<const WeightField> weights, std::int64_t NPrime,
                                std::int64_t M, const MeasureOptions& opt = {})
{
    return measure(CylinderEvent{spec, {}, EventMode::Superset}, A, weights, NPrime, M, opt);
}

struct CompatibilityReport {
    double gap = 0.0;
    double small = 0.0; // mu_{Omega,n}(F)
    double large = 0.0; // mu_{Omega',n}(F)
    std::uint64_t terms = 0;
};

// |mu_{Omega',n}(F) - mu_{Omega,n}(F)| for an event F measurable in the Omega grid.
inline CompatibilityReport compatibility_gap(const CylinderSpec& omega, const CylinderSpec& omega_large, const CylinderEvent& event,
                                             const DenseSubset& A, std::span<const WeightField> weights, std::int64_t NPrime, std::int64_t M,
                                             const MeasureOptions& opt = {})
{
    require(omega.subset_of(omega_large), "Omega_i must be contained in Omega'_i for every i");
    if (!(event.spec == omega)) {
        // Superset events only need B0 inside the Omega grid; exact events are tied to it.
        require(event.mode == EventMode::Superset, "exact-mode event must be defined on the Omega grid");
        for (const auto& b : event.B0)
            require(omega.contains(b), "event is not measurable in the Omega grid");
    }
    CylinderEvent ev{omega, event.B0, event.mode};
    CompatibilityReport rep;
    const auto lo = measure(ev, A, weights, NPrime, M, opt, &omega);
    const auto hi = measure(ev, A, weights, NPrime, M, opt, &omega_large);
    rep.small = lo.value;
    rep.large = hi.value;
    rep.gap = std::fabs(hi.value - lo.value);
    rep.terms = lo.terms + hi.terms;
    return rep;
}

struct ShiftReport {
    double gap = 0.0;
    double base = 0.0;          // mu_{Omega,n}(F)
    double shifted = 0.0;       // mu_{Omega+h,n}(T_h F)
    double boundary_mass = 0.0; // integrand mass on the symmetric difference of the shifted boxes
};

// gap = |E_{a,r} G(a + h r, r) - E_{a,r} G(a, r)| with G the integrand of mu_{Omega,n}(F).
// The boundary mass is the exact sum of G over ([N']^d + h r) symmetric-difference [N']^d,
// normalized like the measure; it bounds the gap.
inline ShiftReport shift_gap(const CylinderEvent& event, std::span<const std::int64_t> h, const DenseSubset& A,
                             std::span<const WeightField> weights, std::int64_t NPrime, std::int64_t M, const MeasureOptions& opt = {})
{
    require(h.size() == event.spec.dim(), "shift h has the wrong dimension");
    ShiftReport rep;
    rep.base = measure(event, A, weights, NPrime, M, opt).value;
    rep.shifted = measure(event.shifted(h), A, weights, NPrime, M, opt).value;
    rep.gap = std::fabs(rep.shifted - rep.base);

    const auto plan = detail::plan_event(event, opt);
    const std::size_t d = event.spec.dim();
    const auto chunks = ChunkPlan::for_total(static_cast<std::uint64_t>(M), 64);
    auto partial = run_chunks<KahanSum>(chunks.chunks(), opt.threads, [&](std::size_t c) {
        KahanSum s;
        Point scratch(d);
        std::vector<detail::CoordinateList> lists(d);
        for (std::uint64_t ri = chunks.begin(c); ri < chunks.end(c); ++ri) {
            const auto r = static_cast<std::int64_t>(ri) + 1;
            for (std::size_t i = 0; i < d; ++i) {
                const std::int64_t lo = std::min<std::int64_t>(1, 1 + h[i] * r);
                const std::int64_t hi = std::max<std::int64_t>(NPrime, NPrime + h[i] * r);
                lists[i] = detail::nonzero_list(weights[i], event.spec.omega[i], r, lo, hi);
            }
            detail::for_each_weighted(lists, [&](const Point& a, double w) {
                bool in_box = true, in_shifted = true;
                for (std::size_t i = 0; i < d; ++i) {
                    in_box = in_box && a[i] >= 1 && a[i] <= NPrime;
                    in_shifted = in_shifted && a[i] - h[i] * r >= 1 && a[i] - h[i] * r <= NPrime;
                }
                if (in_box == in_shifted)
                    return;
                for (const auto& b : plan.required)
                    if (!detail::member_at(A, a, r, b, scratch))
                        return;
                for (const auto& b : plan.free)
                    if (detail::member_at(A, a, r, b, scratch))
                        return;
                s.add(w);
            });
        }
        return s;
    });
    KahanSum total;
    for (const auto& p : partial)
        total.add(p);
    double cells = static_cast<double>(M);
    for (std::size_t i = 0; i < d; ++i)
        cells *= static_cast<double>(NPrime);
    rep.boundary_mass = total.value() / cells;
    return rep;
}

} // namespace constlab

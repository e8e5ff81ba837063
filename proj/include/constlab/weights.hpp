#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"

namespace constlab {

// A nonnegative weight on [1, extent], extended by zero to all of Z. The unbounded
// identity field (1 on all of Z) exists for exact normalization checks only.
class WeightField {
public:
    WeightField() = default;

    static WeightField from_values(std::vector<double> values)
    {
        WeightField w;
        w.extent_ = static_cast<std::int64_t>(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] >= 0.0))
                throw ConfigError("weight values must be nonnegative (index " + std::to_string(i + 1) + ")");
            if (values[i] != 0.0)
                w.support_.push_back(static_cast<std::int64_t>(i) + 1);
        }
        w.values_ = std::move(values);
        return w;
    }

    static WeightField unbounded_identity(std::int64_t extent)
    {
        WeightField w;
        w.extent_ = extent;
        w.unbounded_ = true;
        return w;
    }

    double operator()(std::int64_t a) const
    {
        if (unbounded_)
            return 1.0;
        if (a < 1 || a > extent_)
            return 0.0;
        return values_[static_cast<std::size_t>(a - 1)];
    }

    std::int64_t extent() const { return extent_; }
    bool unbounded() const { return unbounded_; }
    // Sorted positions of nonzero values (empty for the unbounded field).
    std::span<const std::int64_t> support() const { return support_; }
    std::span<const double> values() const { return values_; }

    double mean() const
    {
        if (unbounded_)
            return 1.0;
        KahanSum s;
        for (double v : values_)
            s.add(v);
        return extent_ > 0 ? s.value() / static_cast<double>(extent_) : 0.0;
    }

    WeightField scaled(double c) const
    {
        require(c >= 0.0, "weight scale must be nonnegative");
        require(!unbounded_, "cannot scale the unbounded identity field");
        std::vector<double> v(values_);
        for (double& x : v)
            x *= c;
        return from_values(std::move(v));
    }

private:
    std::int64_t extent_ = 0;
    bool unbounded_ = false;
    std::vector<double> values_;
    std::vector<std::int64_t> support_;
};

} // namespace constlab

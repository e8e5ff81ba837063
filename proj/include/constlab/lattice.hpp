#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "errors.hpp"

namespace constlab {

using Point = std::vector<std::int64_t>;

// Word-packed membership bitmap over [1, extent].
class BitSet1D {
public:
    BitSet1D() = default;
    explicit BitSet1D(std::int64_t extent) : extent_(extent), words_(static_cast<std::size_t>(extent / 64 + 1), 0) {}

    void set(std::int64_t x) { words_[static_cast<std::size_t>(x) >> 6] |= std::uint64_t{1} << (x & 63); }
    bool test(std::int64_t x) const
    {
        return x >= 1 && x <= extent_ && ((words_[static_cast<std::size_t>(x) >> 6] >> (x & 63)) & 1u);
    }
    std::int64_t extent() const { return extent_; }

private:
    std::int64_t extent_ = 0;
    std::vector<std::uint64_t> words_;
};

// A finite set of lattice points inside the box [1, extent]^d. Either an explicit point
// list (bitmap or hash membership) or a Cartesian product of coordinate sets.
class DenseSubset {
public:
    DenseSubset() = default;

    static DenseSubset from_points(std::size_t d, std::int64_t extent, std::span<const std::int64_t> flat, std::string source = "points")
    {
        require(d >= 1, "subset dimension must be at least 1");
        require(extent >= 1, "subset extent must be positive");
        require(flat.size() % d == 0, "flattened point list length is not a multiple of the dimension");
        DenseSubset s;
        s.dim_ = d;
        s.extent_ = extent;
        s.source_ = std::move(source);
        s.init_packing();
        s.keys_.reserve(flat.size() / d);
        for (std::size_t p = 0; p < flat.size(); p += d) {
            std::uint64_t key = 0;
            for (std::size_t i = 0; i < d; ++i) {
                const std::int64_t x = flat[p + i];
                if (x < 1 || x > extent)
                    throw ConfigError("subset point coordinate " + std::to_string(x) + " outside [1, " + std::to_string(extent) + "]");
                key = key * static_cast<std::uint64_t>(extent) + static_cast<std::uint64_t>(x - 1);
            }
            s.keys_.push_back(key);
        }
        std::sort(s.keys_.begin(), s.keys_.end());
        s.keys_.erase(std::unique(s.keys_.begin(), s.keys_.end()), s.keys_.end());
        s.build_index();
        return s;
    }

    static DenseSubset product(std::vector<std::vector<std::int64_t>> factors, std::int64_t extent, std::string source = "product")
    {
        require(!factors.empty(), "product subset needs at least one factor");
        require(extent >= 1, "subset extent must be positive");
        DenseSubset s;
        s.dim_ = factors.size();
        s.extent_ = extent;
        s.source_ = std::move(source);
        s.is_product_ = true;
        for (auto& f : factors) {
            std::sort(f.begin(), f.end());
            f.erase(std::unique(f.begin(), f.end()), f.end());
            BitSet1D bits(extent);
            for (std::int64_t x : f) {
                if (x < 1 || x > extent)
                    throw ConfigError("product factor value " + std::to_string(x) + " outside [1, " + std::to_string(extent) + "]");
                bits.set(x);
            }
            s.factor_bits_.push_back(std::move(bits));
        }
        s.factors_ = std::move(factors);
        return s;
    }

    std::size_t dim() const { return dim_; }
    std::int64_t extent() const { return extent_; }
    const std::string& source() const { return source_; }
    bool is_product() const { return is_product_; }
    const std::vector<std::vector<std::int64_t>>& factors() const { return factors_; }
    const BitSet1D& factor_bits(std::size_t i) const { return factor_bits_[i]; }

    std::uint64_t size() const
    {
        if (!is_product_)
            return keys_.size();
        std::uint64_t n = 1;
        for (const auto& f : factors_)
            n *= f.size();
        return n;
    }
    bool empty() const { return size() == 0; }

    bool contains(std::span<const std::int64_t> p) const
    {
        if (is_product_) {
            for (std::size_t i = 0; i < dim_; ++i)
                if (!factor_bits_[i].test(p[i]))
                    return false;
            return true;
        }
        std::uint64_t key = 0;
        for (std::size_t i = 0; i < dim_; ++i) {
            if (p[i] < 1 || p[i] > extent_)
                return false;
            key = key * static_cast<std::uint64_t>(extent_) + static_cast<std::uint64_t>(p[i] - 1);
        }
        if (!bitmap_.empty())
            return (bitmap_[key >> 6] >> (key & 63)) & 1u;
        return hashed_.count(key) != 0;
    }

    // Visits every point in lexicographic order.
    template <class F>
    void for_each(F&& f) const
    {
        Point p(dim_);
        if (!is_product_) {
            for (std::uint64_t key : keys_) {
                decode(key, p);
                f(std::span<const std::int64_t>(p));
            }
            return;
        }
        for (const auto& fac : factors_)
            if (fac.empty())
                return;
        std::vector<std::size_t> idx(dim_, 0);
        for (;;) {
            for (std::size_t i = 0; i < dim_; ++i)
                p[i] = factors_[i][idx[i]];
            f(std::span<const std::int64_t>(p));
            std::size_t i = dim_;
            while (i > 0) {
                --i;
                if (++idx[i] < factors_[i].size())
                    break;
                idx[i] = 0;
                if (i == 0)
                    return;
            }
        }
    }

    std::vector<std::int64_t> flat_points() const
    {
        std::vector<std::int64_t> out;
        for_each([&](std::span<const std::int64_t> p) { out.insert(out.end(), p.begin(), p.end()); });
        return out;
    }

private:
    void init_packing()
    {
        unsigned __int128 cells = 1;
        for (std::size_t i = 0; i < dim_; ++i) {
            cells *= static_cast<unsigned __int128>(extent_);
            if (cells > static_cast<unsigned __int128>(UINT64_MAX))
                throw ConfigError("subset box [1, " + std::to_string(extent_) + "]^" + std::to_string(dim_) + " too large to index");
        }
        cells_ = static_cast<std::uint64_t>(cells);
    }

    void build_index()
    {
        constexpr std::uint64_t kBitmapCells = std::uint64_t{1} << 27;
        if (cells_ <= kBitmapCells) {
            bitmap_.assign(static_cast<std::size_t>(cells_ / 64 + 1), 0);
            for (std::uint64_t k : keys_)
                bitmap_[k >> 6] |= std::uint64_t{1} << (k & 63);
        } else {
            hashed_.reserve(keys_.size());
            hashed_.insert(keys_.begin(), keys_.end());
        }
    }

    void decode(std::uint64_t key, Point& p) const
    {
        for (std::size_t i = dim_; i > 0; --i) {
            p[i - 1] = static_cast<std::int64_t>(key % static_cast<std::uint64_t>(extent_)) + 1;
            key /= static_cast<std::uint64_t>(extent_);
        }
    }

    std::size_t dim_ = 1;
    std::int64_t extent_ = 1;
    std::string source_;
    bool is_product_ = false;
    std::uint64_t cells_ = 0;
    std::vector<std::uint64_t> keys_;
    std::vector<std::uint64_t> bitmap_;
    std::unordered_set<std::uint64_t> hashed_;
    std::vector<std::vector<std::int64_t>> factors_;
    std::vector<BitSet1D> factor_bits_;
};

} // namespace constlab

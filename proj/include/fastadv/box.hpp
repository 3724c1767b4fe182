/**
 * \file box.hpp
 *
 * Axis-aligned boxes over the representable doubles.
 *
 * Every interval is stored with *closed* double endpoints. A strict bound
 * such as the right end of a leaf region [lo, t) becomes the largest double
 * below t, and the open L-infinity ball around x becomes exactly the set of
 * doubles v with |v - x| < delta evaluated in double arithmetic. The box
 * therefore describes the same points that the model and the soundness
 * checks see, with no rounding slack.
 */

#ifndef FASTADV_BOX_HPP
#define FASTADV_BOX_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace fastadv {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Largest double strictly below `v`.
inline double below(double v) { return std::nextafter(v, -kInf); }
/// Smallest double strictly above `v`.
inline double above(double v) { return std::nextafter(v, kInf); }

namespace detail {

// Doubles mapped to integers in the same order, so that adjacent doubles
// are adjacent integers (both zeros map to 0).
inline std::int64_t ordered_bits(double v)
{
    const auto b = std::bit_cast<std::int64_t>(v);
    return b < 0 ? -(b & std::numeric_limits<std::int64_t>::max()) : b;
}

inline double from_ordered_bits(std::int64_t k)
{
    return k < 0 ? std::bit_cast<double>((-k) | std::numeric_limits<std::int64_t>::min())
                 : std::bit_cast<double>(k);
}

/**
 * The farthest double from `x` in direction `step` (+1 or -1) for which
 * `inside` holds, given that `inside(x)` holds and `inside` is monotone
 * along that direction.
 */
template <class Pred>
inline double farthest_inside(double x, int step, Pred inside)
{
    // Offsets from x can exceed the int64 range, so count them unsigned.
    const auto ox = static_cast<std::uint64_t>(ordered_bits(x));
    const auto lim = static_cast<std::uint64_t>(ordered_bits(step > 0 ? kInf : -kInf));
    const std::uint64_t span = step > 0 ? lim - ox : ox - lim;
    auto at = [&](std::uint64_t k) {
        return from_ordered_bits(static_cast<std::int64_t>(step > 0 ? ox + k : ox - k));
    };
    // Exponential search for an outside point, then bisection. `bad` may be
    // span + 1, meaning every double up to infinity is inside.
    std::uint64_t good = 0;
    std::uint64_t bad = 1;
    while (bad <= span && inside(at(bad))) {
        good = bad;
        bad = bad > span / 2 ? span + 1 : bad * 2;
    }
    while (bad - good > 1) {
        const std::uint64_t mid = good + (bad - good) / 2;
        if (inside(at(mid)))
            good = mid;
        else
            bad = mid;
    }
    return at(good);
}

} // namespace detail

struct Interval {
    double lo = -kInf;
    double hi = kInf;

    static Interval all() { return {}; }
    /// [lo, hi) as produced by strict less-than splits.
    static Interval half_open(double lo, double hi) { return {lo, hi == kInf ? kInf : below(hi)}; }
    /// (lo, hi) with both ends excluded.
    static Interval open(double lo, double hi)
    {
        return {lo == -kInf ? -kInf : above(lo), hi == kInf ? kInf : below(hi)};
    }

    /**
     * The doubles v with |v - x| < delta, both computed in double
     * arithmetic. The set is an interval because rounding is monotone.
     */
    static Interval ball(double x, double delta)
    {
        if (delta == kInf)
            return {};
        auto inside = [&](double v) { return std::abs(v - x) < delta; };
        const double lo = detail::farthest_inside(x, -1, inside);
        const double hi = detail::farthest_inside(x, +1, inside);
        return {lo, hi};
    }

    bool empty() const { return !(lo <= hi); }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool is_all() const { return lo == -kInf && hi == kInf; }

    Interval intersect(const Interval& o) const { return {std::max(lo, o.lo), std::min(hi, o.hi)}; }

    /// Point of the interval nearest to `v`.
    double clamp(double v) const { return std::min(std::max(v, lo), hi); }
    /// Distance from `v` to the interval, as the soundness check computes it.
    double distance(double v) const { return contains(v) ? 0.0 : std::abs(clamp(v) - v); }

    /// Whether a split `x_f < threshold` can route a point of this interval left.
    bool reaches_left(double threshold) const { return lo < threshold; }
    /// Whether a split `x_f < threshold` can route a point of this interval right.
    bool reaches_right(double threshold) const { return hi >= threshold; }

    bool operator==(const Interval&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Interval& iv)
{
    return os << '[' << iv.lo << ", " << iv.hi << ']';
}

/** One interval per feature. */
class FeatureBox {
public:
    FeatureBox() = default;
    explicit FeatureBox(std::size_t d) : iv_(d) {}
    explicit FeatureBox(std::vector<Interval> iv) : iv_(std::move(iv)) {}

    std::size_t size() const { return iv_.size(); }
    const Interval& operator[](std::size_t f) const { return iv_[f]; }
    Interval& operator[](std::size_t f) { return iv_[f]; }
    const std::vector<Interval>& intervals() const { return iv_; }

    bool empty() const
    {
        return std::any_of(iv_.begin(), iv_.end(), [](const Interval& i) { return i.empty(); });
    }

    bool contains(std::span<const double> x) const
    {
        for (std::size_t f = 0; f < iv_.size(); ++f)
            if (!iv_[f].contains(x[f]))
                return false;
        return true;
    }

    FeatureBox intersect(const FeatureBox& o) const
    {
        if (o.size() != size())
            throw std::invalid_argument("box dimension mismatch");
        FeatureBox r(size());
        for (std::size_t f = 0; f < size(); ++f)
            r.iv_[f] = iv_[f].intersect(o.iv_[f]);
        return r;
    }

    /// L-infinity distance from `x` to the nearest point of the box.
    double distance(std::span<const double> x) const
    {
        double d = 0.0;
        for (std::size_t f = 0; f < iv_.size(); ++f)
            d = std::max(d, iv_[f].distance(x[f]));
        return d;
    }

    bool operator==(const FeatureBox&) const = default;

private:
    std::vector<Interval> iv_;
};

/// The open L-infinity ball of radius `delta` around `x`.
inline FeatureBox delta_box(std::span<const double> x, double delta)
{
    if (!(delta > 0.0))
        throw std::invalid_argument("delta must be positive");
    FeatureBox b(x.size());
    for (std::size_t f = 0; f < x.size(); ++f)
        b[f] = Interval::ball(x[f], delta);
    return b;
}

} // namespace fastadv

#endif // FASTADV_BOX_HPP

#pragma once

// Distribution summaries for NSE pools: exact percentiles for small pools and a
// fixed-width histogram for Monte Carlo pools too large to keep in memory.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dss/errors.hpp"

namespace dss {

struct Summary {
    std::size_t count = 0;      // defined values
    std::size_t undefined = 0;  // excluded from every statistic
    std::optional<double> p25, p50, p75, mean, min, max;
};

/// Linear-interpolation quantile of sorted data (position q * (n - 1)).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw NumericalError("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline Summary summarize(std::vector<double> values, std::size_t undefined = 0) {
    Summary s;
    s.count = values.size();
    s.undefined = undefined;
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    s.p25 = quantile_sorted(values, 0.25);
    s.p50 = quantile_sorted(values, 0.50);
    s.p75 = quantile_sorted(values, 0.75);
    double acc = 0.0;
    for (double v : values) acc += v;
    s.mean = acc / static_cast<double>(values.size());
    s.min = values.front();
    s.max = values.back();
    return s;
}

/// Summary of optional values; nullopt entries count as undefined.
inline Summary summarize(std::span<const std::optional<double>> values) {
    std::vector<double> v;
    v.reserve(values.size());
    std::size_t undefined = 0;
    for (const auto& x : values) {
        if (x) {
            v.push_back(*x);
        } else {
            ++undefined;
        }
    }
    return summarize(std::move(v), undefined);
}

/// Fixed-width histogram over [lo, hi] with open-ended tails. Counts are integers,
/// so merging partial histograms is exact and order independent. No running sum is
/// kept; callers that need a mean accumulate it in a fixed order. Quantiles
/// interpolate linearly inside the bin holding the target rank; the error is at
/// most one bin width inside [lo, hi]. Tail bins interpolate between the observed
/// extreme and the domain edge.
class BinnedDistribution {
public:
    BinnedDistribution(double lo = -20.0, double hi = 1.0, double width = 1e-4)
        : lo_(lo), hi_(hi), width_(width),
          counts_(static_cast<std::size_t>(std::ceil((hi - lo) / width)) + 2, 0) {}

    void add(double v) {
        ++count_;
        min_ = std::min(min_, v);
        max_ = std::max(max_, v);
        ++counts_[bin(v)];
    }
    void add_undefined(std::size_t n = 1) { undefined_ += n; }

    void merge(const BinnedDistribution& o) {
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
        count_ += o.count_;
        undefined_ += o.undefined_;
        min_ = std::min(min_, o.min_);
        max_ = std::max(max_, o.max_);
    }

    double bin_width() const noexcept { return width_; }
    std::size_t count() const noexcept { return count_; }

    /// Summary without a mean; see the class comment.
    Summary summary() const {
        Summary s;
        s.count = count_;
        s.undefined = undefined_;
        if (count_ == 0) return s;
        s.p25 = quantile(0.25);
        s.p50 = quantile(0.50);
        s.p75 = quantile(0.75);
        s.min = min_;
        s.max = max_;
        return s;
    }

    double quantile(double q) const {
        const double target = q * static_cast<double>(count_ - 1);  // 0-based fractional rank
        std::uint64_t below = 0;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            const auto c = counts_[i];
            if (c == 0) continue;
            if (target < static_cast<double>(below + c)) {
                double a = 0.0, b = 0.0;
                if (i == 0) {
                    a = min_;
                    b = std::min(lo_, max_);
                } else if (i == counts_.size() - 1) {
                    a = std::max(hi_, min_);
                    b = max_;
                } else {
                    a = lo_ + static_cast<double>(i - 1) * width_;
                    b = a + width_;
                }
                const double frac = (target - static_cast<double>(below) + 0.5) / static_cast<double>(c);
                return std::clamp(a + frac * (b - a), min_, max_);
            }
            below += c;
        }
        return max_;
    }

private:
    std::size_t bin(double v) const {
        if (v < lo_) return 0;
        if (v >= hi_) return counts_.size() - 1;
        const auto i = static_cast<std::size_t>((v - lo_) / width_) + 1;
        return std::min(i, counts_.size() - 2);
    }

    double lo_, hi_, width_;
    std::vector<std::uint64_t> counts_;
    std::size_t count_ = 0;
    std::size_t undefined_ = 0;
    double min_ = std::numeric_limits<double>::infinity();
    double max_ = -std::numeric_limits<double>::infinity();
};

}  // namespace dss

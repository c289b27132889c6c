#ifndef UQGAZE_METRICS_HPP
#define UQGAZE_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace uqgaze {

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t r = i; r <= j; ++r) ranks[order[r]] = rank;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.size() != ys.size() || xs.size() < 2)
        fail(ErrorCode::DegenerateInput, "correlation needs two equal-length sequences of length >= 2");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::DegenerateInput, "correlation of a constant sequence");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline bool all_equal(std::span<const double> v)
{
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>{}) == v.end();
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
inline double spearman(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.size() != ys.size() || xs.size() < 2)
        fail(ErrorCode::DegenerateInput, "spearman needs two equal-length sequences of length >= 2");
    if (all_equal(xs) || all_equal(ys)) fail(ErrorCode::DegenerateInput, "spearman of a constant sequence");
    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);
    return pearson(rx, ry);
}

/// Ordinary least-squares slope of ys on xs.
inline double ls_slope(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.size() != ys.size() || xs.size() < 2)
        fail(ErrorCode::DegenerateInput, "ls_slope needs two equal-length sequences of length >= 2");
    if (all_equal(xs)) fail(ErrorCode::DegenerateInput, "ls_slope: xs have zero variance");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

struct SlopeCorrelation {
    double slope = 0.0;       // k_i
    double correlation = 0.0; // C_i
};

inline constexpr double kDegenerateSlopeSum = 1e-9;

/// Slope-weighted mean correlation: sum(k_i C_i) / sum(|k_i|).
inline double effectiveness_score(std::span<const SlopeCorrelation> rows)
{
    if (rows.empty()) fail(ErrorCode::DegenerateInput, "effectiveness score needs at least one corruption");
    double numerator = 0.0, denominator = 0.0;
    for (const SlopeCorrelation& r : rows) {
        numerator += r.slope * r.correlation;
        denominator += std::abs(r.slope);
    }
    if (!(denominator > kDegenerateSlopeSum))
        fail(ErrorCode::DegenerateSlopes, "sum of |slope| is ~0: model is uniformly insensitive to every corruption");
    return numerator / denominator;
}

/// Angle in degrees between the gaze directions (cos p sin y, sin p, cos p cos y).
inline double angular_error(double pitch_a, double yaw_a, double pitch_b, double yaw_b)
{
    const double ax = std::cos(pitch_a) * std::sin(yaw_a), ay = std::sin(pitch_a), az = std::cos(pitch_a) * std::cos(yaw_a);
    const double bx = std::cos(pitch_b) * std::sin(yaw_b), by = std::sin(pitch_b), bz = std::cos(pitch_b) * std::cos(yaw_b);
    // atan2(|a x b|, a.b) equals arccos(a.b) for unit vectors and stays exact near 0.
    const double cx = ay * bz - az * by, cy = az * bx - ax * bz, cz = ax * by - ay * bx;
    const double cosine = std::clamp(ax * bx + ay * by + az * bz, -1.0, 1.0);
    return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), cosine) * 180.0 / std::numbers::pi;
}

} // namespace uqgaze

#endif

#ifndef UQGAZE_RENDER_HPP
#define UQGAZE_RENDER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "image.hpp"

namespace uqgaze {

inline constexpr double kMaxGazeRad = 25.0 * std::numbers::pi / 180.0;
/// Iris displacement per radian of gaze, in canvas pixels (both axes).
inline constexpr double kIrisPixelsPerRad = 40.0;

/// Appearance parameters drawn from a style seed.
struct EyeStyle {
    double skin = 0.6;
    double skin_gradient = 0.0;
    double sclera = 0.9;
    double iris = 0.2;
    double pupil = 0.05;
    double iris_radius = 8.0;
    double pupil_radius = 3.5;
    double sclera_half_width = 26.0;
    double sclera_half_height = 17.75;
    /// Fraction of the eye opening covered by the upper lid (0 open, 1 closed).
    double droop = 0.1;

    static EyeStyle from_seed(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
        EyeStyle s;
        s.skin = uniform(0.50, 0.72);
        s.skin_gradient = uniform(-0.06, 0.06);
        s.sclera = uniform(0.80, 0.95);
        s.iris = uniform(0.14, 0.28);
        s.pupil = uniform(0.03, 0.08);
        s.iris_radius = uniform(7.0, 9.0);
        s.pupil_radius = s.iris_radius * uniform(0.35, 0.5);
        s.sclera_half_width = uniform(25.0, 27.0);
        s.sclera_half_height = uniform(17.5, 18.0);
        // Mostly open eyes, with a tail of heavily drooping lids: the natural,
        // source-level occlusion that makes some clean samples hard.
        s.droop = uniform(0.0, 1.0) < 0.85 ? uniform(0.0, 0.3) : uniform(0.3, 0.9);
        return s;
    }
};

namespace detail {

inline double shade_eye(const EyeStyle& s, double px, double py, double iris_x, double iris_y, double half_width,
                        double droop)
{
    constexpr double cx = kCanvasWidth / 2.0, cy = kCanvasHeight / 2.0;
    const double skin = s.skin + s.skin_gradient * (py - cy) / cy;
    const double u = (px - cx) / half_width;
    const double v = (py - cy) / s.sclera_half_height;
    if (std::abs(u) >= 1.0) return skin;
    const double arc = s.sclera_half_height * std::sqrt(1.0 - u * u);
    const double lid_y = cy - arc * (1.0 - 2.0 * droop);
    if (u * u + v * v > 1.0 || py < lid_y) {
        // Darker lid margin just above the lid line.
        if (py < lid_y && py > lid_y - 1.5 && py > cy - arc - 1.5) return skin * 0.75;
        return skin;
    }
    const double dist = std::hypot(px - iris_x, py - iris_y);
    if (dist < s.pupil_radius) return s.pupil;
    if (dist < s.iris_radius) return s.iris;
    return s.sclera;
}

} // namespace detail

/// Renders a 72x120 eye canvas. The iris center sits at the canvas center plus
/// (40 px/rad * yaw, 40 px/rad * pitch) in (x, y) image coordinates; head yaw
/// narrows the eye opening and head pitch lowers the lid. 2x2 supersampled and
/// snapped to 8-bit levels.
inline ImageF32 render_eye(double gaze_pitch, double gaze_yaw, double head_pitch, double head_yaw,
                           std::uint64_t style_seed)
{
    if (!(std::abs(gaze_pitch) <= kMaxGazeRad + 1e-12) || !(std::abs(gaze_yaw) <= kMaxGazeRad + 1e-12))
        fail(ErrorCode::GazeOutOfRange, "gaze angles must be within +/-25 degrees");
    const EyeStyle style = EyeStyle::from_seed(style_seed);
    const double iris_x = kCanvasWidth / 2.0 + kIrisPixelsPerRad * gaze_yaw;
    const double iris_y = kCanvasHeight / 2.0 + kIrisPixelsPerRad * gaze_pitch;
    const double half_width = style.sclera_half_width * (1.0 - 0.5 * std::abs(head_yaw));
    const double droop = std::clamp(style.droop + 0.5 * head_pitch, 0.0, 0.95);

    ImageF32 canvas(kCanvasHeight, kCanvasWidth);
    constexpr double offsets[2] = {0.25, 0.75};
    for (std::size_t y = 0; y < kCanvasHeight; ++y)
        for (std::size_t x = 0; x < kCanvasWidth; ++x) {
            double sum = 0.0;
            for (double oy : offsets)
                for (double ox : offsets)
                    sum += detail::shade_eye(style, static_cast<double>(x) + ox, static_cast<double>(y) + oy, iris_x,
                                             iris_y, half_width, droop);
            canvas.at(y, x) = static_cast<float>(std::clamp(sum / 4.0, 0.0, 1.0));
        }
    quantize_u8(canvas);
    return canvas;
}

} // namespace uqgaze

#endif

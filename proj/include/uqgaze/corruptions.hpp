#ifndef UQGAZE_CORRUPTIONS_HPP
#define UQGAZE_CORRUPTIONS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "image.hpp"
#include "sample.hpp"

namespace uqgaze {

enum class CorruptionKind {
    gaussian_noise,
    shot_noise,
    impulse_noise,
    defocus_blur,
    glass_blur,
    motion_blur,
    zoom_blur,
    snow,
    fog,
    brightness,
    contrast,
    pixelate,
    offcrop_horizontal,
    offcrop_vertical,
};

inline constexpr std::array<CorruptionKind, 14> kAllCorruptions = {
    CorruptionKind::gaussian_noise, CorruptionKind::shot_noise,  CorruptionKind::impulse_noise,
    CorruptionKind::defocus_blur,   CorruptionKind::glass_blur,  CorruptionKind::motion_blur,
    CorruptionKind::zoom_blur,      CorruptionKind::snow,        CorruptionKind::fog,
    CorruptionKind::brightness,     CorruptionKind::contrast,    CorruptionKind::pixelate,
    CorruptionKind::offcrop_horizontal, CorruptionKind::offcrop_vertical,
};

inline constexpr int kMaxSeverity = 5;

constexpr std::string_view to_string(CorruptionKind kind) noexcept
{
    switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::shot_noise: return "shot_noise";
    case CorruptionKind::impulse_noise: return "impulse_noise";
    case CorruptionKind::defocus_blur: return "defocus_blur";
    case CorruptionKind::glass_blur: return "glass_blur";
    case CorruptionKind::motion_blur: return "motion_blur";
    case CorruptionKind::zoom_blur: return "zoom_blur";
    case CorruptionKind::snow: return "snow";
    case CorruptionKind::fog: return "fog";
    case CorruptionKind::brightness: return "brightness";
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::pixelate: return "pixelate";
    case CorruptionKind::offcrop_horizontal: return "offcrop_horizontal";
    case CorruptionKind::offcrop_vertical: return "offcrop_vertical";
    }
    return "unknown";
}

inline std::optional<CorruptionKind> parse_corruption_kind(std::string_view name)
{
    for (CorruptionKind k : kAllCorruptions)
        if (to_string(k) == name) return k;
    return std::nullopt;
}

constexpr bool is_offcrop(CorruptionKind kind) noexcept
{
    return kind == CorruptionKind::offcrop_horizontal || kind == CorruptionKind::offcrop_vertical;
}

constexpr bool is_blur(CorruptionKind kind) noexcept
{
    return kind == CorruptionKind::defocus_blur || kind == CorruptionKind::glass_blur ||
           kind == CorruptionKind::motion_blur || kind == CorruptionKind::zoom_blur;
}

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::gaussian_noise;
    int severity = 0;
    std::uint64_t seed = 0;
};

using SeverityRow = std::array<double, kMaxSeverity>;

/// Per-severity constants (index 0 is severity 1), tuned for 36x60 grayscale patches.
struct SeverityTables {
    SeverityRow gaussian_sigma{0.04, 0.08, 0.12, 0.18, 0.26};
    SeverityRow shot_photons{60, 25, 12, 5, 3};
    SeverityRow impulse_fraction{0.02, 0.06, 0.10, 0.17, 0.27};
    SeverityRow defocus_radius{1, 2, 3, 4, 6};
    SeverityRow glass_displacement{1, 1, 2, 2, 3};
    SeverityRow glass_iterations{1, 2, 2, 3, 3};
    SeverityRow motion_length{3, 5, 7, 9, 12};
    SeverityRow zoom_max{1.06, 1.11, 1.16, 1.21, 1.26};
    SeverityRow snow_density{0.01, 0.02, 0.04, 0.06, 0.09};
    SeverityRow snow_lift{0.03, 0.06, 0.09, 0.12, 0.15};
    SeverityRow fog_alpha{0.15, 0.25, 0.35, 0.45, 0.55};
    SeverityRow brightness_delta{0.1, 0.2, 0.3, 0.4, 0.5};
    SeverityRow contrast_factor{0.6, 0.45, 0.3, 0.2, 0.1};
    SeverityRow pixelate_scale{0.8, 0.65, 0.5, 0.4, 0.3};
    double zoom_step = 0.01;
    double glass_sigma = 0.6;

    struct Entry {
        const char* key;
        SeverityRow SeverityTables::*row;
    };

    /// Config keys for each table, `kind.parameter`.
    static constexpr std::array<Entry, 14> entries()
    {
        return {{
            {"gaussian_noise.sigma", &SeverityTables::gaussian_sigma},
            {"shot_noise.photons", &SeverityTables::shot_photons},
            {"impulse_noise.fraction", &SeverityTables::impulse_fraction},
            {"defocus_blur.radius", &SeverityTables::defocus_radius},
            {"glass_blur.displacement", &SeverityTables::glass_displacement},
            {"glass_blur.iterations", &SeverityTables::glass_iterations},
            {"motion_blur.length", &SeverityTables::motion_length},
            {"zoom_blur.max_zoom", &SeverityTables::zoom_max},
            {"snow.density", &SeverityTables::snow_density},
            {"snow.lift", &SeverityTables::snow_lift},
            {"fog.alpha", &SeverityTables::fog_alpha},
            {"brightness.delta", &SeverityTables::brightness_delta},
            {"contrast.factor", &SeverityTables::contrast_factor},
            {"pixelate.scale", &SeverityTables::pixelate_scale},
        }};
    }

    /// Applies any `kind.parameter = [s1, ..., s5]` overrides present in `cfg`.
    void apply_overrides(const KeyValueConfig& cfg)
    {
        for (const Entry& e : entries()) {
            if (!cfg.has(e.key)) continue;
            const std::vector<double> values = cfg.list(e.key);
            if (values.size() != kMaxSeverity)
                fail(ErrorCode::BadConfig, std::string(e.key) + " needs exactly 5 values");
            std::copy(values.begin(), values.end(), (this->*e.row).begin());
        }
        if (cfg.has("zoom_blur.step")) zoom_step = cfg.number("zoom_blur.step");
        if (cfg.has("glass_blur.sigma")) glass_sigma = cfg.number("glass_blur.sigma");
        if (!(zoom_step > 0.0)) fail(ErrorCode::BadConfig, "zoom_blur.step must be > 0");
    }
};

inline const SeverityTables& default_severity_tables()
{
    static const SeverityTables tables;
    return tables;
}

inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-eye seed: the corruption seed combined with the sample id and eye index
/// (0 = left, 1 = right), each hashed first so distinct triples do not collide.
inline std::uint64_t derive_eye_seed(std::uint64_t seed, std::uint64_t sample_id, int eye_index)
{
    return seed ^ mix64(sample_id) ^ mix64(0xe7e0000ULL + static_cast<std::uint64_t>(eye_index));
}

namespace detail {

/// Working buffer in double; values are clipped only at the very end.
struct Plane {
    std::size_t height = 0, width = 0;
    std::vector<double> v;

    explicit Plane(const ImageF32& img) : height(img.height), width(img.width), v(img.pixels.begin(), img.pixels.end()) {}
    Plane(std::size_t h, std::size_t w) : height(h), width(w), v(h * w, 0.0) {}

    double& at(std::size_t y, std::size_t x) { return v[y * width + x]; }
    [[nodiscard]] double at(std::size_t y, std::size_t x) const { return v[y * width + x]; }
    [[nodiscard]] double clamped(long y, long x) const
    {
        y = std::clamp(y, 0L, static_cast<long>(height) - 1);
        x = std::clamp(x, 0L, static_cast<long>(width) - 1);
        return v[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
    }
    /// Bilinear sample at continuous pixel coordinates, edge replicated.
    [[nodiscard]] double bilinear(double y, double x) const
    {
        const double fy = std::floor(y), fx = std::floor(x);
        const double ty = y - fy, tx = x - fx;
        const long iy = static_cast<long>(fy), ix = static_cast<long>(fx);
        return (1 - ty) * ((1 - tx) * clamped(iy, ix) + tx * clamped(iy, ix + 1)) +
               ty * ((1 - tx) * clamped(iy + 1, ix) + tx * clamped(iy + 1, ix + 1));
    }
    [[nodiscard]] double mean() const { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }
};

inline Plane convolve(const Plane& src, const std::vector<std::array<double, 3>>& taps /* dy, dx, weight */)
{
    Plane out(src.height, src.width);
    for (std::size_t y = 0; y < src.height; ++y)
        for (std::size_t x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (const auto& t : taps)
                acc += t[2] * src.clamped(static_cast<long>(y) + static_cast<long>(t[0]),
                                          static_cast<long>(x) + static_cast<long>(t[1]));
            out.at(y, x) = acc;
        }
    return out;
}

inline Plane gaussian_blur(const Plane& src, double sigma)
{
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> w(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) total += w[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    std::vector<std::array<double, 3>> h, v;
    for (int i = -radius; i <= radius; ++i) {
        h.push_back({0.0, static_cast<double>(i), w[i + radius] / total});
        v.push_back({static_cast<double>(i), 0.0, w[i + radius] / total});
    }
    return convolve(convolve(src, h), v);
}

inline Plane disk_blur(const Plane& src, double radius)
{
    const int r = static_cast<int>(std::ceil(radius));
    std::vector<std::array<double, 3>> taps;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= radius * radius) taps.push_back({double(dy), double(dx), 1.0});
    for (auto& t : taps) t[2] = 1.0 / static_cast<double>(taps.size());
    return convolve(src, taps);
}

inline Plane motion_blur(const Plane& src, double length, double angle)
{
    const int n = std::max(2, static_cast<int>(std::lround(length)));
    const double dx = std::cos(angle), dy = std::sin(angle);
    Plane out(src.height, src.width);
    for (std::size_t y = 0; y < src.height; ++y)
        for (std::size_t x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) - 0.5 * static_cast<double>(n - 1);
                acc += src.bilinear(static_cast<double>(y) + t * dy, static_cast<double>(x) + t * dx);
            }
            out.at(y, x) = acc / n;
        }
    return out;
}

/// Average of the image magnified about its center by 1, 1+step, ..., max_zoom.
inline Plane zoom_blur(const Plane& src, double max_zoom, double step)
{
    Plane out(src.height, src.width);
    const double cy = 0.5 * static_cast<double>(src.height - 1), cx = 0.5 * static_cast<double>(src.width - 1);
    int count = 0;
    for (int i = 0;; ++i) {
        const double z = 1.0 + step * i;
        if (z > max_zoom + 1e-9) break;
        for (std::size_t y = 0; y < src.height; ++y)
            for (std::size_t x = 0; x < src.width; ++x)
                out.at(y, x) += src.bilinear(cy + (static_cast<double>(y) - cy) / z, cx + (static_cast<double>(x) - cx) / z);
        ++count;
    }
    for (double& v : out.v) v /= count;
    return out;
}

/// Diamond-square fractal on a (2^k + 1) square, normalized to [0, 1].
inline std::vector<double> plasma_fractal(std::size_t size_pow2, double roughness, std::mt19937_64& rng)
{
    const std::size_t n = size_pow2 + 1;
    std::vector<double> m(n * n, 0.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto at = [&](std::size_t y, std::size_t x) -> double& { return m[(y % size_pow2) * n + (x % size_pow2)]; };
    double scale = 1.0;
    for (std::size_t step = size_pow2; step > 1; step /= 2) {
        const std::size_t half = step / 2;
        for (std::size_t y = 0; y < size_pow2; y += step)
            for (std::size_t x = 0; x < size_pow2; x += step)
                at(y + half, x + half) =
                    0.25 * (at(y, x) + at(y, x + step) + at(y + step, x) + at(y + step, x + step)) + scale * unit(rng);
        for (std::size_t y = 0; y < size_pow2; y += half)
            for (std::size_t x = (y / half) % 2 == 0 ? half : 0; x < size_pow2; x += step)
                at(y, x) = 0.25 * (at(y + size_pow2 - half, x) + at(y + half, x) + at(y, x + size_pow2 - half) +
                                   at(y, x + half)) +
                           scale * unit(rng);
        scale *= roughness;
    }
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    const double lo_v = *lo, range = std::max(*hi - *lo, 1e-12);
    for (double& v : m) v = (v - lo_v) / range;
    return m;
}

inline std::uint64_t kind_seed(std::uint64_t seed, CorruptionKind kind)
{
    return mix64(seed ^ (0xc0de0000ULL + static_cast<std::uint64_t>(kind)));
}

} // namespace detail

/// The corruption before clipping to [0,1], in double precision. Random draws
/// depend on (seed, kind) but not on severity, so a severity sweep reuses the
/// same noise realization at growing strength.
inline std::vector<double> corrupt_unclipped(const ImageF32& patch, const CorruptionSpec& spec,
                                             const SeverityTables& tables = default_severity_tables())
{
    if (is_offcrop(spec.kind))
        fail(ErrorCode::WrongCorruptionFamily,
             std::string(to_string(spec.kind)) + " operates on canvases; use off_crop or corrupt_sample");
    if (spec.severity < 0 || spec.severity > kMaxSeverity)
        fail(ErrorCode::BadConfig, "severity must be in 0..5, got " + std::to_string(spec.severity));
    require_shape(patch.same_shape(kPatchHeight, kPatchWidth), "corruptions expect a 36x60 patch");

    detail::Plane img(patch);
    if (spec.severity == 0) return img.v;
    const std::size_t s = static_cast<std::size_t>(spec.severity - 1);
    std::mt19937_64 rng(detail::kind_seed(spec.seed, spec.kind));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    switch (spec.kind) {
    case CorruptionKind::gaussian_noise: {
        std::normal_distribution<double> noise(0.0, 1.0);
        for (double& v : img.v) v += tables.gaussian_sigma[s] * noise(rng);
        break;
    }
    case CorruptionKind::shot_noise: {
        const double photons = tables.shot_photons[s];
        for (double& v : img.v) {
            std::poisson_distribution<int> counts(std::max(v, 0.0) * photons);
            v = static_cast<double>(counts(rng)) / photons;
        }
        break;
    }
    case CorruptionKind::impulse_noise:
        for (double& v : img.v) {
            const double u = unit(rng), salt = unit(rng);
            if (u < tables.impulse_fraction[s]) v = salt < 0.5 ? 0.0 : 1.0;
        }
        break;
    case CorruptionKind::defocus_blur:
        img = detail::disk_blur(img, tables.defocus_radius[s]);
        break;
    case CorruptionKind::glass_blur: {
        const long d = std::lround(tables.glass_displacement[s]);
        const int iterations = static_cast<int>(std::lround(tables.glass_iterations[s]));
        img = detail::gaussian_blur(img, tables.glass_sigma);
        std::uniform_int_distribution<long> shift(-d, d);
        const long h = static_cast<long>(img.height), w = static_cast<long>(img.width);
        for (int it = 0; it < iterations; ++it)
            for (long y = h - 1 - d; y >= d; --y)
                for (long x = w - 1 - d; x >= d; --x) {
                    const long dy = shift(rng), dx = shift(rng);
                    std::swap(img.v[static_cast<std::size_t>(y * w + x)],
                              img.v[static_cast<std::size_t>((y + dy) * w + (x + dx))]);
                }
        img = detail::gaussian_blur(img, tables.glass_sigma);
        break;
    }
    case CorruptionKind::motion_blur: {
        const double angle = (unit(rng) - 0.5) * 0.5 * std::numbers::pi; // within +/-45 degrees
        img = detail::motion_blur(img, tables.motion_length[s], angle);
        break;
    }
    case CorruptionKind::zoom_blur:
        img = detail::zoom_blur(img, tables.zoom_max[s], tables.zoom_step);
        break;
    case CorruptionKind::snow: {
        for (double& v : img.v) v += tables.snow_lift[s];
        // Streaks: short bright diagonal segments falling down-left to down-right.
        const std::size_t flakes =
            static_cast<std::size_t>(std::lround(tables.snow_density[s] * static_cast<double>(img.v.size())));
        const double angle = std::numbers::pi / 2 + (unit(rng) - 0.5) * 0.6;
        for (std::size_t f = 0; f < flakes; ++f) {
            const double y0 = unit(rng) * static_cast<double>(img.height);
            const double x0 = unit(rng) * static_cast<double>(img.width);
            const double len = 2.0 + 4.0 * unit(rng);
            const double intensity = 0.5 + 0.5 * unit(rng);
            for (double t = 0.0; t <= len; t += 0.5) {
                const long y = static_cast<long>(y0 + t * std::sin(angle));
                const long x = static_cast<long>(x0 + t * std::cos(angle));
                if (y < 0 || x < 0 || y >= static_cast<long>(img.height) || x >= static_cast<long>(img.width)) continue;
                double& px = img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                px = std::max(px, px + intensity * (1.0 - px));
            }
        }
        break;
    }
    case CorruptionKind::fog: {
        const std::vector<double> plasma = detail::plasma_fractal(64, 0.55, rng);
        const double alpha = tables.fog_alpha[s];
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                double& v = img.at(y, x);
                v = (1.0 - alpha) * v + alpha * (0.5 + 0.5 * plasma[y * 65 + x]);
            }
        break;
    }
    case CorruptionKind::brightness:
        for (double& v : img.v) v += tables.brightness_delta[s];
        break;
    case CorruptionKind::contrast: {
        const double mean = img.mean();
        for (double& v : img.v) v = (v - mean) * tables.contrast_factor[s] + mean;
        break;
    }
    case CorruptionKind::pixelate: {
        const std::size_t sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(tables.pixelate_scale[s] * img.height)));
        const std::size_t sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(tables.pixelate_scale[s] * img.width)));
        // Box downscale, then nearest-neighbour upscale through the same cell map.
        std::vector<double> sum(sh * sw, 0.0), cnt(sh * sw, 0.0);
        auto cell = [&](std::size_t y, std::size_t x) { return (y * sh / img.height) * sw + (x * sw / img.width); };
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                sum[cell(y, x)] += img.at(y, x);
                cnt[cell(y, x)] += 1.0;
            }
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) img.at(y, x) = sum[cell(y, x)] / cnt[cell(y, x)];
        break;
    }
    case CorruptionKind::offcrop_horizontal:
    case CorruptionKind::offcrop_vertical:
        break; // rejected above
    }
    return img.v;
}

/// Applies a general (non off-crop) corruption to a 36x60 patch; output clipped to [0,1].
/// Severity 0 returns the input unchanged.
inline ImageF32 apply_corruption(const ImageF32& patch, const CorruptionSpec& spec,
                                 const SeverityTables& tables = default_severity_tables())
{
    if (spec.severity == 0 && !is_offcrop(spec.kind)) {
        require_shape(patch.same_shape(kPatchHeight, kPatchWidth), "corruptions expect a 36x60 patch");
        return patch;
    }
    const std::vector<double> raw = corrupt_unclipped(patch, spec, tables);
    ImageF32 out(patch.height, patch.width);
    for (std::size_t i = 0; i < raw.size(); ++i) out.pixels[i] = static_cast<float>(std::clamp(raw[i], 0.0, 1.0));
    return out;
}

/// Crop-window displacement in pixels: round(severity / 5 * D), D = patch width
/// (horizontal) or height (vertical).
inline long offcrop_offset(CorruptionKind kind, int severity)
{
    if (!is_offcrop(kind)) fail(ErrorCode::WrongCorruptionFamily, "not an off-crop kind");
    if (severity < 0 || severity > kMaxSeverity)
        fail(ErrorCode::BadConfig, "severity must be in 0..5, got " + std::to_string(severity));
    const double full = kind == CorruptionKind::offcrop_horizontal ? double(kPatchWidth) : double(kPatchHeight);
    return std::lround(static_cast<double>(severity) / kMaxSeverity * full);
}

/// Slides the 36x60 crop window off the canvas center in the positive x (or y)
/// direction; pixels beyond the canvas are edge-replicated.
inline ImageF32 off_crop(const ImageF32& canvas, CorruptionKind kind, int severity)
{
    require_shape(canvas.same_shape(kCanvasHeight, kCanvasWidth), "off_crop expects a 72x120 canvas");
    const long offset = offcrop_offset(kind, severity);
    long top = static_cast<long>((kCanvasHeight - kPatchHeight) / 2);
    long left = static_cast<long>((kCanvasWidth - kPatchWidth) / 2);
    (kind == CorruptionKind::offcrop_horizontal ? left : top) += offset;
    return crop(canvas, top, left, kPatchHeight, kPatchWidth);
}

/// Same spec applied to both eyes with independent per-eye seeds; labels,
/// head angles and canvases are untouched.
inline EyeSample corrupt_sample(const EyeSample& sample, const CorruptionSpec& spec,
                                const SeverityTables& tables = default_severity_tables())
{
    EyeSample out = sample;
    if (is_offcrop(spec.kind)) {
        if (spec.severity == 0) return out;
        out.left = off_crop(sample.left_canvas, spec.kind, spec.severity);
        out.right = off_crop(sample.right_canvas, spec.kind, spec.severity);
        return out;
    }
    CorruptionSpec eye = spec;
    eye.seed = derive_eye_seed(spec.seed, sample.sample_id, 0);
    out.left = apply_corruption(sample.left, eye, tables);
    eye.seed = derive_eye_seed(spec.seed, sample.sample_id, 1);
    out.right = apply_corruption(sample.right, eye, tables);
    return out;
}

} // namespace uqgaze

#endif

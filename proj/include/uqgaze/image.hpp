#ifndef UQGAZE_IMAGE_HPP
#define UQGAZE_IMAGE_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace uqgaze {

inline constexpr std::size_t kCanvasHeight = 72;
inline constexpr std::size_t kCanvasWidth = 120;
inline constexpr std::size_t kPatchHeight = 36;
inline constexpr std::size_t kPatchWidth = 60;

/// Single-channel image with values in [0,1], row-major.
struct ImageF32 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;

    ImageF32() = default;
    ImageF32(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), pixels(h * w, fill) {}

    float& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    [[nodiscard]] float at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

    /// Pixel with coordinates clamped into the image (edge replication).
    [[nodiscard]] float clamped(long y, long x) const
    {
        y = std::clamp(y, 0L, static_cast<long>(height) - 1);
        x = std::clamp(x, 0L, static_cast<long>(width) - 1);
        return pixels[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
    }

    [[nodiscard]] bool same_shape(std::size_t h, std::size_t w) const { return height == h && width == w; }

    bool operator==(const ImageF32&) const = default;
};

inline std::uint8_t to_u8(float v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline float from_u8(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

/// Snaps every pixel to the nearest 8-bit level, so a later PGM round trip is exact.
inline void quantize_u8(ImageF32& image)
{
    for (float& v : image.pixels) v = from_u8(to_u8(v));
}

/// Window of the given size whose top-left corner is (top, left); pixels outside
/// the source are filled by edge replication.
inline ImageF32 crop(const ImageF32& source, long top, long left, std::size_t height, std::size_t width)
{
    ImageF32 out(height, width);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            out.at(y, x) = source.clamped(top + static_cast<long>(y), left + static_cast<long>(x));
    return out;
}

inline ImageF32 center_crop(const ImageF32& canvas)
{
    return crop(canvas, static_cast<long>((canvas.height - kPatchHeight) / 2),
                static_cast<long>((canvas.width - kPatchWidth) / 2), kPatchHeight, kPatchWidth);
}

inline ImageF32 mirror_horizontal(const ImageF32& image)
{
    ImageF32 out(image.height, image.width);
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < image.width; ++x) out.at(y, x) = image.at(y, image.width - 1 - x);
    return out;
}

// --- PGM (P5, maxval 255) ---------------------------------------------------

inline void write_pgm(const ImageF32& image, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    std::vector<char> bytes(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), bytes.begin(),
                   [](float v) { return static_cast<char>(to_u8(v)); });
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoFailure, "failed writing " + path.string());
}

namespace detail {

// Reads the next whitespace-delimited header token, skipping '#' comments.
inline std::string pgm_token(std::istream& in)
{
    std::string token;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            if (!token.empty()) break;
        } else {
            token.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return token;
}

inline std::size_t pgm_number(std::istream& in, const std::string& path)
{
    const std::string token = pgm_token(in);
    if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos || token.size() > 9)
        fail(ErrorCode::BadImageFile, path + ": malformed PGM header");
    return static_cast<std::size_t>(std::stoul(token));
}

} // namespace detail

inline ImageF32 read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
    if (detail::pgm_token(in) != "P5") fail(ErrorCode::BadImageFile, path.string() + ": not a binary PGM (P5)");
    const std::size_t width = detail::pgm_number(in, path.string());
    const std::size_t height = detail::pgm_number(in, path.string());
    const std::size_t maxval = detail::pgm_number(in, path.string());
    if (width == 0 || height == 0) fail(ErrorCode::BadImageFile, path.string() + ": zero image dimension");
    if (maxval != 255) fail(ErrorCode::BadImageFile, path.string() + ": maxval must be 255");

    std::vector<char> bytes(width * height);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        fail(ErrorCode::BadImageFile, path.string() + ": truncated pixel data");
    ImageF32 image(height, width);
    for (std::size_t i = 0; i < bytes.size(); ++i) image.pixels[i] = from_u8(static_cast<std::uint8_t>(bytes[i]));
    return image;
}

} // namespace uqgaze

#endif

#ifndef UQGAZE_DATASET_HPP
#define UQGAZE_DATASET_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "parallel.hpp"
#include "render.hpp"
#include "sample.hpp"

namespace uqgaze {

inline constexpr double kHeadAngleRange = 0.2;
inline constexpr const char* kManifestHeader =
    "sample_id,left,right,left_canvas,right_canvas,head_pitch,head_yaw,gaze_pitch,gaze_yaw";

struct ManifestRow {
    std::uint64_t sample_id = 0;
    std::string left, right, left_canvas, right_canvas; // relative to the manifest directory
    double head_pitch = 0.0, head_yaw = 0.0, gaze_pitch = 0.0, gaze_yaw = 0.0;
};

struct DatasetManifest {
    std::filesystem::path path;
    std::vector<ManifestRow> rows;
};

inline std::string format_g9(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Label and style draws for one sample; drawn sequentially from the dataset seed.
struct SampleDraw {
    double gaze_pitch, gaze_yaw, head_pitch, head_yaw;
    std::uint64_t left_style, right_style;
};

/// Labels are rounded to the manifest's 9 significant digits, so a dataset read
/// back from disk equals the in-memory one exactly.
inline double manifest_round(double v) { return std::stod(format_g9(v)); }

inline std::vector<SampleDraw> draw_samples(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gaze(-kMaxGazeRad, kMaxGazeRad);
    std::uniform_real_distribution<double> head(-kHeadAngleRange, kHeadAngleRange);
    std::vector<SampleDraw> draws(n);
    for (SampleDraw& d : draws) {
        d.gaze_pitch = manifest_round(gaze(rng));
        d.gaze_yaw = manifest_round(gaze(rng));
        d.head_pitch = manifest_round(head(rng));
        d.head_yaw = manifest_round(head(rng));
        d.right_style = rng();
        d.left_style = rng();
    }
    return draws;
}

/// Renders a sample. The left eye is drawn with its own style and mirrored.
inline EyeSample render_sample(const SampleDraw& d, std::uint64_t sample_id)
{
    EyeSample s;
    s.sample_id = sample_id;
    s.gaze_pitch = d.gaze_pitch;
    s.gaze_yaw = d.gaze_yaw;
    s.head_pitch = d.head_pitch;
    s.head_yaw = d.head_yaw;
    s.right_canvas = render_eye(d.gaze_pitch, d.gaze_yaw, d.head_pitch, d.head_yaw, d.right_style);
    s.left_canvas = mirror_horizontal(render_eye(d.gaze_pitch, d.gaze_yaw, d.head_pitch, d.head_yaw, d.left_style));
    s.right = center_crop(s.right_canvas);
    s.left = center_crop(s.left_canvas);
    return s;
}

/// In-memory synthetic dataset; ids are 0..n-1.
inline std::vector<EyeSample> synthesize_samples(std::size_t n, std::uint64_t seed, unsigned threads = 1)
{
    if (n == 0) fail(ErrorCode::EmptyDataset, "dataset size must be >= 1");
    const std::vector<SampleDraw> draws = draw_samples(n, seed);
    std::vector<EyeSample> samples(n);
    parallel_for(n, threads, [&](std::size_t i) { samples[i] = render_sample(draws[i], i); });
    return samples;
}

/// Writes four PGMs per sample under out_dir/images and out_dir/manifest.csv.
inline DatasetManifest write_dataset(const std::vector<EyeSample>& samples, const std::filesystem::path& out_dir,
                                     unsigned threads = 1)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

    DatasetManifest manifest{out_dir / "manifest.csv", std::vector<ManifestRow>(samples.size())};
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const EyeSample& s = samples[i];
        char stem[32];
        std::snprintf(stem, sizeof stem, "%06llu", static_cast<unsigned long long>(s.sample_id));
        ManifestRow row;
        row.sample_id = s.sample_id;
        row.left = std::string("images/") + stem + "_left.pgm";
        row.right = std::string("images/") + stem + "_right.pgm";
        row.left_canvas = std::string("images/") + stem + "_left_canvas.pgm";
        row.right_canvas = std::string("images/") + stem + "_right_canvas.pgm";
        row.head_pitch = s.head_pitch;
        row.head_yaw = s.head_yaw;
        row.gaze_pitch = s.gaze_pitch;
        row.gaze_yaw = s.gaze_yaw;
        write_pgm(s.left, out_dir / row.left);
        write_pgm(s.right, out_dir / row.right);
        write_pgm(s.left_canvas, out_dir / row.left_canvas);
        write_pgm(s.right_canvas, out_dir / row.right_canvas);
        manifest.rows[i] = std::move(row);
    });

    std::ofstream out(manifest.path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + manifest.path.string());
    out << kManifestHeader << '\n';
    for (const ManifestRow& r : manifest.rows)
        out << r.sample_id << ',' << r.left << ',' << r.right << ',' << r.left_canvas << ',' << r.right_canvas << ','
            << format_g9(r.head_pitch) << ',' << format_g9(r.head_yaw) << ',' << format_g9(r.gaze_pitch) << ','
            << format_g9(r.gaze_yaw) << '\n';
    if (!out) fail(ErrorCode::IoFailure, "failed writing " + manifest.path.string());
    return manifest;
}

/// Synthesizes n samples and writes them to disk.
inline DatasetManifest generate_dataset(std::size_t n, std::uint64_t seed, const std::filesystem::path& out_dir,
                                        unsigned threads = 1)
{
    return write_dataset(synthesize_samples(n, seed, threads), out_dir, threads);
}

inline DatasetManifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoFailure, "cannot open manifest " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader)
        fail(ErrorCode::IoFailure, path.string() + ": unexpected manifest header");
    DatasetManifest manifest{path, {}};
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 9) fail(ErrorCode::IoFailure, path.string() + ": malformed row: " + line);
        ManifestRow r;
        try {
            r.sample_id = std::stoull(cells[0]);
            r.head_pitch = std::stod(cells[5]);
            r.head_yaw = std::stod(cells[6]);
            r.gaze_pitch = std::stod(cells[7]);
            r.gaze_yaw = std::stod(cells[8]);
        } catch (const std::exception&) {
            fail(ErrorCode::IoFailure, path.string() + ": malformed number in row: " + line);
        }
        r.left = cells[1];
        r.right = cells[2];
        r.left_canvas = cells[3];
        r.right_canvas = cells[4];
        if (r.sample_id != manifest.rows.size())
            fail(ErrorCode::IoFailure, path.string() + ": sample ids must be contiguous from 0");
        manifest.rows.push_back(std::move(r));
    }
    if (manifest.rows.empty()) fail(ErrorCode::EmptyDataset, path.string() + ": manifest has no rows");
    return manifest;
}

/// Loads every sample referenced by a manifest (paths relative to its directory).
inline std::vector<EyeSample> load_dataset(const std::filesystem::path& manifest_path, unsigned threads = 1)
{
    const DatasetManifest manifest = read_manifest(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();
    std::vector<EyeSample> samples(manifest.rows.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const ManifestRow& r = manifest.rows[i];
        EyeSample& s = samples[i];
        s.sample_id = r.sample_id;
        s.head_pitch = r.head_pitch;
        s.head_yaw = r.head_yaw;
        s.gaze_pitch = r.gaze_pitch;
        s.gaze_yaw = r.gaze_yaw;
        s.left = read_pgm(base / r.left);
        s.right = read_pgm(base / r.right);
        s.left_canvas = read_pgm(base / r.left_canvas);
        s.right_canvas = read_pgm(base / r.right_canvas);
        if (!s.left.same_shape(kPatchHeight, kPatchWidth) || !s.right.same_shape(kPatchHeight, kPatchWidth) ||
            !s.left_canvas.same_shape(kCanvasHeight, kCanvasWidth) ||
            !s.right_canvas.same_shape(kCanvasHeight, kCanvasWidth))
            fail(ErrorCode::ShapeMismatch, "sample " + std::to_string(r.sample_id) + " has wrong image sizes");
    });
    return samples;
}

/// Accepts a manifest file or a directory containing manifest.csv.
inline std::filesystem::path resolve_manifest(const std::filesystem::path& p)
{
    return std::filesystem::is_directory(p) ? p / "manifest.csv" : p;
}

} // namespace uqgaze

#endif

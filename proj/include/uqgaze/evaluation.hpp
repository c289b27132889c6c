#ifndef UQGAZE_EVALUATION_HPP
#define UQGAZE_EVALUATION_HPP

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "corruptions.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "parallel.hpp"

namespace uqgaze {

/// Anything that maps a sample to a gaze estimate.
template <typename P>
concept SamplePredictor = requires(const P& p, const EyeSample& s) {
    { p(s) } -> std::convertible_to<GazeEstimate>;
};

/// Test doubles may also see the corruption that produced the sample.
template <typename P>
concept SpecAwarePredictor = requires(const P& p, const EyeSample& s, const CorruptionSpec& spec) {
    { p(s, spec) } -> std::convertible_to<GazeEstimate>;
};

template <typename P>
concept GazePredictor = SamplePredictor<P> || SpecAwarePredictor<P>;

/// Binds trained weights as a predictor.
template <typename T>
struct ModelPredictor {
    const ModelParams<T>* model;
    GazeEstimate operator()(const EyeSample& s) const { return predict(*model, s); }
};

template <typename T>
ModelPredictor(const ModelParams<T>*) -> ModelPredictor<T>;

namespace detail {

template <GazePredictor P>
GazeEstimate run_predictor(const P& p, const EyeSample& s, const CorruptionSpec& spec)
{
    if constexpr (SpecAwarePredictor<P>)
        return p(s, spec);
    else
        return p(s);
}

} // namespace detail

struct SweepConfig {
    /// Fraction of lowest-uncertainty samples eligible for selection.
    double quantile = 0.20;
    /// Images drawn from the eligible pool.
    std::size_t image_count = 100;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    SeverityTables tables{};
};

struct SweepRow {
    std::uint64_t sample_id = 0;
    CorruptionKind kind = CorruptionKind::gaussian_noise;
    int severity = 0;
    double overall_uncertainty = 0.0;
    double angular_error_deg = 0.0;
};

struct SeveritySweep {
    std::vector<CorruptionKind> kinds;
    std::vector<std::uint64_t> selected_ids;
    /// Ordered by (selected sample, kind, severity).
    std::vector<SweepRow> rows;
    double quantile = 0.0;
    std::uint64_t seed = 0;
};

template <GazePredictor P>
std::vector<GazeEstimate> predict_all(const P& predictor, std::span<const EyeSample> dataset, unsigned threads = 1)
{
    std::vector<GazeEstimate> out(dataset.size());
    const CorruptionSpec clean{};
    parallel_for(dataset.size(), threads,
                 [&](std::size_t i) { out[i] = detail::run_predictor(predictor, dataset[i], clean); });
    return out;
}

/// Picks m low-uncertainty images, then corrupts each with every kind at
/// severities 0..5 and records uncertainty and angular error.
template <GazePredictor P>
SeveritySweep run_severity_sweep(const P& predictor, std::span<const EyeSample> dataset,
                                 std::span<const CorruptionKind> kinds, const SweepConfig& config)
{
    if (!(config.quantile > 0.0 && config.quantile <= 1.0)) fail(ErrorCode::BadConfig, "quantile must be in (0, 1]");
    if (config.image_count == 0) fail(ErrorCode::BadConfig, "image count must be >= 1");
    if (kinds.empty()) fail(ErrorCode::BadConfig, "no corruption kinds selected");
    if (dataset.empty()) fail(ErrorCode::InsufficientCleanImages, "dataset is empty");

    const std::vector<GazeEstimate> clean = predict_all(predictor, dataset, config.threads);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return clean[a].overall_uncertainty < clean[b].overall_uncertainty;
    });
    const auto eligible = static_cast<std::size_t>(std::floor(config.quantile * static_cast<double>(dataset.size())));
    if (eligible < config.image_count)
        fail(ErrorCode::InsufficientCleanImages,
             "only " + std::to_string(eligible) + " samples in the lowest-uncertainty " +
                 std::to_string(config.quantile) + " fraction, need " + std::to_string(config.image_count));
    order.resize(eligible);
    std::mt19937_64 rng(config.seed ^ 0x5e1ec7ULL);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(config.image_count);
    std::sort(order.begin(), order.end());

    SeveritySweep sweep;
    sweep.kinds.assign(kinds.begin(), kinds.end());
    sweep.quantile = config.quantile;
    sweep.seed = config.seed;
    for (std::size_t idx : order) sweep.selected_ids.push_back(dataset[idx].sample_id);

    constexpr std::size_t levels = kMaxSeverity + 1;
    sweep.rows.resize(order.size() * kinds.size() * levels);
    parallel_for(sweep.rows.size(), config.threads, [&](std::size_t task) {
        const std::size_t image = task / (kinds.size() * levels);
        const std::size_t kind = (task / levels) % kinds.size();
        const int severity = static_cast<int>(task % levels);
        const EyeSample& sample = dataset[order[image]];
        const CorruptionSpec spec{kinds[kind], severity, config.seed};
        const EyeSample corrupted = corrupt_sample(sample, spec, config.tables);
        const GazeEstimate e = detail::run_predictor(predictor, corrupted, spec);
        sweep.rows[task] = {sample.sample_id, kinds[kind], severity, e.overall_uncertainty,
                            angular_error(e.pitch, e.yaw, sample.gaze_pitch, sample.gaze_yaw)};
    });
    return sweep;
}

struct CorruptionResult {
    CorruptionKind kind = CorruptionKind::gaussian_noise;
    double correlation = 0.0; // C_i, uncertainty vs severity
    double slope = 0.0;       // k_i, uncertainty vs severity
    double error_correlation = 0.0;
    double error_slope = 0.0;
    std::array<double, kMaxSeverity + 1> mean_uncertainty{};
    std::array<double, kMaxSeverity + 1> mean_error_deg{};
};

struct EffectivenessReport {
    std::vector<CorruptionResult> rows;
    /// Slope-weighted severity/uncertainty correlation.
    double score = 0.0;
    /// Same aggregate with angular error in place of uncertainty.
    double baseline_error_severity_score = 0.0;
    /// Spearman between uncertainty and angular error over corrupted rows (severity >= 1).
    double baseline_uncertainty_error_rho = 0.0;
    std::size_t image_count = 0;
    double quantile = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {
inline bool is_constant(const std::vector<double>& v)
{
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}
} // namespace detail

/// Per kind, pools (severity, value) pairs over all images, severity 0 included.
/// A kind whose response is constant contributes k = 0, C = 0.
inline EffectivenessReport evaluate_effectiveness(const SeveritySweep& sweep)
{
    EffectivenessReport report;
    report.image_count = sweep.selected_ids.size();
    report.quantile = sweep.quantile;
    report.seed = sweep.seed;
    std::vector<SlopeCorrelation> uncertainty_terms, error_terms;
    for (CorruptionKind kind : sweep.kinds) {
        std::vector<double> severity, uncertainty, error;
        std::array<double, kMaxSeverity + 1> count{};
        CorruptionResult r;
        r.kind = kind;
        for (const SweepRow& row : sweep.rows) {
            if (row.kind != kind) continue;
            severity.push_back(row.severity);
            uncertainty.push_back(row.overall_uncertainty);
            error.push_back(row.angular_error_deg);
            r.mean_uncertainty[static_cast<std::size_t>(row.severity)] += row.overall_uncertainty;
            r.mean_error_deg[static_cast<std::size_t>(row.severity)] += row.angular_error_deg;
            count[static_cast<std::size_t>(row.severity)] += 1.0;
        }
        for (std::size_t s = 0; s < count.size(); ++s) {
            if (count[s] == 0.0)
                fail(ErrorCode::DegenerateInput, std::string(to_string(kind)) + ": missing severity " + std::to_string(s));
            r.mean_uncertainty[s] /= count[s];
            r.mean_error_deg[s] /= count[s];
        }
        try {
            if (!detail::is_constant(uncertainty)) {
                r.correlation = spearman(severity, uncertainty);
                r.slope = ls_slope(severity, uncertainty);
            }
            if (!detail::is_constant(error)) {
                r.error_correlation = spearman(severity, error);
                r.error_slope = ls_slope(severity, error);
            }
        } catch (const Error& e) {
            throw Error(e.code(), std::string("corruption ") + std::string(to_string(kind)) + ": " + e.what());
        }
        uncertainty_terms.push_back({r.slope, r.correlation});
        error_terms.push_back({r.error_slope, r.error_correlation});
        report.rows.push_back(r);
    }
    report.score = effectiveness_score(uncertainty_terms);
    report.baseline_error_severity_score = effectiveness_score(error_terms);

    std::vector<double> u, e;
    for (const SweepRow& row : sweep.rows)
        if (row.severity > 0) {
            u.push_back(row.overall_uncertainty);
            e.push_back(row.angular_error_deg);
        }
    report.baseline_uncertainty_error_rho = spearman(u, e);
    return report;
}

struct QuantileStats {
    std::size_t quantile = 0; // 1 = most confident
    double mean_uncertainty = 0.0;
    double mean_angular_error_deg = 0.0;
    /// Ids of the five highest-uncertainty members, most uncertain first.
    std::vector<std::uint64_t> top_ids;
    std::vector<std::uint64_t> member_ids;
};

/// Sorts by overall uncertainty (ascending) and splits into k equal groups;
/// the remainder goes to the last group.
template <GazePredictor P>
std::vector<QuantileStats> quantile_report(const P& predictor, std::span<const EyeSample> dataset, std::size_t k,
                                           unsigned threads = 1)
{
    if (k < 2) fail(ErrorCode::BadConfig, "quantile count must be >= 2");
    if (dataset.size() < k)
        fail(ErrorCode::InsufficientData,
             "need at least " + std::to_string(k) + " samples, got " + std::to_string(dataset.size()));
    const std::vector<GazeEstimate> est = predict_all(predictor, dataset, threads);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return est[a].overall_uncertainty < est[b].overall_uncertainty; });

    const std::size_t base = dataset.size() / k;
    std::vector<QuantileStats> out;
    for (std::size_t q = 0; q < k; ++q) {
        const std::size_t begin = q * base;
        const std::size_t end = q + 1 == k ? dataset.size() : begin + base;
        QuantileStats stats;
        stats.quantile = q + 1;
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t idx = order[i];
            const EyeSample& s = dataset[idx];
            stats.mean_uncertainty += est[idx].overall_uncertainty;
            stats.mean_angular_error_deg += angular_error(est[idx].pitch, est[idx].yaw, s.gaze_pitch, s.gaze_yaw);
            stats.member_ids.push_back(s.sample_id);
        }
        const double n = static_cast<double>(end - begin);
        stats.mean_uncertainty /= n;
        stats.mean_angular_error_deg /= n;
        for (std::size_t i = end; i > begin && stats.top_ids.size() < 5; --i)
            stats.top_ids.push_back(dataset[order[i - 1]].sample_id);
        out.push_back(std::move(stats));
    }
    return out;
}

// --- CSV emission -----------------------------------------------------------

inline std::ofstream open_csv(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
    return out;
}

inline void write_sweep_csv(const SeveritySweep& sweep, const std::filesystem::path& path)
{
    std::ofstream out = open_csv(path);
    out << "sample_id,kind,severity,overall_uncertainty,angular_error_deg\n";
    for (const SweepRow& r : sweep.rows)
        out << r.sample_id << ',' << to_string(r.kind) << ',' << r.severity << ',' << format_g9(r.overall_uncertainty)
            << ',' << format_g9(r.angular_error_deg) << '\n';
}

/// One row per corruption: kind, C_i, k_i, mean uncertainty at severities 0..5.
inline void write_corruption_csv(const EffectivenessReport& report, const std::filesystem::path& path)
{
    std::ofstream out = open_csv(path);
    out << "kind,correlation,slope";
    for (int s = 0; s <= kMaxSeverity; ++s) out << ",mean_uncertainty_s" << s;
    out << '\n';
    for (const CorruptionResult& r : report.rows) {
        out << to_string(r.kind) << ',' << format_g9(r.correlation) << ',' << format_g9(r.slope);
        for (double m : r.mean_uncertainty) out << ',' << format_g9(m);
        out << '\n';
    }
}

/// Error-vs-severity counterpart of the per-corruption CSV (the baseline's inputs).
inline void write_corruption_error_csv(const EffectivenessReport& report, const std::filesystem::path& path)
{
    std::ofstream out = open_csv(path);
    out << "kind,error_correlation,error_slope";
    for (int s = 0; s <= kMaxSeverity; ++s) out << ",mean_angular_error_deg_s" << s;
    out << '\n';
    for (const CorruptionResult& r : report.rows) {
        out << to_string(r.kind) << ',' << format_g9(r.error_correlation) << ',' << format_g9(r.error_slope);
        for (double m : r.mean_error_deg) out << ',' << format_g9(m);
        out << '\n';
    }
}

inline void write_summary_csv(const EffectivenessReport& report, const std::filesystem::path& path)
{
    std::ofstream out = open_csv(path);
    out << "effectiveness_score,baseline_error_severity_score,baseline_uncertainty_error_rho,image_count,quantile,"
           "seed,kind_count\n";
    out << format_g9(report.score) << ',' << format_g9(report.baseline_error_severity_score) << ','
        << format_g9(report.baseline_uncertainty_error_rho) << ',' << report.image_count << ','
        << format_g9(report.quantile) << ',' << report.seed << ',' << report.rows.size() << '\n';
}

inline void write_quantile_csv(const std::vector<QuantileStats>& stats, const std::filesystem::path& path)
{
    std::ofstream out = open_csv(path);
    out << "quantile,mean_uncertainty,mean_angular_error_deg,top5_sample_ids\n";
    for (const QuantileStats& q : stats) {
        out << q.quantile << ',' << format_g9(q.mean_uncertainty) << ',' << format_g9(q.mean_angular_error_deg) << ',';
        for (std::size_t i = 0; i < q.top_ids.size(); ++i) out << (i ? ";" : "") << q.top_ids[i];
        out << '\n';
    }
}

} // namespace uqgaze

#endif

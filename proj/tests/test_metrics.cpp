#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "uqgaze/uqgaze.hpp"

using namespace uqgaze;
namespace fs = std::filesystem;

namespace {

std::vector<double> oracle_ranks(const std::vector<double>& v)
{
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t less = 0, equal = 0;
        for (double w : v) {
            less += w < v[i];
            equal += w == v[i];
        }
        r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return r;
}

double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

fs::path temp_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("uqgaze_metrics_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Uncertainty equal to c times the applied severity; gaze error grows with severity.
struct ScaledSeverityStub {
    double c = 1.0;
    GazeEstimate operator()(const EyeSample& s, const CorruptionSpec& spec) const
    {
        GazeEstimate e;
        e.pitch = s.gaze_pitch + 0.01 * spec.severity;
        e.yaw = s.gaze_yaw;
        e.sigma2_pitch = e.sigma2_yaw = e.overall_uncertainty = c * spec.severity;
        return e;
    }
};

/// Uncertainty read off the sample id.
struct IdStub {
    GazeEstimate operator()(const EyeSample& s) const
    {
        GazeEstimate e;
        e.pitch = s.gaze_pitch;
        e.yaw = s.gaze_yaw;
        e.overall_uncertainty = static_cast<double>(s.sample_id) + 1.0;
        return e;
    }
};

const std::vector<EyeSample>& dataset()
{
    static const std::vector<EyeSample> d = synthesize_samples(20, 31);
    return d;
}

std::vector<CorruptionKind> all_kinds() { return {kAllCorruptions.begin(), kAllCorruptions.end()}; }

} // namespace

TEST(Spearman, MonotoneAndReversed)
{
    const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 4, 9, 16, 25}, r{25, 16, 9, 4, 1};
    EXPECT_EQ(spearman(x, y), 1.0);
    EXPECT_EQ(spearman(x, r), -1.0);
}

TEST(Spearman, TiedCaseMatchesOracle)
{
    const std::vector<double> x{1, 2, 2, 3}, y{1, 2, 3, 4};
    EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
    EXPECT_EQ(spearman(x, y), oracle_pearson(oracle_ranks(x), oracle_ranks(y)));
}

TEST(Spearman, RandomTiedArraysMatchOracleExactly)
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> len(2, 40), levels(1, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = static_cast<std::size_t>(len(rng));
        std::uniform_int_distribution<int> vx(0, levels(rng)), vy(0, levels(rng));
        std::vector<double> x(n), y(n);
        do {
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = vx(rng);
                y[i] = vy(rng);
            }
        } while (all_equal(x) || all_equal(y));
        ASSERT_EQ(average_ranks(x), oracle_ranks(x));
        ASSERT_EQ(spearman(x, y), oracle_pearson(oracle_ranks(x), oracle_ranks(y))) << "trial " << trial;
    }
}

TEST(Spearman, DegenerateInputs)
{
    const std::vector<double> one{1}, c{2, 2, 2}, x{1, 2, 3};
    for (auto [a, b] : {std::pair{one, one}, std::pair{c, x}, std::pair{x, c}, std::pair{x, one}}) {
        try {
            spearman(a, b);
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::DegenerateInput);
        }
    }
}

TEST(LsSlope, ClosedForms)
{
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    EXPECT_NEAR(ls_slope(x, y), 2.0, 1e-15);
    EXPECT_EQ(ls_slope(x, std::vector<double>(5, 3.0)), 0.0);
    EXPECT_THROW(ls_slope(std::vector<double>(4, 1.0), x), Error);
}

TEST(LsSlope, RandomCaseMatchesNormalEquations)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> d(0, 3);
    std::vector<double> x(20), y(20);
    for (std::size_t i = 0; i < 20; ++i) {
        x[i] = d(rng);
        y[i] = d(rng);
    }
    // k = (n Σxy − Σx Σy) / (n Σx² − (Σx)²), accumulated in long double.
    long double sx = 0, sy = 0, sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        sx += x[i];
        sy += y[i];
        sxy += (long double)x[i] * y[i];
        sxx += (long double)x[i] * x[i];
    }
    const long double k = (20 * sxy - sx * sy) / (20 * sxx - sx * sx);
    EXPECT_NEAR(ls_slope(x, y), static_cast<double>(k), 1e-9);
}

TEST(Effectiveness, HandCases)
{
    const std::vector<SlopeCorrelation> one{{1.0, 1.0}};
    EXPECT_NEAR(effectiveness_score(one), 1.0, 1e-12);
    const std::vector<SlopeCorrelation> two{{2.0, 1.0}, {-1.0, 0.5}};
    EXPECT_NEAR(effectiveness_score(two), 0.5, 1e-12);
}

TEST(Effectiveness, DegenerateSlopesIsAnError)
{
    const std::vector<SlopeCorrelation> flat{{0.0, 0.3}, {1e-12, 1.0}};
    try {
        effectiveness_score(flat);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateSlopes);
        EXPECT_NE(std::string(e.what()).find("uniformly insensitive"), std::string::npos);
    }
}

TEST(AngularError, Cases)
{
    EXPECT_EQ(angular_error(0.1, 0.2, 0.1, 0.2), 0.0);
    EXPECT_NEAR(angular_error(0, 0, 0, std::numbers::pi / 2), 90.0, 1e-12);
    auto vec = [](long double p, long double y) {
        return std::array<long double, 3>{cosl(p) * sinl(y), sinl(p), cosl(p) * cosl(y)};
    };
    const auto a = vec(0.1L, 0.2L), b = vec(0.15L, 0.25L);
    const long double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    const long double expected = acosl(dot) * 180.0L / 3.141592653589793238462643383279L;
    EXPECT_NEAR(angular_error(0.1, 0.2, 0.15, 0.25), static_cast<double>(expected), 1e-9);
    EXPECT_EQ(angular_error(0.3, -0.1, 0.0, 0.4), angular_error(0.0, 0.4, 0.3, -0.1));
}

TEST(Sweep, StubRowsReproduceSeverity)
{
    SweepConfig cfg;
    cfg.quantile = 0.5;
    cfg.image_count = 2;
    cfg.seed = 4;
    const std::vector<CorruptionKind> kinds{CorruptionKind::contrast, CorruptionKind::motion_blur};
    const SeveritySweep sweep = run_severity_sweep(ScaledSeverityStub{}, dataset(), kinds, cfg);
    ASSERT_EQ(sweep.rows.size(), 24u);
    ASSERT_EQ(sweep.selected_ids.size(), 2u);
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        const SweepRow& r = sweep.rows[i];
        EXPECT_EQ(r.overall_uncertainty, static_cast<double>(r.severity));
        EXPECT_EQ(r.severity, static_cast<int>(i % 6));
        EXPECT_EQ(r.kind, kinds[(i / 6) % 2]);
        EXPECT_EQ(r.sample_id, sweep.selected_ids[i / 12]);
    }
}

TEST(Sweep, SelectsFromLowestUncertaintyFraction)
{
    SweepConfig cfg;
    cfg.quantile = 0.25; // ids 0..4 have the lowest uncertainty
    cfg.image_count = 3;
    const std::vector<CorruptionKind> kinds{CorruptionKind::fog};
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        cfg.seed = seed;
        const SeveritySweep sweep = run_severity_sweep(IdStub{}, dataset(), kinds, cfg);
        ASSERT_EQ(sweep.selected_ids.size(), 3u);
        EXPECT_TRUE(std::is_sorted(sweep.selected_ids.begin(), sweep.selected_ids.end()));
        for (auto id : sweep.selected_ids) EXPECT_LT(id, 5u);
    }
    cfg.image_count = 6;
    try {
        run_severity_sweep(IdStub{}, dataset(), kinds, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientCleanImages);
    }
}

TEST(Sweep, SeverityZeroRowsEqualCleanPredictions)
{
    const auto model = ModelParams<float>::he_uniform(5);
    SweepConfig cfg;
    cfg.quantile = 0.5;
    cfg.image_count = 3;
    const SeveritySweep sweep = run_severity_sweep(ModelPredictor{&model}, dataset(), all_kinds(), cfg);
    ASSERT_EQ(sweep.rows.size(), 3u * 14u * 6u);
    for (const SweepRow& r : sweep.rows) {
        if (r.severity != 0) continue;
        const EyeSample& s = dataset()[r.sample_id];
        const GazeEstimate e = predict(model, s);
        ASSERT_EQ(r.overall_uncertainty, e.overall_uncertainty);
        ASSERT_EQ(r.angular_error_deg, angular_error(e.pitch, e.yaw, s.gaze_pitch, s.gaze_yaw));
    }
}

TEST(Sweep, ThreadCountDoesNotChangeRows)
{
    const auto model = ModelParams<float>::he_uniform(6);
    SweepConfig cfg;
    cfg.quantile = 0.5;
    cfg.image_count = 2;
    const std::vector<CorruptionKind> kinds{CorruptionKind::snow, CorruptionKind::offcrop_vertical};
    const SeveritySweep a = run_severity_sweep(ModelPredictor{&model}, dataset(), kinds, cfg);
    cfg.threads = 3;
    const SeveritySweep b = run_severity_sweep(ModelPredictor{&model}, dataset(), kinds, cfg);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].overall_uncertainty, b.rows[i].overall_uncertainty);
        EXPECT_EQ(a.rows[i].angular_error_deg, b.rows[i].angular_error_deg);
    }
}

TEST(Effectiveness, SeverityStubScoresOneAndIsScaleInvariant)
{
    SweepConfig cfg;
    cfg.quantile = 0.5;
    cfg.image_count = 4;
    const EffectivenessReport ref = evaluate_effectiveness(run_severity_sweep(ScaledSeverityStub{}, dataset(), all_kinds(), cfg));
    ASSERT_EQ(ref.rows.size(), 14u);
    for (const CorruptionResult& r : ref.rows) {
        EXPECT_NEAR(r.correlation, 1.0, 1e-12);
        EXPECT_NEAR(r.slope, 1.0, 1e-12);
        for (int s = 0; s <= kMaxSeverity; ++s) EXPECT_EQ(r.mean_uncertainty[static_cast<std::size_t>(s)], s);
    }
    EXPECT_NEAR(ref.score, 1.0, 1e-12);
    for (double c : {0.1, 3.0, 100.0}) {
        const EffectivenessReport scaled =
            evaluate_effectiveness(run_severity_sweep(ScaledSeverityStub{c}, dataset(), all_kinds(), cfg));
        EXPECT_NEAR(scaled.score, ref.score, 1e-9) << c;
        EXPECT_NEAR(scaled.rows[3].slope, c, 1e-9 * c);
    }
}

TEST(Effectiveness, ConstantModelIsUniformlyInsensitive)
{
    SweepConfig cfg;
    cfg.quantile = 0.5;
    cfg.image_count = 3;
    const SeveritySweep sweep = run_severity_sweep(IdStub{}, dataset(), all_kinds(), cfg);
    try {
        evaluate_effectiveness(sweep);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateSlopes);
    }
}

TEST(Quantiles, EightSamplesFourGroups)
{
    const std::span<const EyeSample> eight(dataset().data(), 8);
    const auto q = quantile_report(IdStub{}, eight, 4);
    ASSERT_EQ(q.size(), 4u);
    const double expected[4] = {1.5, 3.5, 5.5, 7.5};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(q[i].quantile, i + 1);
        EXPECT_EQ(q[i].mean_uncertainty, expected[i]);
        EXPECT_EQ(q[i].mean_angular_error_deg, 0.0);
        EXPECT_EQ(q[i].top_ids, (std::vector<std::uint64_t>{2 * i + 1, 2 * i}));
    }
}

TEST(Quantiles, RemainderGoesToLastAndTopFiveAreMostUncertain)
{
    const auto q = quantile_report(IdStub{}, dataset(), 3);
    ASSERT_EQ(q.size(), 3u);
    EXPECT_EQ(q[0].member_ids.size(), 6u);
    EXPECT_EQ(q[2].member_ids.size(), 8u);
    EXPECT_EQ(q[2].top_ids, (std::vector<std::uint64_t>{19, 18, 17, 16, 15}));
}

TEST(Quantiles, ConstantUncertaintyGivesEqualMeansAndErrors)
{
    const auto model = ModelParams<float>::zeros();
    const auto q = quantile_report(ModelPredictor{&model}, dataset(), 4);
    for (const QuantileStats& s : q) EXPECT_EQ(s.mean_uncertainty, 1.0);
    EXPECT_THROW(quantile_report(IdStub{}, dataset(), 1), Error);
    try {
        quantile_report(IdStub{}, std::span<const EyeSample>(dataset().data(), 3), 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
    }
}

TEST(Reports, CsvFormats)
{
    const fs::path dir = temp_dir("csv");
    SweepConfig cfg;
    cfg.quantile = 0.5;
    cfg.image_count = 2;
    const std::vector<CorruptionKind> kinds{CorruptionKind::contrast, CorruptionKind::motion_blur};
    const SeveritySweep sweep = run_severity_sweep(ScaledSeverityStub{}, dataset(), kinds, cfg);
    const EffectivenessReport report = evaluate_effectiveness(sweep);
    write_corruption_csv(report, dir / "c.csv");
    write_summary_csv(report, dir / "s.csv");
    write_sweep_csv(sweep, dir / "w.csv");
    EXPECT_EQ(slurp(dir / "c.csv"),
              "kind,correlation,slope,mean_uncertainty_s0,mean_uncertainty_s1,mean_uncertainty_s2,mean_uncertainty_s3,"
              "mean_uncertainty_s4,mean_uncertainty_s5\ncontrast,1,1,0,1,2,3,4,5\nmotion_blur,1,1,0,1,2,3,4,5\n");
    const std::string summary = slurp(dir / "s.csv");
    EXPECT_EQ(summary.substr(0, summary.find('\n')),
              "effectiveness_score,baseline_error_severity_score,baseline_uncertainty_error_rho,image_count,quantile,seed,"
              "kind_count");
    EXPECT_EQ(summary.substr(summary.find('\n') + 1, 2), "1,");
    std::istringstream rows(slurp(dir / "w.csv"));
    std::size_t lines = 0;
    for (std::string l; std::getline(rows, l);) ++lines;
    EXPECT_EQ(lines, 25u);

    write_quantile_csv(quantile_report(IdStub{}, std::span<const EyeSample>(dataset().data(), 8), 4), dir / "q.csv");
    EXPECT_EQ(slurp(dir / "q.csv"),
              "quantile,mean_uncertainty,mean_angular_error_deg,top5_sample_ids\n1,1.5,0,1;0\n2,3.5,0,3;2\n"
              "3,5.5,0,5;4\n4,7.5,0,7;6\n");
}

TEST(SvgChart, SingleSeriesPolyline)
{
    const std::vector<ChartSeries> s{{"line", {{0, 0}, {1, 1}}}};
    const std::string svg = render_svg_chart(s, {"t", "x", "y"});
    EXPECT_NE(svg.find("viewBox=\"0 0 800 500\""), std::string::npos);
    const auto first = svg.find("<polyline");
    ASSERT_NE(first, std::string::npos);
    EXPECT_EQ(svg.find("<polyline", first + 1), std::string::npos);
    const auto pts = svg.find("points=\"", first) + 8;
    const std::string points = svg.substr(pts, svg.find('"', pts) - pts);
    EXPECT_EQ(std::count(points.begin(), points.end(), ','), 2);
    EXPECT_EQ(svg, render_svg_chart(s, {"t", "x", "y"}));
}

TEST(SvgChart, SixteenLegendEntriesAndEscaping)
{
    std::vector<ChartSeries> s;
    for (int i = 0; i < 16; ++i) s.push_back({"s<" + std::to_string(i) + ">&", {{0, i}, {5, 2 * i}}});
    const std::string svg = render_svg_chart(s);
    std::size_t legend = 0;
    for (auto p = svg.find("class=\"legend-entry\""); p != std::string::npos; p = svg.find("class=\"legend-entry\"", p + 1))
        ++legend;
    EXPECT_EQ(legend, 16u);
    EXPECT_NE(svg.find("s&lt;3&gt;&amp;"), std::string::npos);
}

TEST(SvgChart, EmptyInputsAreRejected)
{
    for (const std::vector<ChartSeries>& s :
         {std::vector<ChartSeries>{}, std::vector<ChartSeries>{{"a", {{0, 0}}}},
          std::vector<ChartSeries>{{"a", {{0, 0}, {1, std::nan("")}}}}}) {
        try {
            render_svg_chart(s);
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::EmptyChart);
        }
    }
    const std::vector<ChartSeries> flat{{"flat", {{1, 2}, {1, 2}}}};
    EXPECT_NO_THROW(render_svg_chart(flat));
}

TEST(SvgChart, EmitWritesFile)
{
    const fs::path dir = temp_dir("svg");
    const std::vector<ChartSeries> s{{"pts", {{0, 1}, {2, 3}, {4, 1}}}};
    emit_svg_chart(s, {"scatter", "u", "e", true}, dir / "c.svg");
    const std::string svg = slurp(dir / "c.svg");
    EXPECT_EQ(svg, render_svg_chart(s, {"scatter", "u", "e", true}));
    std::size_t circles = 0;
    for (auto p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
    EXPECT_EQ(circles, 3u);
}

// uqbench: synthesize eye images, train the confidence-aware regressor,
// and score its uncertainty against controlled corruptions.
//
// Exit codes: 0 success, 1 usage error, 2 data/model error, 3 degenerate evaluation.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uqgaze/uqgaze.hpp"

namespace fs = std::filesystem;
using namespace uqgaze;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDegenerate = 3;

struct GlobalOptions {
    unsigned threads = 0;
    std::string config_path;
};

void add_global_options(CLI::App* cmd, GlobalOptions& g)
{
    cmd->add_option("--threads", g.threads, "Worker threads (default: $UQBENCH_THREADS or 1)");
    cmd->add_option("--config", g.config_path, "Override file of `section.key = value` lines");
}

KeyValueConfig load_config(const GlobalOptions& g)
{
    return g.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(g.config_path);
}

void reject_unused(const KeyValueConfig& cfg)
{
    const auto unused = cfg.unused_keys();
    if (!unused.empty()) fail(ErrorCode::BadConfig, "unknown or inapplicable config key `" + unused.front() + "`");
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
    long long n = 0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_synth(const SynthArgs& a, const GlobalOptions& g)
{
    reject_unused(load_config(g));
    const DatasetManifest m =
        generate_dataset(static_cast<std::size_t>(a.n), a.seed, a.out, resolve_threads(g.threads));
    std::cout << m.path.string() << '\n';
    return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    TrainConfig config;
    CLI::Option* epochs = nullptr;
    CLI::Option* lr = nullptr;
    CLI::Option* batch = nullptr;
};

int cmd_train(TrainArgs& a, const GlobalOptions& g)
{
    const KeyValueConfig cfg = load_config(g);
    TrainConfig& tc = a.config;
    if (!a.lr->count() && cfg.has("train.lr")) tc.lr = cfg.number("train.lr");
    if (!a.batch->count() && cfg.has("train.batch_size")) tc.batch_size = static_cast<std::size_t>(cfg.number("train.batch_size"));
    if (!a.epochs->count() && cfg.has("train.epochs")) tc.epochs = static_cast<int>(cfg.number("train.epochs"));
    if (cfg.has("train.lr_decay_epoch")) tc.lr_decay_epoch = static_cast<int>(cfg.number("train.lr_decay_epoch"));
    if (cfg.has("train.lr_decay_factor")) tc.lr_decay_factor = cfg.number("train.lr_decay_factor");
    if (cfg.has("train.validation_fraction")) tc.validation_fraction = cfg.number("train.validation_fraction");
    reject_unused(cfg);
    tc.threads = resolve_threads(g.threads);
    tc.validate();

    const std::vector<EyeSample> data = load_dataset(resolve_manifest(a.data), tc.threads);
    std::cout << "lr=" << format_g9(tc.lr) << " batch=" << tc.batch_size << " epochs=" << tc.epochs
              << " lr_decay_epoch=" << tc.lr_decay_epoch << " lr_decay_factor=" << format_g9(tc.lr_decay_factor)
              << " seed=" << tc.seed << " samples=" << data.size() << std::endl;
    const TrainResult result = train(data, tc);

    const fs::path out = a.out;
    ensure_dir(out);
    save_checkpoint(result.model, out / "checkpoint.cagz");
    {
        std::ofstream h = open_csv(out / "history.csv");
        h << "epoch,train_loss,val_loss,lr\n";
        for (const EpochRecord& r : result.history)
            h << r.epoch << ',' << format_g9(r.train_loss) << ',' << format_g9(r.val_loss) << ',' << format_g9(r.lr)
              << '\n';
    }
    {
        std::ofstream s = open_csv(out / "train_summary.csv");
        s << "lr,batch_size,epochs,lr_decay_epoch,lr_decay_factor,seed,train_samples,val_samples,final_train_loss,"
             "final_val_loss,val_angular_error_deg\n";
        const EpochRecord last = result.history.empty() ? EpochRecord{} : result.history.back();
        s << format_g9(tc.lr) << ',' << tc.batch_size << ',' << tc.epochs << ',' << tc.lr_decay_epoch << ','
          << format_g9(tc.lr_decay_factor) << ',' << tc.seed << ',' << result.train_indices.size() << ','
          << result.val_indices.size() << ',' << format_g9(last.train_loss) << ',' << format_g9(last.val_loss) << ','
          << format_g9(last.val_angular_error_deg) << '\n';
    }
    for (const EpochRecord& r : result.history)
        std::cout << "epoch " << r.epoch << " train_loss=" << format_g9(r.train_loss)
                  << " val_loss=" << format_g9(r.val_loss) << " val_err_deg=" << format_g9(r.val_angular_error_deg)
                  << '\n';
    std::cout << (out / "checkpoint.cagz").string() << '\n';
    return 0;
}

// --- evaluate -----------------------------------------------------------------

/// Diagnostic predictors: uncertainty equal to the applied severity, or constant.
struct SeverityStub {
    GazeEstimate operator()(const EyeSample& s, const CorruptionSpec& spec) const
    {
        GazeEstimate e;
        e.pitch = s.gaze_pitch + 0.01 * spec.severity;
        e.yaw = s.gaze_yaw + 0.01 * spec.severity;
        e.sigma2_pitch = e.sigma2_yaw = e.overall_uncertainty = static_cast<double>(spec.severity);
        e.log_var_pitch = e.log_var_yaw = 0.0;
        return e;
    }
};

struct ConstantStub {
    GazeEstimate operator()(const EyeSample& s) const
    {
        GazeEstimate e;
        e.pitch = s.gaze_pitch;
        e.yaw = s.gaze_yaw;
        e.sigma2_pitch = e.sigma2_yaw = e.overall_uncertainty = 1.0;
        return e;
    }
};

std::vector<CorruptionKind> parse_kinds(const std::string& text)
{
    if (text == "all") return {kAllCorruptions.begin(), kAllCorruptions.end()};
    std::vector<CorruptionKind> kinds;
    std::stringstream ss(text);
    for (std::string name; std::getline(ss, name, ',');) {
        const auto kind = parse_corruption_kind(name);
        if (!kind) fail(ErrorCode::BadConfig, "unknown corruption kind `" + name + "`");
        if (std::find(kinds.begin(), kinds.end(), *kind) == kinds.end()) kinds.push_back(*kind);
    }
    if (kinds.empty()) fail(ErrorCode::BadConfig, "--kinds is empty");
    return kinds;
}

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string kinds = "all";
    double quantile = 0.2;
    std::size_t m = 100;
    std::uint64_t seed = 0;
    std::string out_dir;
    CLI::Option* quantile_opt = nullptr;
    CLI::Option* m_opt = nullptr;
};

void write_charts(const SeveritySweep& sweep, const EffectivenessReport& report, const fs::path& dir)
{
    std::vector<ChartSeries> uncertainty, error;
    for (const CorruptionResult& r : report.rows) {
        ChartSeries u{std::string(to_string(r.kind)), {}}, e{std::string(to_string(r.kind)), {}};
        for (int s = 0; s <= kMaxSeverity; ++s) {
            u.points.emplace_back(s, r.mean_uncertainty[static_cast<std::size_t>(s)]);
            e.points.emplace_back(s, r.mean_error_deg[static_cast<std::size_t>(s)]);
        }
        uncertainty.push_back(std::move(u));
        error.push_back(std::move(e));
    }
    emit_svg_chart(uncertainty, {"Mean inferred uncertainty by corruption severity", "severity", "overall uncertainty"},
                   dir / "severity_uncertainty.svg");
    emit_svg_chart(error, {"Mean angular error by corruption severity", "severity", "angular error (deg)"},
                   dir / "severity_error.svg");
    ChartSeries scatter{"corrupted samples", {}};
    for (const SweepRow& row : sweep.rows)
        if (row.severity > 0) scatter.points.emplace_back(row.overall_uncertainty, row.angular_error_deg);
    const std::vector<ChartSeries> scatter_series{scatter};
    emit_svg_chart(scatter_series, {"Uncertainty vs angular error", "overall uncertainty", "angular error (deg)", true},
                   dir / "uncertainty_error.svg");
}

int cmd_evaluate(EvaluateArgs& a, const GlobalOptions& g)
{
    const KeyValueConfig cfg = load_config(g);
    SweepConfig sc;
    sc.tables.apply_overrides(cfg);
    if (!a.quantile_opt->count() && cfg.has("evaluate.quantile")) a.quantile = cfg.number("evaluate.quantile");
    if (!a.m_opt->count() && cfg.has("evaluate.m")) a.m = static_cast<std::size_t>(cfg.number("evaluate.m"));
    reject_unused(cfg);
    sc.quantile = a.quantile;
    sc.image_count = a.m;
    sc.seed = a.seed;
    sc.threads = resolve_threads(g.threads);
    const std::vector<CorruptionKind> kinds = parse_kinds(a.kinds);

    const std::vector<EyeSample> data = load_dataset(resolve_manifest(a.data), sc.threads);
    SeveritySweep sweep;
    if (a.model == "stub:severity") {
        sweep = run_severity_sweep(SeverityStub{}, data, kinds, sc);
    } else if (a.model == "stub:constant") {
        sweep = run_severity_sweep(ConstantStub{}, data, kinds, sc);
    } else {
        const ModelParams<float> model = load_checkpoint(a.model);
        sweep = run_severity_sweep(ModelPredictor{&model}, data, kinds, sc);
    }
    const EffectivenessReport report = evaluate_effectiveness(sweep);

    const fs::path dir = a.out_dir;
    ensure_dir(dir);
    write_corruption_csv(report, dir / "corruptions.csv");
    write_corruption_error_csv(report, dir / "corruption_errors.csv");
    write_summary_csv(report, dir / "summary.csv");
    write_sweep_csv(sweep, dir / "sweep.csv");
    write_charts(sweep, report, dir);

    std::cout << "effectiveness_score=" << format_g9(report.score)
              << " baseline_error_severity_score=" << format_g9(report.baseline_error_severity_score)
              << " baseline_uncertainty_error_rho=" << format_g9(report.baseline_uncertainty_error_rho) << '\n';
    std::cout << (dir / "summary.csv").string() << '\n';
    return 0;
}

// --- quantiles ----------------------------------------------------------------

struct QuantileArgs {
    std::string model;
    std::string data;
    std::size_t k = 4;
    std::string out;
};

int cmd_quantiles(const QuantileArgs& a, const GlobalOptions& g)
{
    reject_unused(load_config(g));
    const unsigned threads = resolve_threads(g.threads);
    const fs::path manifest_path = resolve_manifest(a.data);
    const std::vector<EyeSample> data = load_dataset(manifest_path, threads);
    const DatasetManifest manifest = read_manifest(manifest_path);
    const ModelParams<float> model = load_checkpoint(a.model);
    const auto stats = quantile_report(ModelPredictor{&model}, std::span<const EyeSample>(data), a.k, threads);

    const fs::path dir = a.out;
    ensure_dir(dir);
    write_quantile_csv(stats, dir / "quantiles.csv");
    std::ofstream montage = open_csv(dir / "montage.csv");
    montage << "quantile,rank,sample_id,left,right\n";
    const fs::path base = fs::absolute(manifest_path).parent_path();
    for (const QuantileStats& q : stats)
        for (std::size_t r = 0; r < q.top_ids.size(); ++r) {
            const ManifestRow& row = manifest.rows[q.top_ids[r]];
            montage << q.quantile << ',' << r + 1 << ',' << row.sample_id << ',' << (base / row.left).string() << ','
                    << (base / row.right).string() << '\n';
        }
    std::cout << (dir / "quantiles.csv").string() << '\n';
    return 0;
}

// --- predict ------------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string data;
    std::string out;
};

int cmd_predict(const PredictArgs& a, const GlobalOptions& g)
{
    reject_unused(load_config(g));
    const unsigned threads = resolve_threads(g.threads);
    const std::vector<EyeSample> data = load_dataset(resolve_manifest(a.data), threads);
    const ModelParams<float> model = load_checkpoint(a.model);
    const auto est = predict_all(ModelPredictor{&model}, std::span<const EyeSample>(data), threads);
    std::ofstream out = open_csv(a.out);
    out << "sample_id,pitch,yaw,sigma2_pitch,sigma2_yaw,overall_uncertainty,angular_error_deg\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const GazeEstimate& e = est[i];
        out << data[i].sample_id << ',' << format_g9(e.pitch) << ',' << format_g9(e.yaw) << ','
            << format_g9(e.sigma2_pitch) << ',' << format_g9(e.sigma2_yaw) << ',' << format_g9(e.overall_uncertainty)
            << ',' << format_g9(angular_error(e.pitch, e.yaw, data[i].gaze_pitch, data[i].gaze_yaw)) << '\n';
    }
    std::cout << a.out << '\n';
    return 0;
}

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::BadConfig: return kExitUsage;
    case ErrorCode::DegenerateSlopes:
    case ErrorCode::DegenerateInput: return kExitDegenerate;
    default: return kExitData;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Confidence-aware gaze estimation: synthesis, training and uncertainty evaluation"};
    app.require_subcommand(1);
    GlobalOptions global;

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic eye-image dataset");
    synth_cmd->add_option("--n", synth.n, "Number of samples")->required()->check(CLI::Range(1LL, 100000000LL));
    synth_cmd->add_option("--seed", synth.seed, "Dataset seed");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    add_global_options(synth_cmd, global);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the confidence-aware network");
    train_cmd->add_option("--data", tr.data, "Dataset directory or manifest.csv")->required();
    tr.epochs = train_cmd->add_option("--epochs", tr.config.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    tr.lr = train_cmd->add_option("--lr", tr.config.lr, "Initial learning rate")->check(CLI::PositiveNumber);
    tr.batch = train_cmd->add_option("--batch", tr.config.batch_size, "Batch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", tr.config.seed, "Initialization / shuffling seed");
    train_cmd->add_option("--out", tr.out, "Output directory for checkpoint and history")->required();
    add_global_options(train_cmd, global);

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Severity sweep and effectiveness score");
    eval_cmd->add_option("--model", ev.model, "Checkpoint path, stub:severity or stub:constant")->required();
    eval_cmd->add_option("--data", ev.data, "Dataset directory or manifest.csv")->required();
    eval_cmd->add_option("--kinds", ev.kinds, "all, or comma-separated corruption kinds");
    ev.quantile_opt = eval_cmd->add_option("--quantile", ev.quantile, "Lowest-uncertainty fraction eligible")
                          ->check(CLI::Range(0.0, 1.0));
    ev.m_opt = eval_cmd->add_option("--m", ev.m, "Images selected for the sweep")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--seed", ev.seed, "Selection and corruption seed");
    eval_cmd->add_option("--out-dir", ev.out_dir, "Report directory")->required();
    add_global_options(eval_cmd, global);

    QuantileArgs qa;
    auto* quant_cmd = app.add_subcommand("quantiles", "Per-confidence-quantile report");
    quant_cmd->add_option("--model", qa.model, "Checkpoint path")->required();
    quant_cmd->add_option("--data", qa.data, "Dataset directory or manifest.csv")->required();
    quant_cmd->add_option("--k", qa.k, "Number of quantiles")->check(CLI::Range(2, 1000000));
    quant_cmd->add_option("--out", qa.out, "Output directory")->required();
    add_global_options(quant_cmd, global);

    PredictArgs pa;
    auto* pred_cmd = app.add_subcommand("predict", "Write per-sample predictions");
    pred_cmd->add_option("--model", pa.model, "Checkpoint path")->required();
    pred_cmd->add_option("--data", pa.data, "Dataset directory or manifest.csv")->required();
    pred_cmd->add_option("--out", pa.out, "Output CSV path")->required();
    add_global_options(pred_cmd, global);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth, global);
        if (*train_cmd) return cmd_train(tr, global);
        if (*eval_cmd) return cmd_evaluate(ev, global);
        if (*quant_cmd) return cmd_quantiles(qa, global);
        if (*pred_cmd) return cmd_predict(pa, global);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

// gridwatch: occupancy-grid anomaly detection for aerial scene annotations.
//
// Subcommands: ingest | synth | train | detect | eval | reproduce.
// Errors go to stderr as one-line JSON {"error": kind, "message": ...};
// exit codes: 0 ok, 1 usage, 2 validation/config/io, 3 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridwatch/detect.hpp"
#include "gridwatch/error.hpp"
#include "gridwatch/eval.hpp"
#include "gridwatch/ingest.hpp"
#include "gridwatch/nn.hpp"
#include "gridwatch/pipeline.hpp"
#include "gridwatch/rng.hpp"
#include "gridwatch/runconfig.hpp"
#include "gridwatch/synth.hpp"
#include "gridwatch/train.hpp"

namespace fs = std::filesystem;
using namespace gridwatch;

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage:
            return 1;
        case ErrorKind::numeric:
            return 3;
        default:
            return 2;
    }
}

void emit_error(const std::string& kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
}

// Input paths that don't exist as given fall back to $GRIDWATCH_DATA_DIR/<path>.
// Output paths are never rewritten.
fs::path resolve_input(const fs::path& path) {
    if (path.empty() || path.is_absolute() || fs::exists(path)) return path;
    if (const char* base = std::getenv("GRIDWATCH_DATA_DIR")) {
        const fs::path alt = fs::path(base) / path;
        if (fs::exists(alt)) return alt;
    }
    return path;
}

void require_exists(const fs::path& path, const char* what) {
    if (!fs::exists(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

Network load_checkpoint_for_spec(const fs::path& path, const GridSpec& spec) {
    Network net = load_checkpoint(path);
    if (net.config().grid_len != spec.cell_count())
        throw ConfigError("checkpoint " + path.string() + " expects grid length " +
                          std::to_string(net.config().grid_len) + ", dataset provides " +
                          std::to_string(spec.cell_count()));
    return net;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string annotations;
    std::string flight;
    std::string out;
    std::size_t rows = 8, cols = 8;
    std::size_t frame_width = 1920, frame_height = 1080;
    std::int64_t gap_ms = 500;
    std::uint64_t seed = 42;
    double ratio_train = 0.6, ratio_val = 0.1, ratio_test = 0.3;
    bool validate_only = false;
};

void run_ingest(const IngestArgs& a) {
    GridSpec spec;
    spec.rows = a.rows;
    spec.cols = a.cols;
    spec.frame_width_px = a.frame_width;
    spec.frame_height_px = a.frame_height;
    spec.validate();

    const fs::path annotations_path = resolve_input(a.annotations);
    const fs::path flight_path = resolve_input(a.flight);
    require_exists(annotations_path, "annotations file");
    require_exists(flight_path, "flight log");

    const std::vector<FrameAnnotation> frames = parse_annotations_strict(annotations_path);
    const std::vector<FlightRecord> flight = parse_flight_log(flight_path);
    SplitRatios ratios{a.ratio_train, a.ratio_val, a.ratio_test};
    IngestResult result = ingest_pipeline(frames, flight, spec, a.gap_ms, ratios, a.seed);

    nlohmann::ordered_json meta;
    meta["frames"] = frames.size();
    meta["flight_records"] = flight.size();
    meta["train_samples"] = result.splits.train.size();
    meta["val_samples"] = result.splits.val.size();
    meta["test_samples"] = result.splits.test.size();
    meta["skipped_boxes"] = result.skipped_boxes;
    meta["gps_bounds"] = {{"lat_min", result.bounds.lat_min}, {"lat_max", result.bounds.lat_max},
                          {"lon_min", result.bounds.lon_min}, {"lon_max", result.bounds.lon_max},
                          {"alt_min", result.bounds.alt_min}, {"alt_max", result.bounds.alt_max}};

    if (a.validate_only) {
        meta["valid"] = true;
        std::cout << meta.dump(2) << '\n';
        return;
    }

    const fs::path out(a.out);
    fs::create_directories(out);
    save_dataset(result.splits.train, spec, out / "train");
    save_dataset(result.splits.val, spec, out / "val");
    save_dataset(result.splits.test, spec, out / "test");
    std::ofstream sidecar(out / "ingest.json", std::ios::trunc);
    if (!sidecar) throw IoError("cannot write " + (out / "ingest.json").string());
    sidecar << meta.dump(2) << '\n';
    std::cout << "wrote " << (out / "train").string() << ", val, test ("
              << result.splits.train.size() << "/" << result.splits.val.size() << "/"
              << result.splits.test.size() << " samples)\n";
}

struct SynthArgs {
    std::string dataset;
    std::string rules;
    int scenario = 1;
    std::string out;
    std::uint64_t seed = 42;
    std::size_t per_source = 1;
    std::size_t count = 1;
    std::size_t sources = 0;  // 0 = all
};

void run_synth(const SynthArgs& a) {
    const fs::path dataset_dir = resolve_input(a.dataset);
    const fs::path rules_path = resolve_input(a.rules);
    require_exists(dataset_dir, "dataset directory");
    require_exists(rules_path, "rules file");

    Dataset dataset = load_dataset(dataset_dir);
    if (a.sources > 0 && dataset.samples.size() > a.sources) dataset.samples.resize(a.sources);
    const LoadedRules rules = load_rules(rules_path, dataset.spec);
    for (const std::string& warning : rules.warnings)
        std::cerr << "warning: " << warning << '\n';

    const auto items =
        generate_test_set(dataset.samples, a.scenario, a.per_source, rules.rules, a.seed, a.count);
    save_synth_dataset(items, dataset.spec, a.scenario, a.seed, fs::path(a.out));
    std::cout << "wrote " << items.size() << " injected samples to " << a.out << '\n';
}

struct TrainArgs {
    std::string train_dir;
    std::string val_dir;
    std::string model = "uav-adnet";
    std::string out;
    std::vector<std::size_t> hidden = {256, 128};
    std::size_t latent = 32;
    double kl_weight = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch = 32;
    double lr = 1e-3;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    std::string resume;
    std::size_t start_epoch = 1;
};

void run_train(const TrainArgs& a) {
    const fs::path train_path = resolve_input(a.train_dir);
    const fs::path val_path = resolve_input(a.val_dir);
    require_exists(train_path, "training dataset");
    require_exists(val_path, "validation dataset");

    const Dataset train_set = load_dataset(train_path);
    const Dataset val_set = load_dataset(val_path);
    if (!(train_set.spec == val_set.spec))
        throw ConfigError("training and validation datasets have different grid specs");

    ModelConfig model = config_for_variant(a.model, train_set.spec.cell_count());
    model.hidden_sizes = a.hidden;
    model.latent_dim = a.latent;
    model.kl_weight = a.kl_weight;

    TrainOptions opts;
    opts.epochs_max = a.epochs;
    opts.batch_size = a.batch;
    opts.learning_rate = a.lr;
    opts.patience = a.patience;
    opts.seed = a.seed;

    const TrainResult result = [&]() {
        if (!a.resume.empty()) {
            const fs::path resume_path = resolve_input(a.resume);
            require_exists(resume_path, "resume checkpoint");
            const Network prior = load_checkpoint(resume_path);
            return train(train_set.samples, val_set.samples, model, opts, &prior, a.start_epoch);
        }
        return train(train_set.samples, val_set.samples, model, opts);
    }();

    const fs::path out(a.out);
    fs::create_directories(out);
    save_checkpoint(result.net, out / "checkpoint.bin");
    export_curve(result.curve, out / "curve.csv");
    const LossCurvePoint& last = result.curve.back();
    std::cout << "trained " << variant_display_name(result.net.config()) << " for "
              << result.curve.size() << " epochs; final e_train=" << last.e_train
              << " e_val=" << last.e_val << '\n';
}

struct DetectArgs {
    std::string checkpoint;
    std::string dataset;
    std::string out;
    double threshold = 0.5;
};

void run_detect(const DetectArgs& a) {
    const fs::path checkpoint_path = resolve_input(a.checkpoint);
    const fs::path dataset_dir = resolve_input(a.dataset);
    require_exists(checkpoint_path, "checkpoint");
    require_exists(dataset_dir, "dataset directory");

    const Dataset dataset = load_dataset(dataset_dir);
    const Network net = load_checkpoint_for_spec(checkpoint_path, dataset.spec);

    const fs::path out(a.out);
    fs::create_directories(out);
    std::size_t anomalous = 0;
    std::size_t flagged_cells = 0;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const AnomalyReport report = detect(net, dataset.samples[i], a.threshold);
        anomalous += report.scene_anomalous ? 1 : 0;
        flagged_cells += report.anomalous_cells.size();
        char name[32];
        std::snprintf(name, sizeof(name), "report_%05zu.json", i);
        write_report(report, out / name);
    }
    nlohmann::ordered_json summary;
    summary["scenes"] = dataset.samples.size();
    summary["anomalous_scenes"] = anomalous;
    summary["flagged_cells"] = flagged_cells;
    summary["threshold"] = a.threshold;
    std::ofstream sidecar(out / "summary.json", std::ios::trunc);
    if (!sidecar) throw IoError("cannot write " + (out / "summary.json").string());
    sidecar << summary.dump(2) << '\n';
    std::cout << anomalous << "/" << dataset.samples.size() << " scenes anomalous ("
              << flagged_cells << " flagged cells)\n";
}

struct EvalArgs {
    std::vector<std::string> checkpoints;
    std::vector<std::string> synth_dirs;
    std::string out;
    double threshold = 0.5;
    bool sweep = false;
};

void run_eval_at(const std::vector<Network>& nets, const std::vector<SynthDataset>& synth_sets,
                 double threshold, const fs::path& out) {
    std::map<int, std::vector<MetricRow>> scenario_rows;
    std::map<std::string, std::map<int, DetectionAccuracy>> accuracy;
    std::vector<std::string> model_order;
    for (const Network& net : nets) {
        const std::string display = variant_display_name(net.config());
        model_order.push_back(display);
        for (const SynthDataset& synth : synth_sets) {
            const ScenarioEval eval = evaluate_scenario(net, synth.items, threshold);
            MetricRow row = eval.micro;
            row.model_name = display;
            scenario_rows[synth.scenario].push_back(row);

            std::vector<AnomalyReport> reports;
            std::vector<InjectionResult> injections;
            reports.reserve(synth.items.size());
            for (const auto& [sample, injection] : synth.items) {
                reports.push_back(detect(net, sample, threshold));
                injections.push_back(injection);
            }
            accuracy[display][synth.scenario] = detection_accuracy(reports, injections);
        }
    }
    emit_tables(scenario_rows, accuracy, model_order, out);
}

void run_eval(const EvalArgs& a) {
    std::vector<SynthDataset> synth_sets;
    for (const std::string& dir : a.synth_dirs) {
        const fs::path path = resolve_input(dir);
        require_exists(path, "synthetic dataset");
        synth_sets.push_back(load_synth_dataset(path));
    }
    if (synth_sets.empty()) throw UsageError("at least one --synth dataset is required");
    const GridSpec& spec = synth_sets.front().spec;
    for (const SynthDataset& s : synth_sets)
        if (!(s.spec == spec))
            throw ConfigError("synthetic datasets disagree on the grid spec");

    std::vector<Network> nets;
    for (const std::string& c : a.checkpoints) {
        const fs::path path = resolve_input(c);
        require_exists(path, "checkpoint");
        nets.push_back(load_checkpoint_for_spec(path, spec));
    }

    const fs::path out(a.out);
    if (a.sweep) {
        for (int k = 1; k <= 9; ++k) {
            const double threshold = k / 10.0;
            char name[32];
            std::snprintf(name, sizeof(name), "threshold_0.%d", k);
            run_eval_at(nets, synth_sets, threshold, out / name);
        }
        std::cout << "wrote table sets for 9 thresholds under " << out.string() << '\n';
    } else {
        run_eval_at(nets, synth_sets, a.threshold, out);
        std::cout << "wrote tables to " << out.string() << '\n';
    }
}

struct ReproduceArgs {
    std::string config;
    std::string out;
    std::size_t jobs = 1;
    std::vector<std::string> overrides;
    bool force = false;
};

void run_reproduce(const ReproduceArgs& a) {
    const fs::path config_path = resolve_input(a.config);
    require_exists(config_path, "experiment config");
    RunConfig config = parse_run_config(config_path);
    const fs::path base_dir = config_path.has_parent_path() ? config_path.parent_path() : ".";
    for (const std::string& assignment : a.overrides)
        apply_override(config, assignment, base_dir);

    const fs::path out(a.out);
    if (a.force) {
        for (const char* stage : {"ingest", "synth", "train", "eval"})
            fs::remove_all(out / stage);
    }
    run_experiment(config, out, a.jobs);
    std::cout << "wrote " << (out / "eval" / "metrics.json").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-wise anomaly detection for aerial scene annotations"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    CLI::App* ingest = app.add_subcommand("ingest", "Rasterize annotations into dataset splits");
    ingest->add_option("--annotations", ingest_args.annotations, "JSON-lines annotation file")
        ->required();
    ingest->add_option("--flight", ingest_args.flight, "flight log CSV")->required();
    ingest->add_option("--out", ingest_args.out, "output dataset directory");
    ingest->add_option("--rows", ingest_args.rows, "grid rows");
    ingest->add_option("--cols", ingest_args.cols, "grid cols");
    ingest->add_option("--frame-width", ingest_args.frame_width, "frame width in px");
    ingest->add_option("--frame-height", ingest_args.frame_height, "frame height in px");
    ingest->add_option("--gap-ms", ingest_args.gap_ms, "max annotation/telemetry gap in ms");
    ingest->add_option("--seed", ingest_args.seed, "split shuffle seed");
    ingest->add_option("--ratio-train", ingest_args.ratio_train, "train split ratio");
    ingest->add_option("--ratio-val", ingest_args.ratio_val, "val split ratio");
    ingest->add_option("--ratio-test", ingest_args.ratio_test, "test split ratio");
    ingest->add_flag("--validate-only", ingest_args.validate_only,
                     "validate inputs and print a report; write nothing");
    ingest->callback([&]() {
        if (!ingest_args.validate_only && ingest_args.out.empty())
            throw CLI::RequiredError("--out");
        run_ingest(ingest_args);
    });

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "Inject rule-breaking cells into a dataset");
    synth->add_option("--dataset", synth_args.dataset, "source dataset directory")->required();
    synth->add_option("--rules", synth_args.rules, "zone rules JSON")->required();
    synth->add_option("--scenario", synth_args.scenario, "anomaly scenario (1, 2 or 3)")
        ->required()
        ->check(CLI::Range(1, 3));
    synth->add_option("--out", synth_args.out, "output dataset directory")->required();
    synth->add_option("--seed", synth_args.seed, "injection seed");
    synth->add_option("--per-source", synth_args.per_source, "injected samples per source scene");
    synth->add_option("--count", synth_args.count, "cells injected per sample");
    synth->add_option("--sources", synth_args.sources, "cap on source scenes used (0 = all)");
    synth->callback([&]() { run_synth(synth_args); });

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train one model variant");
    train->add_option("--train", train_args.train_dir, "training dataset directory")->required();
    train->add_option("--val", train_args.val_dir, "validation dataset directory")->required();
    train->add_option("--model", train_args.model,
                      "variant: uav-adnet | uav-adnet-wo-gps | cvae | vae");
    train->add_option("--out", train_args.out, "output directory")->required();
    train->add_option("--hidden", train_args.hidden, "hidden layer sizes")->delimiter(',');
    train->add_option("--latent", train_args.latent, "latent dimension");
    train->add_option("--kl-weight", train_args.kl_weight, "KL term weight");
    train->add_option("--epochs", train_args.epochs, "max epochs");
    train->add_option("--batch", train_args.batch, "batch size");
    train->add_option("--lr", train_args.lr, "learning rate");
    train->add_option("--patience", train_args.patience, "early-stop patience in epochs");
    train->add_option("--seed", train_args.seed, "training seed");
    train->add_option("--resume", train_args.resume, "checkpoint to continue from");
    train->add_option("--start-epoch", train_args.start_epoch,
                      "first epoch number when resuming");
    train->callback([&]() { run_train(train_args); });

    DetectArgs detect_args;
    CLI::App* detect = app.add_subcommand("detect", "Flag anomalous cells in a dataset");
    detect->add_option("--checkpoint", detect_args.checkpoint, "trained checkpoint")->required();
    detect->add_option("--dataset", detect_args.dataset, "dataset directory")->required();
    detect->add_option("--out", detect_args.out, "output report directory")->required();
    detect->add_option("--threshold", detect_args.threshold, "binarization threshold in (0,1)");
    detect->callback([&]() { run_detect(detect_args); });

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "Score checkpoints on synthetic test sets");
    eval->add_option("--checkpoint", eval_args.checkpoints, "trained checkpoint (repeatable)")
        ->required();
    eval->add_option("--synth", eval_args.synth_dirs, "synthetic dataset directory (repeatable)")
        ->required();
    eval->add_option("--out", eval_args.out, "output table directory")->required();
    eval->add_option("--threshold", eval_args.threshold, "binarization threshold in (0,1)");
    eval->add_flag("--sweep", eval_args.sweep, "emit one table set per threshold 0.1 .. 0.9");
    eval->callback([&]() { run_eval(eval_args); });

    ReproduceArgs repro_args;
    CLI::App* repro = app.add_subcommand("reproduce", "Run a full experiment from a config file");
    repro->add_option("config", repro_args.config, "experiment config file")->required();
    repro->add_option("--out", repro_args.out, "experiment output directory")->required();
    repro->add_option("--jobs", repro_args.jobs, "worker threads (results identical to --jobs 1)")
        ->check(CLI::Range(1, 256));
    repro->add_option("--set", repro_args.overrides, "override a config key (key=value)");
    repro->add_flag("--force", repro_args.force, "discard cached stages and rerun everything");
    repro->callback([&]() { run_reproduce(repro_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        emit_error("usage", e.what());
        return 1;
    } catch (const Error& e) {
        emit_error(error_kind_name(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 2;
    }
    return 0;
}

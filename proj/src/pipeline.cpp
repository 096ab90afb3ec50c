#include "gridwatch/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gridwatch/detect.hpp"
#include "gridwatch/eval.hpp"
#include "gridwatch/nn.hpp"
#include "gridwatch/rng.hpp"
#include "gridwatch/synth.hpp"
#include "gridwatch/train.hpp"
#include "textio.hpp"

namespace gridwatch {

namespace {

// Seed streams for the pipeline stages (model/scenario index mixed in).
constexpr std::uint64_t kStreamSplit = 20;
constexpr std::uint64_t kStreamSynth = 21;
constexpr std::uint64_t kStreamTrain = 22;

bool stage_done(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / ".done");
}

void mark_done(const std::filesystem::path& dir) {
    std::ofstream out(dir / ".done", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / ".done").string());
    out << "ok\n";
}

// Runs tasks[0..n) on up to `jobs` threads. Tasks only touch their own
// outputs, so any schedule produces the same files; the first failure (by
// task index) is rethrown.
void run_tasks(const std::vector<std::function<void()>>& tasks, std::size_t jobs) {
    if (tasks.empty()) return;
    if (jobs <= 1 || tasks.size() == 1) {
        for (const auto& task : tasks) task();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(tasks.size());
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                tasks[i]();
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t count = std::min(jobs, tasks.size());
    threads.reserve(count);
    for (std::size_t i = 0; i < count; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& failure : failures)
        if (failure) std::rethrow_exception(failure);
}

struct TrainSummary {
    std::size_t epochs_ran = 0;
    double final_e_train = 0.0;
    double final_e_val = 0.0;
    double best_e_val = 0.0;
};

TrainSummary summarize(const LossCurve& curve) {
    TrainSummary s;
    s.epochs_ran = curve.size();
    if (!curve.empty()) {
        s.final_e_train = curve.back().e_train;
        s.final_e_val = curve.back().e_val;
        s.best_e_val = curve.front().e_val;
        for (const LossCurvePoint& p : curve) s.best_e_val = std::min(s.best_e_val, p.e_val);
    }
    return s;
}

struct ScenarioMetrics {
    ScenarioEval eval;
    DetectionAccuracy accuracy;
};

ScenarioMetrics eval_one(const Network& net, const SynthDataset& synth, double threshold) {
    ScenarioMetrics out;
    out.eval = evaluate_scenario(net, synth.items, threshold);
    std::vector<AnomalyReport> reports;
    std::vector<InjectionResult> injections;
    reports.reserve(synth.items.size());
    injections.reserve(synth.items.size());
    for (const auto& [sample, injection] : synth.items) {
        reports.push_back(detect(net, sample, threshold));
        injections.push_back(injection);
    }
    out.accuracy = detection_accuracy(reports, injections);
    return out;
}

nlohmann::ordered_json config_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["annotations"] = c.annotations.string();
    j["flight_log"] = c.flight_log.string();
    j["rules"] = c.rules.string();
    j["grid_rows"] = c.grid_rows;
    j["grid_cols"] = c.grid_cols;
    j["frame_width"] = c.frame_width;
    j["frame_height"] = c.frame_height;
    j["ratio_train"] = c.ratios.train;
    j["ratio_val"] = c.ratios.val;
    j["ratio_test"] = c.ratios.test;
    j["gap_ms"] = c.gap_ms;
    j["seed"] = c.seed;
    j["models"] = c.models;
    j["hidden"] = c.hidden;
    j["latent"] = c.latent;
    j["kl_weight"] = c.kl_weight;
    j["epochs"] = c.epochs;
    j["batch"] = c.batch;
    j["lr"] = c.lr;
    j["patience"] = c.patience;
    j["threshold"] = c.threshold;
    j["scenarios"] = c.scenarios;
    j["per_source"] = c.per_source;
    j["inject_count"] = c.inject_count;
    j["synth_sources"] = c.synth_sources;
    return j;
}

}  // namespace

void run_experiment(const RunConfig& config, const std::filesystem::path& out_dir,
                    std::size_t jobs) {
    config.validate();
    config.validate_paths();
    if (jobs < 1) throw UsageError("jobs must be >= 1");
    const GridSpec spec = config.grid_spec();

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream echo(out_dir / "config.effective", std::ios::trunc);
        if (!echo) throw IoError("cannot write " + (out_dir / "config.effective").string());
        echo << config.to_text();
    }

    // --- stage 1: ingest ---------------------------------------------------
    const std::filesystem::path ingest_dir = out_dir / "ingest";
    if (!stage_done(ingest_dir)) {
        std::filesystem::create_directories(ingest_dir);
        const std::vector<FrameAnnotation> annotations =
            parse_annotations_strict(config.annotations);
        const std::vector<FlightRecord> flight = parse_flight_log(config.flight_log);
        IngestResult ingest = ingest_pipeline(annotations, flight, spec, config.gap_ms,
                                              config.ratios,
                                              derive_seed(config.seed, kStreamSplit));
        save_dataset(ingest.splits.train, spec, ingest_dir / "train");
        save_dataset(ingest.splits.val, spec, ingest_dir / "val");
        save_dataset(ingest.splits.test, spec, ingest_dir / "test");

        nlohmann::ordered_json meta;
        meta["train_samples"] = ingest.splits.train.size();
        meta["val_samples"] = ingest.splits.val.size();
        meta["test_samples"] = ingest.splits.test.size();
        meta["skipped_boxes"] = ingest.skipped_boxes;
        meta["gps_bounds"] = {{"lat_min", ingest.bounds.lat_min},
                              {"lat_max", ingest.bounds.lat_max},
                              {"lon_min", ingest.bounds.lon_min},
                              {"lon_max", ingest.bounds.lon_max},
                              {"alt_min", ingest.bounds.alt_min},
                              {"alt_max", ingest.bounds.alt_max}};
        std::ofstream meta_out(ingest_dir / "ingest.json", std::ios::trunc);
        meta_out << meta.dump(2) << '\n';
        mark_done(ingest_dir);
    }

    // --- stage 2: synth ----------------------------------------------------
    const std::filesystem::path synth_dir = out_dir / "synth";
    if (!stage_done(synth_dir)) {
        std::filesystem::create_directories(synth_dir);
        const Dataset test = load_dataset(ingest_dir / "test");
        std::vector<Sample> sources = test.samples;
        if (config.synth_sources > 0 && sources.size() > config.synth_sources)
            sources.resize(config.synth_sources);
        const LoadedRules rules = load_rules(config.rules, spec);

        std::vector<std::function<void()>> tasks;
        for (const int scenario : config.scenarios) {
            tasks.push_back([&, scenario]() {
                const std::uint64_t seed =
                    derive_seed(config.seed, kStreamSynth, static_cast<std::uint64_t>(scenario));
                const auto items = generate_test_set(sources, scenario, config.per_source,
                                                     rules.rules, seed, config.inject_count);
                save_synth_dataset(items, spec, scenario, seed,
                                   synth_dir / ("scenario_" + std::to_string(scenario)));
            });
        }
        run_tasks(tasks, jobs);
        mark_done(synth_dir);
    }

    // --- stage 3: train ----------------------------------------------------
    const std::filesystem::path train_dir = out_dir / "train";
    if (!stage_done(train_dir)) {
        std::filesystem::create_directories(train_dir);
        const Dataset train_set = load_dataset(ingest_dir / "train");
        const Dataset val_set = load_dataset(ingest_dir / "val");

        std::vector<std::function<void()>> tasks;
        for (std::size_t m = 0; m < config.models.size(); ++m) {
            tasks.push_back([&, m]() {
                const std::string& slug = config.models[m];
                ModelConfig model = config_for_variant(slug, spec.cell_count());
                model.hidden_sizes = config.hidden;
                model.latent_dim = config.latent;
                model.kl_weight = config.kl_weight;

                TrainOptions opts;
                opts.epochs_max = config.epochs;
                opts.batch_size = config.batch;
                opts.learning_rate = config.lr;
                opts.patience = config.patience;
                opts.seed = derive_seed(config.seed, kStreamTrain, m);

                TrainResult result = train(train_set.samples, val_set.samples, model, opts);
                const std::filesystem::path dir = train_dir / slug;
                std::filesystem::create_directories(dir);
                save_checkpoint(result.net, dir / "checkpoint.bin");
                export_curve(result.curve, dir / "curve.csv");
            });
        }
        run_tasks(tasks, jobs);
        mark_done(train_dir);
    }

    // --- stage 4: eval -----------------------------------------------------
    const std::filesystem::path eval_dir = out_dir / "eval";
    if (!stage_done(eval_dir)) {
        std::filesystem::create_directories(eval_dir);

        struct Slot {
            ScenarioMetrics metrics;
        };
        const std::size_t n_models = config.models.size();
        const std::size_t n_scenarios = config.scenarios.size();
        std::vector<Slot> slots(n_models * n_scenarios);
        std::vector<Network> nets;
        nets.reserve(n_models);
        for (const std::string& slug : config.models) {
            Network net = load_checkpoint(train_dir / slug / "checkpoint.bin");
            if (net.config().grid_len != spec.cell_count())
                throw ConfigError("checkpoint " + slug + " was trained for grid length " +
                                  std::to_string(net.config().grid_len) +
                                  ", experiment grid has " + std::to_string(spec.cell_count()));
            nets.push_back(std::move(net));
        }
        std::vector<SynthDataset> synth_sets;
        synth_sets.reserve(n_scenarios);
        for (const int scenario : config.scenarios)
            synth_sets.push_back(
                load_synth_dataset(synth_dir / ("scenario_" + std::to_string(scenario))));

        std::vector<std::function<void()>> tasks;
        for (std::size_t m = 0; m < n_models; ++m) {
            for (std::size_t s = 0; s < n_scenarios; ++s) {
                tasks.push_back([&, m, s]() {
                    slots[m * n_scenarios + s].metrics =
                        eval_one(nets[m], synth_sets[s], config.threshold);
                });
            }
        }
        run_tasks(tasks, jobs);

        std::map<int, std::vector<MetricRow>> scenario_rows;
        std::map<std::string, std::map<int, DetectionAccuracy>> accuracy;
        std::vector<std::string> model_order;
        for (std::size_t m = 0; m < n_models; ++m) {
            const std::string display = variant_display_name(nets[m].config());
            model_order.push_back(display);
            for (std::size_t s = 0; s < n_scenarios; ++s) {
                const ScenarioMetrics& sm = slots[m * n_scenarios + s].metrics;
                MetricRow row = sm.eval.micro;
                row.model_name = display;
                scenario_rows[config.scenarios[s]].push_back(row);
                accuracy[display][config.scenarios[s]] = sm.accuracy;
            }
        }
        emit_tables(scenario_rows, accuracy, model_order, eval_dir / "tables");

        nlohmann::ordered_json report;
        report["config"] = config_json(config);
        {
            std::ifstream meta_in(ingest_dir / "ingest.json");
            report["dataset"] = nlohmann::ordered_json::parse(meta_in);
        }
        report["threshold"] = config.threshold;
        nlohmann::ordered_json models = nlohmann::ordered_json::array();
        for (std::size_t m = 0; m < n_models; ++m) {
            const std::string& slug = config.models[m];
            nlohmann::ordered_json entry;
            entry["name"] = variant_display_name(nets[m].config());
            entry["slug"] = slug;
            const TrainSummary ts = summarize(import_curve(train_dir / slug / "curve.csv"));
            entry["train"] = {{"epochs_ran", ts.epochs_ran},
                              {"final_e_train", ts.final_e_train},
                              {"final_e_val", ts.final_e_val},
                              {"best_e_val", ts.best_e_val}};
            nlohmann::ordered_json scenarios = nlohmann::ordered_json::array();
            for (std::size_t s = 0; s < n_scenarios; ++s) {
                const ScenarioMetrics& sm = slots[m * n_scenarios + s].metrics;
                nlohmann::ordered_json sj;
                sj["scenario"] = config.scenarios[s];
                sj["tp"] = sm.eval.counts.tp;
                sj["tn"] = sm.eval.counts.tn;
                sj["fp"] = sm.eval.counts.fp;
                sj["fn"] = sm.eval.counts.fn;
                sj["precision"] = sm.eval.micro.precision;
                sj["recall"] = sm.eval.micro.recall;
                sj["f1"] = sm.eval.micro.f1;
                sj["degenerate"] = sm.eval.micro.degenerate;
                sj["macro_precision"] = sm.eval.macro.precision;
                sj["macro_recall"] = sm.eval.macro.recall;
                sj["macro_f1"] = sm.eval.macro.f1;
                sj["accuracy_exact"] = sm.accuracy.exact;
                sj["accuracy_lenient"] = sm.accuracy.lenient;
                scenarios.push_back(std::move(sj));
            }
            entry["scenarios"] = std::move(scenarios);
            models.push_back(std::move(entry));
        }
        report["models"] = std::move(models);

        std::ofstream metrics_out(eval_dir / "metrics.json", std::ios::trunc | std::ios::binary);
        if (!metrics_out) throw IoError("cannot write " + (eval_dir / "metrics.json").string());
        metrics_out << report.dump(2) << '\n';
        if (!metrics_out) throw IoError("write failed: " + (eval_dir / "metrics.json").string());
        mark_done(eval_dir);
    }
}

}  // namespace gridwatch

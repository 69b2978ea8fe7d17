#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "nbeats/config_io.hpp"
#include "nbeats/ensemble.hpp"
#include "nbeats/error.hpp"
#include "nbeats/json_io.hpp"
#include "nbeats/metrics.hpp"
#include "nbeats/synthetic.hpp"
#include "nbeats/timeseries.hpp"
#include "nbeats/training.hpp"

namespace nbeats::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

fs::path default_root() {
    if (const char* env = std::getenv("NBEATS_OUT"); env != nullptr && *env != '\0') return env;
    return "runs";
}

std::string member_file(std::size_t i) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "member_%04zu.ckpt", i);
    return buf;
}

Json load_json_file(const fs::path& path) {
    const auto text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory '" + dir.string() + "': " + ec.message());
}

// ---- shared option groups ----

struct TrainOptions {
    std::string data;
    std::string config;
    std::string preset = "desk";
    std::string manifest;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 0;
    bool raw = false;
    std::optional<std::size_t> pool;
    std::optional<std::size_t> epochs;
    std::optional<double> tau;
};

struct RunSettings {
    std::string preset;
    fs::path data;
    TrainConfig train;
    std::size_t pool_size = 0;
    EnsembleSpec ensemble;
    std::vector<std::string> overrides;
};

Json manifest_json(const RunSettings& s, const std::string& created, const std::string& finished) {
    Json j;
    j["format_version"] = kManifestVersion;
    j["preset"] = s.preset;
    j["data"] = s.data.string();
    j["seed"] = s.train.seed;
    j["pool_size"] = s.pool_size;
    j["train_config"] = to_json(s.train);
    j["ensemble"] = to_json(s.ensemble);
    j["overrides"] = s.overrides;
    j["created_utc"] = created;
    j["finished_utc"] = finished;
    j["layout"] = Json{{"config", "config.json"},
                       {"checkpoints", "checkpoints/member_NNNN.ckpt"},
                       {"history", "training_history.csv"},
                       {"reports", Json::array({"per_series.csv", "per_month.csv", "summary.json", "ape.csv"})},
                       {"forecast", "forecast.csv"}};
    return j;
}

RunSettings settings_from_manifest(const Json& m) {
    if (!m.contains("format_version") || m.at("format_version") != kManifestVersion) {
        throw InputError("manifest: unsupported or missing format_version");
    }
    RunSettings s;
    try {
        s.preset = m.at("preset").get<std::string>();
        s.data = m.at("data").get<std::string>();
        s.pool_size = m.at("pool_size").get<std::size_t>();
        s.overrides = m.at("overrides").get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
        throw InputError(std::string("manifest: ") + e.what());
    }
    s.train = train_config_from_json(m.at("train_config"));
    s.ensemble = ensemble_spec_from_json(m.at("ensemble"));
    return s;
}

RunSettings resolve_train_settings(const TrainOptions& o) {
    RunSettings s;
    if (!o.manifest.empty()) {
        s = settings_from_manifest(load_json_file(o.manifest));
    } else {
        const auto p = preset(o.preset);
        s.preset = o.preset;
        s.train = p.train;
        s.pool_size = p.pool_size;
        s.ensemble = p.ensemble;
        if (!o.config.empty()) {
            s.train = train_config_from_json(load_json_file(o.config), s.train);
            s.overrides.push_back("config=" + o.config);
        }
    }
    if (!o.data.empty()) {
        s.data = o.data;
        if (!o.manifest.empty()) s.overrides.push_back("data");
    }
    if (s.data.empty()) throw InputError("no data file given (--data)");
    if (o.seed) {
        s.train.seed = *o.seed;
        s.overrides.push_back("seed");
    }
    if (o.raw) {
        s.train.scaling = Scaling::None;
        s.overrides.push_back("raw");
    }
    if (o.pool) {
        s.pool_size = *o.pool;
        s.overrides.push_back("pool");
    }
    if (o.epochs) {
        s.train.epochs = *o.epochs;
        s.overrides.push_back("epochs");
    }
    if (o.tau) {
        s.train.tau = *o.tau;
        s.overrides.push_back("tau");
    }
    if (s.pool_size == 0) throw InputError("pool size must be >= 1");
    s.train.validate();
    return s;
}

void add_train_options(CLI::App* cmd, TrainOptions& o) {
    cmd->add_option("--data", o.data, "Monthly demand CSV (series_id,month,demand_mwh)");
    cmd->add_option("--config", o.config, "TrainConfig JSON; fields override the preset");
    cmd->add_option("--preset", o.preset, "desk | paper")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", o.seed, "Base seed; member i trains with seed + i");
    cmd->add_option("--jobs", o.jobs, "Worker threads (default: logical cores)");
    cmd->add_flag("--raw", o.raw, "Disable per-window mean scaling");
    cmd->add_option("--pool", o.pool, "Number of models to train");
    cmd->add_option("--epochs", o.epochs, "Override the epoch count");
    cmd->add_option("--tau", o.tau, "Override the pinball-MAPE asymmetry");
}

fs::path run_dir_for(const TrainOptions& o, const RunSettings& s) {
    if (!o.out.empty()) return o.out;
    return default_root() / (s.preset + "-seed" + std::to_string(s.train.seed));
}

// ---- train ----

int cmd_train(const TrainOptions& o, std::ostream& out) {
    set_thread_count(o.jobs);
    auto settings = resolve_train_settings(o);
    const auto created = utc_now();
    const auto dataset = load_csv(settings.data);
    const auto data_split = split(dataset, settings.train.model.horizon, kMinLookback);

    const auto pool = train_pool(data_split.full_train(), settings.train, settings.pool_size, settings.train.seed);

    const fs::path dir = run_dir_for(o, settings);
    ensure_dir(dir / "checkpoints");
    for (std::size_t i = 0; i < pool.size(); ++i) {
        save_checkpoint(pool.members[i].params, dir / "checkpoints" / member_file(i));
    }
    std::ostringstream history;
    history << "member,seed,epoch,loss\n";
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& m = pool.members[i];
        for (std::size_t e = 0; e < m.epoch_loss.size(); ++e) {
            history << i << ',' << m.seed << ',' << (e + 1) << ',' << format_number(m.epoch_loss[e]) << '\n';
        }
    }
    write_text_file(dir / "training_history.csv", history.str());
    write_text_file(dir / "config.json", dump_json(to_json(settings.train)) + "\n");
    write_text_file(dir / "manifest.json", dump_json(manifest_json(settings, created, utc_now())) + "\n");
    out << dir.string() << '\n';
    return kExitOk;
}

// ---- loading a run ----

struct LoadedRun {
    RunSettings settings;
    std::vector<PoolMember> members;
};

LoadedRun load_run(const fs::path& dir, std::size_t max_members = 0) {
    LoadedRun run;
    run.settings = settings_from_manifest(load_json_file(dir / "manifest.json"));
    const std::size_t count = max_members == 0 ? run.settings.pool_size : max_members;
    if (count > run.settings.pool_size) {
        throw InputError("requested " + std::to_string(count) + " members but the run has " +
                         std::to_string(run.settings.pool_size));
    }
    for (std::size_t i = 0; i < count; ++i) {
        const auto path = dir / "checkpoints" / member_file(i);
        if (!fs::exists(path)) throw InputError("missing checkpoint '" + path.string() + "'");
        auto params = load_checkpoint(path);
        if (params.config() != run.settings.train.model) {
            throw InputError("checkpoint '" + path.string() + "' does not match the run's model config");
        }
        run.members.push_back(PoolMember{run.settings.train.seed + i, std::move(params), {}});
    }
    return run;
}

// ---- evaluate ----

struct EvaluateOptions {
    std::string run;
    std::string out;
    std::string data;
    std::vector<std::string> baselines;
    std::optional<std::string> aggregation;
    std::optional<std::size_t> members;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    int jobs = 0;
};

struct Baseline {
    std::string name;
    std::vector<double> ape;  // aligned with the model's APE order
};

Baseline load_baseline(const std::string& spec, const EvaluationTargets& targets) {
    Baseline b;
    fs::path path;
    if (const auto eq = spec.find('='); eq != std::string::npos) {
        b.name = spec.substr(0, eq);
        path = spec.substr(eq + 1);
    } else {
        path = spec;
        b.name = path.stem().string();
    }
    const auto text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != "series_id,month,ape" && line != "series_id,month,ape,pe") {
        throw InputError("baseline '" + path.string() + "': header must be 'series_id,month,ape'");
    }
    std::map<std::pair<std::string, std::string>, double> values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string id, month, ape;
        if (!std::getline(fields, id, ',') || !std::getline(fields, month, ',') || !std::getline(fields, ape, ',')) {
            throw InputError("baseline '" + path.string() + "' row " + std::to_string(row) + ": expected 3 fields");
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(ape, &used);
            if (used != ape.size() || !std::isfinite(v) || v < 0.0) throw std::invalid_argument("ape");
            values[{id, month}] = v;
        } catch (const std::exception&) {
            throw InputError("baseline '" + path.string() + "' row " + std::to_string(row) + ": bad APE '" + ape + "'");
        }
    }
    std::size_t expected = 0;
    for (const auto& a : targets.actuals) expected += a.size();
    if (values.size() != expected) {
        throw InputError("baseline '" + path.string() + "' has " + std::to_string(values.size()) +
                         " rows, expected " + std::to_string(expected));
    }
    for (std::size_t s = 0; s < targets.actuals.size(); ++s) {
        for (std::size_t k = 0; k < targets.actuals[s].size(); ++k) {
            const auto month = targets.first_month[s].plus(static_cast<std::int64_t>(k)).to_string();
            const auto it = values.find({targets.series_ids[s], month});
            if (it == values.end()) {
                throw InputError("baseline '" + path.string() + "' lacks " + targets.series_ids[s] + " " + month);
            }
            b.ape.push_back(it->second);
        }
    }
    return b;
}

std::vector<double> per_series_means(const std::vector<double>& ape, const EvaluationTargets& targets) {
    std::vector<double> out;
    std::size_t i = 0;
    for (const auto& a : targets.actuals) {
        double sum = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) sum += ape[i++];
        out.push_back(sum / static_cast<double>(a.size()));
    }
    return out;
}

Json metrics_json(const MetricsReport& r) { return Json::parse(to_json(r)); }

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
    set_thread_count(o.jobs);
    if (o.run.empty()) throw InputError("evaluate needs --run <dir>");
    const fs::path run_dir = o.run;
    auto run = load_run(run_dir);
    auto spec = run.settings.ensemble;
    if (o.aggregation) spec.aggregation = parse_aggregation(*o.aggregation);
    if (o.members) spec.ensemble_size = *o.members;
    if (o.trials) spec.trials = *o.trials;
    const fs::path data_path = o.data.empty() ? run.settings.data : fs::path(o.data);
    const auto data_split = split(load_csv(data_path), run.settings.train.model.horizon, kMinLookback);
    const auto targets = test_targets(data_split);

    // Validate baselines before the expensive part.
    std::vector<Baseline> baselines;
    for (const auto& b : o.baselines) baselines.push_back(load_baseline(b, targets));

    Rng rng(o.seed.value_or(run.settings.train.seed));
    const auto ensembles = bootstrap_ensembles(run.members.size(), spec, rng);
    const auto histories = data_split.full_train();
    const auto cube = forecast_members(run.members, histories, run.settings.train.scaling);
    const auto ev = evaluate_ensembles(cube, ensembles, targets, spec.aggregation);
    const auto& report = ev.mean_report;

    std::vector<std::vector<double>> naive;
    for (const auto& s : histories.series()) naive.push_back(snaive_forecast(s, data_split.horizon()));
    const auto naive_report = evaluate_forecasts(targets, naive);

    Json summary;
    summary["format_version"] = kManifestVersion;
    summary["aggregation"] = to_string(spec.aggregation);
    summary["pool_size"] = run.members.size();
    summary["ensemble_size"] = spec.ensemble_size;
    summary["trials"] = spec.trials;
    summary["aggregate"] = metrics_json(report.aggregate);
    summary["distribution"] = Json{{"mape", to_json(ev.mape)}, {"mpe", to_json(ev.mpe)}};
    summary["member_distribution"] = Json{{"mape", to_json(ev.member_mape)}, {"mpe", to_json(ev.member_mpe)}};
    try {
        const auto t = t_test_zero_mean(report.pe, 0.01);
        summary["t_test"] = Json{{"alpha", 0.01}, {"t", t.t}, {"critical", t.critical}, {"p_value", t.p_value},
                                 {"reject", t.reject}};
    } catch (const InputError& e) {
        summary["t_test"] = Json{{"alpha", 0.01}, {"error", e.what()}};
    }
    summary["snaive"] = metrics_json(naive_report.aggregate);

    Json cis = Json::array();
    NamedValues per_series{{"nbeats", per_series_means(report.ape, targets)}};
    for (const auto& b : baselines) {
        const auto ci = bootstrap_mape_diff_ci(b.ape, report.ape, rng, 100000, 0.99);
        cis.push_back(Json{{"baseline", b.name}, {"mean_diff", ci.mean_diff}, {"lower", ci.lower}, {"upper", ci.upper},
                           {"level", ci.level}, {"n_boot", ci.n_boot}});
        per_series.emplace_back(b.name, per_series_means(b.ape, targets));
    }
    summary["confidence_intervals"] = cis;
    Json ranks = Json::array();
    if (!baselines.empty()) {
        for (const auto& [name, rank] : rank_models(per_series)) {
            ranks.push_back(Json{{"model", name}, {"average_rank", rank}});
        }
    }
    summary["ranks"] = ranks;

    const fs::path out_dir = o.out.empty() ? run_dir : fs::path(o.out);
    ensure_dir(out_dir);
    write_per_series_csv(report, out_dir / "per_series.csv");
    write_per_month_csv(report, out_dir / "per_month.csv");
    write_ape_csv(report, targets, out_dir / "ape.csv");
    write_text_file(out_dir / "summary.json", dump_json(summary) + "\n");
    out << "MAPE " << format_number(report.aggregate.mape) << " MPE " << format_number(report.aggregate.mpe)
        << " -> " << out_dir.string() << '\n';
    return kExitOk;
}

// ---- forecast ----

struct ForecastOptions {
    std::string run;
    std::string out;
    std::string data;
    std::vector<std::string> series;
    std::optional<std::string> aggregation;
    std::optional<std::size_t> members;
    int jobs = 0;
};

int cmd_forecast(const ForecastOptions& o, std::ostream& out) {
    set_thread_count(o.jobs);
    if (o.run.empty()) throw InputError("forecast needs --run <dir>");
    const fs::path run_dir = o.run;
    const auto run = load_run(run_dir, o.members.value_or(0));
    const auto aggregation = o.aggregation ? parse_aggregation(*o.aggregation) : run.settings.ensemble.aggregation;
    const auto dataset = load_csv(o.data.empty() ? run.settings.data : fs::path(o.data));

    std::vector<std::size_t> which;
    if (o.series.empty()) {
        for (std::size_t i = 0; i < dataset.size(); ++i) which.push_back(i);
    } else {
        for (const auto& id : o.series) {
            const auto idx = dataset.index_of(id);
            if (idx < 0) throw InputError("unknown series id '" + id + "'");
            which.push_back(static_cast<std::size_t>(idx));
        }
    }

    std::vector<const ModelParams*> members;
    for (const auto& m : run.members) members.push_back(&m.params);
    const auto& mc = run.settings.train.model;
    std::ostringstream csv;
    csv << "series_id,month,forecast_mwh\n";
    for (std::size_t idx : which) {
        const auto& s = dataset[idx];
        if (s.size() < mc.input_size) throw InputError("series '" + s.id + "' is shorter than the lookback window");
        const std::span<const double> input(s.values.data() + s.size() - mc.input_size, mc.input_size);
        const auto f = ensemble_forecast(members, input, run.settings.train.scaling, aggregation);
        for (std::size_t k = 0; k < f.size(); ++k) {
            csv << s.id << ',' << s.end_month().plus(static_cast<std::int64_t>(k + 1)).to_string() << ','
                << format_number(f[k]) << '\n';
        }
    }
    const fs::path out_dir = o.out.empty() ? run_dir : fs::path(o.out);
    ensure_dir(out_dir);
    write_text_file(out_dir / "forecast.csv", csv.str());
    out << (out_dir / "forecast.csv").string() << '\n';
    return kExitOk;
}

// ---- tune ----

struct TuneOptions {
    TrainOptions train;
    std::string grid;
    std::size_t trials_per_config = 4;
};

int cmd_tune(const TuneOptions& o, std::ostream& out) {
    set_thread_count(o.train.jobs);
    const auto settings = resolve_train_settings(o.train);
    GridSpec grid;
    if (!o.grid.empty()) grid = grid_spec_from_json(load_json_file(o.grid));
    const auto data_split = split(load_csv(settings.data), settings.train.model.horizon, kMinLookback);
    const auto scorer = make_validation_scorer(data_split, o.trials_per_config, settings.ensemble.aggregation);
    const auto result = grid_search(grid, settings.train, scorer);

    const fs::path dir = o.train.out.empty()
                             ? default_root() / ("tune-" + settings.preset + "-seed" + std::to_string(settings.train.seed))
                             : fs::path(o.train.out);
    ensure_dir(dir);
    write_score_table(result.table, dir / "score_table.csv");
    write_text_file(dir / "best_config.json", dump_json(to_json(result.best)) + "\n");
    out << "best tau " << format_number(result.best.tau) << " -> " << dir.string() << '\n';
    return kExitOk;
}

// ---- ingest / synth ----

int cmd_ingest(const std::string& data, std::size_t horizon, std::ostream& out) {
    const auto dataset = load_csv(data);
    const auto data_split = split(dataset, horizon, kMinLookback);
    out << "series " << dataset.size() << '\n';
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset[i];
        const auto& b = data_split.bounds()[i];
        out << s.id << ' ' << s.start.to_string() << ".." << s.end_month().to_string() << " T=" << s.size()
            << " validation=" << s.month_at(b.tuning_end).to_string() << " test=" << s.month_at(b.full_end).to_string()
            << '\n';
    }
    return kExitOk;
}

int cmd_synth(const std::string& path, std::uint64_t seed, std::size_t series, std::ostream& out) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.series = series;
    save_csv(make_synthetic_dataset(spec), path);
    out << path << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monthly electricity demand forecasting with N-BEATS ensembles"};
    app.require_subcommand(1);

    TrainOptions train_opts;
    auto* train = app.add_subcommand("train", "Train a model pool on the full-train range");
    add_train_options(train, train_opts);
    train->add_option("--out", train_opts.out, "Run directory (default $NBEATS_OUT/<preset>-seed<seed>)");
    train->add_option("--manifest", train_opts.manifest, "Re-run the configuration recorded in a manifest");

    EvaluateOptions eval_opts;
    auto* evaluate = app.add_subcommand("evaluate", "Score bootstrap ensembles on the test range");
    evaluate->add_option("--run", eval_opts.run, "Run directory from `train`")->required();
    evaluate->add_option("--out", eval_opts.out, "Report directory (default: the run directory)");
    evaluate->add_option("--data", eval_opts.data, "Override the data file recorded in the manifest");
    evaluate->add_option("--baseline", eval_opts.baselines, "Baseline APEs as name=path (series_id,month,ape)");
    evaluate->add_option("--aggregation", eval_opts.aggregation, "median | mean");
    evaluate->add_option("--members", eval_opts.members, "Ensemble size");
    evaluate->add_option("--trials", eval_opts.trials, "Number of bootstrap ensembles");
    evaluate->add_option("--seed", eval_opts.seed, "Seed for ensemble sampling and bootstrap CIs");
    evaluate->add_option("--jobs", eval_opts.jobs, "Worker threads");

    ForecastOptions fc_opts;
    auto* forecast = app.add_subcommand("forecast", "Forecast the next horizon after each series' last month");
    forecast->add_option("--run", fc_opts.run, "Run directory from `train`")->required();
    forecast->add_option("--out", fc_opts.out, "Output directory (default: the run directory)");
    forecast->add_option("--data", fc_opts.data, "Override the data file recorded in the manifest");
    forecast->add_option("--series", fc_opts.series, "Series ids (default: all)");
    forecast->add_option("--aggregation", fc_opts.aggregation, "median | mean");
    forecast->add_option("--members", fc_opts.members, "Use members 0..n-1 of the pool");
    forecast->add_option("--jobs", fc_opts.jobs, "Worker threads");

    TuneOptions tune_opts;
    auto* tune = app.add_subcommand("tune", "Grid search on the validation range");
    add_train_options(tune, tune_opts.train);
    tune->add_option("--out", tune_opts.train.out, "Output directory");
    tune->add_option("--grid", tune_opts.grid, "GridSpec JSON (default: the full search grid)");
    tune->add_option("--trials-per-config", tune_opts.trials_per_config, "Seeds per configuration");

    std::string ingest_data;
    std::size_t ingest_horizon = kDefaultHorizon;
    auto* ingest = app.add_subcommand("ingest", "Validate a data file and show its split");
    ingest->add_option("--data", ingest_data, "Data CSV")->required();
    ingest->add_option("--horizon", ingest_horizon, "Forecast horizon");

    std::string synth_out;
    std::uint64_t synth_seed = 2014;
    std::size_t synth_series = 35;
    auto* synth = app.add_subcommand("synth", "Write a synthetic demand panel");
    synth->add_option("--out", synth_out, "Output CSV")->required();
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--series", synth_series, "Number of series");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*train) return cmd_train(train_opts, out);
        if (*evaluate) return cmd_evaluate(eval_opts, out);
        if (*forecast) return cmd_forecast(fc_opts, out);
        if (*tune) return cmd_tune(tune_opts, out);
        if (*ingest) return cmd_ingest(ingest_data, ingest_horizon, out);
        if (*synth) return cmd_synth(synth_out, synth_seed, synth_series, out);
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace nbeats::cli

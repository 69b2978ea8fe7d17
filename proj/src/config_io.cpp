#include "nbeats/config_io.hpp"

#include <set>
#include <string>

#include "nbeats/error.hpp"

namespace nbeats {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, std::string_view what) {
    if (!j.is_object()) throw InputError(std::string(what) + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) {
            throw InputError(std::string(what) + ": unknown key '" + it.key() + "'");
        }
    }
}

template <typename T>
void read(const Json& j, const char* key, T& out, std::string_view what) {
    if (!j.contains(key)) return;
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!j.at(key).is_number_unsigned()) throw InputError("not a non-negative integer");
        }
        out = j.at(key).get<T>();
    } catch (const std::exception& e) {
        throw InputError(std::string(what) + ": bad value for '" + key + "': " + e.what());
    }
}

std::string scaling_name(Scaling s) { return s == Scaling::InputMean ? "input_mean" : "none"; }
std::string weighting_name(SeriesWeighting w) {
    return w == SeriesWeighting::WindowCount ? "window_count" : "series_length";
}

}  // namespace

Json to_json(const ModelConfig& c) {
    Json j;
    j["blocks"] = c.blocks;
    j["layers"] = c.layers;
    j["width"] = c.width;
    j["input_size"] = c.input_size;
    j["horizon"] = c.horizon;
    j["sharing"] = c.sharing;
    return j;
}

Json to_json(const TrainConfig& c) {
    Json j;
    j["epochs"] = c.epochs;
    j["batches_per_epoch"] = c.batches_per_epoch;
    j["batch_size"] = c.batch_size;
    j["base_lr"] = c.base_lr;
    j["tau"] = c.tau;
    j["anneal"] = Json{{"factor", c.anneal.factor}, {"every", c.anneal.every}, {"start_epoch", c.anneal.start_epoch}};
    j["model"] = to_json(c.model);
    j["scaling"] = scaling_name(c.scaling);
    j["weighting"] = weighting_name(c.weighting);
    j["seed"] = c.seed;
    return j;
}

Json to_json(const EnsembleSpec& s) {
    Json j;
    j["ensemble_size"] = s.ensemble_size;
    j["trials"] = s.trials;
    j["aggregation"] = to_string(s.aggregation);
    return j;
}

Json to_json(const GridSpec& g) {
    Json j;
    j["batches_per_epoch"] = g.batches_per_epoch;
    j["tau"] = g.tau;
    j["width"] = g.width;
    j["blocks"] = g.blocks;
    j["layers"] = g.layers;
    j["sharing"] = g.sharing;
    j["lookback"] = g.lookback;
    j["batch_size"] = g.batch_size;
    return j;
}

ModelConfig model_config_from_json(const Json& j, ModelConfig base) {
    constexpr std::string_view what = "model config";
    reject_unknown(j, {"blocks", "layers", "width", "input_size", "horizon", "sharing"}, what);
    read(j, "blocks", base.blocks, what);
    read(j, "layers", base.layers, what);
    read(j, "width", base.width, what);
    read(j, "input_size", base.input_size, what);
    read(j, "horizon", base.horizon, what);
    read(j, "sharing", base.sharing, what);
    base.validate();
    return base;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig base) {
    constexpr std::string_view what = "train config";
    reject_unknown(j,
                   {"epochs", "batches_per_epoch", "batch_size", "base_lr", "tau", "anneal", "model", "scaling",
                    "weighting", "seed"},
                   what);
    read(j, "epochs", base.epochs, what);
    read(j, "batches_per_epoch", base.batches_per_epoch, what);
    read(j, "batch_size", base.batch_size, what);
    read(j, "base_lr", base.base_lr, what);
    read(j, "tau", base.tau, what);
    read(j, "seed", base.seed, what);
    if (j.contains("anneal")) {
        const auto& a = j.at("anneal");
        reject_unknown(a, {"factor", "every", "start_epoch"}, "anneal");
        read(a, "factor", base.anneal.factor, "anneal");
        read(a, "every", base.anneal.every, "anneal");
        read(a, "start_epoch", base.anneal.start_epoch, "anneal");
    }
    if (j.contains("model")) base.model = model_config_from_json(j.at("model"), base.model);
    if (j.contains("scaling")) {
        std::string s;
        read(j, "scaling", s, what);
        if (s == "input_mean") base.scaling = Scaling::InputMean;
        else if (s == "none") base.scaling = Scaling::None;
        else throw InputError("train config: scaling must be 'input_mean' or 'none'");
    }
    if (j.contains("weighting")) {
        std::string s;
        read(j, "weighting", s, what);
        if (s == "window_count") base.weighting = SeriesWeighting::WindowCount;
        else if (s == "series_length") base.weighting = SeriesWeighting::SeriesLength;
        else throw InputError("train config: weighting must be 'window_count' or 'series_length'");
    }
    base.validate();
    return base;
}

EnsembleSpec ensemble_spec_from_json(const Json& j, EnsembleSpec base) {
    constexpr std::string_view what = "ensemble spec";
    reject_unknown(j, {"ensemble_size", "trials", "aggregation"}, what);
    read(j, "ensemble_size", base.ensemble_size, what);
    read(j, "trials", base.trials, what);
    if (j.contains("aggregation")) {
        std::string s;
        read(j, "aggregation", s, what);
        base.aggregation = parse_aggregation(s);
    }
    if (base.ensemble_size == 0 || base.trials == 0) throw InputError("ensemble spec: sizes must be >= 1");
    return base;
}

GridSpec grid_spec_from_json(const Json& j, GridSpec base) {
    constexpr std::string_view what = "grid";
    reject_unknown(j, {"batches_per_epoch", "tau", "width", "blocks", "layers", "sharing", "lookback", "batch_size"},
                   what);
    read(j, "batches_per_epoch", base.batches_per_epoch, what);
    read(j, "tau", base.tau, what);
    read(j, "width", base.width, what);
    read(j, "blocks", base.blocks, what);
    read(j, "layers", base.layers, what);
    read(j, "sharing", base.sharing, what);
    read(j, "lookback", base.lookback, what);
    read(j, "batch_size", base.batch_size, what);
    base.validate();
    return base;
}

Preset preset(std::string_view name) {
    Preset p;
    if (name == "paper") {
        p.pool_size = 1024;
        p.ensemble = EnsembleSpec{64, 100, Aggregation::Median};
        return p;
    }
    if (name == "desk") {
        p.train.model.width = 64;
        p.train.model.input_size = 24;
        p.pool_size = 64;
        p.ensemble = EnsembleSpec{16, 20, Aggregation::Median};
        return p;
    }
    throw InputError("unknown preset '" + std::string(name) + "', expected 'desk' or 'paper'");
}

}  // namespace nbeats

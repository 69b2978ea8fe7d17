#pragma once

#include <cstddef>
#include <string_view>

#include "nbeats/ensemble.hpp"
#include "nbeats/json_io.hpp"
#include "nbeats/training.hpp"

namespace nbeats {

Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const EnsembleSpec& s);
Json to_json(const GridSpec& g);

// Keys absent from `j` keep the value from `base`; unknown keys are rejected.
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});
EnsembleSpec ensemble_spec_from_json(const Json& j, EnsembleSpec base = {});
GridSpec grid_spec_from_json(const Json& j, GridSpec base = {});

// Named bundles of every training and ensembling knob.
//   paper: the published settings, pool 1024, ensembles of 64, 100 trials.
//   desk:  the same schedule and loss on a narrower network (width 64) with
//          a 24-month lookback; pool 64, ensembles of 16, 20 trials.
struct Preset {
    TrainConfig train;
    std::size_t pool_size = 64;
    EnsembleSpec ensemble;
};

Preset preset(std::string_view name);

}  // namespace nbeats

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nbeats/execution.hpp"
#include "nbeats/model.hpp"
#include "nbeats/timeseries.hpp"

namespace nbeats {

// Learning rate divided by `factor` every `every` epochs, first at `start_epoch`.
struct AnnealSchedule {
    double factor = 2.0;
    std::size_t every = 2;
    std::size_t start_epoch = 15;

    friend bool operator==(const AnnealSchedule&, const AnnealSchedule&) = default;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batches_per_epoch = 50;
    std::size_t batch_size = 256;
    double base_lr = 0.001;
    double tau = 0.35;
    AnnealSchedule anneal;
    ModelConfig model;
    Scaling scaling = Scaling::InputMean;
    SeriesWeighting weighting = SeriesWeighting::WindowCount;
    std::uint64_t seed = 0;

    void validate() const;  // throws InputError
    [[nodiscard]] std::size_t total_steps() const { return epochs * batches_per_epoch; }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// 1-based epoch. Epochs before start_epoch use base_lr; from start_epoch on the
// rate is base_lr / factor^(1 + (epoch - start_epoch) / every).
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

struct AdamState {
    ModelParams first_moment;
    ModelParams second_moment;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(const ModelConfig& config) : first_moment(config), second_moment(config) {}
};

// One Adam update with bias-corrected moments:
//   p -= lr * mhat / (sqrt(vhat) + eps)
// Throws NumericError on a non-finite gradient, leaving params and state untouched.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               const AdamSettings& settings = {});

struct TrainResult {
    ModelParams params;
    std::vector<double> epoch_loss;  // mean training pinball-MAPE per epoch
};

// epochs x batches_per_epoch Adam steps on batches drawn by the weighted
// stratified sampler. Everything random derives from config.seed.
TrainResult train_model(const Dataset& train_view, const TrainConfig& config,
                        Execution exec = Execution::Parallel);

// ---- hyperparameter search ----

struct GridSpec {
    std::vector<std::size_t> batches_per_epoch{25, 50, 100};
    std::vector<double> tau{0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6};
    std::vector<std::size_t> width{256, 512, 1024};
    std::vector<std::size_t> blocks{1, 2, 3, 5, 10};
    std::vector<std::size_t> layers{2, 3, 4};
    std::vector<bool> sharing{true, false};
    std::vector<std::size_t> lookback{6, 9, 12, 24};
    std::vector<std::size_t> batch_size{128, 256, 512, 1024};

    void validate() const;
    // Every combination except tau, in nested enumeration order
    // (batches_per_epoch outermost, batch_size innermost).
    [[nodiscard]] std::vector<TrainConfig> architectures(const TrainConfig& base) const;
};

struct MemberScore {
    std::uint64_t seed = 0;
    double val_mape = 0.0;
    double val_mpe = 0.0;
};

struct ConfigScore {
    double val_mape = 0.0;  // ensemble over members
    double val_mpe = 0.0;
    std::vector<MemberScore> members;
};

struct ScoreRow {
    TrainConfig config;
    std::string seed;  // member seed, or "ensemble"
    double val_mape = 0.0;
    double val_mpe = 0.0;
};

using Scorer = std::function<ConfigScore(const TrainConfig&)>;

struct GridResult {
    TrainConfig best;
    std::vector<ScoreRow> table;
};

// Phase 1: argmin validation MAPE over every non-tau configuration (at base.tau),
// ties to the earliest. Phase 2: holding the winner, argmin |validation MPE| over tau.
GridResult grid_search(const GridSpec& grid, const TrainConfig& base, const Scorer& scorer);

// One row per (config, seed) plus each config's ensemble row.
void write_score_table(const std::vector<ScoreRow>& rows, const std::filesystem::path& path);

}  // namespace nbeats

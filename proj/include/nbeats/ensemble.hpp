#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nbeats/execution.hpp"
#include "nbeats/json_io.hpp"
#include "nbeats/metrics.hpp"
#include "nbeats/model.hpp"
#include "nbeats/training.hpp"

namespace nbeats {

enum class Aggregation { Median, Mean };

std::string to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

struct EnsembleSpec {
    std::size_t ensemble_size = 16;  // E
    std::size_t trials = 20;         // K
    Aggregation aggregation = Aggregation::Median;

    friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

struct PoolMember {
    std::uint64_t seed = 0;
    ModelParams params;
    std::vector<double> epoch_loss;
};

struct ModelPool {
    TrainConfig config;  // shared by every member; config.seed is the base seed
    std::vector<PoolMember> members;

    [[nodiscard]] std::size_t size() const { return members.size(); }
};

// Members train with seeds base_seed .. base_seed + P - 1. Parallel execution
// spreads members over OpenMP threads; each member is bitwise identical to a
// standalone train_model call with its seed.
ModelPool train_pool(const Dataset& train_view, const TrainConfig& config, std::size_t pool_size,
                     std::uint64_t base_seed, Execution exec = Execution::Parallel);

// K index sets of E distinct members each, drawn without replacement from 0..P-1.
std::vector<std::vector<std::size_t>> bootstrap_ensembles(std::size_t pool_size, const EnsembleSpec& spec, Rng& rng);

// Combines per-member forecasts coordinate-wise. Even-count medians take the
// midpoint of the two central values.
std::vector<double> aggregate(std::span<const std::vector<double>> member_forecasts, Aggregation aggregation);

// Forecast from a raw (MWh) lookback window: each member sees the window scaled
// per `scaling`, its output is scaled back, then outputs are aggregated.
std::vector<double> ensemble_forecast(std::span<const ModelParams* const> members, std::span<const double> raw_input,
                                      Scaling scaling, Aggregation aggregation = Aggregation::Median);
std::vector<double> ensemble_forecast(const std::vector<ModelParams>& members, std::span<const double> raw_input,
                                      Scaling scaling, Aggregation aggregation = Aggregation::Median);

// Raw-scale forecasts from the last w points of every series: [member][series] -> H values.
using ForecastCube = std::vector<std::vector<std::vector<double>>>;
ForecastCube forecast_members(const std::vector<PoolMember>& members, const Dataset& histories, Scaling scaling,
                              Execution exec = Execution::Parallel);

// Targets a forecast is scored against: per series the actual values and the
// calendar month of the first one.
struct EvaluationTargets {
    std::vector<std::string> series_ids;
    std::vector<std::vector<double>> actuals;
    std::vector<YearMonth> first_month;
};

EvaluationTargets test_targets(const SplitDataset& split);
EvaluationTargets validation_targets(const SplitDataset& split);

struct EvaluationReport {
    std::vector<std::string> series_ids;
    std::vector<MetricsReport> per_series;
    std::array<double, 12> per_month_mape{};  // calendar months 1..12; NaN when no point falls there
    MetricsReport aggregate;                  // from the pooled per-point errors
    std::vector<double> ape;                  // per point, series-major
    std::vector<double> pe;
};

EvaluationReport evaluate_forecasts(const EvaluationTargets& targets,
                                    const std::vector<std::vector<double>>& forecasts);

struct DistributionSummary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
    double min = 0.0;
    double p5 = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
    double p95 = 0.0;
    double max = 0.0;
};

DistributionSummary summarize(std::vector<double> values);
Json to_json(const DistributionSummary& s);

struct EnsembleEvaluation {
    std::vector<EvaluationReport> trials;
    DistributionSummary mape;         // across trials
    DistributionSummary mpe;
    DistributionSummary member_mape;  // single members, for variance comparison
    DistributionSummary member_mpe;
    EvaluationReport mean_report;     // per-series metrics, per-month MAPE, APE/PE averaged over trials
};

EnsembleEvaluation evaluate_ensembles(const ForecastCube& cube, const std::vector<std::vector<std::size_t>>& ensembles,
                                      const EvaluationTargets& targets, Aggregation aggregation);
EnsembleEvaluation evaluate_ensembles(const ModelPool& pool, const EnsembleSpec& spec, const SplitDataset& split,
                                      Rng& rng, Execution exec = Execution::Parallel);

// Mean rank per model across series; rank 1 is the lowest value, ties share
// the average of their ranks. Input/output keep the caller's model order.
using NamedValues = std::vector<std::pair<std::string, std::vector<double>>>;
std::vector<std::pair<std::string, double>> rank_models(const NamedValues& per_series_metric);

// Validation scorer for grid_search: trains `trials` members on the tuning
// view, ensembles them, and scores the validation horizon.
Scorer make_validation_scorer(const SplitDataset& split, std::size_t trials, Aggregation aggregation,
                              Execution exec = Execution::Parallel);

// per_series.csv, per_month.csv, ape.csv.
void write_per_series_csv(const EvaluationReport& report, const std::filesystem::path& path);
void write_per_month_csv(const EvaluationReport& report, const std::filesystem::path& path);
void write_ape_csv(const EvaluationReport& report, const EvaluationTargets& targets, const std::filesystem::path& path);

}  // namespace nbeats

#include "nbeats/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>

#include "nbeats/error.hpp"
#include "nbeats/kernels.hpp"

namespace nbeats {

std::string to_string(Aggregation a) { return a == Aggregation::Median ? "median" : "mean"; }

Aggregation parse_aggregation(std::string_view text) {
    if (text == "median") return Aggregation::Median;
    if (text == "mean") return Aggregation::Mean;
    throw InputError("aggregation must be 'median' or 'mean', got '" + std::string(text) + "'");
}

namespace {

// Runs body(i) for i in [0, n) across OpenMP threads and rethrows the first failure.
template <typename Body>
void parallel_for(std::size_t n, Execution exec, Body&& body) {
    if (exec == Execution::Serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(nbeats_parallel_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

ModelPool train_pool(const Dataset& train_view, const TrainConfig& config, std::size_t pool_size,
                     std::uint64_t base_seed, Execution exec) {
    if (pool_size == 0) throw InputError("pool size must be >= 1");
    config.validate();
    ModelPool pool;
    pool.config = config;
    pool.config.seed = base_seed;
    pool.members.resize(pool_size);
    parallel_for(pool_size, exec, [&](std::size_t i) {
        TrainConfig member = config;
        member.seed = base_seed + i;
        auto trained = train_model(train_view, member, Execution::Parallel);
        pool.members[i] = PoolMember{member.seed, std::move(trained.params), std::move(trained.epoch_loss)};
    });
    return pool;
}

std::vector<std::vector<std::size_t>> bootstrap_ensembles(std::size_t pool_size, const EnsembleSpec& spec, Rng& rng) {
    if (spec.ensemble_size == 0 || spec.trials == 0) throw InputError("ensemble size and trials must be >= 1");
    if (spec.ensemble_size > pool_size) {
        throw InputError("ensemble size " + std::to_string(spec.ensemble_size) + " exceeds pool size " +
                         std::to_string(pool_size));
    }
    std::vector<std::vector<std::size_t>> out;
    out.reserve(spec.trials);
    std::vector<std::size_t> indices(pool_size);
    for (std::size_t k = 0; k < spec.trials; ++k) {
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        // Partial Fisher-Yates: the first E slots are a uniform draw without replacement.
        for (std::size_t i = 0; i < spec.ensemble_size; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
            std::swap(indices[i], indices[pick(rng)]);
        }
        out.emplace_back(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(spec.ensemble_size));
    }
    return out;
}

std::vector<double> aggregate(std::span<const std::vector<double>> member_forecasts, Aggregation aggregation) {
    if (member_forecasts.empty()) throw InputError("ensemble needs at least one member");
    const std::size_t h = member_forecasts.front().size();
    std::vector<double> out(h);
    std::vector<double> column(member_forecasts.size());
    for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t m = 0; m < member_forecasts.size(); ++m) {
            if (member_forecasts[m].size() != h) throw InputError("ensemble members disagree on horizon");
            column[m] = member_forecasts[m][k];
        }
        if (aggregation == Aggregation::Mean) {
            out[k] = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(column.size());
        } else {
            std::sort(column.begin(), column.end());
            const std::size_t n = column.size();
            out[k] = n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
        }
    }
    return out;
}

std::vector<double> ensemble_forecast(std::span<const ModelParams* const> members, std::span<const double> raw_input,
                                      Scaling scaling, Aggregation aggregation) {
    if (members.empty()) throw InputError("ensemble needs at least one member");
    double scale = 1.0;
    std::vector<double> x(raw_input.begin(), raw_input.end());
    if (scaling == Scaling::InputMean) {
        scale = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        for (auto& v : x) v /= scale;
    }
    std::vector<std::vector<double>> outputs;
    outputs.reserve(members.size());
    const auto& config = members.front()->config();
    for (const auto* m : members) {
        if (m->config() != config) throw InputError("ensemble members must share one model config");
        auto f = predict(*m, x);
        for (auto& v : f) v *= scale;
        outputs.push_back(std::move(f));
    }
    return aggregate(outputs, aggregation);
}

std::vector<double> ensemble_forecast(const std::vector<ModelParams>& members, std::span<const double> raw_input,
                                      Scaling scaling, Aggregation aggregation) {
    std::vector<const ModelParams*> ptrs;
    ptrs.reserve(members.size());
    for (const auto& m : members) ptrs.push_back(&m);
    return ensemble_forecast(ptrs, raw_input, scaling, aggregation);
}

ForecastCube forecast_members(const std::vector<PoolMember>& members, const Dataset& histories, Scaling scaling,
                              Execution exec) {
    if (members.empty()) throw InputError("pool is empty");
    const auto& cfg = members.front().params.config();
    const std::size_t w = cfg.input_size;
    const std::size_t h = cfg.horizon;
    std::vector<double> inputs;
    std::vector<double> scales;
    inputs.reserve(histories.size() * w);
    for (const auto& s : histories.series()) {
        const auto win = final_window(s, w, scaling);
        inputs.insert(inputs.end(), win.input.begin(), win.input.end());
        scales.push_back(win.scale);
    }
    ForecastCube cube(members.size());
    parallel_for(members.size(), exec, [&](std::size_t m) {
        const auto flat = forecast_batch(members[m].params, inputs, Execution::Parallel);
        auto& out = cube[m];
        out.resize(histories.size());
        for (std::size_t s = 0; s < histories.size(); ++s) {
            out[s].assign(flat.begin() + static_cast<std::ptrdiff_t>(s * h),
                          flat.begin() + static_cast<std::ptrdiff_t>((s + 1) * h));
            for (auto& v : out[s]) v *= scales[s];
        }
    });
    return cube;
}

namespace {

EvaluationTargets targets_from(const SplitDataset& split, bool test) {
    EvaluationTargets t;
    const auto& data = split.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& b = split.bounds()[i];
        const auto span = test ? split.test_targets(i) : split.validation_targets(i);
        t.series_ids.push_back(data[i].id);
        t.actuals.emplace_back(span.begin(), span.end());
        t.first_month.push_back(data[i].month_at(test ? b.full_end : b.tuning_end));
    }
    return t;
}

}  // namespace

EvaluationTargets test_targets(const SplitDataset& split) { return targets_from(split, true); }
EvaluationTargets validation_targets(const SplitDataset& split) { return targets_from(split, false); }

EvaluationReport evaluate_forecasts(const EvaluationTargets& targets,
                                    const std::vector<std::vector<double>>& forecasts) {
    if (forecasts.size() != targets.actuals.size()) throw InputError("forecast count does not match series count");
    EvaluationReport r;
    r.series_ids = targets.series_ids;
    std::vector<double> all_y;
    std::vector<double> all_f;
    std::array<double, 12> month_sum{};
    std::array<std::size_t, 12> month_count{};
    for (std::size_t s = 0; s < forecasts.size(); ++s) {
        const auto& y = targets.actuals[s];
        const auto& f = forecasts[s];
        r.per_series.push_back(evaluate(y, f));
        const auto ape = absolute_percentage_errors(y, f);
        const auto pe = percentage_errors(y, f);
        for (std::size_t k = 0; k < y.size(); ++k) {
            const auto m = static_cast<std::size_t>(targets.first_month[s].plus(static_cast<std::int64_t>(k)).month - 1);
            month_sum[m] += ape[k];
            ++month_count[m];
        }
        r.ape.insert(r.ape.end(), ape.begin(), ape.end());
        r.pe.insert(r.pe.end(), pe.begin(), pe.end());
        all_y.insert(all_y.end(), y.begin(), y.end());
        all_f.insert(all_f.end(), f.begin(), f.end());
    }
    for (std::size_t m = 0; m < 12; ++m) {
        r.per_month_mape[m] = month_count[m] > 0 ? month_sum[m] / static_cast<double>(month_count[m])
                                                 : std::numeric_limits<double>::quiet_NaN();
    }
    r.aggregate = evaluate(all_y, all_f);
    return r;
}

DistributionSummary summarize(std::vector<double> values) {
    if (values.empty()) throw InputError("cannot summarize an empty sample");
    std::sort(values.begin(), values.end());
    DistributionSummary s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    s.min = values.front();
    s.max = values.back();
    s.p5 = quantile_sorted(values, 0.05);
    s.p25 = quantile_sorted(values, 0.25);
    s.p50 = quantile_sorted(values, 0.50);
    s.p75 = quantile_sorted(values, 0.75);
    s.p95 = quantile_sorted(values, 0.95);
    return s;
}

Json to_json(const DistributionSummary& s) {
    Json j;
    j["mean"] = s.mean;
    j["std"] = s.std;
    j["min"] = s.min;
    j["p5"] = s.p5;
    j["p25"] = s.p25;
    j["p50"] = s.p50;
    j["p75"] = s.p75;
    j["p95"] = s.p95;
    j["max"] = s.max;
    return j;
}

namespace {

void add_scaled(MetricsReport& acc, const MetricsReport& r, double wgt) {
    acc.median_ape += wgt * r.median_ape;
    acc.mape += wgt * r.mape;
    acc.iqr_ape += wgt * r.iqr_ape;
    acc.rmse += wgt * r.rmse;
    acc.mpe += wgt * r.mpe;
    acc.n = r.n;
}

EvaluationReport average_reports(const std::vector<EvaluationReport>& trials) {
    EvaluationReport avg;
    const auto& first = trials.front();
    const double wgt = 1.0 / static_cast<double>(trials.size());
    avg.series_ids = first.series_ids;
    avg.per_series.assign(first.per_series.size(), MetricsReport{});
    avg.ape.assign(first.ape.size(), 0.0);
    avg.pe.assign(first.pe.size(), 0.0);
    avg.per_month_mape.fill(0.0);
    for (const auto& t : trials) {
        for (std::size_t s = 0; s < t.per_series.size(); ++s) add_scaled(avg.per_series[s], t.per_series[s], wgt);
        add_scaled(avg.aggregate, t.aggregate, wgt);
        for (std::size_t i = 0; i < t.ape.size(); ++i) {
            avg.ape[i] += wgt * t.ape[i];
            avg.pe[i] += wgt * t.pe[i];
        }
        for (std::size_t m = 0; m < 12; ++m) avg.per_month_mape[m] += wgt * t.per_month_mape[m];
    }
    return avg;
}

}  // namespace

EnsembleEvaluation evaluate_ensembles(const ForecastCube& cube, const std::vector<std::vector<std::size_t>>& ensembles,
                                      const EvaluationTargets& targets, Aggregation aggregation) {
    if (ensembles.empty()) throw InputError("no ensembles to evaluate");
    if (cube.empty()) throw InputError("no member forecasts");
    EnsembleEvaluation ev;
    ev.trials.resize(ensembles.size());
    const std::size_t series = targets.actuals.size();
    parallel_for(ensembles.size(), Execution::Parallel, [&](std::size_t k) {
        std::vector<std::vector<double>> forecasts(series);
        std::vector<std::vector<double>> column;
        for (std::size_t s = 0; s < series; ++s) {
            column.clear();
            for (std::size_t m : ensembles[k]) column.push_back(cube.at(m)[s]);
            forecasts[s] = aggregate(column, aggregation);
        }
        ev.trials[k] = evaluate_forecasts(targets, forecasts);
    });

    std::vector<double> mapes;
    std::vector<double> mpes;
    for (const auto& t : ev.trials) {
        mapes.push_back(t.aggregate.mape);
        mpes.push_back(t.aggregate.mpe);
    }
    ev.mape = summarize(mapes);
    ev.mpe = summarize(mpes);

    std::vector<double> member_mapes;
    std::vector<double> member_mpes;
    for (const auto& member : cube) {
        const auto r = evaluate_forecasts(targets, member);
        member_mapes.push_back(r.aggregate.mape);
        member_mpes.push_back(r.aggregate.mpe);
    }
    ev.member_mape = summarize(member_mapes);
    ev.member_mpe = summarize(member_mpes);
    ev.mean_report = average_reports(ev.trials);
    return ev;
}

EnsembleEvaluation evaluate_ensembles(const ModelPool& pool, const EnsembleSpec& spec, const SplitDataset& split,
                                      Rng& rng, Execution exec) {
    const auto ensembles = bootstrap_ensembles(pool.size(), spec, rng);
    const auto cube = forecast_members(pool.members, split.full_train(), pool.config.scaling, exec);
    return evaluate_ensembles(cube, ensembles, test_targets(split), spec.aggregation);
}

std::vector<std::pair<std::string, double>> rank_models(const NamedValues& per_series_metric) {
    if (per_series_metric.empty()) throw InputError("rank_models: no models");
    const std::size_t series = per_series_metric.front().second.size();
    if (series == 0) throw InputError("rank_models: no series");
    for (const auto& [name, values] : per_series_metric) {
        if (values.size() != series) throw InputError("rank_models: model '" + name + "' covers a different series set");
    }
    const std::size_t models = per_series_metric.size();
    std::vector<double> rank_sum(models, 0.0);
    std::vector<std::size_t> order(models);
    for (std::size_t s = 0; s < series; ++s) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return per_series_metric[a].second[s] < per_series_metric[b].second[s];
        });
        for (std::size_t i = 0; i < models;) {
            std::size_t j = i + 1;
            while (j < models && per_series_metric[order[j]].second[s] == per_series_metric[order[i]].second[s]) ++j;
            const double shared = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
            for (std::size_t k = i; k < j; ++k) rank_sum[order[k]] += shared;
            i = j;
        }
    }
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t m = 0; m < models; ++m) {
        out.emplace_back(per_series_metric[m].first, rank_sum[m] / static_cast<double>(series));
    }
    return out;
}

Scorer make_validation_scorer(const SplitDataset& split, std::size_t trials, Aggregation aggregation, Execution exec) {
    if (trials == 0) throw InputError("trials per config must be >= 1");
    return [&split, trials, aggregation, exec](const TrainConfig& config) {
        const auto view = split.tuning_train();
        const auto pool = train_pool(view, config, trials, config.seed, exec);
        const auto cube = forecast_members(pool.members, view, config.scaling, exec);
        std::vector<std::size_t> all(trials);
        std::iota(all.begin(), all.end(), std::size_t{0});
        const auto ev = evaluate_ensembles(cube, {all}, validation_targets(split), aggregation);
        ConfigScore score;
        score.val_mape = ev.trials.front().aggregate.mape;
        score.val_mpe = ev.trials.front().aggregate.mpe;
        const auto targets = validation_targets(split);
        for (std::size_t m = 0; m < trials; ++m) {
            const auto r = evaluate_forecasts(targets, cube[m]);
            score.members.push_back({pool.members[m].seed, r.aggregate.mape, r.aggregate.mpe});
        }
        return score;
    };
}

void write_per_series_csv(const EvaluationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << "series_id,median_ape,mape,iqr_ape,rmse,mpe\n";
    for (std::size_t s = 0; s < report.per_series.size(); ++s) {
        const auto& m = report.per_series[s];
        out << report.series_ids[s] << ',' << format_number(m.median_ape) << ',' << format_number(m.mape) << ','
            << format_number(m.iqr_ape) << ',' << format_number(m.rmse) << ',' << format_number(m.mpe) << '\n';
    }
}

void write_per_month_csv(const EvaluationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << "month,mape\n";
    for (std::size_t m = 0; m < 12; ++m) out << (m + 1) << ',' << format_number(report.per_month_mape[m]) << '\n';
}

void write_ape_csv(const EvaluationReport& report, const EvaluationTargets& targets, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << "series_id,month,ape,pe\n";
    std::size_t i = 0;
    for (std::size_t s = 0; s < targets.actuals.size(); ++s) {
        for (std::size_t k = 0; k < targets.actuals[s].size(); ++k, ++i) {
            out << targets.series_ids[s] << ',' << targets.first_month[s].plus(static_cast<std::int64_t>(k)).to_string()
                << ',' << format_number(report.ape[i]) << ',' << format_number(report.pe[i]) << '\n';
        }
    }
}

}  // namespace nbeats

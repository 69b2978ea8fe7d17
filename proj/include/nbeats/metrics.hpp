#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nbeats/execution.hpp"
#include "nbeats/timeseries.hpp"

namespace nbeats {

// ---- losses ----

// Mean absolute percentage error, in percent.
double mape(std::span<const double> y, std::span<const double> yhat);

// Pinball-MAPE, in percent, averaged over all y.size() terms:
//   200 tau (y - yhat) / y        if y >= yhat
//   200 (1 - tau) (yhat - y) / y  otherwise
// tau = 0.5 reproduces mape.
double pmape(std::span<const double> y, std::span<const double> yhat, double tau);

// dpmape/dyhat. The y == yhat boundary takes the y >= yhat branch.
// `count` is N in the average; 0 means y.size().
std::vector<double> pmape_grad(std::span<const double> y, std::span<const double> yhat, double tau,
                               std::size_t count = 0);

// Per-element term and slope without the 1/N factor, shared with the batched kernels.
inline double pinball_term(double y, double yhat, double tau) {
    return y >= yhat ? 200.0 * tau * (y - yhat) / y : 200.0 * (1.0 - tau) * (yhat - y) / y;
}
inline double pinball_slope(double y, double yhat, double tau) {
    return y >= yhat ? -200.0 * tau / y : 200.0 * (1.0 - tau) / y;
}

void check_tau(double tau);  // throws InputError unless 0 < tau < 1

// ---- metrics ----

struct MetricsReport {
    double median_ape = 0.0;  // %
    double mape = 0.0;        // %
    double iqr_ape = 0.0;     // %, Q75 - Q25 of APE
    double rmse = 0.0;        // MWh
    double mpe = 0.0;         // %, negative means overprediction
    std::size_t n = 0;
};

MetricsReport evaluate(std::span<const double> y, std::span<const double> yhat);

// 100 |y - yhat| / y and 100 (y - yhat) / y per point.
std::vector<double> absolute_percentage_errors(std::span<const double> y, std::span<const double> yhat);
std::vector<double> percentage_errors(std::span<const double> y, std::span<const double> yhat);

// Linear interpolation between order statistics (type 7): h = (n - 1) p.
double quantile(std::vector<double> values, double p);
double quantile_sorted(std::span<const double> sorted, double p);
double median(std::vector<double> values);

// Flat JSON object, keys median_ape, mape, iqr_ape, rmse, mpe, n; 17 significant digits.
std::string to_json(const MetricsReport& report);

// ---- statistical tests ----

struct ConfidenceInterval {
    double mean_diff = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.99;
    std::size_t n_boot = 0;
};

// Percentile bootstrap of the mean paired difference ape_baseline - ape_candidate.
// Resamples are split into fixed blocks, each seeded from `rng` in order, so the
// serial and parallel paths give bitwise-identical intervals.
ConfidenceInterval bootstrap_mape_diff_ci(std::span<const double> ape_baseline, std::span<const double> ape_candidate,
                                          Rng& rng, std::size_t n_boot = 100000, double level = 0.99,
                                          Execution exec = Execution::Parallel);

struct TTestResult {
    double t = 0.0;
    double critical = 0.0;  // Student-t quantile at 1 - alpha/2, n - 1 dof
    double p_value = 1.0;
    bool reject = false;
};

// Two-sided one-sample t-test of zero mean.
TTestResult t_test_zero_mean(std::span<const double> pe, double alpha = 0.01);

// ---- baseline ----

// Forecast month m equals the observation at m - 12.
std::vector<double> snaive_forecast(const TimeSeries& series, std::size_t horizon);

}  // namespace nbeats

#include "nbeats/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "nbeats/error.hpp"
#include "nbeats/json_io.hpp"

namespace nbeats {

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) {
        throw InputError("length mismatch: " + std::to_string(y.size()) + " actuals vs " +
                         std::to_string(yhat.size()) + " forecasts");
    }
    if (y.empty()) throw InputError("empty input");
    for (double v : y) {
        if (!(v > 0.0)) throw InputError("actual values must be strictly positive");
    }
}

}  // namespace

void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw InputError("tau must lie in (0, 1), got " + std::to_string(tau));
}

double mape(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += 100.0 * std::abs(y[i] - yhat[i]) / y[i];
    return sum / static_cast<double>(y.size());
}

double pmape(std::span<const double> y, std::span<const double> yhat, double tau) {
    check_pair(y, yhat);
    check_tau(tau);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += pinball_term(y[i], yhat[i], tau);
    return sum / static_cast<double>(y.size());
}

std::vector<double> pmape_grad(std::span<const double> y, std::span<const double> yhat, double tau,
                               std::size_t count) {
    check_pair(y, yhat);
    check_tau(tau);
    const double n = static_cast<double>(count == 0 ? y.size() : count);
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = pinball_slope(y[i], yhat[i], tau) / n;
    return g;
}

std::vector<double> absolute_percentage_errors(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat);
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = 100.0 * std::abs(y[i] - yhat[i]) / y[i];
    return out;
}

std::vector<double> percentage_errors(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat);
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = 100.0 * (y[i] - yhat[i]) / y[i];
    return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InputError("quantile of empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

MetricsReport evaluate(std::span<const double> y, std::span<const double> yhat) {
    auto ape = absolute_percentage_errors(y, yhat);
    MetricsReport r;
    r.n = y.size();
    double sq = 0.0;
    double pe = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - yhat[i];
        sq += e * e;
        pe += e / y[i];
    }
    r.rmse = std::sqrt(sq / static_cast<double>(r.n));
    r.mpe = 100.0 * pe / static_cast<double>(r.n);
    r.mape = std::accumulate(ape.begin(), ape.end(), 0.0) / static_cast<double>(r.n);
    std::sort(ape.begin(), ape.end());
    r.median_ape = quantile_sorted(ape, 0.5);
    r.iqr_ape = quantile_sorted(ape, 0.75) - quantile_sorted(ape, 0.25);
    return r;
}

std::string to_json(const MetricsReport& report) {
    Json j;
    j["median_ape"] = report.median_ape;
    j["mape"] = report.mape;
    j["iqr_ape"] = report.iqr_ape;
    j["rmse"] = report.rmse;
    j["mpe"] = report.mpe;
    j["n"] = report.n;
    return dump_json(j, -1);
}

ConfidenceInterval bootstrap_mape_diff_ci(std::span<const double> ape_baseline, std::span<const double> ape_candidate,
                                          Rng& rng, std::size_t n_boot, double level, Execution exec) {
    if (ape_baseline.size() != ape_candidate.size()) throw InputError("bootstrap: paired APE length mismatch");
    if (ape_baseline.size() < 2) throw InputError("bootstrap: need at least 2 paired errors");
    if (n_boot == 0) throw InputError("bootstrap: n_boot must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw InputError("bootstrap: level must lie in (0, 1)");

    const std::size_t n = ape_baseline.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = ape_baseline[i] - ape_candidate[i];

    constexpr std::size_t kBlock = 1024;
    const std::size_t blocks = (n_boot + kBlock - 1) / kBlock;
    std::vector<std::uint64_t> seeds(blocks);
    for (auto& s : seeds) s = rng();

    std::vector<double> means(n_boot);
    const auto run_block = [&](std::size_t b) {
        Rng local(seeds[b]);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const std::size_t end = std::min(n_boot, (b + 1) * kBlock);
        for (std::size_t k = b * kBlock; k < end; ++k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += diff[pick(local)];
            means[k] = sum / static_cast<double>(n);
        }
    };
    if (exec == Execution::Parallel) {
        const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < nb; ++b) run_block(static_cast<std::size_t>(b));
    } else {
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    }

    std::sort(means.begin(), means.end());
    const double alpha = 1.0 - level;
    ConfidenceInterval ci;
    ci.mean_diff = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
    ci.lower = quantile_sorted(means, alpha / 2.0);
    ci.upper = quantile_sorted(means, 1.0 - alpha / 2.0);
    ci.level = level;
    ci.n_boot = n_boot;
    return ci;
}

TTestResult t_test_zero_mean(std::span<const double> pe, double alpha) {
    if (pe.size() < 2) throw InputError("t-test: need at least 2 observations");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("t-test: alpha must lie in (0, 1)");
    const double n = static_cast<double>(pe.size());
    const double mean = std::accumulate(pe.begin(), pe.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : pe) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0)) throw InputError("t-test: zero variance");

    namespace bm = boost::math;
    const bm::students_t dist(n - 1.0);
    TTestResult r;
    r.t = mean / (sd / std::sqrt(n));
    r.critical = bm::quantile(bm::complement(dist, alpha / 2.0));
    r.p_value = 2.0 * bm::cdf(bm::complement(dist, std::abs(r.t)));
    r.reject = std::abs(r.t) > r.critical;
    return r;
}

std::vector<double> snaive_forecast(const TimeSeries& series, std::size_t horizon) {
    constexpr std::size_t kPeriod = 12;
    if (series.size() < kPeriod) throw InputError("seasonal naive needs at least 12 observations");
    if (horizon == 0 || horizon > kPeriod) throw InputError("seasonal naive horizon must lie in 1..12");
    const auto first = series.values.end() - static_cast<std::ptrdiff_t>(kPeriod);
    return {first, first + static_cast<std::ptrdiff_t>(horizon)};
}

}  // namespace nbeats

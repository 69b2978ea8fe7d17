#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nbeats {

using Rng = std::mt19937_64;

// Calendar month without days or time zones.
struct YearMonth {
    int year = 1970;
    int month = 1;  // 1..12

    // Months since year 0, January; used for gap checks and arithmetic.
    [[nodiscard]] std::int64_t ordinal() const { return std::int64_t{year} * 12 + (month - 1); }
    [[nodiscard]] YearMonth plus(std::int64_t months) const;
    [[nodiscard]] std::string to_string() const;  // YYYY-MM

    // Strict YYYY-MM; throws InputError.
    static YearMonth parse(std::string_view text);

    friend auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

struct TimeSeries {
    std::string id;
    YearMonth start;
    std::vector<double> values;  // monthly demand, MWh, strictly positive

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] YearMonth month_at(std::size_t index) const { return start.plus(static_cast<std::int64_t>(index)); }
    [[nodiscard]] YearMonth end_month() const { return month_at(values.size() - 1); }

    // First `length` points, same id and start.
    [[nodiscard]] TimeSeries prefix(std::size_t length) const;
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<TimeSeries> series);

    [[nodiscard]] const std::vector<TimeSeries>& series() const { return series_; }
    [[nodiscard]] std::size_t size() const { return series_.size(); }
    [[nodiscard]] const TimeSeries& operator[](std::size_t i) const { return series_[i]; }
    [[nodiscard]] const TimeSeries& at(std::string_view id) const;
    [[nodiscard]] std::ptrdiff_t index_of(std::string_view id) const;  // -1 when absent

private:
    std::vector<TimeSeries> series_;
};

// Reads `series_id,month,demand_mwh`. Errors carry the 1-based file row (header is row 1).
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(std::string_view text);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

// Per-series boundaries, 0-based, half-open:
//   tuning-train [0, tuning_end), validation targets [tuning_end, full_end),
//   full-train [0, full_end), test targets [full_end, length).
struct SeriesSplit {
    std::size_t tuning_end = 0;
    std::size_t full_end = 0;
    std::size_t length = 0;
};

inline constexpr std::size_t kDefaultHorizon = 12;
inline constexpr std::size_t kMinLookback = 6;

class SplitDataset {
public:
    SplitDataset(Dataset data, std::size_t horizon, std::size_t min_lookback = kMinLookback);

    [[nodiscard]] std::size_t horizon() const { return horizon_; }
    [[nodiscard]] const Dataset& data() const { return data_; }
    [[nodiscard]] const std::vector<SeriesSplit>& bounds() const { return bounds_; }

    // Training views hold copies of the allowed prefixes only; nothing past the
    // boundary is reachable from them.
    [[nodiscard]] Dataset tuning_train() const;
    [[nodiscard]] Dataset full_train() const;

    [[nodiscard]] std::span<const double> validation_targets(std::size_t series) const;
    [[nodiscard]] std::span<const double> test_targets(std::size_t series) const;

private:
    Dataset data_;
    std::size_t horizon_;
    std::vector<SeriesSplit> bounds_;
};

SplitDataset split(Dataset dataset, std::size_t horizon = kDefaultHorizon,
                   std::size_t min_lookback = kMinLookback);

enum class Scaling { InputMean, None };

struct WindowSample {
    std::size_t series = 0;       // index into the sampled Dataset
    std::size_t split_index = 0;  // t, 1-based position of the last input point
    std::vector<double> input;    // length w, divided by scale
    std::vector<double> target;   // length H, divided by scale
    double scale = 1.0;
};

// Requires w <= t <= T - H with t 1-based; throws InputError otherwise.
WindowSample make_window(const TimeSeries& series, std::size_t t, std::size_t w, std::size_t horizon,
                         Scaling scaling = Scaling::InputMean);

// Last `w` observations as a forecasting input (no target).
WindowSample final_window(const TimeSeries& series, std::size_t w, Scaling scaling);

enum class SeriesWeighting {
    WindowCount,   // every valid training window equally likely
    SeriesLength,  // probability proportional to T among series with >= 1 window
};

// Weighted stratified sampler: draw a series by weight, then a split index
// uniformly among that series' valid windows.
class WindowSampler {
public:
    WindowSampler(const Dataset& dataset, std::size_t w, std::size_t horizon,
                  SeriesWeighting weighting = SeriesWeighting::WindowCount);

    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    [[nodiscard]] std::vector<double> probabilities() const;
    [[nodiscard]] std::size_t valid_windows(std::size_t series) const;

    struct Draw {
        std::size_t series;
        std::size_t t;
    };
    Draw draw(Rng& rng) const;

    std::vector<WindowSample> sample(std::size_t batch_size, Rng& rng, Scaling scaling) const;

private:
    const Dataset* dataset_;
    std::size_t w_;
    std::size_t horizon_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
};

std::vector<WindowSample> sample_batch(const Dataset& dataset, std::size_t batch_size, std::size_t w,
                                       std::size_t horizon, Rng& rng, Scaling scaling = Scaling::InputMean,
                                       SeriesWeighting weighting = SeriesWeighting::WindowCount);

}  // namespace nbeats

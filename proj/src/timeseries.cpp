#include "nbeats/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "nbeats/error.hpp"

namespace nbeats {

namespace {

constexpr std::string_view kCsvHeader = "series_id,month,demand_mwh";

std::string row_prefix(std::size_t row) { return "row " + std::to_string(row) + ": "; }

}  // namespace

YearMonth YearMonth::plus(std::int64_t months) const {
    const std::int64_t ord = ordinal() + months;
    const std::int64_t y = ord >= 0 ? ord / 12 : (ord - 11) / 12;
    return YearMonth{static_cast<int>(y), static_cast<int>(ord - y * 12) + 1};
}

std::string YearMonth::to_string() const {
    std::ostringstream os;
    os << std::setfill('0') << std::setw(4) << year << '-' << std::setw(2) << month;
    return os.str();
}

YearMonth YearMonth::parse(std::string_view text) {
    if (text.size() != 7 || text[4] != '-') {
        throw InputError("malformed month '" + std::string(text) + "', expected YYYY-MM");
    }
    for (std::size_t i : {0, 1, 2, 3, 5, 6}) {
        if (text[i] < '0' || text[i] > '9') {
            throw InputError("malformed month '" + std::string(text) + "', expected YYYY-MM");
        }
    }
    YearMonth ym;
    std::from_chars(text.data(), text.data() + 4, ym.year);
    std::from_chars(text.data() + 5, text.data() + 7, ym.month);
    if (ym.month < 1 || ym.month > 12) {
        throw InputError("malformed month '" + std::string(text) + "', month must be 01..12");
    }
    return ym;
}

TimeSeries TimeSeries::prefix(std::size_t length) const {
    TimeSeries out{id, start, {}};
    out.values.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(std::min(length, values.size())));
    return out;
}

Dataset::Dataset(std::vector<TimeSeries> series) : series_(std::move(series)) {
    for (std::size_t i = 0; i < series_.size(); ++i) {
        if (series_[i].values.empty()) throw InputError("series '" + series_[i].id + "' is empty");
        for (std::size_t j = 0; j < i; ++j) {
            if (series_[j].id == series_[i].id) throw InputError("duplicate series id '" + series_[i].id + "'");
        }
    }
}

const TimeSeries& Dataset::at(std::string_view id) const {
    const auto idx = index_of(id);
    if (idx < 0) throw InputError("unknown series id '" + std::string(id) + "'");
    return series_[static_cast<std::size_t>(idx)];
}

std::ptrdiff_t Dataset::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < series_.size(); ++i) {
        if (series_[i].id == id) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
}

Dataset parse_csv(std::string_view text) {
    struct Row {
        YearMonth month;
        double demand;
        std::size_t row;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Row>> rows;

    std::size_t row = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++row;
        if (!header_seen) {
            if (line != kCsvHeader) {
                throw InputError(row_prefix(row) + "header must be exactly '" + std::string(kCsvHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;

        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
            throw InputError(row_prefix(row) + "expected 3 comma-separated fields");
        }
        const std::string id(line.substr(0, c1));
        if (id.empty()) throw InputError(row_prefix(row) + "empty series_id");

        YearMonth month;
        try {
            month = YearMonth::parse(line.substr(c1 + 1, c2 - c1 - 1));
        } catch (const InputError& e) {
            throw InputError(row_prefix(row) + e.what());
        }

        const std::string_view field = line.substr(c2 + 1);
        double demand = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), demand);
        if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(demand)) {
            throw InputError(row_prefix(row) + "non-numeric demand '" + std::string(field) + "'");
        }
        if (demand <= 0.0) throw InputError(row_prefix(row) + "non-positive demand");

        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(Row{month, demand, row});
    }
    if (!header_seen) throw InputError("row 1: missing header");

    std::vector<TimeSeries> series;
    series.reserve(order.size());
    for (const auto& id : order) {
        auto& list = rows[id];
        std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.month < b.month; });
        TimeSeries ts{id, list.front().month, {}};
        ts.values.reserve(list.size());
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i > 0) {
                const auto step = list[i].month.ordinal() - list[i - 1].month.ordinal();
                if (step == 0) {
                    throw InputError(row_prefix(list[i].row) + "duplicate month " + list[i].month.to_string() +
                                     " for series '" + id + "'");
                }
                if (step > 1) {
                    throw InputError("gap at " + row_prefix(list[i].row) + "series '" + id + "' missing " +
                                     list[i - 1].month.plus(1).to_string());
                }
            }
            ts.values.push_back(list[i].demand);
        }
        series.push_back(std::move(ts));
    }
    return Dataset(std::move(series));
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open data file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_csv(buf.str());
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << kCsvHeader << '\n';
    out << std::setprecision(17);
    for (const auto& s : dataset.series()) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            out << s.id << ',' << s.month_at(i).to_string() << ',' << s.values[i] << '\n';
        }
    }
}

SplitDataset::SplitDataset(Dataset data, std::size_t horizon, std::size_t min_lookback)
    : data_(std::move(data)), horizon_(horizon) {
    if (horizon == 0) throw InputError("horizon must be >= 1");
    bounds_.reserve(data_.size());
    for (const auto& s : data_.series()) {
        const std::size_t need = 2 * horizon + min_lookback;
        if (s.size() < need) {
            throw InputError("series too short: '" + s.id + "' has " + std::to_string(s.size()) +
                             " points, split needs " + std::to_string(need));
        }
        bounds_.push_back(SeriesSplit{s.size() - 2 * horizon, s.size() - horizon, s.size()});
    }
}

Dataset SplitDataset::tuning_train() const {
    std::vector<TimeSeries> out;
    out.reserve(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out.push_back(data_[i].prefix(bounds_[i].tuning_end));
    return Dataset(std::move(out));
}

Dataset SplitDataset::full_train() const {
    std::vector<TimeSeries> out;
    out.reserve(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out.push_back(data_[i].prefix(bounds_[i].full_end));
    return Dataset(std::move(out));
}

std::span<const double> SplitDataset::validation_targets(std::size_t series) const {
    const auto& b = bounds_.at(series);
    return std::span<const double>(data_[series].values).subspan(b.tuning_end, b.full_end - b.tuning_end);
}

std::span<const double> SplitDataset::test_targets(std::size_t series) const {
    const auto& b = bounds_.at(series);
    return std::span<const double>(data_[series].values).subspan(b.full_end, b.length - b.full_end);
}

SplitDataset split(Dataset dataset, std::size_t horizon, std::size_t min_lookback) {
    return SplitDataset(std::move(dataset), horizon, min_lookback);
}

WindowSample make_window(const TimeSeries& series, std::size_t t, std::size_t w, std::size_t horizon,
                         Scaling scaling) {
    if (w == 0 || t < w || t + horizon > series.size()) {
        throw InputError("window out of range: t=" + std::to_string(t) + " w=" + std::to_string(w) +
                         " H=" + std::to_string(horizon) + " T=" + std::to_string(series.size()));
    }
    WindowSample s;
    s.split_index = t;
    const auto first = series.values.begin() + static_cast<std::ptrdiff_t>(t - w);
    const auto split_at = series.values.begin() + static_cast<std::ptrdiff_t>(t);
    s.input.assign(first, split_at);
    s.target.assign(split_at, split_at + static_cast<std::ptrdiff_t>(horizon));
    if (scaling == Scaling::InputMean) {
        s.scale = std::accumulate(s.input.begin(), s.input.end(), 0.0) / static_cast<double>(w);
        for (auto& v : s.input) v /= s.scale;
        for (auto& v : s.target) v /= s.scale;
    }
    return s;
}

WindowSample final_window(const TimeSeries& series, std::size_t w, Scaling scaling) {
    return make_window(series, series.size(), w, 0, scaling);
}

WindowSampler::WindowSampler(const Dataset& dataset, std::size_t w, std::size_t horizon,
                             SeriesWeighting weighting)
    : dataset_(&dataset), w_(w), horizon_(horizon) {
    weights_.reserve(dataset.size());
    double total = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto windows = valid_windows(i);
        double weight = 0.0;
        if (windows > 0) {
            weight = weighting == SeriesWeighting::WindowCount ? static_cast<double>(windows)
                                                               : static_cast<double>(dataset[i].size());
        }
        weights_.push_back(weight);
        total += weight;
        cumulative_.push_back(total);
    }
    if (total <= 0.0) {
        throw InputError("no series admits a training window for w=" + std::to_string(w) +
                         " H=" + std::to_string(horizon));
    }
}

std::size_t WindowSampler::valid_windows(std::size_t series) const {
    const auto length = (*dataset_)[series].size();
    return length >= w_ + horizon_ ? length - w_ - horizon_ + 1 : 0;
}

std::vector<double> WindowSampler::probabilities() const {
    std::vector<double> p(weights_);
    const double total = cumulative_.back();
    for (auto& v : p) v /= total;
    return p;
}

WindowSampler::Draw WindowSampler::draw(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, cumulative_.back());
    const double u = unit(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    // Zero-weight entries repeat the previous cumulative value, so upper_bound never selects them.
    const auto series = static_cast<std::size_t>(it - cumulative_.begin());
    const auto length = (*dataset_)[series].size();
    std::uniform_int_distribution<std::size_t> split_point(w_, length - horizon_);
    return Draw{series, split_point(rng)};
}

std::vector<WindowSample> WindowSampler::sample(std::size_t batch_size, Rng& rng, Scaling scaling) const {
    std::vector<WindowSample> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto d = draw(rng);
        auto s = make_window((*dataset_)[d.series], d.t, w_, horizon_, scaling);
        s.series = d.series;
        batch.push_back(std::move(s));
    }
    return batch;
}

std::vector<WindowSample> sample_batch(const Dataset& dataset, std::size_t batch_size, std::size_t w,
                                       std::size_t horizon, Rng& rng, Scaling scaling, SeriesWeighting weighting) {
    return WindowSampler(dataset, w, horizon, weighting).sample(batch_size, rng, scaling);
}

}  // namespace nbeats

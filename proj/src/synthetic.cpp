#include "nbeats/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nbeats/error.hpp"

namespace nbeats {

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.series == 0 || spec.min_length == 0 || spec.min_length > spec.max_length) {
        throw InputError("synthetic: invalid series count or length range");
    }
    if (!(spec.min_level > 0.0) || spec.min_level > spec.max_level) throw InputError("synthetic: invalid level range");
    Rng rng(spec.seed);
    std::uniform_int_distribution<std::size_t> length_dist(spec.min_length, spec.max_length);
    std::uniform_real_distribution<double> log_level(std::log(spec.min_level), std::log(spec.max_level));
    std::uniform_real_distribution<double> early_growth(spec.early_growth_min, spec.early_growth_max);
    std::uniform_real_distribution<double> late_growth(spec.late_growth_min, spec.late_growth_max);
    std::uniform_int_distribution<int> break_year(spec.break_year_min, spec.break_year_max);
    std::uniform_real_distribution<double> amplitude(0.05, 0.20);   // annual cycle
    std::uniform_real_distribution<double> harmonic(0.0, 0.05);     // semi-annual cycle
    std::normal_distribution<double> phase_jitter(0.0, spec.phase_jitter);
    std::bernoulli_distribution summer_peak(spec.summer_peak_share);
    std::normal_distribution<double> noise(0.0, spec.noise);

    std::vector<TimeSeries> out;
    out.reserve(spec.series);
    for (std::size_t s = 0; s < spec.series; ++s) {
        const std::size_t length = length_dist(rng);
        const double level = std::exp(log_level(rng));
        const double g1 = early_growth(rng);
        const double g2 = late_growth(rng);
        const std::int64_t breakpoint = YearMonth{break_year(rng), 1}.ordinal();
        const double a1 = amplitude(rng);
        const double a2 = harmonic(rng);
        // Winter peak in January; summer-peaking series are shifted half a year.
        const double p1 = std::numbers::pi / 2.0 + (summer_peak(rng) ? std::numbers::pi : 0.0) + phase_jitter(rng);
        const double p2 = phase_jitter(rng);

        TimeSeries ts;
        ts.id = "S" + std::to_string(s + 1);
        ts.start = spec.end.plus(-static_cast<std::int64_t>(length - 1));
        ts.values.reserve(length);
        double log_trend = 0.0;
        for (std::size_t t = 0; t < length; ++t) {
            const double month = static_cast<double>(ts.start.plus(static_cast<std::int64_t>(t)).month - 1);
            if (t > 0) log_trend += (ts.month_at(t).ordinal() <= breakpoint ? g1 : g2) / 12.0;
            const double season = a1 * std::sin(2.0 * std::numbers::pi * month / 12.0 + p1) +
                                  a2 * std::sin(4.0 * std::numbers::pi * month / 12.0 + p2);
            double v = level * std::exp(log_trend) * (1.0 + season) * (1.0 + noise(rng));
            ts.values.push_back(std::max(v, 1e-3 * level));
        }
        out.push_back(std::move(ts));
    }
    return Dataset(std::move(out));
}

TimeSeries make_sinusoid(std::size_t length, double level, double amplitude, YearMonth start) {
    TimeSeries ts{"SIN", start, {}};
    ts.values.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
        ts.values.push_back(level + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 12.0));
    }
    return ts;
}

}  // namespace nbeats

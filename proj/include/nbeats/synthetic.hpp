#pragma once

#include <cstddef>
#include <cstdint>

#include "nbeats/timeseries.hpp"

namespace nbeats {

// Monthly demand-like panel: level * trend * (1 + seasonality) * (1 + noise).
// The trend grows at an early annual rate until a break year, then at a late
// rate (flat or declining demand). Every series ends in `end`; lengths are
// drawn from [min_length, max_length]. Seasonal shapes are shared across the
// panel up to a small phase jitter, with a minority of summer-peaking series.
struct SyntheticSpec {
    std::size_t series = 35;
    std::size_t min_length = 96;
    std::size_t max_length = 288;
    double noise = 0.03;  // multiplicative Gaussian noise, relative sd
    double min_level = 343.0;
    double max_level = 43702.0;
    double early_growth_min = 0.0;  // continuous annual growth rates
    double early_growth_max = 0.04;
    double late_growth_min = -0.02;
    double late_growth_max = 0.005;
    int break_year_min = 2008;
    int break_year_max = 2011;
    double phase_jitter = 0.15;  // radians
    double summer_peak_share = 0.2;
    YearMonth end{2014, 12};
    std::uint64_t seed = 2014;
};

Dataset make_synthetic_dataset(const SyntheticSpec& spec);

// Noiseless level + amplitude * sin(2 pi t / 12), t = 0..length-1.
TimeSeries make_sinusoid(std::size_t length, double level = 100.0, double amplitude = 20.0,
                         YearMonth start = {2000, 1});

}  // namespace nbeats

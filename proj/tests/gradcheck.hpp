#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "nbeats/kernels.hpp"
#include "nbeats/model.hpp"

namespace nbeats::testing {

// Random positive inputs/targets of the magnitude a mean-scaled window has.
inline Batch random_batch(const ModelConfig& c, std::size_t rows, Rng& rng) {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Batch b;
    b.rows = rows;
    b.input_size = c.input_size;
    b.horizon = c.horizon;
    for (std::size_t i = 0; i < rows * c.input_size; ++i) b.inputs.push_back(u(rng));
    for (std::size_t i = 0; i < rows * c.horizon; ++i) b.targets.push_back(u(rng));
    b.scales.assign(rows, 1.0);
    return b;
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central differences of the pinball-MAPE batch loss against the serial
// analytic gradient. |a - n| / max(|a|, |n|, floor) per parameter.
inline GradCheck check_gradient(const ModelParams& params, const Batch& batch, double tau, double step = 1e-5,
                                double floor = 1e-3) {
    ModelParams grads(params.config());
    loss_and_gradient(params, batch, tau, grads, Execution::Serial);
    ModelParams probe = params;
    ModelParams scratch(params.config());
    GradCheck out;
    auto p = probe.values();
    const auto g = grads.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + step;
        const double up = loss_and_gradient(probe, batch, tau, scratch, Execution::Serial);
        p[i] = saved - step;
        const double down = loss_and_gradient(probe, batch, tau, scratch, Execution::Serial);
        p[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(g[i]), std::abs(numeric), floor});
        const double rel = std::abs(g[i] - numeric) / denom;
        if (rel > out.max_rel_error) out = {rel, i, g[i], numeric};
    }
    return out;
}

}  // namespace nbeats::testing

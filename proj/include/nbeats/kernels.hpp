#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nbeats/execution.hpp"
#include "nbeats/model.hpp"
#include "nbeats/timeseries.hpp"

namespace nbeats {

// A training batch packed row-major: inputs (rows x w), targets (rows x H).
struct Batch {
    std::size_t rows = 0;
    std::size_t input_size = 0;
    std::size_t horizon = 0;
    std::vector<double> inputs;
    std::vector<double> targets;
    std::vector<double> scales;

    static Batch from_samples(std::span<const WindowSample> samples);
};

// Rows per work unit of the parallel kernels. The partition does not depend on
// the thread count, so parallel results are bitwise reproducible.
inline constexpr std::size_t kChunkRows = 64;

// Pinball-MAPE over all rows * H forecast elements and its gradient w.r.t.
// every parameter. `grads` is overwritten (reshaped to the model if needed).
//   Serial:   per-row reference forward/backward, plain loops.
//   Parallel: dense matrix products per fixed chunk of rows, chunks spread over
//             OpenMP threads and reduced in chunk order.
double loss_and_gradient(const ModelParams& params, const Batch& batch, double tau, ModelParams& grads,
                         Execution exec = Execution::Parallel);

// Forecasts for rows x w inputs, returned rows x H.
std::vector<double> forecast_batch(const ModelParams& params, std::span<const double> inputs,
                                   Execution exec = Execution::Parallel);

}  // namespace nbeats

#include "nbeats/kernels.hpp"

#include <algorithm>

#include <Eigen/Dense>

#include "nbeats/error.hpp"
#include "nbeats/metrics.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nbeats {

void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

Batch Batch::from_samples(std::span<const WindowSample> samples) {
    Batch b;
    b.rows = samples.size();
    if (samples.empty()) return b;
    b.input_size = samples.front().input.size();
    b.horizon = samples.front().target.size();
    b.inputs.reserve(b.rows * b.input_size);
    b.targets.reserve(b.rows * b.horizon);
    b.scales.reserve(b.rows);
    for (const auto& s : samples) {
        if (s.input.size() != b.input_size || s.target.size() != b.horizon) {
            throw InputError("batch: samples have inconsistent window shapes");
        }
        b.inputs.insert(b.inputs.end(), s.input.begin(), s.input.end());
        b.targets.insert(b.targets.end(), s.target.begin(), s.target.end());
        b.scales.push_back(s.scale);
    }
    return b;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap as_eigen(const MatrixRef<const double>& m) {
    return {m.data, static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}
MatMap as_eigen(const MatrixRef<double>& m) {
    return {m.data, static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

struct ChunkTrace {
    std::vector<RowMat> inputs;                 // x^r per block
    std::vector<std::vector<RowMat>> hidden;    // h^{r,l}
    std::vector<RowMat> backcasts;              // xhat^r
    RowMat forecast;                            // sum over blocks
};

void chunk_forward(const ModelParams& params, const RowMat& x, ChunkTrace& tr) {
    const auto& cfg = params.config();
    const auto rows = x.rows();
    tr.inputs.resize(cfg.blocks);
    tr.hidden.assign(cfg.blocks, std::vector<RowMat>(cfg.layers));
    tr.backcasts.resize(cfg.blocks);
    tr.forecast = RowMat::Zero(rows, static_cast<Eigen::Index>(cfg.horizon));
    for (std::size_t r = 0; r < cfg.blocks; ++r) {
        const auto blk = params.block(r);
        if (r == 0) {
            tr.inputs[r] = x.cwiseMax(0.0);
        } else {
            tr.inputs[r] = (tr.inputs[r - 1] - tr.backcasts[r - 1]).cwiseMax(0.0);
        }
        const RowMat* h = &tr.inputs[r];
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            const auto w = as_eigen(blk.weights[l]);
            const ConstVecMap b(blk.biases[l].data(), static_cast<Eigen::Index>(blk.biases[l].size()));
            RowMat z = (*h) * w.transpose();
            z.rowwise() += b;
            tr.hidden[r][l] = z.cwiseMax(0.0);
            h = &tr.hidden[r][l];
        }
        tr.backcasts[r] = (*h) * as_eigen(blk.backcast).transpose();
        tr.forecast.noalias() += (*h) * as_eigen(blk.forecast).transpose();
    }
}

RowMat relu_mask(const RowMat& activated) { return (activated.array() > 0.0).cast<double>().matrix(); }

// grads += d(loss)/d(params) for one chunk, given dL/dyhat.
void chunk_backward(const ModelParams& params, const ChunkTrace& tr, const RowMat& grad_forecast,
                    ModelParams& grads) {
    const auto& cfg = params.config();
    const auto rows = grad_forecast.rows();
    const auto w = static_cast<Eigen::Index>(cfg.input_size);
    RowMat grad_next = RowMat::Zero(rows, w);
    RowMat grad_input;
    RowMat grad_backcast;
    RowMat grad_h;
    for (std::size_t r = cfg.blocks; r-- > 0;) {
        const auto blk = params.block(r);
        auto gblk = grads.block(r);
        const RowMat& top = tr.hidden[r].back();
        const bool has_next = r + 1 < cfg.blocks;
        if (has_next) {
            grad_input = grad_next.cwiseProduct(relu_mask(tr.inputs[r + 1]));
            grad_backcast = -grad_input;
        }

        as_eigen(gblk.forecast).noalias() += grad_forecast.transpose() * top;
        grad_h.noalias() = grad_forecast * as_eigen(blk.forecast);
        if (has_next) {
            as_eigen(gblk.backcast).noalias() += grad_backcast.transpose() * top;
            grad_h.noalias() += grad_backcast * as_eigen(blk.backcast);
        }

        for (std::size_t l = cfg.layers; l-- > 0;) {
            const RowMat& below = l == 0 ? tr.inputs[r] : tr.hidden[r][l - 1];
            const RowMat grad_pre = grad_h.cwiseProduct(relu_mask(tr.hidden[r][l]));
            as_eigen(gblk.weights[l]).noalias() += grad_pre.transpose() * below;
            VecMap(gblk.biases[l].data(), static_cast<Eigen::Index>(gblk.biases[l].size())) +=
                grad_pre.colwise().sum();
            grad_h.noalias() = grad_pre * as_eigen(blk.weights[l]);
        }
        grad_next = has_next ? RowMat(grad_input + grad_h) : grad_h;
    }
}

void check_batch(const ModelParams& params, const Batch& batch) {
    const auto& cfg = params.config();
    if (batch.rows == 0) throw InputError("empty batch");
    if (batch.input_size != cfg.input_size || batch.horizon != cfg.horizon) {
        throw InputError("batch window shape does not match the model");
    }
}

double serial_loss_and_gradient(const ModelParams& params, const Batch& batch, double tau, ModelParams& grads) {
    const std::size_t w = batch.input_size;
    const std::size_t h = batch.horizon;
    const double count = static_cast<double>(batch.rows * h);
    double loss = 0.0;
    std::vector<double> grad_forecast(h);
    for (std::size_t i = 0; i < batch.rows; ++i) {
        const auto trace = forward(params, std::span<const double>(batch.inputs).subspan(i * w, w));
        const double* y = batch.targets.data() + i * h;
        for (std::size_t k = 0; k < h; ++k) {
            loss += pinball_term(y[k], trace.forecast[k], tau);
            grad_forecast[k] = pinball_slope(y[k], trace.forecast[k], tau) / count;
        }
        backward_accumulate(params, trace, grad_forecast, grads);
    }
    return loss / count;
}

double parallel_loss_and_gradient(const ModelParams& params, const Batch& batch, double tau, ModelParams& grads) {
    const std::size_t w = batch.input_size;
    const std::size_t h = batch.horizon;
    const double count = static_cast<double>(batch.rows * h);
    const std::size_t chunks = (batch.rows + kChunkRows - 1) / kChunkRows;
    std::vector<ModelParams> partial(chunks, ModelParams(params.config()));
    std::vector<double> partial_loss(chunks, 0.0);

    const auto nchunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * kChunkRows;
        const std::size_t rows = std::min(kChunkRows, batch.rows - begin);
        // Owned copies: Eigen storage is aligned, caller vectors may not be.
        const RowMat x = ConstMatMap(batch.inputs.data() + begin * w, static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(w));
        const ConstMatMap y(batch.targets.data() + begin * h, static_cast<Eigen::Index>(rows),
                            static_cast<Eigen::Index>(h));
        ChunkTrace tr;
        chunk_forward(params, x, tr);
        RowMat grad_forecast(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(h));
        double loss = 0.0;
        for (Eigen::Index i = 0; i < grad_forecast.rows(); ++i) {
            for (Eigen::Index k = 0; k < grad_forecast.cols(); ++k) {
                loss += pinball_term(y(i, k), tr.forecast(i, k), tau);
                grad_forecast(i, k) = pinball_slope(y(i, k), tr.forecast(i, k), tau) / count;
            }
        }
        partial_loss[static_cast<std::size_t>(c)] = loss;
        chunk_backward(params, tr, grad_forecast, partial[static_cast<std::size_t>(c)]);
    }

    double loss = 0.0;
    auto out = grads.values();
    for (std::size_t c = 0; c < chunks; ++c) {
        loss += partial_loss[c];
        const auto src = partial[c].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += src[i];
    }
    return loss / count;
}

}  // namespace

double loss_and_gradient(const ModelParams& params, const Batch& batch, double tau, ModelParams& grads,
                         Execution exec) {
    check_batch(params, batch);
    check_tau(tau);
    if (grads.config() != params.config()) {
        grads = ModelParams(params.config());
    } else {
        grads.set_zero();
    }
    return exec == Execution::Serial ? serial_loss_and_gradient(params, batch, tau, grads)
                                     : parallel_loss_and_gradient(params, batch, tau, grads);
}

std::vector<double> forecast_batch(const ModelParams& params, std::span<const double> inputs, Execution exec) {
    const auto& cfg = params.config();
    const std::size_t w = cfg.input_size;
    const std::size_t h = cfg.horizon;
    if (inputs.size() % w != 0) throw InputError("forecast_batch: input size is not a multiple of the lookback");
    const std::size_t rows = inputs.size() / w;
    std::vector<double> out(rows * h);
    if (exec == Execution::Serial) {
        for (std::size_t i = 0; i < rows; ++i) {
            const auto f = predict(params, inputs.subspan(i * w, w));
            std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(i * h));
        }
        return out;
    }
    const std::size_t chunks = (rows + kChunkRows - 1) / kChunkRows;
    const auto nchunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * kChunkRows;
        const std::size_t n = std::min(kChunkRows, rows - begin);
        ChunkTrace tr;
        const RowMat x = ConstMatMap(inputs.data() + begin * w, static_cast<Eigen::Index>(n),
                                     static_cast<Eigen::Index>(w));
        chunk_forward(params, x, tr);
        MatMap(out.data() + begin * h, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(h)) = tr.forecast;
    }
    return out;
}

}  // namespace nbeats

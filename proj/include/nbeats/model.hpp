#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <new>
#include <span>
#include <vector>

#include "nbeats/timeseries.hpp"

namespace nbeats {

// Shape of a generic N-BEATS network: `blocks` residual blocks, each a stack of
// `layers` fully connected relu layers of `width` units, followed by a linear
// backcast (input_size) and forecast (horizon) projection without bias.
struct ModelConfig {
    std::size_t blocks = 3;
    std::size_t layers = 3;
    std::size_t width = 512;
    std::size_t input_size = 12;
    std::size_t horizon = 12;
    bool sharing = true;  // one parameter set reused at every block position

    void validate() const;  // throws InputError
    [[nodiscard]] std::size_t stored_blocks() const { return sharing ? 1 : blocks; }
    [[nodiscard]] std::size_t layer_inputs(std::size_t layer) const { return layer == 0 ? input_size : width; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Row-major matrix view into parameter storage.
template <typename T>
struct MatrixRef {
    T* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    [[nodiscard]] std::size_t size() const { return rows * cols; }
    [[nodiscard]] std::span<T> flat() const { return {data, size()}; }
};

// Parameters of one residual block: per layer a weight matrix (width x inputs)
// and bias (width); then backcast (input_size x width) and forecast
// (horizon x width) projections.
template <typename T>
struct BlockRef {
    std::vector<MatrixRef<T>> weights;
    std::vector<std::span<T>> biases;
    MatrixRef<T> backcast;
    MatrixRef<T> forecast;
};

// Cache-line aligned storage. Vectorised kernels choose their loop peeling from
// the buffer address, so a fixed alignment keeps floating-point results
// identical from one allocation to the next.
template <typename T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align})); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t{Align}); }
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

// All weights of a model in one contiguous buffer. The same type carries
// gradients and optimizer moments.
class ModelParams {
public:
    ModelParams() = default;
    explicit ModelParams(const ModelConfig& config);  // zero-initialized

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] std::span<double> values() { return data_; }
    [[nodiscard]] std::span<const double> values() const { return data_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::size_t stored_blocks() const { return config_.stored_blocks(); }

    // Block used at position `r` (0-based); every position maps to block 0 when sharing.
    [[nodiscard]] BlockRef<double> block(std::size_t r);
    [[nodiscard]] BlockRef<const double> block(std::size_t r) const;

    void set_zero();

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    template <typename T>
    BlockRef<T> make_block(T* base) const;

    ModelConfig config_;
    std::size_t block_size_ = 0;
    std::vector<double, AlignedAllocator<double>> data_;
};

// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out)) per matrix), zero biases.
ModelParams init_params(const ModelConfig& config, Rng& rng);

struct BlockTrace {
    std::vector<double> input;                // x^r, after the residual relu
    std::vector<std::vector<double>> hidden;  // h^{r,1..L}
    std::vector<double> backcast;             // B^r h^{r,L}
    std::vector<double> forecast;             // F^r h^{r,L}
};

struct ForwardTrace {
    std::vector<BlockTrace> blocks;
    std::vector<double> forecast;  // sum of block forecasts, accumulated in block order
};

// Reference single-window forward pass, plain loops.
//   x^r = relu(x^{r-1} - xhat^{r-1}),  xhat^0 = 0, x^0 = x
//   h^{r,l} = relu(W^{r,l} h^{r,l-1} + b^{r,l}),  h^{r,0} = x^r
//   xhat^r = B^r h^{r,L},  yhat^r = F^r h^{r,L},  yhat = sum_r yhat^r
ForwardTrace forward(const ModelParams& params, std::span<const double> x);
std::vector<double> predict(const ModelParams& params, std::span<const double> x);

// Partial forecasts yhat^1..yhat^R.
std::vector<std::vector<double>> decompose(const ModelParams& params, std::span<const double> x);

// Reverse-mode gradient of a loss with dL/dyhat = `grad_forecast`, added into `grads`.
// Shared blocks accumulate the contributions of every position. relu'(0) = 0.
void backward_accumulate(const ModelParams& params, const ForwardTrace& trace,
                         std::span<const double> grad_forecast, ModelParams& grads);
ModelParams backward(const ModelParams& params, const ForwardTrace& trace, std::span<const double> grad_forecast);

// Binary checkpoint: magic, format version, config, then every array with an
// explicit (rows, cols) header, little-endian doubles in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace nbeats

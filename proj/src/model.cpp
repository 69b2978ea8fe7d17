#include "nbeats/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "nbeats/error.hpp"

namespace nbeats {

void ModelConfig::validate() const {
    if (blocks == 0 || layers == 0 || width == 0 || input_size == 0 || horizon == 0) {
        throw InputError("model config: blocks, layers, width, input_size and horizon must all be >= 1");
    }
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
    config_.validate();
    block_size_ = 0;
    for (std::size_t l = 0; l < config_.layers; ++l) {
        block_size_ += config_.width * config_.layer_inputs(l) + config_.width;
    }
    block_size_ += (config_.input_size + config_.horizon) * config_.width;
    data_.assign(block_size_ * config_.stored_blocks(), 0.0);
}

template <typename T>
BlockRef<T> ModelParams::make_block(T* base) const {
    BlockRef<T> b;
    b.weights.reserve(config_.layers);
    b.biases.reserve(config_.layers);
    const std::size_t d = config_.width;
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::size_t in = config_.layer_inputs(l);
        b.weights.push_back(MatrixRef<T>{base, d, in});
        base += d * in;
        b.biases.push_back(std::span<T>(base, d));
        base += d;
    }
    b.backcast = MatrixRef<T>{base, config_.input_size, d};
    base += config_.input_size * d;
    b.forecast = MatrixRef<T>{base, config_.horizon, d};
    return b;
}

BlockRef<double> ModelParams::block(std::size_t r) {
    const std::size_t stored = config_.sharing ? 0 : r;
    return make_block<double>(data_.data() + stored * block_size_);
}

BlockRef<const double> ModelParams::block(std::size_t r) const {
    const std::size_t stored = config_.sharing ? 0 : r;
    return make_block<const double>(data_.data() + stored * block_size_);
}

void ModelParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

ModelParams init_params(const ModelConfig& config, Rng& rng) {
    ModelParams params(config);
    auto glorot = [&rng](const MatrixRef<double>& m) {
        const double bound = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : m.flat()) v = dist(rng);
    };
    for (std::size_t r = 0; r < params.stored_blocks(); ++r) {
        auto b = params.block(r);
        for (const auto& w : b.weights) glorot(w);
        glorot(b.backcast);
        glorot(b.forecast);
    }
    return params;
}

namespace {

double relu(double v) { return v > 0.0 ? v : 0.0; }

// out = relu(W in + b)
void dense_relu(const MatrixRef<const double>& w, std::span<const double> bias, std::span<const double> in,
                std::vector<double>& out) {
    out.assign(w.rows, 0.0);
    for (std::size_t i = 0; i < w.rows; ++i) {
        double acc = bias[i];
        const double* row = w.data + i * w.cols;
        for (std::size_t j = 0; j < w.cols; ++j) acc += row[j] * in[j];
        out[i] = relu(acc);
    }
}

void project(const MatrixRef<const double>& m, std::span<const double> in, std::vector<double>& out) {
    out.assign(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        const double* row = m.data + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * in[j];
        out[i] = acc;
    }
}

void check_input(const ModelConfig& config, std::span<const double> x) {
    if (x.size() != config.input_size) {
        throw InputError("forward: input length " + std::to_string(x.size()) + " != model input size " +
                         std::to_string(config.input_size));
    }
}

}  // namespace

ForwardTrace forward(const ModelParams& params, std::span<const double> x) {
    const auto& cfg = params.config();
    check_input(cfg, x);
    ForwardTrace trace;
    trace.blocks.resize(cfg.blocks);
    trace.forecast.assign(cfg.horizon, 0.0);

    std::vector<double> residual(x.begin(), x.end());
    std::vector<double> prev_backcast(cfg.input_size, 0.0);
    for (std::size_t r = 0; r < cfg.blocks; ++r) {
        const auto blk = params.block(r);
        auto& bt = trace.blocks[r];
        bt.input.resize(cfg.input_size);
        for (std::size_t i = 0; i < cfg.input_size; ++i) bt.input[i] = relu(residual[i] - prev_backcast[i]);

        bt.hidden.resize(cfg.layers);
        std::span<const double> h = bt.input;
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            dense_relu(blk.weights[l], blk.biases[l], h, bt.hidden[l]);
            h = bt.hidden[l];
        }
        project(blk.backcast, h, bt.backcast);
        project(blk.forecast, h, bt.forecast);
        for (std::size_t k = 0; k < cfg.horizon; ++k) trace.forecast[k] += bt.forecast[k];

        residual = bt.input;
        prev_backcast = bt.backcast;
    }
    return trace;
}

std::vector<double> predict(const ModelParams& params, std::span<const double> x) {
    return forward(params, x).forecast;
}

std::vector<std::vector<double>> decompose(const ModelParams& params, std::span<const double> x) {
    auto trace = forward(params, x);
    std::vector<std::vector<double>> parts;
    parts.reserve(trace.blocks.size());
    for (auto& b : trace.blocks) parts.push_back(std::move(b.forecast));
    return parts;
}

void backward_accumulate(const ModelParams& params, const ForwardTrace& trace,
                         std::span<const double> grad_forecast, ModelParams& grads) {
    const auto& cfg = params.config();
    if (trace.blocks.size() != cfg.blocks || grad_forecast.size() != cfg.horizon ||
        grads.config() != cfg) {
        throw InputError("backward: trace, gradient or accumulator does not match the model");
    }
    const std::size_t w = cfg.input_size;
    const std::size_t d = cfg.width;

    // Gradient w.r.t. x^{r+1}; zero above the last block since its backcast is unused.
    std::vector<double> grad_next_input(w, 0.0);
    std::vector<double> grad_backcast(w);
    std::vector<double> grad_h(d);
    std::vector<double> grad_pre(d);
    std::vector<double> grad_below;

    for (std::size_t r = cfg.blocks; r-- > 0;) {
        const auto blk = params.block(r);
        auto gblk = grads.block(r);
        const auto& bt = trace.blocks[r];

        // x^{r+1} = relu(x^r - xhat^r): split the incoming gradient into both operands.
        std::vector<double> grad_input(w, 0.0);
        if (r + 1 < cfg.blocks) {
            const auto& next_input = trace.blocks[r + 1].input;
            for (std::size_t i = 0; i < w; ++i) {
                const double u = next_input[i] > 0.0 ? grad_next_input[i] : 0.0;
                grad_input[i] = u;
                grad_backcast[i] = -u;
            }
        } else {
            std::fill(grad_backcast.begin(), grad_backcast.end(), 0.0);
        }

        const auto& top = bt.hidden.back();
        std::fill(grad_h.begin(), grad_h.end(), 0.0);
        for (std::size_t k = 0; k < cfg.horizon; ++k) {
            const double g = grad_forecast[k];
            if (g == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) {
                gblk.forecast(k, j) += g * top[j];
                grad_h[j] += g * blk.forecast(k, j);
            }
        }
        for (std::size_t i = 0; i < w; ++i) {
            const double g = grad_backcast[i];
            if (g == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) {
                gblk.backcast(i, j) += g * top[j];
                grad_h[j] += g * blk.backcast(i, j);
            }
        }

        for (std::size_t l = cfg.layers; l-- > 0;) {
            const auto& out = bt.hidden[l];
            const auto& in = l == 0 ? bt.input : bt.hidden[l - 1];
            const auto& wl = blk.weights[l];
            const auto& gwl = gblk.weights[l];
            for (std::size_t i = 0; i < d; ++i) grad_pre[i] = out[i] > 0.0 ? grad_h[i] : 0.0;
            grad_below.assign(wl.cols, 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                const double g = grad_pre[i];
                if (g == 0.0) continue;
                gblk.biases[l][i] += g;
                for (std::size_t j = 0; j < wl.cols; ++j) {
                    gwl(i, j) += g * in[j];
                    grad_below[j] += g * wl(i, j);
                }
            }
            if (l > 0) grad_h.assign(grad_below.begin(), grad_below.end());
        }
        for (std::size_t i = 0; i < w; ++i) grad_next_input[i] = grad_input[i] + grad_below[i];
    }
}

ModelParams backward(const ModelParams& params, const ForwardTrace& trace, std::span<const double> grad_forecast) {
    ModelParams grads(params.config());
    backward_accumulate(params, trace, grad_forecast, grads);
    return grads;
}

// ---- checkpoint ----

namespace {

constexpr std::array<char, 8> kMagic = {'N', 'B', 'E', 'A', 'T', 'S', 'C', 'K'};

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), sizeof(T))) throw InputError("truncated checkpoint '" + path.string() + "'");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

// Arrays in storage order with their shapes; biases are (width x 1).
template <typename Params>
auto arrays_of(Params& params) {
    using T = std::conditional_t<std::is_const_v<Params>, const double, double>;
    std::vector<MatrixRef<T>> out;
    for (std::size_t r = 0; r < params.stored_blocks(); ++r) {
        const auto b = params.block(r);
        for (std::size_t l = 0; l < b.weights.size(); ++l) {
            out.push_back(b.weights[l]);
            out.push_back(MatrixRef<T>{b.biases[l].data(), b.biases[l].size(), 1});
        }
        out.push_back(b.backcast);
        out.push_back(b.forecast);
    }
    return out;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint '" + path.string() + "'");
    const auto& c = params.config();
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint32_t>(out, kCheckpointVersion);
    for (std::size_t v : {c.blocks, c.layers, c.width, c.input_size, c.horizon}) write_le<std::uint64_t>(out, v);
    write_le<std::uint8_t>(out, c.sharing ? 1 : 0);
    const auto arrays = arrays_of(params);
    write_le<std::uint64_t>(out, arrays.size());
    for (const auto& a : arrays) {
        write_le<std::uint64_t>(out, a.rows);
        write_le<std::uint64_t>(out, a.cols);
        for (double v : a.flat()) write_le<double>(out, v);
    }
    if (!out) throw InputError("failed writing checkpoint '" + path.string() + "'");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw InputError("'" + path.string() + "' is not a model checkpoint");
    }
    const auto version = read_le<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw InputError("checkpoint '" + path.string() + "' has unsupported version " + std::to_string(version));
    }
    ModelConfig c;
    c.blocks = read_le<std::uint64_t>(in, path);
    c.layers = read_le<std::uint64_t>(in, path);
    c.width = read_le<std::uint64_t>(in, path);
    c.input_size = read_le<std::uint64_t>(in, path);
    c.horizon = read_le<std::uint64_t>(in, path);
    c.sharing = read_le<std::uint8_t>(in, path) != 0;
    ModelParams params(c);
    const auto expected = arrays_of(params);
    const auto count = read_le<std::uint64_t>(in, path);
    if (count != expected.size()) throw InputError("checkpoint '" + path.string() + "': array count mismatch");
    for (const auto& a : expected) {
        const auto rows = read_le<std::uint64_t>(in, path);
        const auto cols = read_le<std::uint64_t>(in, path);
        if (rows != a.rows || cols != a.cols) {
            throw InputError("checkpoint '" + path.string() + "': array shape mismatch");
        }
        for (auto& v : a.flat()) v = read_le<double>(in, path);
    }
    return params;
}

}  // namespace nbeats

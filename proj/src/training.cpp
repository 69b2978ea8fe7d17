#include "nbeats/training.hpp"

#include <cmath>
#include <fstream>

#include "nbeats/error.hpp"
#include "nbeats/json_io.hpp"
#include "nbeats/kernels.hpp"
#include "nbeats/metrics.hpp"

namespace nbeats {

void TrainConfig::validate() const {
    if (epochs == 0 || batches_per_epoch == 0 || batch_size == 0) {
        throw InputError("train config: epochs, batches_per_epoch and batch_size must be >= 1");
    }
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw InputError("train config: base_lr must be positive");
    check_tau(tau);
    if (!(anneal.factor > 0.0) || anneal.every == 0 || anneal.start_epoch == 0) {
        throw InputError("train config: invalid anneal schedule");
    }
    model.validate();
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
    if (epoch == 0) throw InputError("epochs are 1-based");
    const auto& a = config.anneal;
    if (epoch < a.start_epoch) return config.base_lr;
    const auto halvings = 1 + (epoch - a.start_epoch) / a.every;
    return config.base_lr / std::pow(a.factor, static_cast<double>(halvings));
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               const AdamSettings& settings) {
    if (grads.config() != params.config()) throw InputError("adam: gradient shape does not match parameters");
    if (state.first_moment.config() != params.config()) state = AdamState(params.config());
    const auto g = grads.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
            throw NumericError("non-finite gradient at parameter " + std::to_string(i) + " (step " +
                               std::to_string(state.step + 1) + ")");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(settings.beta1, t);
    const double c2 = 1.0 - std::pow(settings.beta2, t);
    auto p = params.values();
    auto m = state.first_moment.values();
    auto v = state.second_moment.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = settings.beta1 * m[i] + (1.0 - settings.beta1) * g[i];
        v[i] = settings.beta2 * v[i] + (1.0 - settings.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + settings.epsilon);
    }
}

TrainResult train_model(const Dataset& train_view, const TrainConfig& config, Execution exec) {
    config.validate();
    const auto& mc = config.model;
    Rng rng(config.seed);
    TrainResult result{init_params(mc, rng), {}};
    const WindowSampler sampler(train_view, mc.input_size, mc.horizon, config.weighting);
    AdamState adam(mc);
    ModelParams grads(mc);

    result.epoch_loss.reserve(config.epochs);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = lr_at_epoch(config, epoch);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
            const auto samples = sampler.sample(config.batch_size, rng, config.scaling);
            const auto batch = Batch::from_samples(samples);
            const double loss = loss_and_gradient(result.params, batch, config.tau, grads, exec);
            if (!std::isfinite(loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b + 1));
            }
            adam_step(result.params, grads, adam, lr);
            epoch_loss += loss;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(config.batches_per_epoch));
    }
    return result;
}

void GridSpec::validate() const {
    if (batches_per_epoch.empty() || tau.empty() || width.empty() || blocks.empty() || layers.empty() ||
        sharing.empty() || lookback.empty() || batch_size.empty()) {
        throw InputError("grid: every hyperparameter needs at least one candidate");
    }
    for (double t : tau) check_tau(t);
}

std::vector<TrainConfig> GridSpec::architectures(const TrainConfig& base) const {
    validate();
    std::vector<TrainConfig> out;
    for (auto bpe : batches_per_epoch)
        for (auto d : width)
            for (auto r : blocks)
                for (auto l : layers)
                    for (bool s : sharing)
                        for (auto w : lookback)
                            for (auto bs : batch_size) {
                                TrainConfig c = base;
                                c.batches_per_epoch = bpe;
                                c.model.width = d;
                                c.model.blocks = r;
                                c.model.layers = l;
                                c.model.sharing = s;
                                c.model.input_size = w;
                                c.batch_size = bs;
                                out.push_back(c);
                            }
    return out;
}

namespace {

void append_rows(std::vector<ScoreRow>& table, const TrainConfig& c, const ConfigScore& score) {
    for (const auto& m : score.members) table.push_back({c, std::to_string(m.seed), m.val_mape, m.val_mpe});
    table.push_back({c, "ensemble", score.val_mape, score.val_mpe});
}

}  // namespace

GridResult grid_search(const GridSpec& grid, const TrainConfig& base, const Scorer& scorer) {
    GridResult result;
    const auto candidates = grid.architectures(base);

    double best_mape = 0.0;
    bool have_best = false;
    for (const auto& c : candidates) {
        const auto score = scorer(c);
        append_rows(result.table, c, score);
        if (!have_best || score.val_mape < best_mape) {
            best_mape = score.val_mape;
            result.best = c;
            have_best = true;
        }
    }

    const TrainConfig winner = result.best;
    double best_bias = 0.0;
    have_best = false;
    for (double tau : grid.tau) {
        TrainConfig c = winner;
        c.tau = tau;
        const auto score = scorer(c);
        append_rows(result.table, c, score);
        if (!have_best || std::abs(score.val_mpe) < best_bias) {
            best_bias = std::abs(score.val_mpe);
            result.best = c;
            have_best = true;
        }
    }
    return result;
}

void write_score_table(const std::vector<ScoreRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << "batches_per_epoch,tau,width,blocks,layers,sharing,lookback,batch_size,seed,val_mape,val_mpe\n";
    for (const auto& r : rows) {
        const auto& c = r.config;
        out << c.batches_per_epoch << ',' << format_number(c.tau) << ',' << c.model.width << ',' << c.model.blocks
            << ',' << c.model.layers << ',' << (c.model.sharing ? "true" : "false") << ',' << c.model.input_size
            << ',' << c.batch_size << ',' << r.seed << ',' << format_number(r.val_mape) << ','
            << format_number(r.val_mpe) << '\n';
    }
}

}  // namespace nbeats

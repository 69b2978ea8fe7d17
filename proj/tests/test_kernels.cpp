#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gradcheck.hpp"
#include "nbeats/error.hpp"
#include "nbeats/kernels.hpp"
#include "nbeats/metrics.hpp"
#include "nbeats/synthetic.hpp"

using namespace nbeats;

namespace {

ModelConfig config(bool sharing) {
    ModelConfig c;
    c.blocks = 3;
    c.layers = 3;
    c.width = 48;
    c.input_size = 24;
    c.horizon = 12;
    c.sharing = sharing;
    return c;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("Batch packs samples row-major", "[kernels]") {
    const Dataset d({make_sinusoid(60)});
    Rng rng(1);
    const auto samples = sample_batch(d, 5, 12, 12, rng);
    const auto b = Batch::from_samples(samples);
    CHECK(b.rows == 5);
    CHECK(b.inputs.size() == 60);
    CHECK(b.targets.size() == 60);
    CHECK(b.inputs[12] == samples[1].input[0]);
    CHECK(b.targets[59] == samples[4].target[11]);
    CHECK(b.scales[3] == samples[3].scale);
}

TEST_CASE("parallel loss and gradient agree with the serial reference", "[kernels]") {
    // 130 rows: two full chunks and a ragged one.
    for (bool sharing : {true, false}) {
        Rng rng(sharing ? 3 : 4);
        const auto c = config(sharing);
        const auto p = init_params(c, rng);
        const auto batch = testing::random_batch(c, 130, rng);
        ModelParams gs(c), gp(c);
        const double ls = loss_and_gradient(p, batch, 0.35, gs, Execution::Serial);
        const double lp = loss_and_gradient(p, batch, 0.35, gp, Execution::Parallel);
        CHECK(lp == Catch::Approx(ls).epsilon(1e-12));
        double scale = 0.0;
        for (double g : gs.values()) scale = std::max(scale, std::abs(g));
        CHECK(max_abs_diff(gs.values(), gp.values()) <= 1e-11 * scale);
    }
}

TEST_CASE("parallel kernel is bitwise stable across thread counts", "[kernels]") {
    Rng rng(8);
    const auto c = config(false);
    const auto p = init_params(c, rng);
    const auto batch = testing::random_batch(c, 300, rng);
    ModelParams g1(c), g2(c);
    set_thread_count(1);
    const double l1 = loss_and_gradient(p, batch, 0.4, g1);
    set_thread_count(4);
    const double l2 = loss_and_gradient(p, batch, 0.4, g2);
    set_thread_count(0);
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

TEST_CASE("gradient buffer is overwritten, not accumulated", "[kernels]") {
    Rng rng(2);
    const auto c = config(true);
    const auto p = init_params(c, rng);
    const auto batch = testing::random_batch(c, 10, rng);
    ModelParams g(c);
    loss_and_gradient(p, batch, 0.5, g);
    const ModelParams first = g;
    loss_and_gradient(p, batch, 0.5, g);
    CHECK(g == first);

    ModelParams wrong;  // default, reshaped on use
    loss_and_gradient(p, batch, 0.5, wrong);
    CHECK(wrong == first);
}

TEST_CASE("forecast_batch matches per-window predict", "[kernels]") {
    Rng rng(6);
    const auto c = config(false);
    const auto p = init_params(c, rng);
    const auto batch = testing::random_batch(c, 70, rng);
    const auto serial = forecast_batch(p, batch.inputs, Execution::Serial);
    const auto parallel = forecast_batch(p, batch.inputs, Execution::Parallel);
    REQUIRE(serial.size() == 70 * 12);
    for (std::size_t r = 0; r < 70; ++r) {
        const auto one = predict(p, std::span<const double>(batch.inputs).subspan(r * 24, 24));
        for (std::size_t k = 0; k < 12; ++k) REQUIRE(serial[r * 12 + k] == one[k]);
    }
    CHECK(max_abs_diff(serial, parallel) < 1e-12);
    CHECK_THROWS_AS(forecast_batch(p, std::vector<double>(25, 1.0)), InputError);
}

TEST_CASE("batch loss equals pmape over all elements", "[kernels]") {
    Rng rng(12);
    const auto c = config(true);
    const auto p = init_params(c, rng);
    const auto batch = testing::random_batch(c, 9, rng);
    const auto yhat = forecast_batch(p, batch.inputs, Execution::Serial);
    ModelParams g(c);
    const double loss = loss_and_gradient(p, batch, 0.3, g, Execution::Serial);
    CHECK(loss == Catch::Approx(pmape(batch.targets, yhat, 0.3)).epsilon(1e-13));
}

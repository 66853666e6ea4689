#include <doctest.h>

#include <cmath>

#include "cnnbound/dataset.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/norms.hpp"
#include "cnnbound/snapshot.hpp"
#include "cnnbound/train.hpp"
#include "oracles.hpp"

using namespace cnnbound;

namespace {

double loss_at(const ParamSet& p, const NetworkConfig& cfg, std::span<const Example> batch, double lambda) {
    double s = 0.0;
    for (const auto& ex : batch) s += ramp_loss(forward(p, cfg, ex.x), ex.label, lambda);
    return s / static_cast<double>(batch.size());
}

Examples embed(const Examples& data, std::size_t d, std::size_t c) { return embed_channels(data, d, 1, c); }

} // namespace

TEST_CASE("gradient of a tiny basic network matches central differences") {
    const auto cfg = NetworkConfig::basic(4, 2, 3, 2, Activation::tanh, 4.0);
    Rng rng(1);
    auto p = initialize_params(cfg, rng);
    for (auto& k : p.conv) k *= 1.5;
    // scale inputs so every margin sits on the ramp's slope
    Examples batch = embed(synth_dataset(2, 6, 4, 1), 4, 2);
    for (auto& ex : batch) {
        const double m = ex.label * forward(p, cfg, ex.x)[0];
        REQUIRE(std::abs(m) > 1e-3);
        if (m < 0) ex.label = -ex.label;
    }
    std::vector<Example> on_slope;
    for (const auto& ex : batch) {
        const double m = ex.label * forward(p, cfg, ex.x)[0];
        if (m > 1e-3 && m < 0.25 - 1e-3) on_slope.push_back(ex);
    }
    REQUIRE(on_slope.size() >= 2);
    const Gradient g = grad(p, cfg, on_slope, 4.0);
    CHECK(!g.grads.last_layer);
    const double h = 1e-5;
    for (std::size_t l = 0; l < p.conv.size(); ++l)
        for (std::size_t i = 0; i < p.conv[l].size(); ++i) {
            auto up = p, dn = p;
            up.conv[l].data()[i] += h;
            dn.conv[l].data()[i] -= h;
            const double fd = (loss_at(up, cfg, on_slope, 4.0) - loss_at(dn, cfg, on_slope, 4.0)) / (2 * h);
            const double an = g.grads.conv[l].data()[i];
            CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4}) <= 1e-5);
        }
}

TEST_CASE("zero gradient when every margin clears 1/lambda") {
    const auto cfg = NetworkConfig::basic(4, 1, 3, 1, Activation::relu, 100.0);
    Rng rng(2);
    const auto p = initialize_params(cfg, rng);
    Examples batch = synth_dataset(3, 8, 4, 1);
    for (auto& ex : batch) ex.label = forward(p, cfg, ex.x)[0] > 0 ? 1 : -1;
    for (const auto& ex : batch) REQUIRE(std::abs(forward(p, cfg, ex.x)[0]) >= 0.01);
    const auto g = grad(p, cfg, batch, 100.0);
    for (double v : g.grads.conv[0].data()) CHECK(v == 0.0);
    CHECK(g.loss == 0.0);
}

TEST_CASE("zero learning rate and zero epochs leave parameters untouched") {
    const auto cfg = NetworkConfig::basic(4, 2, 3, 2, Activation::tanh, 2.0);
    Rng rng(3);
    const auto p = initialize_params(cfg, rng);
    const Examples data = embed(synth_dataset(4, 20, 4, 1), 4, 2);
    auto q = p;
    apply_step(q, grad(p, cfg, data, 2.0).grads, 0.0);
    CHECK(bitwise_equal(p, q));

    TrainConfig tc;
    tc.lambda = 2.0;
    tc.epochs = 0;
    const auto r = train(p, cfg, tc, data, data);
    CHECK(bitwise_equal(p, r.params));
    CHECK(r.record.beta == 0.0);
    CHECK(r.record.beta_trace == std::vector<double>{0.0});
}

TEST_CASE("training is deterministic") {
    const auto cfg = NetworkConfig::basic(4, 2, 3, 2, Activation::tanh, 2.0);
    Rng rng(4);
    const auto p = initialize_params(cfg, rng);
    const Examples data = embed(synth_dataset(5, 30, 4, 1), 4, 2);
    TrainConfig tc;
    tc.lambda = 2.0;
    tc.epochs = 3;
    tc.surrogate = Surrogate::hinge;
    tc.seed = 9;
    const auto a = train(p, cfg, tc, data, data), b = train(p, cfg, tc, data, data);
    CHECK(bitwise_equal(a.params, b.params));
    CHECK(a.record.beta == b.record.beta);
}

TEST_CASE("separable task is fit and beta grows over epochs") {
    TaskSpec task;
    task.noise = 0.2;
    const Examples base = synth_dataset(7, 60, 8, 1, task);
    for (std::size_t c : {2u, 4u, 8u, 16u}) {
        const auto cfg = NetworkConfig::basic(8, c, 3, 2, Activation::tanh, 4.0);
        Rng rng(Rng(11).split(c).key());
        auto p = initialize_params(cfg, rng);
        p.last_layer = rng.normal_vector(p.last_layer->size());
        normalize_to(*p.last_layer, 1.0);
        TrainConfig tc;
        tc.learning_rate = 0.1;
        tc.batch_size = 10;
        tc.epochs = 50;
        tc.lambda = 4.0;
        tc.surrogate = Surrogate::hinge;
        const Examples data = embed(base, 8, c);
        const auto r = train(p, cfg, tc, data, data);
        CHECK(r.record.train_error == 0.0);
        CHECK(r.record.loss_trace.back() <= r.record.loss_trace.front());
        for (std::size_t e = 1; e < r.record.beta_trace.size(); ++e)
            CHECK(r.record.beta_trace[e] >= r.record.beta_trace[e - 1]);
        CHECK(r.record.gap == r.record.test_error - r.record.train_error);
        CHECK(r.record.beta == doctest::Approx(sigma_dist(r.params, p, cfg)).epsilon(1e-12));
    }
}

TEST_CASE("width-8 network on the default task") {
    const Examples all = synth_dataset(0, 600, 6, 1);
    const Examples tr(all.begin(), all.begin() + 100), te(all.begin() + 100, all.end());
    const auto cfg = NetworkConfig::basic(6, 8, 3, 2, Activation::tanh, 4.0);
    Rng rng(0);
    auto p = initialize_params(cfg, rng);
    p.last_layer = rng.normal_vector(p.last_layer->size());
    normalize_to(*p.last_layer, 1.0);
    TrainConfig tc;
    tc.learning_rate = 0.1;
    tc.batch_size = 10;
    tc.epochs = 30;
    tc.lambda = 4.0;
    tc.surrogate = Surrogate::hinge;
    const auto r = train(p, cfg, tc, embed(tr, 6, 8), embed(te, 6, 8));
    CHECK(r.record.test_error <= 0.1);
}

TEST_CASE("divergence is reported with its epoch") {
    const auto cfg = NetworkConfig::basic(4, 1, 3, 1, Activation::tanh, 1.0);
    Rng rng(5);
    const auto p = initialize_params(cfg, rng);
    TrainConfig tc;
    tc.learning_rate = 1e308;
    tc.epochs = 3;
    tc.surrogate = Surrogate::hinge;
    const Examples data = synth_dataset(6, 10, 4, 1);
    try {
        (void)train(p, cfg, tc, data, data);
        FAIL("expected a training error");
    } catch (const TrainingError& e) {
        CHECK(e.epoch() >= 0);
        CHECK(e.epoch() < 3);
    }
}

TEST_CASE("train config validation") {
    TrainConfig tc;
    tc.batch_size = 0;
    CHECK_THROWS_AS(tc.validate(), ArgumentError);
    tc = {};
    tc.schedule = Schedule::exponential;
    tc.decay_rate = 1.5;
    CHECK_THROWS_AS(tc.validate(), ArgumentError);
    tc.decay_rate = 0.5;
    CHECK(tc.rate_at(2) == doctest::Approx(tc.learning_rate * 0.25));
    CHECK(parse_surrogate("hinge") == Surrogate::hinge);
}

TEST_CASE("random orthogonal matrices have unit norm") {
    Rng rng(12);
    for (auto [r, c] : {std::pair{3u, 7u}, std::pair{7u, 3u}, std::pair{4u, 4u}})
        CHECK(oracle::spectral_norm(random_orthogonal(r, c, rng)) == doctest::Approx(1.0).epsilon(1e-12));
}

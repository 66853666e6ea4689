#include <doctest.h>

#include <cmath>
#include <limits>

#include "cnnbound/convspec.hpp"
#include "cnnbound/dataset.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/network.hpp"
#include "cnnbound/norms.hpp"
#include "cnnbound/train.hpp"
#include "oracles.hpp"

using namespace cnnbound;

TEST_CASE("basic config derives W and validates") {
    const auto cfg = NetworkConfig::basic(6, 2, 3, 3);
    CHECK(cfg.trainable_parameters() == 3 * 9 * 4);
    CHECK(cfg.output_dim() == 1);
    auto bad = cfg;
    bad.conv[1].pooling = Pooling::max2x2;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad = cfg;
    bad.chi = 2.0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    CHECK_THROWS_AS(NetworkConfig::basic(2, 1, 3, 1).validate(), ArgumentError);
}

TEST_CASE("identity network computes <w, x> on nonnegative inputs") {
    const auto cfg = NetworkConfig::basic(4, 2, 1, 3, Activation::relu);
    ParamSet p;
    for (int i = 0; i < 3; ++i) p.conv.push_back(RealTensor4::delta_identity(1, 2));
    p.last_layer = default_last_layer(32);
    Rng rng(1);
    std::vector<double> x(32);
    for (auto& v : x) v = rng.uniform();
    normalize_to(x, 1.0);
    double ref = 0.0;
    for (std::size_t i = 0; i < 32; ++i) ref += (*p.last_layer)[i] * x[i];
    CHECK(forward(p, cfg, x)[0] == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("zero input gives zero output") {
    for (Activation act : {Activation::relu, Activation::tanh}) {
        NetworkConfig cfg;
        cfg.setting = Setting::general;
        cfg.input_size = 4;
        cfg.input_channels = 2;
        cfg.conv = {{3, 3, Pooling::max2x2}};
        cfg.fc_widths = {4, 3};
        cfg.activation = act;
        Rng rng(2);
        const auto p = initialize_params(cfg, rng);
        for (double v : forward(p, cfg, std::vector<double>(32, 0.0))) CHECK(v == 0.0);
    }
}

TEST_CASE("layer outputs equal dense operator times input") {
    NetworkConfig cfg;
    cfg.setting = Setting::general;
    cfg.input_size = 4;
    cfg.input_channels = 2;
    cfg.conv = {{3, 3, Pooling::none}, {2, 2, Pooling::none}};
    cfg.fc_widths = {3};
    cfg.activation = Activation::tanh;
    Rng rng(3);
    auto p = initialize_params(cfg, rng);
    for (auto& k : p.conv)
        for (auto& v : k.data()) v = rng.normal();
    const auto x = rng.normal_vector(32);
    const auto cache = forward_cache(p, cfg, x);
    for (std::size_t i = 0; i < p.conv.size(); ++i) {
        const auto pre = matvec(oracle::probe_operator(p.conv[i], 4), cache.conv[i].input);
        for (std::size_t t = 0; t < pre.size(); ++t) {
            CHECK(std::abs(pre[t] - cache.conv[i].preact[t]) <= 1e-12);
            CHECK(std::abs(std::tanh(pre[t]) - cache.conv[i].output[t]) <= 1e-12);
        }
    }
}

TEST_CASE("forward is positively homogeneous for ReLU") {
    const auto cfg = NetworkConfig::basic(5, 2, 3, 2, Activation::relu);
    Rng rng(4);
    const auto p = initialize_params(cfg, rng);
    const auto x = rng.normal_vector(50);
    auto x3 = x;
    for (auto& v : x3) v *= 3.0;
    CHECK(forward(p, cfg, x3)[0] == doctest::Approx(3.0 * forward(p, cfg, x)[0]).epsilon(1e-12));
}

TEST_CASE("forward norm chain in the basic setting") {
    const auto cfg = NetworkConfig::basic(5, 3, 3, 3, Activation::tanh);
    Rng rng(5);
    auto p = initialize_params(cfg, rng);
    for (auto& k : p.conv)
        for (auto& v : k.data()) v *= rng.uniform(0.5, 2.0);
    for (int t = 0; t < 20; ++t) {
        auto x = rng.normal_vector(75);
        normalize_to(x, rng.uniform());
        const auto cache = forward_cache(p, cfg, x);
        double prod = 1.0;
        for (std::size_t j = 0; j < p.conv.size(); ++j) {
            CHECK(euclidean_norm(cache.conv[j].input) <= prod * (1 + 1e-12));
            prod *= operator_norm_fft(p.conv[j], 5);
        }
    }
}

TEST_CASE("forward rejects bad shapes and non-finite values") {
    const auto cfg = NetworkConfig::basic(4, 1, 3, 1);
    Rng rng(6);
    auto p = initialize_params(cfg, rng);
    CHECK_THROWS_AS(forward(p, cfg, std::vector<double>(15, 0.0)), ArgumentError);
    p.conv[0](0, 0, 0, 0) = std::numeric_limits<double>::infinity();
    std::vector<double> x(16, 0.1);
    CHECK_THROWS_WITH_AS(forward(p, cfg, x), doctest::Contains("conv layer 0"), NumericError);
}

TEST_CASE("ramp loss values") {
    const std::vector<double> zero{0.0}, quarter{0.25};
    CHECK(ramp_loss(zero, 1, 1.0) == 1.0);
    CHECK(ramp_loss(quarter, 1, 2.0) == 0.5);
    CHECK(ramp_loss(quarter, -1, 2.0) == 1.0);
    CHECK(ramp_loss(std::vector<double>{0.6}, 1, 2.0) == 0.0);
    CHECK_THROWS_AS(ramp_loss(zero, 0, 1.0), ArgumentError);
    CHECK_THROWS_AS(ramp_loss(std::vector<double>{1, 2}, 2, 1.0), ArgumentError);
    CHECK(ramp_loss(std::vector<double>{0.3, 0.1, 0.2}, 0, 10.0) == doctest::Approx(0.0));
    CHECK(ramp_loss(std::vector<double>{0.3, 0.25, 0.2}, 0, 10.0) == doctest::Approx(0.5));
}

TEST_CASE("ramp loss Lipschitz audit") {
    Rng rng(7);
    for (int t = 0; t < 10000; ++t) {
        const std::size_t m = t % 2 ? 1 : 3;
        const double lambda = rng.uniform(1.0, 5.0);
        std::vector<double> a(m), b(m);
        for (std::size_t i = 0; i < m; ++i) {
            a[i] = rng.uniform(-1, 1);
            b[i] = a[i] + rng.uniform(-0.3, 0.3);
        }
        const int y = m == 1 ? (rng.uniform() < 0.5 ? 1 : -1) : static_cast<int>(rng.uniform_int(0, 2));
        const double la = ramp_loss(a, y, lambda), lb = ramp_loss(b, y, lambda);
        CHECK(la >= 0.0);
        CHECK(la <= 1.0);
        const double lam_eff = m == 1 ? lambda : 2.0 * lambda;
        double diff = 0.0;
        for (std::size_t i = 0; i < m; ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
        CHECK(std::abs(la - lb) <= lam_eff * std::sqrt(diff) + 1e-12);
    }
}

TEST_CASE("pooling") {
    const double a = 0.7;
    CHECK(pool(std::vector<double>{a, a, a, a}, 2, 1, Pooling::average2x2)[0] == doctest::Approx(2 * a));
    CHECK(pool(std::vector<double>{3, -1, 0, 2}, 2, 1, Pooling::max2x2)[0] == 3.0);
    CHECK_THROWS_AS(pool(std::vector<double>(9, 0.0), 3, 1, Pooling::max2x2), ArgumentError);

    Rng rng(8);
    for (Pooling mode : {Pooling::average2x2, Pooling::max2x2})
        for (int t = 0; t < 10000; ++t) {
            const auto u = rng.normal_vector(32), v = rng.normal_vector(32);
            std::vector<double> diff(32);
            for (int i = 0; i < 32; ++i) diff[i] = u[i] - v[i];
            const auto pu = pool(u, 4, 2, mode), pv = pool(v, 4, 2, mode);
            std::vector<double> pd(pu.size());
            for (std::size_t i = 0; i < pu.size(); ++i) pd[i] = pu[i] - pv[i];
            CHECK(euclidean_norm(pd) <= euclidean_norm(diff) * (1 + 1e-12));
        }
}

TEST_CASE("average pooling preserves the norm of a constant map") {
    std::vector<double> c(16, 0.25);
    const auto out = pool(c, 4, 1, Pooling::average2x2);
    CHECK(euclidean_norm(out) == doctest::Approx(euclidean_norm(c)).epsilon(1e-14));
}

TEST_CASE("activations are nonexpansive and fix 0") {
    Rng rng(9);
    for (Activation act : {Activation::relu, Activation::tanh}) {
        CHECK(activate(act, 0.0) == 0.0);
        for (int t = 0; t < 1000; ++t) {
            const double u = rng.normal() * 3, v = rng.normal() * 3;
            CHECK(std::abs(activate(act, u) - activate(act, v)) <= std::abs(u - v) + 1e-15);
        }
    }
}

TEST_CASE("parse helpers") {
    CHECK(parse_activation("tanh") == Activation::tanh);
    CHECK(parse_pooling("max2x2") == Pooling::max2x2);
    CHECK(parse_setting("general") == Setting::general);
    CHECK_THROWS_AS(parse_activation("sigmoid"), ArgumentError);
}

#include <doctest.h>

#include <cmath>
#include <thread>

#include "cnnbound/convspec.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/norms.hpp"
#include "cnnbound/train.hpp"
#include "oracles.hpp"

using namespace cnnbound;

namespace {

NetworkConfig general_net() {
    NetworkConfig cfg;
    cfg.setting = Setting::general;
    cfg.input_size = 4;
    cfg.input_channels = 2;
    cfg.conv = {{3, 3, Pooling::none}, {2, 2, Pooling::average2x2}};
    cfg.fc_widths = {5, 2};
    return cfg;
}

ParamSet random_like(const ParamSet& p, Rng& rng) {
    ParamSet q = p;
    for (auto& k : q.conv)
        for (auto& v : k.data()) v = rng.normal();
    for (auto& m : q.fc)
        for (auto& v : m.data()) v = rng.normal();
    return q;
}

} // namespace

TEST_CASE("distances vanish on identical parameters") {
    const auto cfg = general_net();
    Rng rng(1);
    const auto p = initialize_params(cfg, rng);
    CHECK(sigma_dist(p, p, cfg) == 0.0);
    CHECK(n_dist(p, p, cfg) == 0.0);
    CHECK(vec_l1_dist(p, p) == 0.0);
}

TEST_CASE("constant perturbation of identity kernels") {
    const auto cfg = NetworkConfig::basic(8, 3, 3, 4);
    ParamSet k0;
    for (int i = 0; i < 4; ++i) k0.conv.push_back(RealTensor4::delta_identity(3, 3));
    k0.last_layer = default_last_layer(8 * 8 * 3);
    ParamSet k = k0;
    for (auto& t : k.conv)
        for (auto& v : t.data()) v += 1.0 / 9.0;
    CHECK(sigma_dist(k, k0, cfg) == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("Hadamard fc perturbation has N-distance L") {
    NetworkConfig cfg;
    cfg.setting = Setting::general;
    cfg.input_size = 2;
    cfg.input_channels = 2;
    cfg.fc_widths = {8, 8, 8};
    RealMatrix h = hadamard_sylvester(8);
    h *= 1.0 / std::sqrt(8.0);
    ParamSet v0, v;
    for (int i = 0; i < 3; ++i) {
        v0.fc.push_back(RealMatrix::identity(8));
        v.fc.push_back(RealMatrix::identity(8) + h);
    }
    CHECK(n_dist(v, v0, cfg) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(sigma_dist(v, v0, cfg) == 0.0);
}

TEST_CASE("distances match per-layer dense oracles") {
    const auto cfg = general_net();
    Rng rng(3);
    const auto p0 = initialize_params(cfg, rng);
    const auto a = random_like(p0, rng), b = random_like(p0, rng);
    double sigma = 0.0, fc = 0.0;
    for (std::size_t i = 0; i < a.conv.size(); ++i)
        sigma += oracle::spectral_norm(oracle::probe_operator(a.conv[i] - b.conv[i], cfg.conv_input_size(i)));
    for (std::size_t i = 0; i < a.fc.size(); ++i) fc += oracle::spectral_norm(a.fc[i] - b.fc[i]);
    CHECK(oracle::rel(sigma_dist(a, b, cfg), sigma) <= 1e-9);
    CHECK(oracle::rel(n_dist(a, b, cfg), sigma + fc) <= 1e-9);
}

TEST_CASE("n_dist equals sigma_dist without fc layers") {
    const auto cfg = NetworkConfig::basic(5, 2, 3, 2);
    Rng rng(4);
    const auto p0 = initialize_params(cfg, rng);
    const auto a = random_like(p0, rng);
    CHECK(n_dist(a, p0, cfg) == sigma_dist(a, p0, cfg));
}

TEST_CASE("vec_l1_dist") {
    ParamSet a, b;
    a.conv.emplace_back(RealTensor4::Dims{2, 2, 1, 1}, std::vector<double>{1, 2, 3, 4});
    b.conv.emplace_back(RealTensor4::Dims{2, 2, 1, 1}, std::vector<double>{0.5, 2.5, 3, 4});
    CHECK(vec_l1_dist(a, b) == 1.0);
    b.conv[0] = RealTensor4({1, 1, 1, 1});
    CHECK_THROWS_AS(vec_l1_dist(a, b), ArgumentError);
}

TEST_CASE("metric properties on random triples") {
    const auto cfg = general_net();
    Rng rng(5);
    const auto p0 = initialize_params(cfg, rng);
    for (int t = 0; t < 20; ++t) {
        const auto a = random_like(p0, rng), b = random_like(p0, rng), c = random_like(p0, rng);
        for (auto dist : {+[](const ParamSet& x, const ParamSet& y, const NetworkConfig& n) { return sigma_dist(x, y, n); },
                          +[](const ParamSet& x, const ParamSet& y, const NetworkConfig& n) { return n_dist(x, y, n); }}) {
            CHECK(dist(a, b, cfg) >= 0.0);
            CHECK(std::abs(dist(a, b, cfg) - dist(b, a, cfg)) <= 1e-12);
            CHECK(dist(a, c, cfg) <= dist(a, b, cfg) + dist(b, c, cfg) + 1e-9);
        }
        CHECK(sigma_dist(a, b, cfg) <= vec_l1_dist(a, b));
    }
}

TEST_CASE("operator norm cache") {
    OperatorNormCache cache;
    Rng rng(6);
    const auto k = oracle::random_kernel(3, 2, 2, rng);
    const double v = cache.operator_norm(k, 5);
    CHECK(v == operator_norm_fft(k, 5));
    CHECK(cache.operator_norm(k, 5) == v);
    CHECK(cache.hits() == 1);
    CHECK(cache.misses() == 1);
    CHECK(cache.operator_norm(k, 6) == operator_norm_fft(k, 6)); // same kernel, other size
    CHECK(cache.size() == 2);

    std::vector<std::thread> pool;
    std::vector<double> got(4);
    for (int t = 0; t < 4; ++t) pool.emplace_back([&, t] { got[t] = cache.operator_norm(2.0 * k, 5); });
    for (auto& th : pool) th.join();
    for (double g : got) CHECK(g == got[0]);
    CHECK(cache.size() == 3);
}

TEST_CASE("initialization contract") {
    const auto cfg = NetworkConfig::basic(6, 3, 3, 3);
    Rng rng(7);
    const auto p = initialize_params(cfg, rng);
    for (double v : layer_norms(p, cfg)) CHECK(std::abs(v - 1.0) <= 1e-9);
    CHECK_NOTHROW(check_initialization(p, cfg));
    auto bad = p;
    bad.conv[1] *= 1.1;
    CHECK_THROWS_AS(check_initialization(bad, cfg), ArgumentError);

    auto g = general_net();
    g.nu = 0.1;
    Rng rng2(8);
    const auto pg = initialize_params(g, rng2);
    for (double v : layer_norms(pg, g)) CHECK(v <= 1.1 + 1e-9);
    CHECK_NOTHROW(check_initialization(pg, g));
}

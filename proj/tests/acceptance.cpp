// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cnnbound/bounds.hpp"
#include "cnnbound/cli.hpp"
#include "cnnbound/convspec.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/experiment.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/norms.hpp"
#include "cnnbound/report.hpp"
#include "cnnbound/snapshot.hpp"
#include "cnnbound/train.hpp"
#include "cnnbound/verify.hpp"

#ifndef CNNBOUND_TEST_DATA_DIR
#define CNNBOUND_TEST_DATA_DIR "tests/data"
#endif

using namespace cnnbound;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RealTensor4 constant_kernel(std::size_t k, std::size_t c, double eps) {
    RealTensor4 t({k, k, c, c});
    for (auto& v : t.data()) v = eps;
    return t;
}

json run_suite(const std::string& suite, const std::string& seed, const std::string& out_path, int& code) {
    std::ostringstream out, err;
    code = cli_dispatch({"verify", "--suite", suite, "--seed", seed, "--out", out_path}, out, err);
    return json::parse(read_text_file(out_path));
}

Outcome lipschitz_suites() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = std::filesystem::temp_directory_path();
    int code_basic = 0, code_general = 0;
    const json basic = run_suite("lipschitz-basic", "2024", (dir / "cnnbound_acc_lb.json").string(), code_basic);
    const json general = run_suite("lipschitz-general", "2024", (dir / "cnnbound_acc_lg.json").string(), code_general);
    const double secs = seconds_since(t0);

    std::size_t violations = 0, runs = 0, min_trials = std::numeric_limits<std::size_t>::max();
    double max_ratio = 0.0;
    for (const json* j : {&basic, &general})
        for (const auto& r : (*j)["runs"]) {
            ++runs;
            violations += r["violations"].get<std::size_t>() + r["hybrid_violations"].get<std::size_t>() +
                          r["chain_violations"].get<std::size_t>();
            max_ratio = std::max(max_ratio, r["max_ratio"].get<double>());
            min_trials = std::min(min_trials, r["trials"].get<std::size_t>());
        }
    double min_constructed = std::numeric_limits<double>::infinity();
    for (const json* j : {&basic, &general})
        for (const auto& [k, v] : (*j)["constructed"].items()) min_constructed = std::min(min_constructed, v.get<double>());

    std::ostringstream d;
    d << runs << " runs x " << min_trials << " trials, violations " << violations << ", max ratio "
      << fmt("%.4f", max_ratio) << ", min constructed ratio " << fmt("%.3f", min_constructed) << ", "
      << fmt("%.0f", secs) << " s (limit 300)";
    return {code_basic == kExitOk && code_general == kExitOk && violations == 0 && min_trials >= 1000 &&
                min_constructed >= 0.3 && secs <= 300.0,
            d.str()};
}

Outcome experiment() {
    const std::string path = std::string(CNNBOUND_TEST_DATA_DIR) + "/experiment.json";
    const ExperimentSpec spec = experiment_spec_from_json(read_text_file(path));
    const auto t0 = std::chrono::steady_clock::now();
    const auto records = run_experiment(spec);
    const double per_seed = seconds_since(t0) / static_cast<double>(spec.seeds.size());

    std::vector<double> gap, wb;
    for (const auto& r : records) {
        gap.push_back(r.gap);
        wb.push_back(r.w_times_beta());
    }
    const double rho = spearman(gap, wb);
    const auto summary = summarize_by_width(records);
    const std::size_t start = summary.size() / 2;
    bool monotone = true;
    std::ostringstream medians;
    for (std::size_t i = 0; i < summary.size(); ++i) {
        medians << (i ? " " : "") << summary[i].width << ":" << fmt("%.3f", summary[i].median_beta);
        if (i > start && summary[i].median_beta > summary[i - 1].median_beta) monotone = false;
    }
    std::ostringstream d;
    d << summary.size() << " widths x " << spec.seeds.size() << " seeds, spearman(gap, W*beta) " << fmt("%.3f", rho)
      << " (>= 0.3), median beta " << medians.str() << (monotone ? " nonincreasing" : " NOT nonincreasing")
      << " over the top half, " << fmt("%.0f", per_seed) << " s per seed";
    return {summary.size() >= 6 && spec.seeds.size() >= 3 && rho >= 0.3 && monotone && per_seed <= 1800.0, d.str()};
}

Outcome bound_examples() {
    double worst = 0.0;
    auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

    BoundInput in;
    in.constant = 1;
    in.eta = 0;
    in.train_loss = 0;
    in.W = 20;
    in.beta = 5;
    in.lambda = 1;
    in.delta = std::exp(-1.0);
    in.n = 100;
    track(theorem1_bounds(in)[1].value, std::sqrt(1.01));
    auto z = in;
    z.beta = 0;
    track(theorem1_bounds(z)[2].value, std::sqrt(1.0 / 100));

    auto t2 = in;
    t2.depth = 4;
    track(theorem2_bounds(t2)[1].value, std::sqrt((20 * (5 + std::log(5.0)) + 1) / 100));
    t2.beta = 0;
    track(theorem2_bounds(t2)[2].value, std::sqrt(1.0 / 100));

    track(lipschitz_const_basic(1, 1), std::exp(1.0));
    track(lipschitz_const_basic(5, 2) / 1e4, 10 * std::exp(5.0) / 1e4);
    track(covering_bound(1, 2, 3), 1.0);
    track(covering_bound(3, 2, 1) / 100, 0.81);
    track(nonuniform_level(4, 0.05).beta_j, 5);
    track(nonuniform_level(12, 0.05).beta_j, 20);

    bool flags = true;
    for (double beta : {5 - 1e-9, 5.0, 5 + 1e-9}) {
        auto b = in;
        b.beta = beta;
        flags = flags && theorem1_bounds(b)[1].applicable == (beta >= 5);
    }
    for (double s : {-1e-9, 1e-9}) {
        auto b = in;
        b.beta = 1;
        b.depth = 1;
        b.chi = 2.5 * (1 + s); // chi * lambda * beta * (1 + beta / L) = 5 (1 + s)
        flags = flags && theorem2_bounds(b)[1].applicable == (s > 0);
    }
    std::ostringstream d;
    d << "max abs deviation " << fmt("%.2e", worst) << " (tol 1e-12), branch flags at 5 +- 1e-9 "
      << (flags ? "correct" : "WRONG");
    return {worst <= 1e-12 && flags, d.str()};
}

Outcome snapshots() {
    std::size_t identical = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng(99).split(seed).key());
        NetworkConfig cfg;
        if (seed % 2) {
            cfg = NetworkConfig::basic(3 + rng.uniform_int(0, 4), 1 + rng.uniform_int(0, 2), 2, 1 + rng.uniform_int(0, 2));
        } else {
            cfg.setting = Setting::general;
            cfg.input_size = 4;
            cfg.input_channels = 2;
            cfg.conv = {{2, 3, Pooling::max2x2}};
            cfg.fc_widths = {4, 2};
            cfg.nu = 0.2;
        }
        Snapshot s{cfg, {}, initialize_params(cfg, rng), {seed, 7, 0}};
        s.current = *s.initial;
        for (auto& k : s.current.conv)
            for (auto& v : k.data()) v = rng.normal() * std::pow(2.0, rng.uniform_int(-1000, 1000));
        for (auto& m : s.current.fc)
            for (auto& v : m.data()) v = rng.normal();
        const auto bytes = encode_snapshot(s);
        const Snapshot back = decode_snapshot(bytes);
        if (bitwise_equal(back.current, s.current) && back.initial && bitwise_equal(*back.initial, *s.initial) &&
            back.metadata == s.metadata && encode_snapshot(back) == bytes)
            ++identical;
    }

    Rng rng(5);
    const auto cfg = NetworkConfig::basic(4, 2, 3, 2);
    const auto p = initialize_params(cfg, rng);
    const auto bytes = encode_snapshot(Snapshot{cfg, p, p, {}});
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | bytes[8 + i];

    int correct = 0, cases = 0;
    auto expect = [&](std::vector<unsigned char> b, auto tag, const std::string& needle = "") {
        ++cases;
        try {
            (void)decode_snapshot(b);
        } catch (const decltype(tag)& e) {
            if (needle.empty() || std::string(e.what()).find(needle) != std::string::npos) ++correct;
        } catch (...) {
        }
    };
    auto bad_magic = bytes;
    bad_magic[3] = 0;
    expect(bad_magic, FormatError(""));
    auto cut = bytes;
    cut.resize(16 + len + 8 * 5);
    expect(cut, FormatError(""), "current.conv.0");
    auto tail = bytes;
    tail.resize(bytes.size() - 1);
    expect(tail, FormatError(""), "initial.last_layer");
    auto extra = bytes;
    extra.push_back(7);
    expect(extra, FormatError(""));
    auto nan = bytes;
    const double q = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(&nan[16 + len + 8], &q, 8);
    expect(nan, NumericError(""));
    auto header = bytes;
    header[17] = '#';
    expect(header, FormatError(""));

    std::ostringstream d;
    d << identical << "/10 fuzzed snapshots bit-identical, " << correct << "/" << cases
      << " malformed files raise the expected error class";
    return {identical == 10 && correct == cases, d.str()};
}

} // namespace

int main() {
    criterion(1, "operator-norm oracle equivalence", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = verify_opnorm(200, 7);
        const double secs = seconds_since(t0);
        return Outcome{r.trials == 200 && r.max_rel_deviation <= 1e-9 && secs <= 30,
                       "200 layers, max rel deviation " + fmt("%.2e", r.max_rel_deviation) + " (tol 1e-9)"};
    });

    criterion(2, "constant-kernel closed form eps*c*k^2", [] {
        double worst = 0.0;
        int cases = 0;
        for (std::size_t k = 1; k <= 3; ++k)
            for (double eps : {1e-3, 1e-2, 1.0 / double(k * k)})
                for (std::size_t c = 1; c <= 3; ++c)
                    for (std::size_t d : {4u, 8u}) {
                        const double want = eps * double(c * k * k);
                        worst = std::max(worst, std::abs(operator_norm_fft(constant_kernel(k, c, eps), d) - want));
                        ++cases;
                    }
        return Outcome{worst <= 1e-9, std::to_string(cases) + " cases, max abs deviation " + fmt("%.2e", worst)};
    });

    criterion(3, "conv-eps scenario identities", [] {
        double worst_norm = 0.0, worst_21 = 0.0;
        int cases = 0;
        for (std::size_t k = 1; k <= 3; ++k)
            for (std::size_t c = 1; c <= 3; ++c)
                for (std::size_t d : {4u, 8u})
                    for (std::size_t L : {1u, 3u})
                        for (double eps : {1e-2, 1.0 / double(k * k)}) {
                            const auto r = scenario_eval("conv-eps", {{"k", double(k)}, {"c", double(c)}, {"d", double(d)},
                                                                      {"L", double(L)}, {"eps", eps}});
                            const double ek2c = eps * double(k * k * c);
                            worst_norm = std::max({worst_norm, std::abs(r.value("op_norm") - (1 + ek2c)),
                                                   std::abs(r.value("sigma_dist") - ek2c * double(L))});
                            RealTensor4 k0 = RealTensor4::delta_identity(k, c);
                            const double op21 = operator_21_norm({k0 + constant_kernel(k, c, eps), d}, {k0, d});
                            worst_21 = std::max(worst_21, std::abs(op21 - eps * std::pow(double(c), 1.5) * double(d * d * k)));
                            ++cases;
                        }
        return Outcome{worst_norm <= 1e-9 && worst_21 <= 1e-6,
                       std::to_string(cases) + " cases, norm/sigma deviation " + fmt("%.2e", worst_norm) +
                           " (tol 1e-9), (2,1) deviation " + fmt("%.2e", worst_21) + " (tol 1e-6)"};
    });

    criterion(4, "Hadamard identities", [] {
        double worst = 0.0;
        for (double D : {2.0, 4.0, 8.0, 16.0, 32.0}) {
            const auto r = scenario_eval("hadamard", {{"D", D}, {"L", 2}});
            worst = std::max({worst, std::abs(r.value("V_norm") - 2), std::abs(r.value("V_minus_V0_norm") - 1),
                              std::abs(r.value("V_minus_V0_21") - D)});
        }
        return Outcome{worst <= 1e-9, "D in {2..32}, max abs deviation " + fmt("%.2e", worst) + " (tol 1e-9)"};
    });

    criterion(5, "sigma distance below vectorized L1", [] {
        Rng rng(5);
        int violations = 0;
        double max_ratio = 0.0;
        for (int t = 0; t < 1000; ++t) {
            Rng r = rng.split(t);
            const std::size_t d = 2 + r.uniform_int(0, 6), k = 1 + r.uniform_int(0, std::min<std::int64_t>(d, 4) - 1);
            const auto cfg = NetworkConfig::basic(d, 1 + r.uniform_int(0, 2), k, 1 + r.uniform_int(0, 2));
            const auto a = initialize_params(cfg, r);
            auto b = a;
            const double scale = std::pow(10.0, r.uniform(-3, 1));
            for (auto& kern : b.conv)
                for (auto& v : kern.data()) v += scale * r.normal();
            const double s = sigma_dist(a, b, cfg), l1 = vec_l1_dist(a, b);
            max_ratio = std::max(max_ratio, s / l1);
            // k = c = L = 1 makes both sides the same absolute value
            violations += s > l1 * (1 + 1e-12);
        }
        return Outcome{violations == 0,
                       "1000 pairs, violations " + std::to_string(violations) + ", max sigma/l1 " + fmt("%.3f", max_ratio)};
    });

    criterion(6, "Lipschitz suites", lipschitz_suites);

    criterion(7, "gradient correctness", [] {
        const auto r = verify_gradient(20, 1);
        return Outcome{r.networks == 20 && r.violations == 0 && r.max_rel_error <= kGradientTolerance,
                       "20 networks, " + std::to_string(r.coordinates) + " coordinates, max rel error " +
                           fmt("%.2e", r.max_rel_error) + " (tol 1e-5), " + std::to_string(r.resampled) +
                           " draws resampled near kinks"};
    });

    criterion(8, "covering construction", [] {
        int failed = 0, runs = 0;
        std::size_t uncovered = 0;
        for (NormKind norm : {NormKind::l2, NormKind::linf})
            for (std::size_t d = 1; d <= 3; ++d)
                for (auto [kappa, eps] : {std::pair{1.0, 0.5}, std::pair{1.0, 0.25}, std::pair{2.0, 0.5}}) {
                    const auto r = build_cover(kappa, eps, d, norm, Rng(8).split(runs).key(), 10000);
                    ++runs;
                    uncovered += r.uncovered;
                    failed += !(r.passed() && r.sampled_points == 10000);
                }
        return Outcome{failed == 0, std::to_string(runs) + " covers (l2 and linf), 10^4 samples each, uncovered " +
                                        std::to_string(uncovered) + ", size above (3k/e)^d in " +
                                        std::to_string(failed) + " runs"};
    });

    criterion(9, "Monte-Carlo gap rate", [] {
        const auto r = mc_gap_rate(RampClass{}, {100, 215, 464, 1000, 2154, 4642, 10000}, 200, 11);
        std::ostringstream d;
        d << "seed 11, slope " << fmt("%.3f", r.slope) << " (in [-0.65, -0.35]), gap at n=10^4 "
          << fmt("%.5f", r.gap_at_largest_n) << " <= bound " << fmt("%.4f", r.rate_bound_at_largest_n);
        return Outcome{r.slope_defined && r.slope >= -0.65 && r.slope <= -0.35 &&
                           r.gap_at_largest_n <= r.rate_bound_at_largest_n,
                       d.str()};
    });

    criterion(10, "desk-scale width sweep", experiment);
    criterion(11, "bound evaluators", bound_examples);
    criterion(12, "snapshot round trip", snapshots);

    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

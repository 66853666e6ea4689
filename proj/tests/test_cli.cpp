#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cnnbound/cli.hpp"
#include "cnnbound/report.hpp"
#include "cnnbound/snapshot.hpp"
#include "cnnbound/train.hpp"

using namespace cnnbound;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli_dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

struct Files {
    fs::path dir = fs::temp_directory_path() / "cnnbound_cli_test";
    std::string same, moved, general;

    Files() {
        fs::create_directories(dir);
        const auto cfg = NetworkConfig::basic(5, 2, 3, 2, Activation::relu, 2.0);
        Rng rng(1);
        const auto init = initialize_params(cfg, rng);
        same = (dir / "same.cnvb").string();
        write_snapshot(same, Snapshot{cfg, init, init, {}});
        auto cur = init;
        cur.conv[1] *= 1.5;
        moved = (dir / "moved.cnvb").string();
        write_snapshot(moved, Snapshot{cfg, cur, init, {}});

        NetworkConfig g;
        g.setting = Setting::general;
        g.input_size = 4;
        g.input_channels = 1;
        g.conv = {{3, 2, Pooling::max2x2}};
        g.fc_widths = {3, 2};
        const auto gi = initialize_params(g, rng);
        auto gc = gi;
        gc.fc[0] *= 2.0;
        general = (dir / "general.cnvb").string();
        write_snapshot(general, Snapshot{g, gc, gi, {}});
    }
    ~Files() { fs::remove_all(dir); }
};

} // namespace

TEST_CASE("dist on an unmoved snapshot is zero for every norm") {
    Files f;
    for (const char* norm : {"sigma", "n", "l1"}) {
        const auto r = run({"dist", "--snapshot", f.same, "--norm", norm});
        CHECK(r.code == kExitOk);
        CHECK(r.out.find("distance                     0\n") != std::string::npos);
    }
}

TEST_CASE("opnorm and dist read the layer norms") {
    Files f;
    auto r = run({"opnorm", "--snapshot", f.moved, "--layer", "1"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("1.5") != std::string::npos);
    CHECK(run({"opnorm", "--snapshot", f.moved, "--layer", "2"}).code == kExitUsage);
    r = run({"opnorm", "--snapshot", f.general, "--layer", "1"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("fc") != std::string::npos);

    const auto out = (f.dir / "dist.json").string();
    r = run({"dist", "--snapshot", f.general, "--norm", "n", "--out", out});
    CHECK(r.code == kExitOk);
    CHECK(nlohmann::json::parse(read_text_file(out))["distance"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
    // --init overrides the embedded initialization
    r = run({"dist", "--snapshot", f.moved, "--init", f.moved});
    CHECK(r.out.find("distance                     0\n") != std::string::npos);
}

TEST_CASE("bound subcommand") {
    Files f;
    const auto out = (f.dir / "bound.json").string();
    auto r = run({"bound", "--snapshot", f.moved, "--theorem", "1", "--n", "1000", "--delta", "0.05", "--lambda", "2",
                  "--out", out});
    CHECK(r.code == kExitOk);
    const auto j = nlohmann::json::parse(read_text_file(out));
    CHECK(j["reports"].size() == 3);
    CHECK(j["beta"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.out.find("modulo") != std::string::npos);
    CHECK(run({"bound", "--snapshot", f.general, "--theorem", "2", "--n", "1000", "--delta", "0.05", "--lambda", "1"})
              .code == kExitOk);
    CHECK(run({"bound", "--snapshot", f.moved, "--theorem", "nonuniform", "--n", "1000", "--delta", "0.05", "--lambda",
               "1"})
              .code == kExitOk);
    CHECK(run({"bound", "--snapshot", f.moved, "--theorem", "1", "--n", "1000", "--delta", "2", "--lambda", "1"}).code ==
          kExitUsage);
    CHECK(run({"bound", "--snapshot", f.moved, "--theorem", "3", "--n", "1", "--delta", "0.1", "--lambda", "1"}).code ==
          kExitUsage);
}

TEST_CASE("compare prints the Hadamard norms") {
    const auto r = run({"compare", "--scenario", "hadamard", "--dims", "D=4,L=3"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("V_norm                       2\n") != std::string::npos);
    CHECK(run({"compare", "--scenario", "hadamard", "--dims", "D=5,L=3"}).code == kExitUsage);
}

TEST_CASE("verify exit codes") {
    const auto r = run({"verify", "--suite", "opnorm", "--trials", "200", "--seed", "7"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("PASS") != std::string::npos);
    CHECK(run({"verify", "--suite", "opnorm", "--trials", "5"}).code == kExitUsage); // no seed
    CHECK(run({"verify", "--suite", "bogus", "--seed", "1"}).code == kExitUsage);
    // too few repetitions for the rate fit: the suite runs and fails
    CHECK(run({"verify", "--suite", "mc-rate", "--trials", "1", "--seed", "3"}).code == kExitVerificationFailed);
}

TEST_CASE("usage errors") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"dist", "--snapshot", "x", "--frobnicate"}).code == kExitUsage);
    const auto r = run({"dist", "--snapshot", "/nonexistent.cnvb"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("cannot open") != std::string::npos);
    Files f;
    const auto junk = (f.dir / "junk.cnvb").string();
    write_text_file(junk, "not a snapshot at all");
    CHECK(run({"dist", "--snapshot", junk}).code == kExitUsage);
}

TEST_CASE("train writes deterministic artifacts") {
    Files f;
    const auto cfg = (f.dir / "cfg.json").string();
    write_text_file(cfg, R"({"input_size": 4, "kernel_size": 3, "layers": 2, "widths": [1, 2], "seeds": [0],
        "epochs": 2, "batch_size": 5, "n_train": 20, "n_test": 20, "lambda": 4, "surrogate": "hinge"})");
    const auto a = (f.dir / "a").string(), b = (f.dir / "b").string();
    const auto ra = run({"train", "--config", cfg, "--data", "synth", "--out", a});
    CHECK(ra.code == kExitOk);
    CHECK(ra.out.find("spearman") != std::string::npos);
    CHECK(run({"train", "--config", cfg, "--data", "synth", "--out", b}).code == kExitOk);
    for (const char* name : {"records.csv", "records.json", "gap_vs_w_beta.csv", "gap_vs_w.csv", "beta_vs_w.csv",
                             "config.json", "snapshots/width2_seed0.cnvb"})
        CHECK(read_text_file(a + "/" + name) == read_text_file(b + "/" + name));
    const auto snap = read_snapshot(a + "/snapshots/width2_seed0.cnvb");
    CHECK(snap.initial.has_value());
    CHECK(run({"dist", "--snapshot", a + "/snapshots/width2_seed0.cnvb"}).code == kExitOk);
    CHECK(run({"train", "--config", cfg, "--data", "imagenet", "--out", a}).code == kExitUsage);
}

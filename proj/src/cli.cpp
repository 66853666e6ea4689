#include "cnnbound/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cnnbound/bounds.hpp"
#include "cnnbound/convspec.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/experiment.hpp"
#include "cnnbound/linalg.hpp"
#include "cnnbound/norms.hpp"
#include "cnnbound/report.hpp"
#include "cnnbound/snapshot.hpp"
#include "cnnbound/verify.hpp"

namespace cnnbound {

using nlohmann::ordered_json;

namespace {

/// Raised by a subcommand whose checks ran but did not all pass.
struct VerificationFailed {};

std::string num(double v) { return format_double(v); }

void print_row(std::ostream& out, const std::string& key, const std::string& value) {
    out << std::left << std::setw(28) << key << ' ' << value << '\n';
}

void maybe_write(const std::string& path, const ordered_json& j) {
    if (!path.empty()) write_text_file(path, j.dump(2) + "\n");
}

ParamSet initial_for(const Snapshot& s, const std::string& init_path) {
    if (!init_path.empty()) return read_snapshot(init_path).current;
    if (s.initial) return *s.initial;
    throw ArgumentError("snapshot has no initial parameters; pass --init");
}

// ---- opnorm / dist / bound -------------------------------------------------

int cmd_opnorm(const std::string& path, std::size_t layer, std::ostream& out) {
    const Snapshot s = read_snapshot(path);
    const std::size_t lc = s.current.conv.size();
    if (layer >= lc + s.current.fc.size())
        throw ArgumentError("layer " + std::to_string(layer) + " out of range (network has " +
                            std::to_string(lc + s.current.fc.size()) + " trainable layers)");
    const double v = layer < lc ? operator_norm_fft(s.current.conv[layer], s.config.conv_input_size(layer))
                                : spectral_norm(s.current.fc[layer - lc]);
    print_row(out, "layer", std::to_string(layer));
    print_row(out, "kind", layer < lc ? "conv" : "fc");
    print_row(out, "operator_norm", num(v));
    return kExitOk;
}

int cmd_dist(const std::string& path, const std::string& init_path, const std::string& norm, std::ostream& out,
             const std::string& out_path) {
    const Snapshot s = read_snapshot(path);
    const ParamSet init = initial_for(s, init_path);
    if (!init.same_shapes(s.current)) throw FormatError("initial parameters do not match the snapshot's shapes");
    double v = 0.0;
    if (norm == "sigma")
        v = sigma_dist(s.current, init, s.config);
    else if (norm == "n")
        v = n_dist(s.current, init, s.config);
    else
        v = vec_l1_dist(s.current, init);
    print_row(out, "norm", norm);
    print_row(out, "distance", num(v));
    maybe_write(out_path, ordered_json{{"norm", norm}, {"distance", v}});
    return kExitOk;
}

ordered_json report_json(const BoundReport& r) {
    ordered_json terms = ordered_json::object();
    for (const auto& [k, v] : r.terms) terms[k] = v;
    return {{"name", r.name}, {"value", r.value}, {"applicable", r.applicable}, {"flags", r.flags}, {"terms", terms}};
}

void print_report(std::ostream& out, const BoundReport& r) {
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : "; ") + f;
    print_row(out, r.name, num(r.value) + (r.applicable ? "" : " (inapplicable)") + (flags.empty() ? "" : "  [" + flags + "]"));
    for (const auto& [k, v] : r.terms) print_row(out, "  " + k, num(v));
}

struct BoundArgs {
    std::string snapshot, init, theorem;
    double n = 0, delta = 0.05, lambda = 1, constant = 1, eta = 0, train_loss = 0;
    std::string out;
};

int cmd_bound(const BoundArgs& a, std::ostream& out) {
    const Snapshot s = read_snapshot(a.snapshot);
    const ParamSet init = initial_for(s, a.init);
    BoundInput in;
    in.W = static_cast<double>(s.config.trainable_parameters());
    in.n = a.n;
    in.delta = a.delta;
    in.lambda = a.lambda;
    in.constant = a.constant;
    in.eta = a.eta;
    in.train_loss = a.train_loss;
    in.chi = s.config.chi;
    in.nu = s.config.nu;
    in.loss_range = s.config.loss_range;
    in.depth = static_cast<double>(s.config.depth());

    std::vector<BoundReport> reports;
    if (a.theorem == "2") {
        in.beta = n_dist(s.current, init, s.config);
        for (auto& r : theorem2_bounds(in)) reports.push_back(r);
    } else {
        in.beta = sigma_dist(s.current, init, s.config);
        if (a.theorem == "1")
            for (auto& r : theorem1_bounds(in)) reports.push_back(r);
        else
            for (auto& r : nonuniform_bound(in.beta, in)) reports.push_back(r);
    }
    out << "values are modulo the theorem's absolute constant C = " << num(in.constant) << "\n";
    print_row(out, "beta", num(in.beta));
    print_row(out, "W", num(in.W));
    print_row(out, "n", num(in.n));
    for (const auto& r : reports) print_report(out, r);

    ordered_json j = {{"theorem", a.theorem}, {"beta", in.beta}, {"W", in.W}, {"n", in.n}, {"C", in.constant}};
    j["reports"] = ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(report_json(r));
    maybe_write(a.out, j);
    return kExitOk;
}

int cmd_compare(const std::string& scenario, const std::string& dims, std::ostream& out, const std::string& out_path) {
    const ScenarioResult r = scenario_eval(scenario, parse_dims(dims));
    ordered_json j = {{"scenario", r.name}};
    out << "scenario " << r.name << "\n";
    for (const auto& [k, v] : r.rows) {
        print_row(out, k, num(v));
        j[k] = v;
    }
    maybe_write(out_path, j);
    return kExitOk;
}

// ---- verify ----------------------------------------------------------------

ordered_json lipschitz_json(const LipschitzTrialReport& r) {
    return {{"suite", r.suite},
            {"trials", r.trials},
            {"evaluated", r.evaluated},
            {"skipped", r.skipped},
            {"max_ratio", r.max_ratio},
            {"worst_trial", r.worst_trial},
            {"violations", r.violations},
            {"hybrid_violations", r.hybrid_violations},
            {"chain_violations", r.chain_violations}};
}

constexpr double kNonVacuity = 0.3;
constexpr double kBetaGrid[] = {0.5, 1.0, 5.0};

bool suite_lipschitz_basic(std::size_t trials, std::uint64_t seed, std::ostream& out, ordered_json& j) {
    bool ok = true;
    j["runs"] = ordered_json::array();
    std::uint64_t run = 0;
    for (Activation act : {Activation::relu, Activation::tanh})
        for (double lambda : {1.0, 2.0})
            for (double beta : kBetaGrid) {
                const NetworkConfig cfg = NetworkConfig::basic(6, 2, 3, 3, act, lambda);
                for (int which = 0; which < 2; ++which) {
                    const auto r = which == 0 ? verify_single_layer(cfg, beta, trials, Rng(seed).split(run++).key())
                                              : verify_all_layers(cfg, beta, trials, Rng(seed).split(run++).key());
                    ok = ok && r.passed();
                    out << std::left << std::setw(26) << r.suite << " act=" << to_string(act) << " lambda=" << lambda
                        << " beta=" << beta << "  max_ratio=" << num(r.max_ratio) << " violations=" << r.violations
                        << " skipped=" << r.skipped << "\n";
                    auto rj = lipschitz_json(r);
                    rj["activation"] = to_string(act);
                    rj["lambda"] = lambda;
                    rj["beta"] = beta;
                    j["runs"].push_back(rj);
                }
            }
    const double c1 = constructed_ratio_single_layer(0.5), c2 = constructed_ratio_all_layers(0.5);
    out << "constructed single-layer ratio (beta=0.5): " << num(c1) << "\n";
    out << "constructed all-layers ratio (beta=0.5): " << num(c2) << "\n";
    j["constructed"] = {{"single_layer", c1}, {"all_layers", c2}};
    return ok && c1 >= kNonVacuity && c2 >= kNonVacuity;
}

NetworkConfig general_suite_config(double nu, double chi) {
    NetworkConfig cfg;
    cfg.setting = Setting::general;
    cfg.input_size = 8;
    cfg.input_channels = 2;
    cfg.conv = {{3, 4, Pooling::average2x2}, {3, 4, Pooling::max2x2}};
    cfg.fc_widths = {8, 3};
    cfg.activation = Activation::relu;
    cfg.nu = nu;
    cfg.chi = chi;
    return cfg;
}

bool suite_lipschitz_general(std::size_t trials, std::uint64_t seed, std::ostream& out, ordered_json& j) {
    bool ok = true;
    j["runs"] = ordered_json::array();
    std::uint64_t run = 0;
    for (GeneralCheck check : {GeneralCheck::conv_layer, GeneralCheck::fc_layer, GeneralCheck::full})
        for (double nu : {0.0, 0.1})
            for (double chi : {1.0, 2.0})
                for (double beta : kBetaGrid) {
                    const auto r =
                        verify_general(general_suite_config(nu, chi), beta, check, trials, Rng(seed).split(run++).key());
                    ok = ok && r.passed();
                    out << std::left << std::setw(32) << r.suite << " nu=" << nu << " chi=" << chi << " beta=" << beta
                        << "  max_ratio=" << num(r.max_ratio) << " violations=" << r.violations
                        << " chain=" << r.chain_violations << "\n";
                    auto rj = lipschitz_json(r);
                    rj["nu"] = nu;
                    rj["chi"] = chi;
                    rj["beta"] = beta;
                    j["runs"].push_back(rj);
                }
    j["constructed"] = ordered_json::object();
    for (GeneralCheck check : {GeneralCheck::conv_layer, GeneralCheck::fc_layer, GeneralCheck::full}) {
        const double c = constructed_ratio_general(0.5, check);
        out << "constructed " << to_string(check) << " ratio (beta=0.5): " << num(c) << "\n";
        j["constructed"][std::string(to_string(check))] = c;
        ok = ok && c >= kNonVacuity;
    }
    return ok;
}

bool suite_cover(std::size_t samples, std::uint64_t seed, std::ostream& out, ordered_json& j) {
    bool ok = true;
    j["runs"] = ordered_json::array();
    std::uint64_t run = 0;
    const std::pair<double, double> grid[] = {{1.0, 0.5}, {1.0, 0.25}, {2.0, 0.5}};
    for (NormKind norm : {NormKind::l2, NormKind::linf})
        for (std::size_t d = 1; d <= 3; ++d)
            for (const auto& [kappa, eps] : grid) {
                const CoverReport r = build_cover(kappa, eps, d, norm, Rng(seed).split(run++).key(), samples);
                ok = ok && r.passed();
                out << "cover norm=" << to_string(norm) << " d=" << d << " kappa=" << kappa << " eps=" << eps
                    << "  size=" << r.cover_size << " bound=" << num(r.bound) << " uncovered=" << r.uncovered << "/"
                    << r.sampled_points << "\n";
                j["runs"].push_back({{"norm", to_string(norm)},
                                     {"d", d},
                                     {"kappa", kappa},
                                     {"eps", eps},
                                     {"cover_size", r.cover_size},
                                     {"bound", r.bound},
                                     {"volumetric_lower", r.volumetric_lower},
                                     {"min_center_distance", r.min_center_distance},
                                     {"sampled_points", r.sampled_points},
                                     {"uncovered", r.uncovered}});
            }
    return ok;
}

const std::vector<std::size_t> kMcGrid{100, 215, 464, 1000, 2154, 4642, 10000};

bool suite_mc_rate(std::size_t reps, std::uint64_t seed, std::ostream& out, ordered_json& j) {
    const McRateReport r = mc_gap_rate(RampClass{}, kMcGrid, reps, seed);
    for (std::size_t g = 0; g < r.n_grid.size(); ++g)
        out << "n=" << r.n_grid[g] << "  mean sup gap=" << num(r.mean_sup_gap[g]) << "\n";
    out << "slope=" << num(r.slope) << "  gap(n_max)=" << num(r.gap_at_largest_n)
        << "  bound(C=3)=" << num(r.rate_bound_at_largest_n) << "\n";
    j["n_grid"] = r.n_grid;
    j["mean_sup_gap"] = r.mean_sup_gap;
    j["slope"] = r.slope;
    j["gap_at_largest_n"] = r.gap_at_largest_n;
    j["rate_bound_at_largest_n"] = r.rate_bound_at_largest_n;
    j["nonincreasing_violations"] = r.nonincreasing_violations;
    return r.slope_defined && r.slope >= -0.65 && r.slope <= -0.35 &&
           r.gap_at_largest_n <= r.rate_bound_at_largest_n && r.nonincreasing_violations == 0;
}

int cmd_verify(const std::string& suite, std::optional<std::size_t> trials, std::uint64_t seed, std::ostream& out,
               const std::string& out_path) {
    ordered_json j = {{"suite", suite}, {"seed", seed}};
    bool ok = false;
    if (suite == "lipschitz-basic") {
        ok = suite_lipschitz_basic(trials.value_or(1000), seed, out, j);
    } else if (suite == "lipschitz-general") {
        ok = suite_lipschitz_general(trials.value_or(1000), seed, out, j);
    } else if (suite == "cover") {
        ok = suite_cover(trials.value_or(10000), seed, out, j);
    } else if (suite == "gradient") {
        const auto r = verify_gradient(trials.value_or(20), seed);
        out << "networks=" << r.networks << " coordinates=" << r.coordinates << " resampled=" << r.resampled
            << " max_rel_error=" << num(r.max_rel_error) << " violations=" << r.violations << "\n";
        j.update({{"networks", r.networks},
                  {"coordinates", r.coordinates},
                  {"resampled", r.resampled},
                  {"max_rel_error", r.max_rel_error},
                  {"violations", r.violations}});
        ok = r.violations == 0;
    } else if (suite == "opnorm") {
        const auto r = verify_opnorm(trials.value_or(200), seed);
        out << "trials=" << r.trials << " max_rel_deviation=" << num(r.max_rel_deviation) << "\n";
        j.update({{"trials", r.trials}, {"max_rel_deviation", r.max_rel_deviation}});
        ok = r.max_rel_deviation <= 1e-9;
    } else {
        ok = suite_mc_rate(trials.value_or(200), seed, out, j);
    }
    j["passed"] = ok;
    out << (ok ? "PASS" : "FAIL") << "\n";
    maybe_write(out_path, j);
    if (!ok) throw VerificationFailed{};
    return kExitOk;
}

// ---- train -----------------------------------------------------------------

std::pair<Examples, Examples> load_cifar_split(const std::string& path, const nlohmann::json& cfg,
                                               const ExperimentSpec& spec) {
    const auto classes = cfg.value("classes", std::vector<int>{0, 1});
    if (classes.size() != 2) throw FormatError("'classes' must list two CIFAR-10 labels");
    const std::size_t train_per_class = cfg.value("max_per_class", spec.n_train / 2);
    const std::size_t test_per_class = spec.n_test / 2;
    namespace fs = std::filesystem;
    Examples tr, te;
    if (fs::is_directory(path)) {
        for (int b = 1; b <= 5; ++b) {
            const fs::path f = fs::path(path) / ("data_batch_" + std::to_string(b) + ".bin");
            if (!fs::exists(f)) continue;
            Examples part = load_cifar10_binary(f.string(), classes);
            tr.insert(tr.end(), part.begin(), part.end());
        }
        te = load_cifar10_binary((fs::path(path) / "test_batch.bin").string(), classes, test_per_class);
    } else {
        Examples all = load_cifar10_binary(path, classes);
        const std::size_t cut = std::min(all.size(), spec.n_train);
        tr.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut));
        te.assign(all.begin() + static_cast<std::ptrdiff_t>(cut), all.end());
    }
    // keep at most train_per_class of each class, in file order
    Examples kept;
    std::size_t count[2] = {0, 0};
    for (auto& ex : tr) {
        const int slot = ex.label == classes[0] ? 0 : 1;
        if (count[slot] < train_per_class) {
            ++count[slot];
            kept.push_back(std::move(ex));
        }
    }
    if (kept.empty() || te.empty()) throw FormatError("CIFAR-10 input yielded an empty train or test set");
    return {to_binary_labels(std::move(kept), classes[0]), to_binary_labels(std::move(te), classes[0])};
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out_dir, std::ostream& out) {
    const std::string text = read_text_file(config_path);
    ExperimentSpec spec = experiment_spec_from_json(text);
    Examples tr, te;
    if (data == "synth") {
        Examples all = synth_dataset(spec.data_seed, spec.n_train + spec.n_test, spec.input_size, spec.data_channels,
                                     spec.task);
        te.assign(all.begin() + static_cast<std::ptrdiff_t>(spec.n_train), all.end());
        all.resize(spec.n_train);
        tr = std::move(all);
    } else if (data.rfind("cifar:", 0) == 0) {
        nlohmann::json cfg;
        try {
            cfg = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(e.what());
        }
        spec.input_size = 32;
        spec.data_channels = 3;
        std::tie(tr, te) = load_cifar_split(data.substr(6), cfg, spec);
    } else {
        throw ArgumentError("--data must be 'synth' or 'cifar:PATH'");
    }

    const auto runs = run_experiment_runs(spec, tr, te);
    std::vector<ExperimentRecord> records;
    for (const auto& r : runs) records.push_back(r.record);
    write_experiment_outputs(records, out_dir);
    const std::filesystem::path snaps = std::filesystem::path(out_dir) / "snapshots";
    std::filesystem::create_directories(snaps);
    for (const auto& r : runs) {
        Snapshot s{r.net, r.final_params, r.initial, {r.record.seed, spec.train.epochs, snapshot_timestamp()}};
        write_snapshot((snaps / ("width" + std::to_string(r.record.width) + "_seed" + std::to_string(r.record.seed) +
                                 ".cnvb"))
                           .string(),
                       s);
    }
    write_text_file((std::filesystem::path(out_dir) / "config.json").string(), experiment_spec_to_json(spec) + "\n");

    out << kRecordCsvHeader << "\n";
    std::vector<double> gaps, wb;
    for (const auto& r : records) {
        out << r.width << ',' << r.W << ',' << r.seed << ',' << num(r.train_error) << ',' << num(r.test_error) << ','
            << num(r.gap) << ',' << num(r.beta) << ',' << num(r.w_times_beta()) << "\n";
        gaps.push_back(r.gap);
        wb.push_back(r.w_times_beta());
    }
    out << "spearman(gap, W*beta) = " << num(spearman(gaps, wb)) << "\n";
    for (const auto& s : summarize_by_width(records))
        out << "width " << s.width << ": median beta " << num(s.median_beta) << ", median gap " << num(s.median_gap)
            << "\n";
    return kExitOk;
}

} // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral norms, distance from initialization and generalization bounds for convolutional networks",
                 "cnnbound"};
    app.require_subcommand(1);

    std::string snapshot, init, norm = "sigma", out_path;
    std::size_t layer = 0;
    auto* opnorm = app.add_subcommand("opnorm", "Operator norm of one layer");
    opnorm->add_option("--snapshot", snapshot, "snapshot file")->required();
    opnorm->add_option("--layer", layer, "trainable layer index (conv layers first)")->required();

    auto* dist = app.add_subcommand("dist", "Distance from initialization");
    dist->add_option("--snapshot", snapshot)->required();
    dist->add_option("--init", init, "snapshot holding the initialization");
    dist->add_option("--norm", norm)->check(CLI::IsMember({"sigma", "n", "l1"}));
    dist->add_option("--out", out_path, "JSON output file");

    BoundArgs b;
    auto* bound = app.add_subcommand("bound", "Evaluate a generalization bound");
    bound->add_option("--snapshot", b.snapshot)->required();
    bound->add_option("--init", b.init);
    bound->add_option("--theorem", b.theorem)->required()->check(CLI::IsMember({"1", "2", "nonuniform"}));
    bound->add_option("--n", b.n)->required();
    bound->add_option("--delta", b.delta)->required();
    bound->add_option("--lambda", b.lambda)->required();
    bound->add_option("--C", b.constant);
    bound->add_option("--eta", b.eta);
    bound->add_option("--train-loss", b.train_loss);
    bound->add_option("--out", b.out);

    std::string scenario, dims;
    auto* compare = app.add_subcommand("compare", "Compare bounds on a constructed scenario");
    compare->add_option("--scenario", scenario)->required()->check(CLI::IsMember({"conv-eps", "hadamard"}));
    compare->add_option("--dims", dims)->required();
    compare->add_option("--out", out_path);

    std::string suite;
    std::optional<std::size_t> trials;
    std::uint64_t seed = 0;
    auto* verify = app.add_subcommand("verify", "Run a numerical verification suite");
    verify->add_option("--suite", suite)
        ->required()
        ->check(CLI::IsMember({"lipschitz-basic", "lipschitz-general", "cover", "gradient", "opnorm", "mc-rate"}));
    verify->add_option("--trials", trials);
    verify->add_option("--seed", seed)->required();
    verify->add_option("--out", out_path);

    std::string config, data, out_dir;
    auto* trainc = app.add_subcommand("train", "Run a width sweep");
    trainc->add_option("--config", config)->required();
    trainc->add_option("--data", data)->required();
    trainc->add_option("--out", out_dir)->required();

    std::vector<std::string> argv_store{"cnnbound"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*opnorm) return cmd_opnorm(snapshot, layer, out);
        if (*dist) return cmd_dist(snapshot, init, norm, out, out_path);
        if (*bound) return cmd_bound(b, out);
        if (*compare) return cmd_compare(scenario, dims, out, out_path);
        if (*verify) return cmd_verify(suite, trials, seed, out, out_path);
        if (*trainc) return cmd_train(config, data, out_dir, out);
    } catch (const VerificationFailed&) {
        return kExitVerificationFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

int cli_dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_dispatch(args, std::cout, std::cerr);
}

} // namespace cnnbound

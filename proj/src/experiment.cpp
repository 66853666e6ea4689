#include "cnnbound/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "cnnbound/errors.hpp"
#include "cnnbound/report.hpp"

namespace cnnbound {

void ExperimentSpec::validate() const {
    if (widths.empty()) throw ArgumentError("an experiment needs at least one width");
    if (seeds.empty()) throw ArgumentError("an experiment needs at least one seed");
    for (std::size_t c : widths)
        if (c < data_channels) throw ArgumentError("width " + std::to_string(c) + " is below the data channel count");
    if (kernel_size > input_size) throw ArgumentError("kernel larger than the input");
    train.validate();
}

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec) {
    // one draw split in two, so train and test share the class templates
    Examples all = synth_dataset(spec.data_seed, spec.n_train + spec.n_test, spec.input_size, spec.data_channels,
                                 spec.task);
    const Examples test_set(all.begin() + static_cast<std::ptrdiff_t>(spec.n_train), all.end());
    all.resize(spec.n_train);
    return run_experiment(spec, all, test_set);
}

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec, const Examples& train_set,
                                             const Examples& test_set) {
    std::vector<ExperimentRecord> records;
    for (auto& run : run_experiment_runs(spec, train_set, test_set)) records.push_back(std::move(run.record));
    return records;
}

std::vector<ExperimentRun> run_experiment_runs(const ExperimentSpec& spec, const Examples& train_set,
                                               const Examples& test_set) {
    spec.validate();
    struct Job {
        std::size_t width;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t c : spec.widths)
        for (std::uint64_t s : spec.seeds) jobs.push_back({c, s});

    std::vector<ExperimentRun> runs(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
            try {
                const Job job = jobs[j];
                const NetworkConfig net = NetworkConfig::basic(spec.input_size, job.width, spec.kernel_size,
                                                               spec.layers, spec.activation, spec.train.lambda);
                const Examples tr = embed_channels(train_set, spec.input_size, spec.data_channels, job.width);
                const Examples te = embed_channels(test_set, spec.input_size, spec.data_channels, job.width);
                Rng init_rng = Rng(job.seed).split(0x1417 + job.width);
                ParamSet initial = initialize_params(net, init_rng);
                if (spec.gaussian_last_layer) {
                    std::vector<double> w = init_rng.normal_vector(initial.last_layer->size());
                    normalize_to(w, 1.0);
                    initial.last_layer = std::move(w);
                }
                TrainConfig tc = spec.train;
                tc.seed = job.seed;
                TrainResult result = train(initial, net, tc, tr, te);
                runs[j] = {net, initial, std::move(result.params), std::move(result.record)};
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(jobs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    std::stable_sort(runs.begin(), runs.end(), [](const ExperimentRun& a, const ExperimentRun& b) {
        return a.record.width != b.record.width ? a.record.width < b.record.width : a.record.seed < b.record.seed;
    });
    return runs;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
        i = j + 1;
    }
    return rank;
}

} // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionError("spearman: inputs differ in length");
    if (x.size() < 2) return 0.0;
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double median(std::vector<double> v) {
    if (v.empty()) throw ArgumentError("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<WidthSummary> summarize_by_width(const std::vector<ExperimentRecord>& records) {
    std::map<std::size_t, std::vector<const ExperimentRecord*>> groups;
    for (const auto& r : records) groups[r.width].push_back(&r);
    std::vector<WidthSummary> out;
    for (const auto& [width, rs] : groups) {
        WidthSummary s;
        s.width = width;
        s.W = rs.front()->W;
        std::vector<double> betas, gaps;
        for (const auto* r : rs) {
            betas.push_back(r->beta);
            gaps.push_back(r->gap);
        }
        s.median_beta = median(betas);
        s.median_gap = median(gaps);
        out.push_back(s);
    }
    return out;
}

void write_experiment_outputs(const std::vector<ExperimentRecord>& records, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    const std::filesystem::path base(dir);
    emit_report(records, ReportFormat::csv, (base / "records.csv").string());
    emit_report(records, ReportFormat::json, (base / "records.json").string());

    std::string fig1 = "width,seed,W_times_beta,gap\n", fig2 = "width,seed,W,gap\n", fig3 = "width,seed,W,beta\n";
    for (const auto& r : records) {
        const std::string key = std::to_string(r.width) + ',' + std::to_string(r.seed) + ',';
        fig1 += key + format_double(r.w_times_beta()) + ',' + format_double(r.gap) + '\n';
        fig2 += key + std::to_string(r.W) + ',' + format_double(r.gap) + '\n';
        fig3 += key + std::to_string(r.W) + ',' + format_double(r.beta) + '\n';
    }
    write_text_file((base / "gap_vs_w_beta.csv").string(), fig1);
    write_text_file((base / "gap_vs_w.csv").string(), fig2);
    write_text_file((base / "beta_vs_w.csv").string(), fig3);
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
    using nlohmann::json;
    ExperimentSpec s;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw FormatError("experiment config must be a JSON object");
        s.input_size = j.value("input_size", s.input_size);
        s.data_channels = j.value("data_channels", s.data_channels);
        s.kernel_size = j.value("kernel_size", s.kernel_size);
        s.layers = j.value("layers", s.layers);
        s.activation = parse_activation(j.value("activation", std::string(to_string(s.activation))));
        const std::string last = j.value("last_layer", std::string(s.gaussian_last_layer ? "gaussian" : "ones"));
        if (last != "gaussian" && last != "ones") throw FormatError("last_layer must be 'gaussian' or 'ones'");
        s.gaussian_last_layer = last == "gaussian";
        s.widths = j.value("widths", s.widths);
        s.seeds = j.value("seeds", s.seeds);
        s.train.learning_rate = j.value("learning_rate", s.train.learning_rate);
        const std::string schedule = j.value("schedule", std::string("constant"));
        if (schedule == "constant")
            s.train.schedule = Schedule::constant;
        else if (schedule == "exponential")
            s.train.schedule = Schedule::exponential;
        else
            throw FormatError("unknown schedule '" + schedule + "'");
        s.train.decay_rate = j.value("decay_rate", s.train.decay_rate);
        s.train.batch_size = j.value("batch_size", s.train.batch_size);
        s.train.epochs = j.value("epochs", s.train.epochs);
        s.train.lambda = j.value("lambda", s.train.lambda);
        s.train.surrogate = parse_surrogate(j.value("surrogate", std::string(to_string(s.train.surrogate))));
        s.n_train = j.value("n_train", s.n_train);
        s.n_test = j.value("n_test", s.n_test);
        s.data_seed = j.value("data_seed", s.data_seed);
        s.task.noise = j.value("noise", s.task.noise);
        s.task.label_flip = j.value("label_flip", s.task.label_flip);
        s.task.frequencies = j.value("frequencies", s.task.frequencies);
        s.threads = j.value("threads", s.threads);
    } catch (const json::exception& e) {
        throw FormatError(std::string("experiment config: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("experiment config: ") + e.what());
    }
    return s;
}

std::string experiment_spec_to_json(const ExperimentSpec& s) {
    const nlohmann::json j = {{"input_size", s.input_size},
                              {"data_channels", s.data_channels},
                              {"kernel_size", s.kernel_size},
                              {"layers", s.layers},
                              {"activation", to_string(s.activation)},
                              {"last_layer", s.gaussian_last_layer ? "gaussian" : "ones"},
                              {"widths", s.widths},
                              {"seeds", s.seeds},
                              {"learning_rate", s.train.learning_rate},
                              {"schedule", s.train.schedule == Schedule::constant ? "constant" : "exponential"},
                              {"decay_rate", s.train.decay_rate},
                              {"batch_size", s.train.batch_size},
                              {"epochs", s.train.epochs},
                              {"lambda", s.train.lambda},
                              {"surrogate", to_string(s.train.surrogate)},
                              {"n_train", s.n_train},
                              {"n_test", s.n_test},
                              {"data_seed", s.data_seed},
                              {"noise", s.task.noise},
                              {"label_flip", s.task.label_flip},
                              {"frequencies", s.task.frequencies},
                              {"threads", s.threads}};
    return j.dump(2);
}

} // namespace cnnbound

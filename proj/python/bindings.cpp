#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cnnbound/bounds.hpp"
#include "cnnbound/cli.hpp"
#include "cnnbound/convspec.hpp"
#include "cnnbound/errors.hpp"
#include "cnnbound/experiment.hpp"
#include "cnnbound/norms.hpp"
#include "cnnbound/snapshot.hpp"
#include "cnnbound/verify.hpp"

namespace py = pybind11;
using namespace cnnbound;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

RealTensor4 to_kernel(const Array& a) {
    if (a.ndim() != 4) throw DimensionError("kernel must have shape (k, k, c_in, c_out)");
    RealTensor4::Dims dims{};
    for (int i = 0; i < 4; ++i) dims[i] = static_cast<std::size_t>(a.shape(i));
    return RealTensor4(dims, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const RealMatrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) v(i, j) = m(i, j);
    return out;
}

BoundInput bound_input(const py::kwargs& kw) {
    BoundInput in;
    const std::map<std::string, double*> fields{
        {"beta", &in.beta},     {"W", &in.W},         {"n", &in.n},           {"delta", &in.delta},
        {"lambda_", &in.lambda}, {"eta", &in.eta},     {"C", &in.constant},    {"M", &in.loss_range},
        {"chi", &in.chi},       {"nu", &in.nu},       {"L", &in.depth},       {"train_loss", &in.train_loss}};
    for (const auto& [key, value] : kw) {
        const auto name = key.cast<std::string>();
        const auto it = fields.find(name);
        if (it == fields.end()) throw ArgumentError("unknown bound input '" + name + "'");
        *it->second = value.cast<double>();
    }
    return in;
}

py::dict report_dict(const BoundReport& r) {
    py::dict d;
    d["name"] = r.name;
    d["value"] = r.value;
    d["applicable"] = r.applicable;
    d["flags"] = r.flags;
    py::dict terms;
    for (const auto& [k, v] : r.terms) terms[py::str(k)] = v;
    d["terms"] = terms;
    return d;
}

template <std::size_t N>
py::list reports(const std::array<BoundReport, N>& rs) {
    py::list out;
    for (const auto& r : rs) out.append(report_dict(r));
    return out;
}

py::dict record_dict(const ExperimentRecord& r) {
    py::dict d;
    d["width"] = r.width;
    d["W"] = r.W;
    d["seed"] = r.seed;
    d["train_error"] = r.train_error;
    d["test_error"] = r.test_error;
    d["gap"] = r.gap;
    d["beta"] = r.beta;
    d["beta_trace"] = r.beta_trace;
    return d;
}

} // namespace

PYBIND11_MODULE(_cnnbound, m) {
    m.attr("__version__") = "0.1.0";

    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("operator_norm", [](const Array& k, std::size_t d) { return operator_norm_fft(to_kernel(k), d); },
          py::arg("kernel"), py::arg("d"), "Spectral norm of the circular conv operator on d x d inputs.");
    m.def("materialize_operator", [](const Array& k, std::size_t d) { return to_array(materialize_operator(to_kernel(k), d)); },
          py::arg("kernel"), py::arg("d"));
    m.def("operator_21_norm",
          [](const Array& k, const Array& k0, std::size_t d) {
              return operator_21_norm({to_kernel(k), d}, {to_kernel(k0), d});
          },
          py::arg("kernel"), py::arg("kernel0"), py::arg("d"));

    m.def("snapshot_distances",
          [](const std::string& path, std::optional<std::string> init_path) {
              const Snapshot s = read_snapshot(path);
              const ParamSet init = init_path ? read_snapshot(*init_path).current
                                              : s.initial.value_or(ParamSet{});
              if (!init_path && !s.initial) throw FormatError("snapshot has no initialization; pass init_path");
              py::dict d;
              d["sigma"] = sigma_dist(s.current, init, s.config);
              d["n"] = n_dist(s.current, init, s.config);
              d["l1"] = vec_l1_dist(s.current, init);
              d["layer_norms"] = layer_norms(s.current, s.config);
              return d;
          },
          py::arg("path"), py::arg("init_path") = py::none());

    m.def("theorem1", [](const py::kwargs& kw) { return reports(theorem1_bounds(bound_input(kw))); });
    m.def("theorem2", [](const py::kwargs& kw) { return reports(theorem2_bounds(bound_input(kw))); });
    m.def("nonuniform", [](double dist, const py::kwargs& kw) { return reports(nonuniform_bound(dist, bound_input(kw))); },
          py::arg("dist"));
    m.def("scenario",
          [](const std::string& name, const std::map<std::string, double>& dims) {
              py::dict d;
              for (const auto& [k, v] : scenario_eval(name, dims).rows) d[py::str(k)] = v;
              return d;
          },
          py::arg("name"), py::arg("dims"));

    m.def("spearman", &spearman, py::arg("x"), py::arg("y"));
    m.def("run_experiment",
          [](const std::string& spec_json) {
              const auto spec = experiment_spec_from_json(spec_json);
              std::vector<ExperimentRecord> records;
              {
                  py::gil_scoped_release release;
                  records = run_experiment(spec);
              }
              py::list out;
              for (const auto& r : records) out.append(record_dict(r));
              return out;
          },
          py::arg("spec_json"));

    m.def("verify_opnorm",
          [](std::size_t trials, std::uint64_t seed) { return verify_opnorm(trials, seed).max_rel_deviation; },
          py::arg("trials"), py::arg("seed"), "Largest relative deviation between the FFT and dense norms.");
    m.def("verify_gradient",
          [](std::size_t networks, std::uint64_t seed) { return verify_gradient(networks, seed).max_rel_error; },
          py::arg("networks"), py::arg("seed"));

    m.def("cli",
          [](const std::vector<std::string>& args) {
              std::ostringstream out, err;
              const int code = cli_dispatch(args, out, err);
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"), "Run a CLI subcommand in-process; returns (exit code, stdout, stderr).");
}
